//! Median-based recovery.
//!
//! One refinement step bins samples on a Chebyshev grid, takes the lower
//! median of the residuals `y − p̂(x)` in every nonempty cell, fits those
//! medians at the cell centres with a minimax polynomial `r`, and returns
//! `p̂ + r`. Repeating this contracts the error geometrically down to about
//! `2σ`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{linf_fit, weighted_l1_fit, LpStats, WeightedGroup};
use crate::partition::{alpha_for_rho, ChebPartition};
use crate::poly::MultiPoly;
use crate::sampling::{bit_quantum, round_bits, Points, SampleSet};

/// Per-axis resolution used for sup-norm error traces.
pub const ERROR_RESOLUTION: usize = 65;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Plain,
    WithL1,
    FinitePrecision { bits: u32 },
}

fn default_eps() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    0.01
}
fn default_c_grid() -> f64 {
    2.0
}
fn default_max_iters() -> usize {
    200
}
fn default_cell_budget() -> usize {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub d: usize,
    pub n: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub rho: f64,
    /// Inlier bound, when known; only used to validate the finite-precision
    /// variant.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub m_override: Option<usize>,
    #[serde(default = "default_c_grid")]
    pub c_grid: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Largest m^n the ℓ1 variant may use before falling back to `m_override`.
    #[serde(default = "default_cell_budget")]
    pub cell_budget: usize,
    /// Abort instead of skipping when a cell has no samples.
    #[serde(default)]
    pub strict_empty: bool,
    #[serde(default)]
    pub variant: Variant,
}

impl RecoveryConfig {
    pub fn new(d: usize, n: usize) -> Self {
        Self {
            d,
            n,
            eps: default_eps(),
            eta: default_eta(),
            rho: 0.0,
            sigma: None,
            m_override: None,
            c_grid: default_c_grid(),
            max_iters: default_max_iters(),
            cell_budget: default_cell_budget(),
            strict_empty: false,
            variant: Variant::Plain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "dimension must be positive"));
        }
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(Error::invalid("eps", "must lie in (0, 1/2]"));
        }
        if self.variant == Variant::Plain && !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", "must be positive"));
        }
        if !(0.0..0.5).contains(&self.rho) {
            return Err(Error::invalid("rho", "outlier rate must lie in [0, 1/2)"));
        }
        if !(self.c_grid > 0.0 && self.c_grid.is_finite()) {
            return Err(Error::invalid("c_grid", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if self.m_override == Some(0) {
            return Err(Error::invalid("m", "need at least one cell per axis"));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0) {
                return Err(Error::invalid("sigma", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// ε after the rescaling used by the matching guarantee.
    pub fn internal_eps(&self) -> f64 {
        match self.variant {
            Variant::WithL1 => self.eps / 10.0,
            _ => self.eps / 7.0,
        }
    }

    /// Grid size for median recovery: `m_override` or ⌈c·d·n/ε_int⌉.
    pub fn grid_size(&self) -> usize {
        self.m_override.unwrap_or_else(|| {
            let m = (self.c_grid * (self.d * self.n) as f64 / (self.eps / 7.0)).ceil();
            (m as usize).max(1)
        })
    }

    /// Grid size for the ℓ1 variant, ⌈(c·d)^{2n+1}/ε_int⌉, falling back to
    /// `m_override` when m^n would exceed the cell budget.
    pub fn l1_grid_size(&self) -> Result<(usize, Option<String>)> {
        let eps_int = self.eps / 10.0;
        let base = (self.c_grid * self.d.max(1) as f64).powi(2 * self.n as i32 + 1) / eps_int;
        let m = base.ceil().max(1.0);
        let cells = m.powi(self.n as i32);
        if cells <= self.cell_budget as f64 {
            return Ok((m as usize, None));
        }
        match self.m_override {
            Some(mo) => Ok((
                mo,
                Some(format!(
                    "l1 grid needs m = {m:.0} ({cells:.3e} cells), over the budget of {}; using m = {mo}",
                    self.cell_budget
                )),
            )),
            None => Err(Error::invalid(
                "m",
                format!("l1 grid needs m = {m:.0} ({cells:.3e} cells) which exceeds the cell budget; pass an explicit m"),
            )),
        }
    }

    /// ⌈log_{1/ε_int}((5 + 2V)/η)⌉ + 1.
    pub fn plain_iterations(&self, coeff_bound: f64, eta: f64) -> usize {
        let base = 1.0 / self.internal_eps();
        let ratio = (5.0 + 2.0 * coeff_bound) / eta;
        let steps = (ratio.ln() / base.ln()).ceil().max(0.0);
        if steps.is_finite() {
            steps as usize + 1
        } else {
            usize::MAX
        }
    }

    /// ⌈2n·log_{1/ε_int}(2√2·d) + log_{1/ε_int}(1/(1 − 2α))⌉, at least one.
    pub fn l1_iterations(&self) -> usize {
        let base = (10.0 / self.eps).ln();
        let alpha = alpha_for_rho(self.rho);
        let a = 2.0 * self.n as f64 * (2.0 * 2f64.sqrt() * self.d.max(1) as f64).ln() / base;
        let b = (1.0 / (1.0 - 2.0 * alpha)).ln() / base;
        ((a + b).ceil() as usize).max(1)
    }
}

/// M_C(m) = (1 − 2ρ)^{-2} m^n ln(m^n / δ).
pub fn chebyshev_sample_size(m: usize, n: usize, rho: f64, delta: f64) -> usize {
    let cells = (m as f64).powi(n as i32);
    ((cells * (cells / delta).ln()) / (1.0 - 2.0 * rho).powi(2)).ceil() as usize
}

/// M_U(m) = (1 − 2ρ)^{-2} m^{2n} ln(4 m^n / δ).
pub fn uniform_sample_size(m: usize, n: usize, rho: f64, delta: f64) -> usize {
    let cells = (m as f64).powi(n as i32);
    ((cells * cells * (4.0 * cells / delta).ln()) / (1.0 - 2.0 * rho).powi(2)).ceil() as usize
}

/// Samples grouped by flat cell id (counting sort).
#[derive(Clone, Debug)]
pub struct Binning {
    start: Vec<usize>,
    order: Vec<usize>,
}

impl Binning {
    pub fn new(part: &ChebPartition, points: &Points) -> Self {
        let cells = part.num_cells();
        let ids: Vec<usize> = points.iter().map(|x| part.flat_cell_of(x)).collect();
        let mut start = vec![0usize; cells + 1];
        for &c in &ids {
            start[c + 1] += 1;
        }
        for c in 0..cells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; ids.len()];
        for (i, &c) in ids.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        Self { start, order }
    }

    pub fn num_cells(&self) -> usize {
        self.start.len() - 1
    }

    /// Sample indices in cell `c`.
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.order[self.start[c]..self.start[c + 1]]
    }

    pub fn empty_cells(&self) -> usize {
        (0..self.num_cells()).filter(|&c| self.start[c] == self.start[c + 1]).count()
    }
}

/// What one refinement step saw; handed to observers.
pub struct RefineView<'a> {
    /// 1-based refinement count.
    pub iteration: usize,
    pub partition: &'a ChebPartition,
    pub binning: &'a Binning,
    /// Estimate the residuals were taken against.
    pub p_before: &'a MultiPoly,
    /// Per-cell lower median of residuals, `None` for empty cells.
    pub medians: &'a [Option<f64>],
}

struct Refiner<'a> {
    samples: &'a SampleSet,
    part: &'a ChebPartition,
    binning: Binning,
    centers: Vec<Vec<f64>>,
    d: usize,
    strict: bool,
}

struct StepResult {
    poly: MultiPoly,
    medians: Vec<Option<f64>>,
    skipped: usize,
    lp_rows: usize,
    lp_cols: usize,
    lp_iterations: usize,
}

impl<'a> Refiner<'a> {
    fn new(samples: &'a SampleSet, part: &'a ChebPartition, d: usize, strict: bool) -> Result<Self> {
        if samples.dim() != part.n() {
            return Err(Error::DimensionMismatch {
                expected: part.n(),
                got: samples.dim(),
            });
        }
        let binning = Binning::new(part, &samples.points);
        let centers = (0..part.num_cells()).map(|c| part.cell_center(&part.index_of_flat(c))).collect();
        Ok(Self {
            samples,
            part,
            binning,
            centers,
            d,
            strict,
        })
    }

    fn step(&self, p_hat: &MultiPoly) -> Result<StepResult> {
        let s = self.samples;
        let resid: Vec<f64> = s
            .points
            .iter()
            .zip(&s.labels)
            .map(|(x, y)| y - p_hat.eval_unchecked(x))
            .collect();
        let cells = self.binning.num_cells();
        let mut medians = vec![None; cells];
        let mut scratch = Vec::new();
        let mut reps = Vec::new();
        let mut targets = Vec::new();
        let mut skipped = 0;
        for (c, med) in medians.iter_mut().enumerate() {
            let idx = self.binning.cell(c);
            if idx.is_empty() {
                if self.strict {
                    return Err(Error::EmptyCell {
                        cell: self.part.index_of_flat(c).0,
                    });
                }
                skipped += 1;
                continue;
            }
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| resid[i]));
            let k = (scratch.len() - 1) / 2;
            let (_, v, _) = scratch.select_nth_unstable_by(k, f64::total_cmp);
            *med = Some(*v);
            reps.extend_from_slice(&self.centers[c]);
            targets.push(*v);
        }
        if targets.is_empty() {
            return Err(Error::AllCellsEmpty);
        }
        if skipped > 0 {
            debug!("refine: skipped {skipped} empty cells out of {cells}");
        }
        let pts = Points::new(self.part.n(), reps)?;
        let fit = linf_fit(&pts, &targets, self.d)?;
        let poly = p_hat.add(&fit.poly)?;
        Ok(StepResult {
            poly,
            medians,
            skipped,
            lp_rows: fit.rows,
            lp_cols: fit.cols,
            lp_iterations: fit.iterations,
        })
    }
}

/// One refinement step (fit degree taken from `p_hat`).
pub fn refine(s: &SampleSet, part: &ChebPartition, p_hat: &MultiPoly) -> Result<MultiPoly> {
    if p_hat.n() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: p_hat.n(),
        });
    }
    let r = Refiner::new(s, part, p_hat.degree(), false)?;
    Ok(r.step(p_hat)?.poly)
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub p_hat: MultiPoly,
    pub variant: Variant,
    pub m: usize,
    pub eps_internal: f64,
    pub eta: f64,
    /// Refinement steps actually run.
    pub iterations: usize,
    /// Steps the iteration formula asked for.
    pub planned_iterations: usize,
    pub cap_hit: bool,
    /// Σ|c_α| of the first estimate (median recovery only).
    pub coeff_bound: Option<f64>,
    /// Sup-norm error against the truth: entry t is the error after t steps
    /// (entry 0 is the starting estimate).
    pub errors: Option<Vec<f64>>,
    pub samples_used: usize,
    pub samples_dropped: usize,
    pub cells: usize,
    /// Largest number of empty cells skipped in any step.
    pub cells_skipped: usize,
    pub l1_objective: Option<f64>,
    pub lp: LpStats,
    pub warnings: Vec<String>,
    pub elapsed_ms: f64,
}

impl FitReport {
    pub fn final_error(&self) -> Option<f64> {
        self.errors.as_ref().and_then(|e| e.last().copied())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with header `iteration,sup_error`.
    pub fn write_error_trace<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["iteration", "sup_error"])?;
        if let Some(errs) = &self.errors {
            for (t, e) in errs.iter().enumerate() {
                wtr.write_record([t.to_string(), format!("{e:?}")])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

enum Plan {
    /// Run one step, derive the count from Σ|c_α| of its output.
    FromFirst { eta: f64 },
    Fixed(usize),
}

type Observer<'o> = Option<&'o mut dyn FnMut(&RefineView<'_>)>;

struct Run<'a> {
    cfg: &'a RecoveryConfig,
    truth: Option<&'a MultiPoly>,
    report: FitReport,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RecoveryConfig, truth: Option<&'a MultiPoly>, m: usize, eta: f64) -> Self {
        Self {
            cfg,
            truth,
            report: FitReport {
                p_hat: MultiPoly::zeros(cfg.n, cfg.d),
                variant: cfg.variant,
                m,
                eps_internal: cfg.internal_eps(),
                eta,
                iterations: 0,
                planned_iterations: 0,
                cap_hit: false,
                coeff_bound: None,
                errors: truth.map(|_| Vec::new()),
                samples_used: 0,
                samples_dropped: 0,
                cells: 0,
                cells_skipped: 0,
                l1_objective: None,
                lp: LpStats::default(),
                warnings: Vec::new(),
                elapsed_ms: 0.0,
            },
        }
    }

    fn record_error(&mut self, p_hat: &MultiPoly) -> Result<()> {
        if let (Some(t), Some(errs)) = (self.truth, self.report.errors.as_mut()) {
            errs.push(t.sub(p_hat)?.sup_norm(ERROR_RESOLUTION));
        }
        Ok(())
    }

    fn iterate(
        &mut self,
        samples: &SampleSet,
        part: &ChebPartition,
        start: MultiPoly,
        plan: Plan,
        mut observer: Observer<'_>,
    ) -> Result<()> {
        let refiner = Refiner::new(samples, part, self.cfg.d, self.cfg.strict_empty)?;
        self.report.samples_used = samples.len();
        self.report.cells = part.num_cells();
        let mut p_hat = start;
        self.record_error(&p_hat)?;
        let mut planned = match plan {
            Plan::Fixed(k) => k,
            Plan::FromFirst { .. } => 1,
        };
        let mut t = 0;
        while t < planned.min(self.cfg.max_iters) {
            let step = refiner.step(&p_hat)?;
            t += 1;
            if let Some(obs) = observer.as_mut() {
                obs(&RefineView {
                    iteration: t,
                    partition: part,
                    binning: &refiner.binning,
                    p_before: &p_hat,
                    medians: &step.medians,
                });
            }
            self.report.lp.record(step.lp_rows, step.lp_cols, step.lp_iterations);
            self.report.cells_skipped = self.report.cells_skipped.max(step.skipped);
            p_hat = step.poly;
            self.record_error(&p_hat)?;
            if t == 1 {
                if let Plan::FromFirst { eta } = plan {
                    let v = p_hat.coeff_abs_sum();
                    self.report.coeff_bound = Some(v);
                    planned = self.cfg.plain_iterations(v, eta);
                }
            }
        }
        self.report.iterations = t;
        self.report.planned_iterations = planned;
        if planned > self.cfg.max_iters {
            self.report.cap_hit = true;
            let msg = format!("iteration cap {} hit; formula asked for {planned}", self.cfg.max_iters);
            warn!("{msg}");
            self.report.warnings.push(msg);
        }
        if self.report.cells_skipped > 0 {
            let msg = format!("up to {} empty cells skipped per step", self.report.cells_skipped);
            info!("{msg}");
            self.report.warnings.push(msg);
        }
        self.report.p_hat = p_hat;
        Ok(())
    }
}

fn check_samples(s: &SampleSet, cfg: &RecoveryConfig) -> Result<()> {
    cfg.validate()?;
    if s.dim() != cfg.n {
        return Err(Error::DimensionMismatch {
            expected: cfg.n,
            got: s.dim(),
        });
    }
    if s.is_empty() {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    Ok(())
}

/// Median-based recovery with the iteration count derived from the first
/// estimate. Uses `s.truth` for the error trace when present.
pub fn median_recover(s: &SampleSet, cfg: &RecoveryConfig) -> Result<FitReport> {
    median_recover_observed(s, cfg, s.truth.as_ref(), None)
}

pub fn median_recover_observed(
    s: &SampleSet,
    cfg: &RecoveryConfig,
    truth: Option<&MultiPoly>,
    observer: Observer<'_>,
) -> Result<FitReport> {
    check_samples(s, cfg)?;
    let clock = Instant::now();
    let m = cfg.grid_size();
    let part = ChebPartition::build(m, cfg.n)?;
    let mut run = Run::new(cfg, truth, m, cfg.eta);
    run.iterate(s, &part, MultiPoly::zeros(cfg.n, cfg.d), Plan::FromFirst { eta: cfg.eta }, observer)?;
    run.report.elapsed_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(run.report)
}

/// ℓ1-bootstrapped recovery: a cell-weighted least-absolute-deviation fit
/// followed by a fixed number of refinement steps that does not depend on
/// the size of the target.
pub fn median_recover_with_l1(s: &SampleSet, cfg: &RecoveryConfig) -> Result<FitReport> {
    median_recover_with_l1_observed(s, cfg, s.truth.as_ref(), None)
}

pub fn median_recover_with_l1_observed(
    s: &SampleSet,
    cfg: &RecoveryConfig,
    truth: Option<&MultiPoly>,
    observer: Observer<'_>,
) -> Result<FitReport> {
    check_samples(s, cfg)?;
    let clock = Instant::now();
    let (m, note) = cfg.l1_grid_size()?;
    let part = ChebPartition::build(m, cfg.n)?;
    let binning = Binning::new(&part, &s.points);
    let mut groups = Vec::with_capacity(part.num_cells());
    for c in 0..part.num_cells() {
        let idx = binning.cell(c);
        let j = part.index_of_flat(c);
        if idx.is_empty() {
            return Err(Error::EmptyCell { cell: j.0 });
        }
        let mut pts = Points::empty(cfg.n);
        for &i in idx {
            pts.push(s.points.get(i));
        }
        groups.push(WeightedGroup {
            points: pts,
            labels: idx.iter().map(|&i| s.labels[i]).collect(),
            weight: part.cell_box(&j).volume() / idx.len() as f64,
        });
    }
    let l1 = weighted_l1_fit(&groups, cfg.n, cfg.d)?;
    drop(groups);

    let mut run = Run::new(cfg, truth, m, 0.0);
    if let Some(msg) = note {
        warn!("{msg}");
        run.report.warnings.push(msg);
    }
    run.report.l1_objective = Some(l1.objective);
    run.report.lp.record(run.cfg.n, s.len(), l1.iterations);
    run.iterate(s, &part, l1.poly, Plan::Fixed(cfg.l1_iterations()), observer)?;
    run.report.elapsed_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(run.report)
}

/// Indices of points with every coordinate more than 2^{-N} from the
/// nearest breakpoint of `part`.
pub fn sift_indices(points: &Points, part: &ChebPartition, bits: u32) -> Result<Vec<usize>> {
    let q = bit_quantum(bits);
    let w = part.min_width();
    if !(w > 4.0 * q) {
        return Err(Error::invalid(
            "bits",
            format!(
                "cell width {w:e} of the m = {} grid is not above 4·2^-{bits}; use a coarser grid or more bits",
                part.m()
            ),
        ));
    }
    Ok(points
        .iter()
        .enumerate()
        .filter(|(_, x)| x.iter().all(|&v| part.distance_to_breakpoint(v) > q))
        .map(|(i, _)| i)
        .collect())
}

pub fn sift_finite_precision(s: &SampleSet, part: &ChebPartition, bits: u32) -> Result<SampleSet> {
    let keep = sift_indices(&s.points, part, bits)?;
    let mut flags = vec![false; s.len()];
    for i in keep {
        flags[i] = true;
    }
    Ok(s.filter(|i| flags[i]))
}

/// Smallest ε the finite-precision variant accepts: c₀·d·n·2^{-N/2} with
/// c₀ = 6c/π.
pub fn min_eps_for_bits(cfg: &RecoveryConfig, bits: u32) -> f64 {
    let c0 = 6.0 * cfg.c_grid / PI;
    c0 * (cfg.d * cfg.n) as f64 * bit_quantum(bits).sqrt()
}

/// Rounds to N bits, sifts out samples whose cell is ambiguous, then runs
/// median recovery with η = ε·2^{-N}.
pub fn finite_precision_recover(s: &SampleSet, cfg: &RecoveryConfig) -> Result<FitReport> {
    let Variant::FinitePrecision { bits } = cfg.variant else {
        return Err(Error::invalid("variant", "finite-precision recovery needs a bit count"));
    };
    check_samples(s, cfg)?;
    if bits == 0 {
        return Err(Error::invalid("bits", "need at least one bit"));
    }
    let q = bit_quantum(bits);
    if let Some(sigma) = cfg.sigma {
        if sigma < q {
            return Err(Error::invalid("sigma", format!("must be at least 2^-{bits}")));
        }
    }
    let floor = min_eps_for_bits(cfg, bits);
    if cfg.eps < floor {
        return Err(Error::invalid(
            "eps",
            format!("{} bits only support eps ≥ {floor:e}", bits),
        ));
    }
    let clock = Instant::now();
    let m = cfg.grid_size();
    let part = ChebPartition::build(m, cfg.n)?;
    let rounded = round_bits(s, bits)?;
    let sifted = sift_finite_precision(&rounded, &part, bits)?;
    if sifted.is_empty() {
        return Err(Error::AllCellsEmpty);
    }
    let eta = cfg.eps * q;
    let mut run = Run::new(cfg, s.truth.as_ref(), m, eta);
    run.iterate(&sifted, &part, MultiPoly::zeros(cfg.n, cfg.d), Plan::FromFirst { eta }, None)?;
    run.report.samples_dropped = s.len() - sifted.len();
    run.report.elapsed_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(run.report)
}

/// Dispatches on `cfg.variant`.
pub fn recover(s: &SampleSet, cfg: &RecoveryConfig) -> Result<FitReport> {
    match cfg.variant {
        Variant::Plain => median_recover(s, cfg),
        Variant::WithL1 => median_recover_with_l1(s, cfg),
        Variant::FinitePrecision { .. } => finite_precision_recover(s, cfg),
    }
}

/// sup |p − r| where r is constant on each cell, equal to p at the centre.
/// Each cell is scanned on a `per_axis`^n sub-grid that includes its corners.
pub fn piecewise_constant_error(p: &MultiPoly, part: &ChebPartition, per_axis: usize) -> f64 {
    let n = p.n();
    let k = per_axis.max(2);
    let mut worst: f64 = 0.0;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    for c in 0..part.num_cells() {
        let b = part.cell_box(&part.index_of_flat(c));
        let centre = p.eval_unchecked(&b.center());
        idx.iter_mut().for_each(|v| *v = 0);
        loop {
            for a in 0..n {
                let t = idx[a] as f64 / (k - 1) as f64;
                x[a] = b.lo[a] + t * (b.hi[a] - b.lo[a]);
            }
            worst = worst.max((p.eval_unchecked(&x) - centre).abs());
            let mut a = n;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < k {
                    break;
                }
                idx[a] = 0;
                if a == 0 {
                    a = usize::MAX;
                    break;
                }
            }
            if a == usize::MAX {
                break;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{CellIndex, Distribution};
    use crate::sampling::{draw_points, label, rng_from_seed, Adversary, NoiseModel};
    use rand::Rng;

    fn sample_set(pts: Points, ys: Vec<f64>) -> SampleSet {
        SampleSet::new(pts, ys).unwrap()
    }

    #[test]
    fn sample_size_formulas() {
        // (1/0.36)·168²·ln(168²/0.1)
        let expect = (168f64 * 168.0 * (168f64 * 168.0 / 0.1).ln() / 0.36).ceil() as usize;
        assert_eq!(chebyshev_sample_size(168, 2, 0.2, 0.1), expect);
        assert_eq!(uniform_sample_size(2, 1, 0.0, 1.0), (4.0 * 8f64.ln()).ceil() as usize);
    }

    #[test]
    fn grid_and_iteration_formulas() {
        let cfg = RecoveryConfig::new(3, 2);
        assert_eq!(cfg.grid_size(), 168);
        // log_14((5 + 2·1)/0.01) = 2.48 → 3, plus one
        assert_eq!(cfg.plain_iterations(1.0, 0.01), 4);
        assert_eq!(cfg.plain_iterations(0.0, 100.0), 1);
        let mut l1 = RecoveryConfig::new(1, 1);
        l1.variant = Variant::WithL1;
        assert_eq!(l1.l1_grid_size().unwrap().0, 160);
        // 2·log_20(2√2) = 0.69
        assert_eq!(l1.l1_iterations(), 1);
        l1.d = 3;
        l1.rho = 0.2;
        // 2·log_20(6√2) + log_20(1/0.3) = 1.44 + 0.40
        assert_eq!(l1.l1_iterations(), 2);
        let mut big = RecoveryConfig::new(3, 2);
        big.variant = Variant::WithL1;
        assert!(big.l1_grid_size().is_err());
        big.m_override = Some(20);
        let (m, note) = big.l1_grid_size().unwrap();
        assert_eq!(m, 20);
        assert!(note.is_some());
    }

    #[test]
    fn config_validation() {
        let mut cfg = RecoveryConfig::new(2, 1);
        cfg.eps = 0.6;
        assert!(cfg.validate().is_err());
        cfg.eps = 0.5;
        cfg.eta = 0.0;
        assert!(cfg.validate().is_err());
        cfg.eta = 1e-3;
        cfg.rho = 0.5;
        assert!(cfg.validate().is_err());
        let json = r#"{"d":2,"n":1}"#;
        let parsed: RecoveryConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed, RecoveryConfig::new(2, 1));
    }

    #[test]
    fn binning_partitions_indices() {
        let part = ChebPartition::build(5, 2).unwrap();
        let pts = draw_points(Distribution::Uniform, 500, 2, 1);
        let b = Binning::new(&part, &pts);
        let mut seen = vec![false; 500];
        for c in 0..b.num_cells() {
            for &i in b.cell(c) {
                assert_eq!(part.flat_cell_of(pts.get(i)), c);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn refine_noiseless_contracts_to_zero() {
        let mut rng = rng_from_seed(2);
        let p = MultiPoly::random(1, 3, &mut rng);
        let part = ChebPartition::build(60, 1).unwrap();
        let mut xs = Vec::new();
        for j in 1..=60 {
            let (a, b) = part.axis_interval(j);
            xs.push(rng.gen_range(a..b));
        }
        let ys = xs.iter().map(|x| p.eval_unchecked(&[*x])).collect();
        let s = sample_set(Points::new(1, xs).unwrap(), ys);
        let mut q = MultiPoly::zeros(1, 3);
        let mut last = f64::INFINITY;
        for _ in 0..12 {
            q = refine(&s, &part, &q).unwrap();
            let err = p.sub(&q).unwrap().sup_norm(101);
            assert!(err < last || err < 1e-12, "err={err} last={last}");
            last = err;
        }
        assert!(last < 1e-8, "err={last}");
    }

    #[test]
    fn refine_from_truth_stays_within_noise() {
        let mut rng = rng_from_seed(7);
        let p = MultiPoly::random(2, 2, &mut rng);
        let sigma = 0.05;
        let pts = draw_points(Distribution::Chebyshev, 4000, 2, 8);
        let s = label(pts, &p, &NoiseModel::new(sigma, 0.0), 9).unwrap();
        let part = ChebPartition::build(8, 2).unwrap();
        let next = refine(&s, &part, &p).unwrap();
        let eps = 0.5;
        assert!(p.sub(&next).unwrap().sup_norm(65) <= (2.0 + eps) * sigma);
    }

    #[test]
    fn median_rejects_single_outlier() {
        let part = ChebPartition::build(1, 1).unwrap();
        let s = sample_set(Points::new(1, vec![-0.5, 0.0, 0.5]).unwrap(), vec![0.0, 10.0, 0.0]);
        let r = refine(&s, &part, &MultiPoly::zeros(1, 0)).unwrap();
        assert_eq!(r.coeffs()[0], 0.0);
    }

    #[test]
    fn lower_median_for_even_counts() {
        let part = ChebPartition::build(1, 1).unwrap();
        let s = sample_set(Points::new(1, vec![-0.5, 0.0, 0.5, 0.7]).unwrap(), vec![4.0, 1.0, 3.0, 2.0]);
        let r = refine(&s, &part, &MultiPoly::zeros(1, 0)).unwrap();
        assert_eq!(r.coeffs()[0], 2.0);
    }

    #[test]
    fn all_cells_empty_is_an_error() {
        let part = ChebPartition::build(2, 1).unwrap();
        let s = sample_set(Points::empty(1), vec![]);
        assert!(matches!(refine(&s, &part, &MultiPoly::zeros(1, 1)), Err(Error::AllCellsEmpty)));
    }

    #[test]
    fn strict_mode_rejects_empty_cells() {
        let s = sample_set(Points::new(1, vec![0.9]).unwrap(), vec![1.0]);
        let mut cfg = RecoveryConfig::new(1, 1);
        cfg.m_override = Some(4);
        let report = median_recover(&s, &cfg).unwrap();
        assert_eq!(report.cells_skipped, 3);
        cfg.strict_empty = true;
        assert!(matches!(median_recover(&s, &cfg), Err(Error::EmptyCell { .. })));
    }

    #[test]
    fn noiseless_recovery_reaches_eta() {
        let mut rng = rng_from_seed(31);
        let p = MultiPoly::random(1, 3, &mut rng);
        let mut cfg = RecoveryConfig::new(3, 1);
        cfg.eta = 1e-8;
        let m = cfg.grid_size();
        let pts = draw_points(Distribution::Chebyshev, chebyshev_sample_size(m, 1, 0.0, 0.1), 1, 4);
        let s = label(pts, &p, &NoiseModel::new(0.0, 0.0), 5).unwrap();
        let rep = median_recover(&s, &cfg).unwrap();
        assert!(rep.final_error().unwrap() <= cfg.eta, "{:?}", rep.errors);
        assert!(rep.iterations <= rep.planned_iterations);
    }

    #[test]
    fn pure_noise_target_zero() {
        let p = MultiPoly::zeros(1, 2);
        let sigma = 0.1;
        let cfg = RecoveryConfig::new(2, 1);
        let m = cfg.grid_size();
        let pts = draw_points(Distribution::Chebyshev, chebyshev_sample_size(m, 1, 0.0, 0.1), 1, 3);
        let s = label(pts, &p, &NoiseModel::new(sigma, 0.0), 4).unwrap();
        let rep = median_recover(&s, &cfg).unwrap();
        assert!(rep.p_hat.sup_norm(65) <= (2.0 + cfg.eps) * sigma + cfg.eta);
    }

    #[test]
    fn l1_variant_recovers_noiseless() {
        let mut rng = rng_from_seed(12);
        let p = MultiPoly::random(1, 1, &mut rng);
        let mut cfg = RecoveryConfig::new(1, 1);
        cfg.variant = Variant::WithL1;
        let (m, _) = cfg.l1_grid_size().unwrap();
        let pts = draw_points(Distribution::Chebyshev, chebyshev_sample_size(m, 1, 0.0, 0.1), 1, 13);
        let s = label(pts, &p, &NoiseModel::new(0.0, 0.0), 14).unwrap();
        let rep = median_recover_with_l1(&s, &cfg).unwrap();
        assert!(rep.final_error().unwrap() < 1e-6, "{:?}", rep.errors);
        assert!(rep.l1_objective.unwrap() < 1e-9);
    }

    #[test]
    fn l1_iteration_count_ignores_scale() {
        let mut rng = rng_from_seed(12);
        let p = MultiPoly::random(1, 1, &mut rng);
        let mut cfg = RecoveryConfig::new(1, 1);
        cfg.variant = Variant::WithL1;
        cfg.rho = 0.1;
        let (m, _) = cfg.l1_grid_size().unwrap();
        let count = chebyshev_sample_size(m, 1, 0.1, 0.1);
        let model = NoiseModel::new(0.05, 0.1);
        let a = label(draw_points(Distribution::Chebyshev, count, 1, 1), &p, &model, 2).unwrap();
        let big = p.scale(1e6);
        let b = label(draw_points(Distribution::Chebyshev, count, 1, 1), &big, &model, 2).unwrap();
        let ra = median_recover_with_l1(&a, &cfg).unwrap();
        let rb = median_recover_with_l1(&b, &cfg).unwrap();
        assert_eq!(ra.iterations, rb.iterations);
        assert_eq!(ra.planned_iterations, cfg.l1_iterations());
    }

    #[test]
    fn l1_variant_rejects_empty_cells() {
        let mut cfg = RecoveryConfig::new(1, 1);
        cfg.variant = Variant::WithL1;
        let s = sample_set(Points::new(1, vec![0.1, 0.2]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(median_recover_with_l1(&s, &cfg), Err(Error::EmptyCell { .. })));
    }

    #[test]
    fn sifting() {
        let part = ChebPartition::build(4, 1).unwrap();
        let pts = draw_points(Distribution::Uniform, 1000, 1, 3);
        let s = sample_set(pts, vec![0.0; 1000]);
        assert_eq!(sift_finite_precision(&s, &part, 2000).unwrap(), s);
        let on_edge = sample_set(Points::new(1, vec![0.0, 0.3, part.edges()[1]]).unwrap(), vec![1.0; 3]);
        let kept = sift_finite_precision(&on_edge, &part, 20).unwrap();
        assert_eq!(kept.points.as_flat(), &[0.3]);
        // width of the m = 4 grid is 0.29; 4·2^-6 = 0.0625 fits, 4·2^-2 does not
        assert!(sift_finite_precision(&s, &part, 6).is_ok());
        assert!(sift_finite_precision(&s, &part, 2).is_err());
    }

    #[test]
    fn sifted_cells_are_rounding_stable() {
        let bits = 12;
        let part = ChebPartition::build(16, 2).unwrap();
        let mut rng = rng_from_seed(1);
        let p = MultiPoly::random(2, 2, &mut rng);
        let pts = draw_points(Distribution::Chebyshev, 5000, 2, 6);
        let s = label(pts, &p, &NoiseModel::new(0.01, 0.1), 7).unwrap();
        let r = round_bits(&s, bits).unwrap();
        let keep = sift_indices(&r.points, &part, bits).unwrap();
        assert!(keep.len() > 4000);
        for i in keep {
            assert_eq!(part.flat_cell_of(r.points.get(i)), part.flat_cell_of(s.points.get(i)));
        }
    }

    #[test]
    fn sifting_keeps_half_on_moderate_grids() {
        let bits = 20;
        let m = (2f64.powf(bits as f64 / 2.0) / 8.0) as usize;
        let part = ChebPartition::build(m, 1).unwrap();
        let pts = draw_points(Distribution::Uniform, 10_000, 1, 17);
        let keep = sift_indices(&pts, &part, bits).unwrap();
        assert!(keep.len() >= 5000, "kept {}", keep.len());
    }

    #[test]
    fn finite_precision_guards() {
        let s = sample_set(Points::new(1, vec![0.1]).unwrap(), vec![0.0]);
        let mut cfg = RecoveryConfig::new(2, 1);
        cfg.variant = Variant::FinitePrecision { bits: 10 };
        cfg.sigma = Some(2f64.powi(-12));
        assert!(finite_precision_recover(&s, &cfg).is_err());
        cfg.sigma = Some(0.1);
        cfg.variant = Variant::FinitePrecision { bits: 4 };
        assert!(matches!(finite_precision_recover(&s, &cfg), Err(Error::InvalidParameter { name: "eps", .. })));
    }

    #[test]
    fn finite_precision_small_run() {
        let mut rng = rng_from_seed(40);
        let p = MultiPoly::random(1, 2, &mut rng);
        let sigma = 2f64.powi(-10);
        let mut cfg = RecoveryConfig::new(2, 1);
        cfg.variant = Variant::FinitePrecision { bits: 30 };
        cfg.sigma = Some(sigma);
        cfg.rho = 0.1;
        let m = cfg.grid_size();
        let pts = draw_points(Distribution::Chebyshev, chebyshev_sample_size(m, 1, 0.1, 0.1), 1, 41);
        let model = NoiseModel::new(sigma, 0.1).with_adversary(Adversary::const_blowup(1e3));
        let s = label(pts, &p, &model, 42).unwrap();
        let rep = finite_precision_recover(&s, &cfg).unwrap();
        assert!(rep.final_error().unwrap() <= 3.0 * sigma, "{:?}", rep.errors);
    }

    #[test]
    fn observer_sees_every_step() {
        let mut rng = rng_from_seed(50);
        let p = MultiPoly::random(1, 2, &mut rng);
        let cfg = RecoveryConfig::new(2, 1);
        let m = cfg.grid_size();
        let pts = draw_points(Distribution::Chebyshev, chebyshev_sample_size(m, 1, 0.2, 0.1), 1, 51);
        let model = NoiseModel::new(0.1, 0.2).with_adversary(Adversary::const_blowup(1e3));
        let s = label(pts, &p, &model, 52).unwrap();
        let mut seen = 0;
        let mut obs = |v: &RefineView<'_>| {
            seen += 1;
            assert_eq!(v.iteration, seen);
            assert_eq!(v.medians.len(), v.partition.num_cells());
        };
        let rep = median_recover_observed(&s, &cfg, Some(&p), Some(&mut obs)).unwrap();
        assert_eq!(seen, rep.iterations);
        assert_eq!(rep.errors.as_ref().unwrap().len(), rep.iterations + 1);
        let mut csv = Vec::new();
        rep.write_error_trace(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iteration,sup_error\n0,"));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(json["p_hat"]["basis"], "chebyshev");
    }

    #[test]
    fn piecewise_constant_error_examples() {
        let part = ChebPartition::build(3, 1).unwrap();
        assert_eq!(piecewise_constant_error(&MultiPoly::constant(1, 2, 4.0), &part, 5), 0.0);
        // p(x) = x: worst gap is the largest half-width
        let p = MultiPoly::new(1, 1, vec![0.0, 1.0]).unwrap();
        let half = (1..=3).map(|j| part.axis_width(j) / 2.0).fold(0.0, f64::max);
        assert!((piecewise_constant_error(&p, &part, 5) - half).abs() < 1e-15);
        let _ = CellIndex(vec![1]);
    }
}
