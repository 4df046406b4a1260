//! Sample-size lower-bound experiments: a pair of polynomials that are
//! within the noise level of each other except on a small corner box, and
//! the linear pair 0 vs mean(x) that high-dimensional samples cannot tell
//! apart.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::{AaBox, Distribution};
use crate::poly::{chebyshev_t, MultiPoly};
use crate::regression::{median_recover, RecoveryConfig};
use crate::sampling::{derive_seed, draw_points_with, label, rng_from_seed, Adversary, NoiseModel};
use crate::stats::Proportion;
use crate::SampleSet;

/// Points used to grid-check the pair invariants.
pub const PAIR_CHECK_POINTS: usize = 10_000;

const Z: f64 = 1.96;

#[derive(Clone, Debug, Serialize)]
pub struct AdversaryPair {
    pub f: MultiPoly,
    pub g: MultiPoly,
    /// The only region where the pair differs by more than `sigma_effective`.
    pub distinguishable_region: AaBox,
    pub sigma_effective: f64,
    pub c: f64,
    /// 4√C.
    pub alpha: f64,
    /// |f − g| at the all-ones corner.
    pub corner_gap: f64,
    /// Largest |f − g| seen outside the region during the grid check.
    pub outside_max: f64,
}

impl AdversaryPair {
    /// Uniform measure of the distinguishable region, (α/(2d²))^n.
    pub fn region_probability(&self) -> f64 {
        self.distinguishable_region.volume() / 2f64.powi(self.f.n() as i32)
    }
}

/// f(x) = ∏ T_d(x_i + α/d²) / T_d(1 + α/d²)^{n−1}, g ≡ 0, α = 4√C, σ = 1.
pub fn build_uniform_adversary(d: usize, n: usize, c: f64) -> Result<AdversaryPair> {
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be positive"));
    }
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::invalid("C", "approximation factor must exceed 1"));
    }
    let alpha = 4.0 * c.sqrt();
    let df = d as f64;
    if !(df * df > alpha / 2.0) {
        return Err(Error::invalid("d", format!("need d > sqrt(alpha/2) = {:.4}", (alpha / 2.0).sqrt())));
    }
    let shift = alpha / (df * df);
    let t = chebyshev_t(d);
    let peak = t.eval(1.0 + shift);
    let factor = t.compose_affine(1.0, shift);
    let mut factors = vec![factor.clone(); n];
    factors[0] = factor.scale(peak.powi(-(n as i32 - 1)));
    let f = MultiPoly::tensor_product(&factors)?;
    let g = MultiPoly::zeros(n, d);
    let region = AaBox::new(vec![1.0 - shift; n], vec![1.0; n])?;

    let corner_gap = f.eval(&vec![1.0; n])?.abs();
    if !(corner_gap > 2.0 * c) {
        return Err(Error::invalid(
            "d",
            format!("pair gap {corner_gap} at the corner does not exceed 2C = {}", 2.0 * c),
        ));
    }
    let outside_max = outside_gap(&f, &region, 1.0 - shift);
    if outside_max > 1.0 + 1e-9 {
        return Err(Error::Lp(format!("pair differs by {outside_max} outside the region")));
    }
    Ok(AdversaryPair {
        f,
        g,
        distinguishable_region: region,
        sigma_effective: 1.0,
        c,
        alpha,
        corner_gap,
        outside_max,
    })
}

/// max |f| over a tensor grid of about `PAIR_CHECK_POINTS` points outside
/// the box, with the box's lower face added to every axis grid.
fn outside_gap(f: &MultiPoly, region: &AaBox, face: f64) -> f64 {
    let n = f.n();
    let k = ((PAIR_CHECK_POINTS as f64).powf(1.0 / n as f64).ceil() as usize).max(2);
    let mut axis: Vec<f64> = (0..k).map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64).collect();
    axis.push(face);
    let g = axis.len();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..g.pow(n as u32) {
        for (a, &i) in idx.iter().enumerate() {
            x[a] = axis[i];
        }
        let on_face = x.iter().any(|&v| v <= face);
        if on_face || !region.contains(&x) {
            worst = worst.max(f.eval_unchecked(&x).abs());
        }
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < g {
                break;
            }
            idx[a] = 0;
        }
    }
    worst
}

/// ⌊(1/3)(2d²/α)^n⌋ − 1, the largest sample count with the avoidance
/// probability above 2/3 by the union bound.
pub fn avoidance_sample_count(d: usize, n: usize, c: f64) -> usize {
    let alpha = 4.0 * c.sqrt();
    let df = d as f64;
    let base = ((2.0 * df * df / alpha).powi(n as i32) / 3.0).floor();
    (base as usize).saturating_sub(1)
}

pub type Estimator<'a> = dyn Fn(&SampleSet) -> MultiPoly + Sync + 'a;

/// Median recovery with default settings; the zero polynomial if it fails.
pub fn default_estimator(d: usize, n: usize) -> impl Fn(&SampleSet) -> MultiPoly + Sync {
    move |s: &SampleSet| {
        if s.is_empty() {
            return MultiPoly::zeros(n, d);
        }
        let cfg = RecoveryConfig::new(d, n);
        median_recover(s, &cfg).map(|r| r.p_hat).unwrap_or_else(|_| MultiPoly::zeros(n, d))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IndistinguishabilityReport {
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    /// Trials where no sample landed in the distinguishable region.
    pub avoided: Proportion,
    /// 1 − M·(α/(2d²))^n.
    pub avoidance_bound: f64,
    /// Trials where ‖p̂ − p‖∞ > C·σ.
    pub failure: Proportion,
}

/// Each trial picks p ∈ {f, g} and p′ ∈ {f, g} independently and uniformly,
/// draws `samples` uniform points, labels them by p inside the
/// distinguishable region and by p′ elsewhere, and scores the estimator
/// against p.
pub fn run_indistinguishability_experiment(
    pair: &AdversaryPair,
    samples: usize,
    trials: usize,
    seed: u64,
    estimator: &Estimator<'_>,
) -> Result<IndistinguishabilityReport> {
    let n = pair.f.n();
    let tol = pair.c * pair.sigma_effective;
    let outcomes: Vec<Result<(bool, bool)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let truth = if rng.gen_bool(0.5) { &pair.f } else { &pair.g };
            let decoy = if rng.gen_bool(0.5) { &pair.f } else { &pair.g };
            let pts = draw_points_with(Distribution::Uniform, samples, n, &mut rng);
            let avoided = pts.iter().all(|x| !pair.distinguishable_region.contains(x));
            let model = NoiseModel::new(pair.sigma_effective, 0.0).with_adversary(Adversary::PairIndistinguishable {
                decoy: decoy.clone(),
                reveal: pair.distinguishable_region.clone(),
            });
            let s = label(pts, truth, &model, rng.gen())?;
            let p_hat = estimator(&s);
            let dd = truth.degree().max(p_hat.degree());
            let err = truth.with_degree(dd).and_then(|t| t.sub(&p_hat.with_degree(dd)?));
            let failed = match err {
                Ok(e) => e.sup_norm(crate::regression::ERROR_RESOLUTION) > tol,
                Err(_) => true,
            };
            Ok((avoided, failed))
        })
        .collect();
    let mut avoided = 0;
    let mut failed = 0;
    for o in outcomes {
        let (a, f) = o?;
        avoided += a as usize;
        failed += f as usize;
    }
    Ok(IndistinguishabilityReport {
        samples,
        trials,
        seed,
        avoided: Proportion::wilson(avoided, trials, Z),
        avoidance_bound: 1.0 - samples as f64 * pair.region_probability(),
        failure: Proportion::wilson(failed, trials, Z),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearLbReport {
    pub n: usize,
    pub sigma: f64,
    pub c: f64,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    /// Trials where every sample had |mean(x)| ≤ σ.
    pub all_bad: Proportion,
    /// 1 − M·e^{−nσ²/2}.
    pub hoeffding_bound: f64,
    /// Whether M < e^{nσ²/2}/3, the sample range the failure argument covers.
    pub premise_holds: bool,
    /// Failure rate of the consistency estimator (see
    /// [`run_linear_lb_experiment`]).
    pub failure: Proportion,
}

/// Each trial picks p ∈ {0, mean(x)} and draws `samples` points from a
/// zero-mean product distribution. Bad samples (|mean(x)| ≤ σ) are labelled
/// by an independently chosen p′, the rest by p. The estimator returns the
/// first candidate within σ of every label, preferring 0, and fails when it
/// picks the wrong one.
pub fn run_linear_lb_experiment(
    n: usize,
    sigma: f64,
    c: f64,
    samples: usize,
    trials: usize,
    dist: Distribution,
    seed: u64,
) -> Result<LinearLbReport> {
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be positive"));
    }
    if !(c > 1.0) {
        return Err(Error::invalid("C", "approximation factor must exceed 1"));
    }
    if !(sigma > 0.0 && sigma < 1.0 / (2.0 * c)) {
        return Err(Error::invalid("sigma", "need 0 < sigma < 1/(2C)"));
    }
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let truth_is_h = rng.gen_bool(0.5);
            let decoy_is_h = rng.gen_bool(0.5);
            let pts = draw_points_with(dist, samples, n, &mut rng);
            let mut all_bad = true;
            let mut zero_fits = true;
            for x in pts.iter() {
                let h = x.iter().sum::<f64>() / n as f64;
                let bad = h.abs() <= sigma;
                all_bad &= bad;
                let uses_h = if bad { decoy_is_h } else { truth_is_h };
                let y = if uses_h { h } else { 0.0 };
                zero_fits &= y.abs() <= sigma;
            }
            // zero is chosen whenever it is consistent; otherwise h
            (all_bad, zero_fits == truth_is_h)
        })
        .collect();
    let bad = outcomes.iter().filter(|o| o.0).count();
    let failed = outcomes.iter().filter(|o| o.1).count();
    let exponent = n as f64 * sigma * sigma / 2.0;
    Ok(LinearLbReport {
        n,
        sigma,
        c,
        samples,
        trials,
        seed,
        all_bad: Proportion::wilson(bad, trials, Z),
        hoeffding_bound: 1.0 - samples as f64 * (-exponent).exp(),
        premise_holds: (samples as f64) < exponent.exp() / 3.0,
        failure: Proportion::wilson(failed, trials, Z),
    })
}

/// Nodes b_j = −1 + 2j/m, j = 0..=m.
pub fn node_lattice(m: usize) -> Vec<f64> {
    (0..=m).map(|j| -1.0 + 2.0 * j as f64 / m as f64).collect()
}

/// Index of the lattice node closest to `x` in ℓ1 (ties go to the lower
/// node on each axis).
pub fn closest_node(x: &[f64], m: usize) -> Vec<usize> {
    x.iter()
        .map(|&v| {
            let t = (v + 1.0) * m as f64 / 2.0;
            let lo = t.floor().clamp(0.0, m as f64);
            let j = if t - lo > 0.5 { lo + 1.0 } else { lo };
            (j as usize).min(m)
        })
        .collect()
}

/// CSV with header `M,failure_rate,ci_low,ci_high`.
pub fn write_failure_csv<W: Write>(rows: &[(usize, Proportion)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["M", "failure_rate", "ci_low", "ci_high"])?;
    for (m, p) in rows {
        wtr.write_record([m.to_string(), format!("{:?}", p.rate), format!("{:?}", p.ci_low), format!("{:?}", p.ci_high)])?;
    }
    wtr.flush()?;
    Ok(())
}
