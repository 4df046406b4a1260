//! Sample generation: point draws under the uniform and Chebyshev measures,
//! noisy labelling with pluggable outlier adversaries, and N-bit rounding.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{AaBox, Distribution};
use crate::poly::MultiPoly;

/// Deterministic RNG used for every seeded draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent per-trial seed from a root seed (SplitMix64).
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A list of points in R^n, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points {
    n: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be positive"));
        }
        if data.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                expected: n * (data.len() / n + 1),
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, data: Vec::new() }
    }

    pub fn from_rows(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.n);
        self.data.extend_from_slice(x);
    }

    pub fn in_cube(&self) -> bool {
        self.data.iter().all(|v| (-1.0..=1.0).contains(v))
    }
}

/// Draws `count` i.i.d. points; Chebyshev coordinates use the inverse CDF
/// x = cos(πU).
pub fn draw_points(dist: Distribution, count: usize, n: usize, seed: u64) -> Points {
    let mut rng = rng_from_seed(seed);
    draw_points_with(dist, count, n, &mut rng)
}

pub fn draw_points_with<R: Rng + ?Sized>(dist: Distribution, count: usize, n: usize, rng: &mut R) -> Points {
    let mut data = Vec::with_capacity(count * n);
    for _ in 0..count * n {
        let u: f64 = rng.gen();
        data.push(match dist {
            Distribution::Uniform => 2.0 * u - 1.0,
            Distribution::Chebyshev => (PI * u).cos(),
        });
    }
    Points { n, data }
}

/// Noise applied to inlier labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InlierNoise {
    /// Uniform on [-σ, σ].
    #[default]
    Uniform,
    /// Alternating +σ, −σ.
    AlternatingExtreme,
}

/// Outlier labelling strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    /// Outliers labelled ±K alternately. `None` picks K = 10³·(1 + Σ|c_α|).
    ConstBlowup { magnitude: Option<f64> },
    /// Outliers labelled −scale · p(x).
    SignFlipExtreme { scale: f64 },
    /// Every point outside `reveal` is labelled by `decoy`; points inside
    /// `reveal` get the true polynomial. Outlier draws are not used.
    PairIndistinguishable { decoy: MultiPoly, reveal: AaBox },
}

impl Default for Adversary {
    fn default() -> Self {
        Adversary::ConstBlowup { magnitude: None }
    }
}

impl Adversary {
    pub fn const_blowup(k: f64) -> Self {
        Adversary::ConstBlowup { magnitude: Some(k) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub rho: f64,
    #[serde(default)]
    pub inlier_noise: InlierNoise,
    #[serde(default)]
    pub adversary: Adversary,
    #[serde(default)]
    pub precision_bits: Option<u32>,
}

impl NoiseModel {
    pub fn new(sigma: f64, rho: f64) -> Self {
        Self {
            sigma,
            rho,
            inlier_noise: InlierNoise::Uniform,
            adversary: Adversary::default(),
            precision_bits: None,
        }
    }

    pub fn with_adversary(mut self, adversary: Adversary) -> Self {
        self.adversary = adversary;
        self
    }

    pub fn with_precision_bits(mut self, bits: u32) -> Self {
        self.precision_bits = Some(bits);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be a finite non-negative number"));
        }
        if !(0.0..0.5).contains(&self.rho) {
            return Err(Error::invalid("rho", "outlier rate must lie in [0, 1/2)"));
        }
        if let Some(bits) = self.precision_bits {
            if bits == 0 {
                return Err(Error::invalid("precision_bits", "need at least one bit"));
            }
            if self.sigma < bit_quantum(bits) {
                return Err(Error::invalid("sigma", format!("must be at least 2^-{bits}")));
            }
        }
        match &self.adversary {
            Adversary::ConstBlowup { magnitude: Some(k) } if !k.is_finite() => {
                Err(Error::invalid("adversary", "magnitude must be finite"))
            }
            Adversary::PairIndistinguishable { reveal, .. } if !reveal.within_cube() => {
                Err(Error::invalid("adversary", "reveal region must lie inside the cube"))
            }
            _ => Ok(()),
        }
    }
}

/// Labelled sample plus optional ground truth for experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Points,
    pub labels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<MultiPoly>,
}

impl SampleSet {
    pub fn new(points: Points, labels: Vec<f64>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        if let Some(i) = points.iter().position(|x| x.iter().any(|v| !(-1.0..=1.0).contains(v))) {
            return Err(Error::OutOfCube { index: i });
        }
        Ok(Self {
            points,
            labels,
            outlier: None,
            truth: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keeps the samples whose index satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> SampleSet {
        let mut points = Points::empty(self.dim());
        let mut labels = Vec::new();
        let mut flags = self.outlier.as_ref().map(|_| Vec::new());
        for i in 0..self.len() {
            if keep(i) {
                points.push(self.points.get(i));
                labels.push(self.labels[i]);
                if let (Some(out), Some(src)) = (flags.as_mut(), self.outlier.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        SampleSet {
            points,
            labels,
            outlier: flags,
            truth: self.truth.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.dim();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        if self.outlier.is_some() {
            header.push("is_outlier".into());
        }
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.points.get(i).iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{:?}", self.labels[i]));
            if let Some(flags) = &self.outlier {
                rec.push(flags[i].to_string());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses `x1,…,xn,y[,is_outlier]`. Line numbers in errors are 1-based
    /// and count the header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let cols: Vec<String> = header.iter().map(str::to_string).collect();
        let has_flag = cols.last().map(|c| c == "is_outlier").unwrap_or(false);
        let n = cols.len().saturating_sub(if has_flag { 2 } else { 1 });
        let expected: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        if n == 0 || cols[..n] != expected[..] || cols[n] != "y" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header x1,…,xn,y[,is_outlier], got `{}`", cols.join(",")),
            });
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut flags = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != cols.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", cols.len(), rec.len()),
                });
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("`{s}` is not a finite number"),
                })
            };
            for i in 0..n {
                let v = num(&rec[i])?;
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Parse {
                        line,
                        message: format!("coordinate {v} outside [-1,1]"),
                    });
                }
                data.push(v);
            }
            labels.push(num(&rec[n])?);
            if has_flag {
                let f = match &rec[n + 1] {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("`{other}` is not a boolean"),
                        })
                    }
                };
                flags.push(f);
            }
        }
        let mut s = SampleSet::new(Points { n, data }, labels)?;
        if has_flag {
            s.outlier = Some(flags);
        }
        Ok(s)
    }
}

/// Labels `points` with `p` under `model`. Each sample is independently an
/// outlier with probability ρ; the adversary sees every point before
/// choosing outlier labels.
pub fn label(points: Points, p: &MultiPoly, model: &NoiseModel, seed: u64) -> Result<SampleSet> {
    model.validate()?;
    if points.dim() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: points.dim(),
        });
    }
    if let Some(i) = points.iter().position(|x| x.iter().any(|v| !(-1.0..=1.0).contains(v))) {
        return Err(Error::OutOfCube { index: i });
    }
    let mut rng = rng_from_seed(seed);
    let count = points.len();
    let clean: Vec<f64> = points.iter().map(|x| p.eval_unchecked(x)).collect();

    if let Adversary::PairIndistinguishable { decoy, reveal } = &model.adversary {
        if decoy.n() != p.n() || reveal.dim() != p.n() {
            return Err(Error::invalid("adversary", "decoy/reveal dimension differs from p"));
        }
        let labels: Vec<f64> = points
            .iter()
            .zip(&clean)
            .map(|(x, &v)| if reveal.contains(x) { v } else { decoy.eval_unchecked(x) })
            .collect();
        let outlier = labels.iter().zip(&clean).map(|(y, v)| (y - v).abs() > model.sigma).collect();
        return Ok(SampleSet {
            points,
            labels,
            outlier: Some(outlier),
            truth: Some(p.clone()),
        });
    }

    let outlier: Vec<bool> = (0..count).map(|_| rng.gen::<f64>() < model.rho).collect();
    let blowup = match model.adversary {
        Adversary::ConstBlowup { magnitude } => magnitude.unwrap_or(1e3 * (1.0 + p.coeff_abs_sum())),
        _ => 0.0,
    };
    let mut labels = Vec::with_capacity(count);
    let mut inlier_parity = false;
    let mut outlier_parity = false;
    for i in 0..count {
        let y = if outlier[i] {
            outlier_parity = !outlier_parity;
            match &model.adversary {
                Adversary::ConstBlowup { .. } => {
                    if outlier_parity {
                        blowup
                    } else {
                        -blowup
                    }
                }
                Adversary::SignFlipExtreme { scale } => -scale * clean[i],
                Adversary::PairIndistinguishable { .. } => unreachable!(),
            }
        } else {
            let u = match model.inlier_noise {
                InlierNoise::Uniform => {
                    if model.sigma > 0.0 {
                        rng.gen_range(-model.sigma..=model.sigma)
                    } else {
                        0.0
                    }
                }
                InlierNoise::AlternatingExtreme => {
                    inlier_parity = !inlier_parity;
                    if inlier_parity {
                        model.sigma
                    } else {
                        -model.sigma
                    }
                }
            };
            clean[i] + u
        };
        labels.push(y);
    }
    Ok(SampleSet {
        points,
        labels,
        outlier: Some(outlier),
        truth: Some(p.clone()),
    })
}

pub fn bit_quantum(bits: u32) -> f64 {
    if bits >= 1074 {
        f64::from_bits(1)
    } else {
        2f64.powi(-(bits as i32))
    }
}

/// Nearest multiple of 2^-bits, ties to even.
pub fn round_to_bits(v: f64, bits: u32) -> f64 {
    if bits >= 1074 || !v.is_finite() {
        return v;
    }
    // split the scale so 2^bits never overflows
    let half = bits / 2;
    let s1 = 2f64.powi(half as i32);
    let s2 = 2f64.powi((bits - half) as i32);
    let scaled = v * s1 * s2;
    if !scaled.is_finite() || scaled.abs() >= 2f64.powi(52) {
        return v;
    }
    scaled.round_ties_even() / s2 / s1
}

/// Rounds every coordinate and label to `bits` bits after the binary point;
/// coordinates are clamped back into the cube.
pub fn round_bits(s: &SampleSet, bits: u32) -> Result<SampleSet> {
    if bits == 0 {
        return Err(Error::invalid("bits", "need at least one bit"));
    }
    let data = s
        .points
        .as_flat()
        .iter()
        .map(|&v| round_to_bits(v, bits).clamp(-1.0, 1.0))
        .collect();
    Ok(SampleSet {
        points: Points { n: s.dim(), data },
        labels: s.labels.iter().map(|&y| round_to_bits(y, bits)).collect(),
        outlier: s.outlier.clone(),
        truth: s.truth.clone(),
    })
}
