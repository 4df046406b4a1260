//! Small statistics helpers for Monte-Carlo experiments.

use serde::Serialize;

/// Proportion estimate with a Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    /// `z` is the normal quantile, e.g. 1.96 for a 95% interval.
    pub fn wilson(successes: usize, trials: usize, z: f64) -> Self {
        if trials == 0 {
            return Self {
                successes,
                trials,
                rate: f64::NAN,
                ci_low: 0.0,
                ci_high: 1.0,
            };
        }
        let nf = trials as f64;
        let p = successes as f64 / nf;
        let z2 = z * z;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Self {
            successes,
            trials,
            rate: p,
            ci_low: (center - half).clamp(0.0, p),
            ci_high: (center + half).clamp(p, 1.0),
        }
    }

    /// Binomial standard error at the observed rate.
    pub fn std_err(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        (self.rate * (1.0 - self.rate) / self.trials as f64).sqrt()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
