//! Numerical checks of the relations between sup and ℓ1 norms of
//! polynomials on the cube, and the local lower bounds behind them.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{default_l1_resolution, legendre_p, legendre_p_derivative, MultiPoly, UniPoly};
use crate::quadrature::gauss_legendre;
use crate::sampling::rng_from_seed;

/// Per-axis resolution for sup norms in this module.
pub const SUP_RESOLUTION: usize = 65;

/// Samples used by [`large_value_region`].
pub const REGION_SAMPLES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub descriptor: String,
    pub d: usize,
    pub n: usize,
    pub sup_norm: f64,
    pub l1_norm: f64,
    pub ratio: f64,
    /// (2d)^{2n}, with d taken as at least 1.
    pub bound: f64,
    /// Smallest C with ratio ≤ C^n d^{2n}.
    pub implied_constant: f64,
    pub pass: bool,
}

impl SandwichReport {
    /// Whether ratio ≤ C^n d^{2n} for the given C.
    pub fn within_constant(&self, c: f64) -> bool {
        let d = self.d.max(1) as f64;
        self.ratio <= (c * d * d).powi(self.n as i32) * (1.0 + 1e-6)
    }
}

pub fn sandwich_bound(d: usize, n: usize) -> f64 {
    (2.0 * d.max(1) as f64).powi(2 * n as i32)
}

pub fn check_sandwich(p: &MultiPoly) -> SandwichReport {
    check_sandwich_named(p, format!("n={} d={}", p.n(), p.degree()))
}

pub fn check_sandwich_named(p: &MultiPoly, descriptor: String) -> SandwichReport {
    let (n, d) = (p.n(), p.degree());
    let sup_norm = p.sup_norm(SUP_RESOLUTION);
    let l1_norm = p.l1_norm(default_l1_resolution(n));
    let ratio = if l1_norm > 0.0 { sup_norm / l1_norm } else { 0.0 };
    let bound = sandwich_bound(d, n);
    let dd = d.max(1) as f64;
    SandwichReport {
        descriptor,
        d,
        n,
        sup_norm,
        l1_norm,
        ratio,
        bound,
        implied_constant: ratio.powf(1.0 / n as f64) / (dd * dd),
        pass: ratio <= bound * (1.0 + 1e-6),
    }
}

/// ∏ x_i^d.
pub fn monomial_power(d: usize, n: usize) -> Result<MultiPoly> {
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;
    MultiPoly::tensor_product(&vec![UniPoly::monomial(c); n])
}

#[derive(Clone, Debug, Serialize)]
pub struct TightnessCase {
    pub d: usize,
    pub n: usize,
    pub poly: MultiPoly,
    /// ((m+1)(m+2)/2)^n with d = 2m + 1.
    pub analytic_ratio: f64,
}

/// f_n(x) = ∏ f(x_i) with f(x) = ((x+1)/2)·P'_{m+1}(x)², degree d = 2m + 1.
/// f is non-negative and peaks at 1.
pub fn tightness_family(d: usize, n: usize) -> Result<TightnessCase> {
    if d % 2 == 0 {
        return Err(Error::invalid("d", "tightness family needs odd degree"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be positive"));
    }
    let m = (d - 1) / 2;
    let dp = legendre_p_derivative(m + 1);
    let f = UniPoly::monomial(vec![0.5, 0.5]).mul(&dp.mul(&dp));
    let poly = MultiPoly::tensor_product(&vec![f; n])?;
    let per_axis = ((m + 1) * (m + 2)) as f64 / 2.0;
    Ok(TightnessCase {
        d,
        n,
        poly,
        analytic_ratio: per_axis.powi(n as i32),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TightnessReport {
    pub d: usize,
    pub n: usize,
    pub ratio: f64,
    pub analytic_ratio: f64,
    pub rel_error: f64,
    pub bound: f64,
}

pub fn check_tightness(d: usize, n: usize) -> Result<TightnessReport> {
    let case = tightness_family(d, n)?;
    let r = check_sandwich(&case.poly);
    Ok(TightnessReport {
        d,
        n,
        ratio: r.ratio,
        analytic_ratio: case.analytic_ratio,
        rel_error: (r.ratio - case.analytic_ratio).abs() / case.analytic_ratio,
        bound: r.bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionEstimate {
    pub threshold: f64,
    /// Lebesgue measure; the whole cube has measure 2^n.
    pub measure: f64,
    pub std_err: f64,
    /// (2d²)^{-n}, with d taken as at least 1.
    pub lower_bound: f64,
}

impl RegionEstimate {
    pub fn meets_bound(&self, sigmas: f64) -> bool {
        self.measure >= self.lower_bound - sigmas * self.std_err
    }
}

/// Measure of {x : |p(x)| ≥ |p(y)|/2^n}, estimated from uniform draws.
pub fn large_value_region(p: &MultiPoly, y: &[f64], seed: u64) -> Result<RegionEstimate> {
    if y.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::OutOfCube { index: 0 });
    }
    let threshold = p.eval(y)?.abs() / 2f64.powi(p.n() as i32);
    Ok(super_level_measure(p, threshold, REGION_SAMPLES, seed))
}

pub fn super_level_measure(p: &MultiPoly, threshold: f64, samples: usize, seed: u64) -> RegionEstimate {
    let n = p.n();
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; n];
    let mut hits = 0usize;
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
        if p.eval_unchecked(&x).abs() >= threshold {
            hits += 1;
        }
    }
    let vol = 2f64.powi(n as i32);
    let frac = hits as f64 / samples.max(1) as f64;
    let d = p.degree().max(1) as f64;
    RegionEstimate {
        threshold,
        measure: vol * frac,
        std_err: vol * (frac * (1.0 - frac) / samples.max(1) as f64).sqrt(),
        lower_bound: (2.0 * d * d).powi(-(n as i32)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    pub x_star: f64,
    pub peak: f64,
    pub half_width: f64,
    pub window_min: f64,
    pub holds: bool,
}

/// Locates x* = argmax |g| on a dense grid and checks |g| ≥ |g(x*)|/2 on
/// {|x − x*| ≤ 1/(2d²)} ∩ [-1,1].
pub fn check_univariate_window(g: &UniPoly) -> Result<WindowReport> {
    const GRID: usize = 200_001;
    const WINDOW: usize = 4_001;
    let grid = |i: usize, k: usize, a: f64, b: f64| a + (b - a) * i as f64 / (k - 1) as f64;
    let (mut x_star, mut peak) = (-1.0, 0.0);
    for i in 0..GRID {
        let x = grid(i, GRID, -1.0, 1.0);
        let v = g.eval(x).abs();
        if v > peak {
            peak = v;
            x_star = x;
        }
    }
    if peak == 0.0 {
        return Err(Error::invalid("g", "polynomial vanishes on the grid"));
    }
    let d = g.degree().max(1) as f64;
    let half_width = 1.0 / (2.0 * d * d);
    let (a, b) = ((x_star - half_width).max(-1.0), (x_star + half_width).min(1.0));
    let window_min = (0..WINDOW)
        .map(|i| g.eval(grid(i, WINDOW, a, b)).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(WindowReport {
        x_star,
        peak,
        half_width,
        window_min,
        holds: window_min >= peak / 2.0 - 1e-9,
    })
}

/// ‖g'‖∞ / ‖g‖∞ on [-1,1].
pub fn markov_ratio(g: &UniPoly) -> Result<f64> {
    let p = MultiPoly::tensor_product(std::slice::from_ref(g))?;
    let dp = p.derivative(0);
    Ok(dp.sup_norm(SUP_RESOLUTION) / p.sup_norm(SUP_RESOLUTION))
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientReport {
    /// Largest Euclidean gradient norm seen on the grid.
    pub grad_sup: f64,
    pub sup_norm: f64,
    /// n·d, the total degree bound for individual degree d.
    pub total_degree: usize,
    /// 2·(nd)²·‖p‖∞.
    pub bound: f64,
    pub holds: bool,
}

/// Grid check of ‖∇p‖₂ ≤ 2D²‖p‖∞ with D the total degree.
pub fn check_gradient_bound(p: &MultiPoly, per_axis: usize) -> GradientReport {
    let n = p.n();
    let k = per_axis.max(2);
    let grads = p.gradient_polys();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut grad_sup: f64 = 0.0;
    for _ in 0..k.pow(n as u32) {
        for (a, &i) in idx.iter().enumerate() {
            x[a] = -(std::f64::consts::PI * i as f64 / (k - 1) as f64).cos();
        }
        let g2: f64 = grads.iter().map(|g| g.eval_unchecked(&x).powi(2)).sum();
        grad_sup = grad_sup.max(g2.sqrt());
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < k {
                break;
            }
            idx[a] = 0;
        }
    }
    let sup_norm = p.sup_norm(SUP_RESOLUTION);
    let total_degree = n * p.degree();
    let bound = 2.0 * (total_degree * total_degree) as f64 * sup_norm;
    GradientReport {
        grad_sup,
        sup_norm,
        total_degree,
        bound,
        holds: grad_sup <= bound * (1.0 + 1e-9) + 1e-12,
    }
}

/// |∫_{-1}^{1} P_k(x) f(x) dx|, which vanishes when deg f < k.
pub fn legendre_orthogonality_residual(k: usize, f: &UniPoly) -> f64 {
    let pk = legendre_p(k);
    let (xs, ws) = gauss_legendre((k + f.degree()) / 2 + 2);
    xs.iter().zip(&ws).map(|(x, w)| w * pk.eval(*x) * f.eval(*x)).sum::<f64>().abs()
}

/// CSV with header `d,n,ratio,bound`.
pub fn write_ratio_csv<W: Write>(rows: &[(usize, usize, f64, f64)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["d", "n", "ratio", "bound"])?;
    for (d, n, ratio, bound) in rows {
        wtr.write_record([d.to_string(), n.to_string(), format!("{ratio:?}"), format!("{bound:?}")])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::chebyshev_t;

    #[test]
    fn constant_ratio() {
        let r = check_sandwich(&MultiPoly::constant(2, 0, 1.0));
        assert!((r.l1_norm - 4.0).abs() < 1e-12);
        assert!((r.ratio - 0.25).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn monomial_power_ratio() {
        let p = monomial_power(3, 2).unwrap();
        let r = check_sandwich(&p);
        // ‖x^3 y^3‖₁ = (2/4)^2
        assert!((r.l1_norm - 0.25).abs() < 1e-9, "{}", r.l1_norm);
        assert!((r.ratio - 4.0).abs() < 1e-8);
        assert!(r.pass);
    }

    #[test]
    fn tightness_small_cases() {
        for (d, n, want) in [(3, 1, 3.0), (5, 1, 6.0), (3, 2, 9.0)] {
            let case = tightness_family(d, n).unwrap();
            assert_eq!(case.poly.degree(), d);
            assert_eq!(case.analytic_ratio, want);
            let t = check_tightness(d, n).unwrap();
            assert!(t.rel_error < 1e-5, "{t:?}");
        }
        assert!(tightness_family(4, 1).is_err());
    }

    #[test]
    fn tightness_peak_is_at_one() {
        let case = tightness_family(7, 1).unwrap();
        // P'_4(1) = 10
        assert!((case.poly.eval(&[1.0]).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn implied_constant_distinguishes_bounds() {
        let r = check_sandwich(&tightness_family(5, 2).unwrap().poly);
        assert!(r.within_constant(4.0));
        assert!(r.implied_constant <= 4.0);
        assert!(r.pass);
    }

    #[test]
    fn region_constant_is_whole_cube() {
        let p = MultiPoly::constant(2, 2, 3.0);
        let est = large_value_region(&p, &[0.2, 0.1], 1).unwrap();
        assert_eq!(est.measure, 4.0);
    }

    #[test]
    fn region_chebyshev_extremum() {
        let p = MultiPoly::tensor_product(&[chebyshev_t(4)]).unwrap();
        let est = large_value_region(&p, &[1.0], 2).unwrap();
        assert_eq!(est.lower_bound, 1.0 / 32.0);
        assert!(est.meets_bound(4.0));
    }

    #[test]
    fn region_nested_thresholds() {
        let mut rng = rng_from_seed(3);
        let p = MultiPoly::random(2, 3, &mut rng);
        let y = [0.3, -0.8];
        let top = p.eval(&y).unwrap().abs();
        let half = super_level_measure(&p, top / 4.0, 20_000, 5);
        let full = super_level_measure(&p, top, 20_000, 5);
        assert!(half.measure >= full.measure);
        assert!(large_value_region(&p, &[2.0, 0.0], 1).is_err());
    }

    #[test]
    fn window_examples() {
        let t6 = check_univariate_window(&chebyshev_t(6)).unwrap();
        assert!(t6.holds);
        assert!((t6.half_width - 1.0 / 72.0).abs() < 1e-15);
        assert!(check_univariate_window(&UniPoly::constant(2.0)).unwrap().holds);
        let lin = check_univariate_window(&UniPoly::monomial(vec![0.0, 1.0])).unwrap();
        assert!(lin.holds && lin.x_star.abs() == 1.0);
        assert!(check_univariate_window(&UniPoly::constant(0.0)).is_err());
    }

    #[test]
    fn markov_extremal() {
        for d in 1..=8 {
            let r = markov_ratio(&chebyshev_t(d)).unwrap();
            let want = (d * d) as f64;
            assert!((r - want).abs() / want < 1e-6, "d={d} r={r}");
        }
    }

    #[test]
    fn gradient_bound_random() {
        let mut rng = rng_from_seed(9);
        for _ in 0..10 {
            let p = MultiPoly::random(2, 3, &mut rng);
            let g = check_gradient_bound(&p, 41);
            assert!(g.holds);
            // per-axis Markov gives the sharper √n·d²
            assert!(g.grad_sup <= 2f64.sqrt() * 9.0 * g.sup_norm * (1.0 + 1e-9));
        }
    }

    #[test]
    fn orthogonality() {
        let mut rng = rng_from_seed(4);
        for k in 1..=8 {
            let f = UniPoly::monomial((0..k).map(|_| rng.gen_range(-1.0..1.0)).collect());
            assert!(legendre_orthogonality_residual(k, &f) <= 1e-9);
        }
        let same = legendre_p(3);
        assert!(legendre_orthogonality_residual(3, &same) > 0.1);
    }

    #[test]
    fn ratio_csv_header() {
        let mut out = Vec::new();
        write_ratio_csv(&[(3, 1, 3.0, 36.0)], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "d,n,ratio,bound\n3,1,3.0,36.0\n");
    }
}
