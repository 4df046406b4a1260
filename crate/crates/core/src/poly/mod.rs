//! n-variate polynomials of individual degree at most `d`, stored as a dense
//! tensor of coefficients in the product Chebyshev basis
//! T_{a1}(x1)···T_{an}(xn).

mod uni;

pub use uni::{chebyshev_t, legendre_p, legendre_p_derivative, Basis, UniPoly};

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Panels per axis used by [`MultiPoly::l1_norm`] when callers have no
/// preference.
pub fn default_l1_resolution(n: usize) -> usize {
    match n {
        0..=2 => 32,
        3 => 8,
        _ => 4,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct MultiPoly {
    n: usize,
    d: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    n: usize,
    d: usize,
    basis: Basis,
    coeffs: Vec<f64>,
}

impl TryFrom<PolyRepr> for MultiPoly {
    type Error = Error;

    fn try_from(r: PolyRepr) -> Result<Self> {
        if r.basis != Basis::Chebyshev {
            return Err(Error::invalid("basis", "only \"chebyshev\" is supported"));
        }
        MultiPoly::new(r.n, r.d, r.coeffs)
    }
}

impl From<MultiPoly> for PolyRepr {
    fn from(p: MultiPoly) -> Self {
        PolyRepr {
            n: p.n,
            d: p.d,
            basis: Basis::Chebyshev,
            coeffs: p.coeffs,
        }
    }
}

impl MultiPoly {
    /// Coefficients are row-major over the multi-index, last axis fastest.
    pub fn new(n: usize, d: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be positive"));
        }
        let expected = (d + 1).pow(n as u32);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", "coefficients must be finite"));
        }
        Ok(Self { n, d, coeffs })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        assert!(n > 0);
        Self {
            n,
            d,
            coeffs: vec![0.0; (d + 1).pow(n as u32)],
        }
    }

    pub fn constant(n: usize, d: usize, c: f64) -> Self {
        let mut p = Self::zeros(n, d);
        p.coeffs[0] = c;
        p
    }

    /// Coefficients drawn i.i.d. uniform on [-1, 1].
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(n, d);
        for c in &mut p.coeffs {
            *c = rng.gen_range(-1.0..=1.0);
        }
        p
    }

    /// ∏ f_i(x_i) for univariate factors; individual degree is the largest
    /// factor degree.
    pub fn tensor_product(factors: &[UniPoly]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("factors", "need at least one factor"));
        }
        let d = factors.iter().map(UniPoly::degree).max().unwrap_or(0);
        let cheb: Vec<Vec<f64>> = factors
            .iter()
            .map(|f| {
                let mut c = f.to_chebyshev().coeffs().to_vec();
                c.resize(d + 1, 0.0);
                c
            })
            .collect();
        let mut p = Self::zeros(factors.len(), d);
        for flat in 0..p.coeffs.len() {
            let alpha = p.multi_index(flat);
            p.coeffs[flat] = alpha.iter().zip(&cheb).map(|(&a, c)| c[a]).product();
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let k = self.d + 1;
        let mut alpha = vec![0; self.n];
        for a in alpha.iter_mut().rev() {
            *a = flat % k;
            flat /= k;
        }
        alpha
    }

    pub fn flat_index(&self, alpha: &[usize]) -> usize {
        alpha.iter().fold(0, |acc, &a| acc * (self.d + 1) + a)
    }

    pub fn coeff(&self, alpha: &[usize]) -> f64 {
        self.coeffs[self.flat_index(alpha)]
    }

    pub fn set_coeff(&mut self, alpha: &[usize], value: f64) {
        let i = self.flat_index(alpha);
        self.coeffs[i] = value;
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the length check; `x.len()` must equal `n`.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let k = self.d + 1;
        let mut stack = [0.0f64; 96];
        let mut heap;
        let table: &mut [f64] = if self.n * k <= stack.len() {
            &mut stack[..self.n * k]
        } else {
            heap = vec![0.0; self.n * k];
            &mut heap
        };
        for (axis, &xi) in x.iter().enumerate() {
            fill_chebyshev(xi, &mut table[axis * k..(axis + 1) * k]);
        }
        contract(&self.coeffs, table, k, 0, self.n)
    }

    /// Zero-pads to a larger individual degree.
    pub fn with_degree(&self, d: usize) -> Result<Self> {
        if d < self.d {
            return Err(Error::DegreeMismatch(self.d, d));
        }
        if d == self.d {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(self.n, d);
        for flat in 0..self.coeffs.len() {
            let alpha = self.multi_index(flat);
            out.set_coeff(&alpha, self.coeffs[flat]);
        }
        Ok(out)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let d = self.d.max(other.d);
        let a = self.with_degree(d)?;
        let b = other.with_degree(d)?;
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| f(*x, *y)).collect();
        Ok(Self { n: self.n, d, coeffs })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            d: self.d,
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    /// Σ|c_α|; bounds the sup-norm on the cube because |T_k| ≤ 1 there.
    pub fn coeff_abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Partial derivative along `axis` by differentiating the Chebyshev series
    /// fibre by fibre.
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < self.n, "axis out of range");
        let k = self.d + 1;
        let stride = k.pow((self.n - 1 - axis) as u32);
        let mut out = Self::zeros(self.n, self.d);
        let block = stride * k;
        let mut fibre = vec![0.0; k];
        for base in (0..self.coeffs.len()).step_by(block) {
            for off in 0..stride {
                for (j, f) in fibre.iter_mut().enumerate() {
                    *f = self.coeffs[base + off + j * stride];
                }
                let df = uni::chebyshev_derivative(&fibre);
                for (j, v) in df.iter().enumerate() {
                    out.coeffs[base + off + j * stride] = *v;
                }
            }
        }
        out
    }

    pub fn gradient_polys(&self) -> Vec<Self> {
        (0..self.n).map(|a| self.derivative(a)).collect()
    }

    /// Tensor of coefficients in the monomial basis x^α, same layout.
    /// Intended for cross-checking evaluation, not for computation.
    pub fn to_monomial(&self) -> Vec<f64> {
        let k = self.d + 1;
        let tmono: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                let mut c = chebyshev_t(j).coeffs().to_vec();
                c.resize(k, 0.0);
                c
            })
            .collect();
        let mut out = vec![0.0; self.coeffs.len()];
        for (flat, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let alpha = self.multi_index(flat);
            for (oflat, o) in out.iter_mut().enumerate() {
                let beta = self.multi_index(oflat);
                let w: f64 = alpha.iter().zip(&beta).map(|(&a, &b)| tmono[a][b]).product();
                *o += c * w;
            }
        }
        out
    }

    /// Lower bound on max |p| over the cube.
    ///
    /// Evaluates a tensor grid of Chebyshev–Lobatto points with
    /// `4·max(d,1)·2^k + 1` points per axis (smallest `k` reaching
    /// `resolution`), so successive resolutions give nested grids and the
    /// extrema of T_d lie on the grid. The best few grid points are then
    /// polished by coordinate-wise golden-section search.
    pub fn sup_norm(&self, resolution: usize) -> f64 {
        let mut intervals = 4 * self.d.max(1);
        while intervals + 1 < resolution {
            intervals *= 2;
        }
        let grid = lobatto_grid(intervals);
        let g = grid.len();
        let total = g.pow(self.n as u32);
        const KEEP: usize = 4;
        let mut best: Vec<(f64, Vec<f64>)> = Vec::with_capacity(KEEP + 1);
        let mut idx = vec![0usize; self.n];
        let mut pt = vec![0.0; self.n];
        for _ in 0..total {
            for (a, &i) in idx.iter().enumerate() {
                pt[a] = grid[i];
            }
            let v = self.eval_unchecked(&pt).abs();
            if best.len() < KEEP || v > best[best.len() - 1].0 {
                let pos = best.partition_point(|(b, _)| *b >= v);
                best.insert(pos, (v, pt.clone()));
                best.truncate(KEEP);
            }
            for a in (0..self.n).rev() {
                idx[a] += 1;
                if idx[a] < g {
                    break;
                }
                idx[a] = 0;
            }
        }
        let h = PI / intervals as f64;
        best.into_iter()
            .map(|(v, x)| self.polish_max(x, v, h))
            .fold(0.0, f64::max)
    }

    fn polish_max(&self, mut x: Vec<f64>, mut value: f64, h: f64) -> f64 {
        for _pass in 0..4 {
            let start = value;
            for axis in 0..self.n {
                let lo = (x[axis] - h).max(-1.0);
                let hi = (x[axis] + h).min(1.0);
                let mut probe = x.clone();
                let mut f = |t: f64| {
                    probe[axis] = t;
                    self.eval_unchecked(&probe).abs()
                };
                let (t, v) = golden_max(&mut f, lo, hi, x[axis], value);
                if v > value {
                    value = v;
                    x[axis] = t;
                }
            }
            if value - start <= 1e-15 * value.max(1.0) {
                break;
            }
        }
        value
    }

    /// ∫_{[-1,1]^n} |p| by composite tensor Gauss–Legendre quadrature with
    /// `resolution` panels per axis and `d + 2` nodes per panel.
    pub fn l1_norm(&self, resolution: usize) -> f64 {
        let (xs, ws) = quadrature::composite_rule(resolution.max(1), self.d + 2);
        quadrature::integrate_tensor(self.n, &xs, &ws, |x| self.eval_unchecked(x).abs())
    }
}

fn lobatto_grid(intervals: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=intervals)
        .map(|k| -(PI * k as f64 / intervals as f64).cos())
        .collect();
    g[0] = -1.0;
    g[intervals] = 1.0;
    if intervals % 2 == 0 {
        g[intervals / 2] = 0.0;
    }
    g
}

fn golden_max(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, x0: f64, v0: f64) -> (f64, f64) {
    let mut best = (x0, v0);
    for t in [lo, hi] {
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if b - a < 1e-15 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

/// Values of every basis function ∏ T_{α_i}(x_i) at `x`, in coefficient
/// order, so that `p(x) = Σ coeffs[k]·out[k]`.
pub fn tensor_basis_values(d: usize, x: &[f64], out: &mut Vec<f64>) {
    let k = d + 1;
    let mut t = vec![0.0; k];
    out.clear();
    out.push(1.0);
    for &xi in x {
        fill_chebyshev(xi, &mut t);
        let prev = std::mem::take(out);
        out.reserve(prev.len() * k);
        for p in &prev {
            out.extend(t.iter().map(|v| p * v));
        }
    }
}

#[inline]
fn fill_chebyshev(x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for j in 2..out.len() {
        out[j] = 2.0 * x * out[j - 1] - out[j - 2];
    }
}

fn contract(coeffs: &[f64], table: &[f64], k: usize, axis: usize, n: usize) -> f64 {
    let t = &table[axis * k..(axis + 1) * k];
    if axis + 1 == n {
        return coeffs.iter().zip(t).map(|(c, v)| c * v).sum();
    }
    let stride = coeffs.len() / k;
    t.iter()
        .enumerate()
        .map(|(j, v)| v * contract(&coeffs[j * stride..(j + 1) * stride], table, k, axis + 1, n))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent path: monomial coefficients, nested Horner per axis.
    fn monomial_eval(mono: &[f64], n: usize, d: usize, x: &[f64]) -> f64 {
        let k = d + 1;
        if n == 1 {
            return mono.iter().rev().fold(0.0, |acc, c| acc * x[0] + c);
        }
        let stride = mono.len() / k;
        let inner: Vec<f64> = (0..k)
            .map(|j| monomial_eval(&mono[j * stride..(j + 1) * stride], n - 1, d, &x[1..]))
            .collect();
        inner.iter().rev().fold(0.0, |acc, c| acc * x[0] + c)
    }

    fn h_poly(n: usize, d: usize) -> MultiPoly {
        let mut c = vec![0.0; d + 1];
        c[d] = 1.0;
        MultiPoly::tensor_product(&vec![UniPoly::monomial(c); n]).unwrap()
    }

    #[test]
    fn constant_evaluates_to_itself() {
        let p = MultiPoly::constant(2, 0, 1.0);
        assert_eq!(p.eval(&[0.3, -0.7]).unwrap(), 1.0);
    }

    #[test]
    fn single_t3_coefficient() {
        let p = MultiPoly::new(1, 3, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((p.eval(&[0.5]).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = MultiPoly::zeros(2, 1);
        assert!(matches!(
            p.eval(&[0.1]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(MultiPoly::new(2, 1, vec![0.0; 3]).is_err());
        assert!(p.add(&MultiPoly::zeros(3, 1)).is_err());
    }

    #[test]
    fn seeded_random_matches_monomial_horner() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = MultiPoly::random(2, 3, &mut rng);
        let mono = p.to_monomial();
        let x = [0.25, 0.5];
        let a = p.eval(&x).unwrap();
        let b = monomial_eval(&mono, 2, 3, &x);
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn basis_consistency_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..=3);
            let d = rng.gen_range(0..=5);
            let p = MultiPoly::random(n, d, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let a = p.eval(&x).unwrap();
            let b = monomial_eval(&p.to_monomial(), n, d, &x);
            let scale = p.coeff_abs_sum().max(1.0);
            assert!((a - b).abs() <= 1e-10 * scale, "n={n} d={d}: {a} vs {b}");
        }
    }

    #[test]
    fn arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = MultiPoly::random(2, 2, &mut rng);
        assert!(p.sub(&p).unwrap().is_zero());
        assert!(p.scale(0.0).is_zero());
        let t2 = MultiPoly::new(1, 2, vec![0.0, 0.0, 1.0]).unwrap();
        let one = MultiPoly::constant(1, 0, 1.0);
        let s = t2.add(&one).unwrap();
        assert_eq!(s.degree(), 2);
        assert!(s.eval(&[0.0]).unwrap().abs() < 1e-15);
        let q = MultiPoly::random(2, 3, &mut rng);
        let sum = p.add(&q).unwrap();
        for x in [[0.1, 0.2], [-0.9, 0.4], [1.0, -1.0]] {
            let lhs = sum.eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() + q.eval(&x).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn coeff_abs_sum_cases() {
        assert_eq!(MultiPoly::zeros(3, 2).coeff_abs_sum(), 0.0);
        let mut p = MultiPoly::zeros(2, 2);
        p.set_coeff(&[1, 2], -1.0);
        assert_eq!(p.coeff_abs_sum(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = MultiPoly::random(3, 2, &mut rng);
        let mut direct = 0.0;
        for c in q.coeffs() {
            direct += if *c < 0.0 { -c } else { *c };
        }
        assert!((q.coeff_abs_sum() - direct).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_known_values() {
        let t3 = MultiPoly::new(1, 3, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(t3.sup_norm(0), 1.0);
        let h = h_poly(2, 3);
        assert!((h.sup_norm(0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_matches_dense_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let p = MultiPoly::random(2, 2, &mut rng);
            let mut dense: f64 = 0.0;
            for i in 0..=2000 {
                for j in 0..=2000 {
                    let x = [-1.0 + i as f64 / 1000.0, -1.0 + j as f64 / 1000.0];
                    dense = dense.max(p.eval_unchecked(&x).abs());
                }
            }
            let s = p.sup_norm(64);
            assert!(s >= dense - 1e-12, "{s} < {dense}");
            assert!((s - dense).abs() < 1e-6, "{s} vs {dense}");
        }
    }

    #[test]
    fn sup_norm_bounded_by_coeff_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let p = MultiPoly::random(2, 4, &mut rng);
            assert!(p.sup_norm(0) <= p.coeff_abs_sum() + 1e-12);
        }
    }

    #[test]
    fn l1_norm_known_values() {
        let h = h_poly(2, 3);
        assert!((h.l1_norm(32) - 0.25).abs() < 1e-6);
        assert!((MultiPoly::constant(1, 0, 1.0).l1_norm(4) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = MultiPoly::random(3, 4, &mut rng);
        let x = [0.3, -0.4, 0.8];
        let h = 1e-6;
        for axis in 0..3 {
            let dp = p.derivative(axis);
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (p.eval_unchecked(&xp) - p.eval_unchecked(&xm)) / (2.0 * h);
            assert!((dp.eval_unchecked(&x) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn json_layout() {
        let p = MultiPoly::new(1, 1, vec![0.5, -2.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":1,"d":1,"basis":"chebyshev","coeffs":[0.5,-2.0]}"#);
        let back: MultiPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"n":1,"d":1,"basis":"chebyshev","coeffs":[0.5]}"#;
        assert!(serde_json::from_str::<MultiPoly>(bad).is_err());
    }

    #[test]
    fn degenerate_degree_zero() {
        let p = MultiPoly::constant(3, 0, -2.5);
        assert_eq!(p.sup_norm(0), 2.5);
        assert!((p.l1_norm(2) - 20.0).abs() < 1e-12);
        assert!(p.derivative(1).is_zero());
    }
}
