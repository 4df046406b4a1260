use serde::{Deserialize, Serialize};

/// Basis in which a coefficient vector is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Monomial,
    Chebyshev,
}

/// Univariate polynomial with `degree + 1` coefficients in a tagged basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniPoly {
    basis: Basis,
    coeffs: Vec<f64>,
}

impl UniPoly {
    pub fn new(basis: Basis, coeffs: Vec<f64>) -> Self {
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        Self { basis, coeffs }
    }

    pub fn monomial(coeffs: Vec<f64>) -> Self {
        Self::new(Basis::Monomial, coeffs)
    }

    pub fn chebyshev(coeffs: Vec<f64>) -> Self {
        Self::new(Basis::Chebyshev, coeffs)
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(vec![c])
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.basis {
            Basis::Monomial => self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Basis::Chebyshev => clenshaw(&self.coeffs, x),
        }
    }

    pub fn to_monomial(&self) -> UniPoly {
        match self.basis {
            Basis::Monomial => self.clone(),
            Basis::Chebyshev => {
                let mut out = vec![0.0; self.coeffs.len()];
                let mut prev = vec![1.0];
                let mut cur = vec![0.0, 1.0];
                for (k, &c) in self.coeffs.iter().enumerate() {
                    let t = match k {
                        0 => &prev,
                        1 => &cur,
                        _ => {
                            let next = chebyshev_step(&cur, &prev);
                            prev = std::mem::replace(&mut cur, next);
                            &cur
                        }
                    };
                    for (o, tc) in out.iter_mut().zip(t) {
                        *o += c * tc;
                    }
                }
                UniPoly::monomial(out)
            }
        }
    }

    /// Horner's scheme carried out in the Chebyshev basis, using
    /// x·T_0 = T_1 and x·T_k = (T_{k+1} + T_{k-1}) / 2.
    pub fn to_chebyshev(&self) -> UniPoly {
        match self.basis {
            Basis::Chebyshev => self.clone(),
            Basis::Monomial => {
                let len = self.coeffs.len();
                let mut acc = vec![0.0; len + 1];
                for &c in self.coeffs.iter().rev() {
                    let mut next = vec![0.0; len + 1];
                    for (k, &a) in acc.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        if k == 0 {
                            next[1] += a;
                        } else {
                            if k + 1 <= len {
                                next[k + 1] += 0.5 * a;
                            }
                            next[k - 1] += 0.5 * a;
                        }
                    }
                    next[0] += c;
                    acc = next;
                }
                acc.truncate(len);
                UniPoly::chebyshev(acc)
            }
        }
    }

    pub fn derivative(&self) -> UniPoly {
        match self.basis {
            Basis::Monomial => {
                if self.coeffs.len() == 1 {
                    return UniPoly::monomial(vec![0.0]);
                }
                let c = self.coeffs[1..]
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (k + 1) as f64 * c)
                    .collect();
                UniPoly::monomial(c)
            }
            Basis::Chebyshev => UniPoly::chebyshev(chebyshev_derivative(&self.coeffs)),
        }
    }

    /// Product, returned in the monomial basis.
    pub fn mul(&self, other: &UniPoly) -> UniPoly {
        let a = self.to_monomial();
        let b = other.to_monomial();
        let mut out = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1];
        for (i, x) in a.coeffs.iter().enumerate() {
            for (j, y) in b.coeffs.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        UniPoly::monomial(out)
    }

    pub fn scale(&self, c: f64) -> UniPoly {
        UniPoly::new(self.basis, self.coeffs.iter().map(|x| x * c).collect())
    }

    /// `x ↦ self(a·x + b)`, returned in the monomial basis.
    pub fn compose_affine(&self, a: f64, b: f64) -> UniPoly {
        let m = self.to_monomial();
        let inner = UniPoly::monomial(vec![b, a]);
        let mut acc = UniPoly::monomial(vec![0.0]);
        for &c in m.coeffs.iter().rev() {
            acc = acc.mul(&inner);
            acc.coeffs[0] += c;
        }
        acc.coeffs.truncate(m.coeffs.len());
        acc
    }
}

fn chebyshev_step(cur: &[f64], prev: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; cur.len() + 1];
    for (k, c) in cur.iter().enumerate() {
        next[k + 1] += 2.0 * c;
    }
    for (k, p) in prev.iter().enumerate() {
        next[k] -= p;
    }
    next
}

pub(crate) fn clenshaw(c: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    c[0] + x * b1 - b2
}

/// Chebyshev-series derivative; the output keeps the input length with a
/// zero leading coefficient.
pub(crate) fn chebyshev_derivative(c: &[f64]) -> Vec<f64> {
    let len = c.len();
    let mut b = vec![0.0; len + 1];
    for k in (1..len).rev() {
        b[k - 1] = b[k + 1] + 2.0 * k as f64 * c[k];
    }
    if len > 0 {
        b[0] *= 0.5;
    }
    b.truncate(len);
    b
}

/// Chebyshev polynomial of the first kind, T_d, in the monomial basis.
pub fn chebyshev_t(d: usize) -> UniPoly {
    let mut prev = vec![1.0];
    if d == 0 {
        return UniPoly::monomial(prev);
    }
    let mut cur = vec![0.0, 1.0];
    for _ in 1..d {
        let next = chebyshev_step(&cur, &prev);
        prev = std::mem::replace(&mut cur, next);
    }
    UniPoly::monomial(cur)
}

/// Legendre polynomial P_k in the monomial basis via Bonnet's recurrence
/// (k+1) P_{k+1} = (2k+1) x P_k − k P_{k−1}.
pub fn legendre_p(k: usize) -> UniPoly {
    let mut prev = vec![1.0];
    if k == 0 {
        return UniPoly::monomial(prev);
    }
    let mut cur = vec![0.0, 1.0];
    for j in 1..k {
        let jf = j as f64;
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += (2.0 * jf + 1.0) * c;
        }
        for (i, p) in prev.iter().enumerate() {
            next[i] -= jf * p;
        }
        for v in &mut next {
            *v /= jf + 1.0;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    UniPoly::monomial(cur)
}

pub fn legendre_p_derivative(k: usize) -> UniPoly {
    legendre_p(k).derivative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    fn integrate(f: impl Fn(f64) -> f64) -> f64 {
        let (x, w) = gauss_legendre(24);
        x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum()
    }

    #[test]
    fn t2_coefficients() {
        assert_eq!(chebyshev_t(2).coeffs(), &[-1.0, 0.0, 2.0]);
        assert_eq!(chebyshev_t(0).coeffs(), &[1.0]);
    }

    #[test]
    fn t5_hits_plus_minus_one_at_extrema() {
        let t5 = chebyshev_t(5);
        for k in 1..=5 {
            let x = (std::f64::consts::PI * k as f64 / 5.0).cos();
            let v = t5.eval(x);
            assert!((v.abs() - 1.0).abs() < 1e-12, "k={k} v={v}");
        }
    }

    #[test]
    fn chebyshev_matches_trig_form() {
        for d in 0..=12 {
            let t = chebyshev_t(d);
            for i in 0..=50 {
                let x = -1.0 + 2.0 * i as f64 / 50.0;
                let trig = (d as f64 * x.acos()).cos();
                assert!((t.eval(x) - trig).abs() < 1e-10, "d={d} x={x}");
            }
        }
    }

    #[test]
    fn legendre_basics() {
        assert_eq!(legendre_p(0).coeffs(), &[1.0]);
        for k in 0..10 {
            assert!((legendre_p(k).eval(1.0) - 1.0).abs() < 1e-12);
        }
        assert!((legendre_p_derivative(2).eval(1.0) - 3.0).abs() < 1e-12);
        for k in 1..10 {
            let expect = (k * (k + 1)) as f64 / 2.0;
            assert!((legendre_p_derivative(k).eval(1.0) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn legendre_orthogonality() {
        let p1 = legendre_p(1);
        let p3 = legendre_p(3);
        assert!(integrate(|x| p1.eval(x) * p3.eval(x)).abs() < 1e-9);
        for j in 0..8 {
            for k in 0..8 {
                if j != k {
                    let (a, b) = (legendre_p(j), legendre_p(k));
                    assert!(integrate(|x| a.eval(x) * b.eval(x)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn legendre_parity() {
        for k in 0..9 {
            let p = legendre_p(k);
            let dp = legendre_p_derivative(k);
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            for x in [0.1, 0.37, 0.9] {
                assert!((p.eval(-x) - s * p.eval(x)).abs() < 1e-12);
                assert!((dp.eval(-x) + s * dp.eval(x)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn basis_round_trip() {
        let p = UniPoly::monomial(vec![0.3, -1.2, 0.5, 2.0, -0.7]);
        let c = p.to_chebyshev();
        let back = c.to_monomial();
        for (a, b) in p.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
        for x in [-0.9, -0.2, 0.4, 1.0] {
            assert!((p.eval(x) - c.eval(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn chebyshev_derivative_matches_monomial() {
        let c = UniPoly::chebyshev(vec![0.1, -0.4, 0.9, 0.3, -0.2, 0.05]);
        let dc = c.derivative();
        let dm = c.to_monomial().derivative();
        for x in [-1.0, -0.3, 0.2, 0.77, 1.0] {
            assert!((dc.eval(x) - dm.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_composition() {
        let p = UniPoly::monomial(vec![1.0, 2.0, 3.0]);
        let q = p.compose_affine(2.0, -1.0);
        for x in [0.0, 0.25, 1.0] {
            assert!((q.eval(x) - p.eval(2.0 * x - 1.0)).abs() < 1e-13);
        }
        assert_eq!(q.degree(), 2);
    }

    #[test]
    fn markov_extremal_at_one() {
        for d in 1..=10 {
            let dt = chebyshev_t(d).derivative();
            assert!((dt.eval(1.0) - (d * d) as f64).abs() < 1e-9);
        }
    }
}
