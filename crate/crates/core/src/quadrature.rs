//! Gauss–Legendre rules on [-1, 1] and composite tensor-product integration.

use std::f64::consts::PI;

/// Nodes and weights of the `k`-point Gauss–Legendre rule on [-1, 1].
///
/// Nodes come from Newton iteration on the three-term recurrence, started at
/// the usual cosine guesses. Exact for polynomials of degree `2k - 1`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "quadrature rule needs at least one node");
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(k, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 1..k {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One-dimensional composite rule: `panels` equal panels of [-1,1], each with a
/// `k`-point Gauss–Legendre rule.
pub fn composite_rule(panels: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(k);
    let h = 2.0 / panels as f64;
    let mut xs = Vec::with_capacity(panels * k);
    let mut ws = Vec::with_capacity(panels * k);
    for p in 0..panels {
        let a = -1.0 + h * p as f64;
        let mid = a + 0.5 * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Integrates `f` over [-1,1]^n with the tensor product of a 1-D rule.
pub fn integrate_tensor<F>(n: usize, xs: &[f64], ws: &[f64], mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let q = xs.len();
    let total = q.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut pt = vec![xs[0]; n];
    let mut sum = 0.0;
    for _ in 0..total {
        let mut w = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            pt[a] = xs[i];
            w *= ws[i];
        }
        sum += w * f(&pt);
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < q {
                break;
            }
            idx[a] = 0;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        for k in 1..12 {
            let (_, w) = gauss_legendre(k);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn exact_for_degree_2k_minus_1() {
        for k in 1..10 {
            let (x, w) = gauss_legendre(k);
            let deg = 2 * k - 1;
            for e in 0..=deg {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(e as i32)).sum();
                let exact = if e % 2 == 1 { 0.0 } else { 2.0 / (e as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "k={k} e={e}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn composite_handles_kink_on_panel_boundary() {
        let (xs, ws) = composite_rule(4, 3);
        let v = integrate_tensor(1, &xs, &ws, |p| p[0].abs());
        assert!((v - 1.0).abs() < 1e-14);
        let v2 = integrate_tensor(2, &xs, &ws, |p| (p[0] * p[1]).abs());
        assert!((v2 - 1.0).abs() < 1e-13);
    }
}
