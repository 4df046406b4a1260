//! Two-phase bounded-variable revised simplex with a dense explicit basis
//! inverse. Rows are equilibrated by their largest entry; `≤`/`≥` rows get a
//! slack/surplus column; rows that the slacks cannot start feasible get an
//! artificial. Dantzig pricing, with Bland's rule after a run of degenerate
//! pivots. The ratio test is a two-pass Harris test with bound flips.

use log::debug;

use super::{LinearProgram, LpSolution, LpStatus, Relation, SimplexOptions};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Work<'a> {
    opts: &'a SimplexOptions,
    m: usize,
    cols: Vec<f64>,
    kind: Vec<Kind>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<Option<usize>>,
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
    Numerical,
}

pub(super) fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> LpSolution {
    let n = lp.num_vars();
    let m = lp.constraints.len();

    let scale: Vec<f64> = lp
        .constraints
        .iter()
        .map(|r| {
            let big = r.coeffs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if big > 0.0 {
                1.0 / big
            } else {
                1.0
            }
        })
        .collect();

    let mut cols = Vec::new();
    let mut kind = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for j in 0..n {
        for (i, r) in lp.constraints.iter().enumerate() {
            cols.push(r.coeffs[j] * scale[i]);
        }
        kind.push(Kind::Structural);
        lo.push(lp.lower[j]);
        hi.push(lp.upper[j]);
    }
    let mut slack_of_row = vec![None; m];
    for (i, r) in lp.constraints.iter().enumerate() {
        let sign = match r.relation {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => continue,
        };
        slack_of_row[i] = Some((kind.len(), sign));
        let mut c = vec![0.0; m];
        c[i] = sign;
        cols.extend_from_slice(&c);
        kind.push(Kind::Slack);
        lo.push(0.0);
        hi.push(f64::INFINITY);
    }
    let b: Vec<f64> = lp.constraints.iter().zip(&scale).map(|(r, s)| r.rhs * s).collect();

    let mut x: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(&l, &h)| {
            if l.is_finite() {
                l
            } else if h.is_finite() {
                h
            } else {
                0.0
            }
        })
        .collect();

    // residual after placing every column at its starting bound
    let mut resid = b.clone();
    for (j, v) in x.iter().enumerate() {
        if *v != 0.0 {
            for i in 0..m {
                resid[i] -= cols[j * m + i] * v;
            }
        }
    }

    let mut basis = vec![0usize; m];
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        let slack_ok = slack_of_row[i].filter(|&(_, sign)| resid[i] * sign >= 0.0);
        if let Some((s, sign)) = slack_ok {
            basis[i] = s;
            x[s] = resid[i] * sign;
            binv[i * m + i] = sign;
        } else {
            let sign = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
            let a = kind.len();
            let mut c = vec![0.0; m];
            c[i] = sign;
            cols.extend_from_slice(&c);
            kind.push(Kind::Artificial);
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push(resid[i].abs());
            basis[i] = a;
            binv[i * m + i] = sign;
        }
    }
    let total = kind.len();
    let mut in_basis = vec![None; total];
    for (i, &v) in basis.iter().enumerate() {
        in_basis[v] = Some(i);
    }

    let mut w = Work {
        opts,
        m,
        cols,
        kind,
        b,
        lo,
        hi,
        x,
        basis,
        in_basis,
        binv,
        iterations: 0,
        since_refactor: 0,
    };

    let failed = |w: &Work, status: LpStatus| LpSolution {
        status,
        x: w.x[..n].to_vec(),
        objective: f64::NAN,
        duals: vec![0.0; m],
        iterations: w.iterations,
    };

    let has_artificials = w.kind.iter().any(|k| *k == Kind::Artificial);
    if has_artificials {
        let cost1: Vec<f64> = w
            .kind
            .iter()
            .map(|k| if *k == Kind::Artificial { 1.0 } else { 0.0 })
            .collect();
        match w.run(&cost1) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded | PhaseEnd::Numerical => return failed(&w, LpStatus::NumericalFailure),
            PhaseEnd::IterationLimit => return failed(&w, LpStatus::IterationLimit),
        }
        let infeas: f64 = (0..total).filter(|&j| w.kind[j] == Kind::Artificial).map(|j| w.x[j]).sum();
        let bnorm = w.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if infeas > 1e-8 * (1.0 + bnorm) {
            debug!("phase 1 ended with infeasibility {infeas:e}");
            return failed(&w, LpStatus::Infeasible);
        }
        for j in 0..total {
            if w.kind[j] == Kind::Artificial {
                w.hi[j] = 0.0;
                if w.in_basis[j].is_none() {
                    w.x[j] = 0.0;
                }
            }
        }
        w.drive_out_artificials();
    }

    let mut cost2 = vec![0.0; total];
    cost2[..n].copy_from_slice(&lp.objective);
    match w.run(&cost2) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return failed(&w, LpStatus::Unbounded),
        PhaseEnd::IterationLimit => return failed(&w, LpStatus::IterationLimit),
        PhaseEnd::Numerical => return failed(&w, LpStatus::NumericalFailure),
    }
    if !w.refactor() {
        return failed(&w, LpStatus::NumericalFailure);
    }
    let viol = w.max_bound_violation();
    if viol > 1e-7 {
        debug!("final basis violates bounds by {viol:e}");
        return failed(&w, LpStatus::NumericalFailure);
    }
    for j in 0..total {
        if w.in_basis[j].is_some() {
            w.x[j] = w.x[j].clamp(w.lo[j], w.hi[j]);
        }
    }
    let y = w.duals(&cost2);
    let x: Vec<f64> = w.x[..n].to_vec();
    LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum(),
        duals: y.iter().zip(&scale).map(|(v, s)| v * s).collect(),
        x,
        iterations: w.iterations,
    }
}

impl Work<'_> {
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bv) in self.basis.iter().enumerate() {
            let c = cost[bv];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, r) in y.iter_mut().zip(row) {
                    *yk += c * r;
                }
            }
        }
        y
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let a = self.col(j);
        (0..m)
            .map(|i| {
                let row = &self.binv[i * m..(i + 1) * m];
                row.iter().zip(a).map(|(r, v)| r * v).sum()
            })
            .collect()
    }

    fn max_bound_violation(&self) -> f64 {
        self.basis
            .iter()
            .map(|&v| (self.lo[v] - self.x[v]).max(self.x[v] - self.hi[v]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Rebuilds B⁻¹ from the basic columns by Gauss–Jordan elimination and
    /// recomputes the basic values.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return true;
        }
        let mut a = vec![0.0; m * m];
        for (k, &v) in self.basis.iter().enumerate() {
            for i in 0..m {
                a[i * m + k] = self.cols[v * m + i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (p, big) = (c..m)
                .map(|r| (r, a[r * m + c].abs()))
                .fold((c, -1.0), |acc, t| if t.1 > acc.1 { t } else { acc });
            if big < 1e-13 {
                return false;
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        let mut rhs = self.b.clone();
        for (j, v) in self.x.iter().enumerate() {
            if self.in_basis[j].is_none() && *v != 0.0 {
                for i in 0..m {
                    rhs[i] -= self.cols[j * m + i] * v;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(r, b)| r * b).sum();
            self.x[self.basis[i]] = v;
        }
        true
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
        }
        let leaving = self.basis[r];
        self.in_basis[leaving] = None;
        self.in_basis[q] = Some(r);
        self.basis[r] = q;
        self.since_refactor += 1;
    }

    /// After phase 1, swap zero-valued artificials out of the basis wherever
    /// some real column has a usable pivot in their row.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            let a = self.basis[r];
            if self.kind[a] != Kind::Artificial {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best = None;
            for j in 0..self.kind.len() {
                if self.kind[j] == Kind::Artificial || self.in_basis[j].is_some() {
                    continue;
                }
                let v: f64 = row.iter().zip(self.col(j)).map(|(p, c)| p * c).sum();
                if v.abs() > 1e-7 && best.map_or(true, |(_, bv): (usize, f64)| v.abs() > bv) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                self.x[a] = 0.0;
                self.pivot(r, j, &alpha);
            }
        }
    }

    fn run(&mut self, cost: &[f64]) -> PhaseEnd {
        let total = self.kind.len();
        let tol_d = self.opts.optimality_tol;
        let tol_p = self.opts.feasibility_tol;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return PhaseEnd::IterationLimit;
            }
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return PhaseEnd::Numerical;
            }
            let y = self.duals(cost);

            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                if self.in_basis[j].is_some() || self.lo[j] == self.hi[j] {
                    continue;
                }
                let dj = cost[j] - y.iter().zip(self.col(j)).map(|(a, b)| a * b).sum::<f64>();
                let at_lo = self.x[j] <= self.lo[j];
                let at_hi = self.x[j] >= self.hi[j];
                let dir = if dj < -tol_d && !at_hi {
                    1.0
                } else if dj > tol_d && !at_lo {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    enter = Some((j, dir, dj));
                    break;
                }
                if enter.map_or(true, |(_, _, best)| dj.abs() > best.abs()) {
                    enter = Some((j, dir, dj));
                }
            }
            let Some((q, dir, _)) = enter else {
                return PhaseEnd::Optimal;
            };
            let alpha = self.ftran(q);

            // two-pass Harris ratio test
            let ptol = self.opts.pivot_tol;
            let mut theta_max = f64::INFINITY;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai.abs() <= ptol {
                    continue;
                }
                let v = self.basis[i];
                let delta = -dir * ai;
                let lim = if delta < 0.0 && self.lo[v].is_finite() {
                    (self.x[v] - self.lo[v] + tol_p) / -delta
                } else if delta > 0.0 && self.hi[v].is_finite() {
                    (self.hi[v] - self.x[v] + tol_p) / delta
                } else {
                    continue;
                };
                theta_max = theta_max.min(lim);
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut best_piv = 0.0;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai.abs() <= ptol {
                    continue;
                }
                let v = self.basis[i];
                let delta = -dir * ai;
                let exact = if delta < 0.0 && self.lo[v].is_finite() {
                    (self.x[v] - self.lo[v]) / -delta
                } else if delta > 0.0 && self.hi[v].is_finite() {
                    (self.hi[v] - self.x[v]) / delta
                } else {
                    continue;
                };
                if exact > theta_max {
                    continue;
                }
                let better = if bland {
                    match leave {
                        None => true,
                        Some((r, t)) => exact < t || (exact == t && v < self.basis[r]),
                    }
                } else {
                    ai.abs() > best_piv
                };
                if better {
                    leave = Some((i, exact.max(0.0)));
                    best_piv = ai.abs();
                }
            }
            let range = self.hi[q] - self.lo[q];
            self.iterations += 1;

            let flip = match leave {
                None => true,
                Some((_, t)) => range <= t,
            };
            if flip && !range.is_finite() {
                return PhaseEnd::Unbounded;
            }
            let theta = if flip { range } else { leave.unwrap().1 };
            for (i, &ai) in alpha.iter().enumerate() {
                let v = self.basis[i];
                self.x[v] -= theta * dir * ai;
            }
            if flip {
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
            } else {
                let (r, _) = leave.unwrap();
                let v = self.basis[r];
                self.x[v] = if -dir * alpha[r] < 0.0 { self.lo[v] } else { self.hi[v] };
                self.x[q] += theta * dir;
                self.pivot(r, q, &alpha);
            }

            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > self.opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }
}
