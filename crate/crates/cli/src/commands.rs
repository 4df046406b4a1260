use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use robpoly_core::lowerbounds::{
    avoidance_sample_count, build_uniform_adversary, default_estimator, run_indistinguishability_experiment,
    run_linear_lb_experiment, write_failure_csv,
};
use robpoly_core::norms::{
    check_gradient_bound, check_sandwich, check_tightness, check_univariate_window, legendre_orthogonality_residual,
    markov_ratio, write_ratio_csv,
};
use robpoly_core::poly::chebyshev_t;
use robpoly_core::regression::{chebyshev_sample_size, recover, uniform_sample_size};
use robpoly_core::sampling::{derive_seed, draw_points, label, rng_from_seed, round_bits};
use robpoly_core::stats::Proportion;
use robpoly_core::{Distribution, MultiPoly, NoiseModel, SampleSet, UniPoly};

use crate::config::{LowerBoundKind, RunConfig};
use crate::CliError;

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, v: &Value) -> Result<(), CliError> {
    let mut w = open_out(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `<path>.meta.json` next to a CSV artifact.
fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_meta(csv_path: Option<&Path>, v: &Value) -> Result<(), CliError> {
    if let Some(p) = csv_path {
        write_json(Some(&meta_path(p)), v)?;
    }
    Ok(())
}

fn read_poly(path: &Path) -> Result<MultiPoly, CliError> {
    let f = File::open(path).map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    Ok(serde_json::from_reader(io::BufReader::new(f)).map_err(robpoly_core::Error::from)?)
}

fn default_sample_count(cfg: &RunConfig, dist: Distribution, n: usize, rho: f64) -> Result<usize, CliError> {
    let m = cfg.recovery(n)?.grid_size();
    Ok(match dist {
        Distribution::Chebyshev => chebyshev_sample_size(m, n, rho, cfg.delta),
        Distribution::Uniform => uniform_sample_size(m, n, rho, cfg.delta),
    })
}

pub fn fit(cfg: &RunConfig, poly_out: Option<&Path>, trace_out: Option<&Path>) -> Result<(), CliError> {
    let input = cfg.input.as_deref().ok_or_else(|| CliError::input("fit needs --input"))?;
    let file = File::open(input).map_err(|e| CliError::input(format!("cannot open {}: {e}", input.display())))?;
    let mut s = SampleSet::read_csv(io::BufReader::new(file))?;
    let n = cfg.dim.unwrap_or(s.dim());
    if n != s.dim() {
        return Err(CliError::input(format!("--dim is {n} but the CSV has {} coordinates", s.dim())));
    }
    if let Some(p) = &cfg.truth {
        let truth = read_poly(p)?;
        if truth.n() != n {
            return Err(CliError::input(format!("truth polynomial has dimension {}, samples {n}", truth.n())));
        }
        s.truth = Some(truth);
    }
    let rc = cfg.recovery(n)?;
    let report = recover(&s, &rc)?;
    if let Some(p) = poly_out {
        write_json(Some(p), &serde_json::to_value(&report.p_hat)?)?;
    }
    if let Some(p) = trace_out {
        report.write_error_trace(BufWriter::new(File::create(p)?))?;
    }
    let out = json!({
        "config": cfg,
        "recovery": rc,
        "final_error": report.final_error(),
        "report": report,
    });
    write_json(cfg.out.as_deref(), &out)
}

pub fn simulate(cfg: &RunConfig, truth_out: Option<&Path>) -> Result<(), CliError> {
    let n = cfg.dim()?;
    let d = cfg.degree()?;
    let truth = match &cfg.truth {
        Some(p) => {
            let t = read_poly(p)?;
            if t.n() != n {
                return Err(CliError::input(format!("truth polynomial has dimension {}, --dim is {n}", t.n())));
            }
            t
        }
        None => MultiPoly::random(n, d, &mut rng_from_seed(derive_seed(cfg.seed, 0))),
    };
    let count = match cfg.samples {
        Some(c) => c,
        None => default_sample_count(cfg, cfg.dist, n, cfg.rho)?,
    };
    let pts = draw_points(cfg.dist, count, n, derive_seed(cfg.seed, 1));
    let mut model = NoiseModel::new(cfg.sigma, cfg.rho).with_adversary(cfg.adversary.clone());
    if let Some(b) = cfg.bits {
        model = model.with_precision_bits(b);
    }
    let mut s = label(pts, &truth, &model, derive_seed(cfg.seed, 2))?;
    if let Some(b) = cfg.bits {
        s = round_bits(&s, b)?;
    }
    if let Some(p) = truth_out {
        write_json(Some(p), &serde_json::to_value(&truth)?)?;
    }
    let mut w = open_out(cfg.out.as_deref())?;
    s.write_csv(&mut w)?;
    w.flush()?;
    write_meta(cfg.out.as_deref(), &json!({"config": cfg, "samples": count, "truth": truth}))
}

struct SweepRow {
    dist: Distribution,
    rho: f64,
    samples: usize,
    success: Proportion,
    mean_error: f64,
    errors: usize,
    seed: u64,
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let n = cfg.dim()?;
    let d = cfg.degree()?;
    if cfg.trials < 20 {
        return Err(CliError::input("sweep needs --trials of at least 20"));
    }
    let dists = if cfg.dists.is_empty() { vec![cfg.dist] } else { cfg.dists.clone() };
    let rhos = if cfg.rho_grid.is_empty() { vec![cfg.rho] } else { cfg.rho_grid.clone() };
    let threshold = (2.0 + cfg.eps) * cfg.sigma + cfg.eta;
    let mut rows = Vec::new();
    let mut combo = 0u64;
    for &dist in &dists {
        for &rho in &rhos {
            let grid = if cfg.samples_grid.is_empty() {
                let full = default_sample_count(cfg, dist, n, rho)?;
                vec![(full / 8).max(1), (full / 4).max(1), (full / 2).max(1), full]
            } else {
                cfg.samples_grid.clone()
            };
            for &count in &grid {
                let seed = derive_seed(cfg.seed, combo);
                combo += 1;
                let mut rc = cfg.recovery(n)?;
                rc.rho = rho;
                let model = NoiseModel::new(cfg.sigma, rho).with_adversary(cfg.adversary.clone());
                let errs: Vec<Option<f64>> = (0..cfg.trials as u64)
                    .into_par_iter()
                    .map(|t| {
                        let mut rng = rng_from_seed(derive_seed(seed, t));
                        let p = MultiPoly::random(n, d, &mut rng);
                        let pts = draw_points(dist, count, n, rng.gen());
                        let s = label(pts, &p, &model, rng.gen()).ok()?;
                        match recover(&s, &rc) {
                            Ok(r) => r.final_error(),
                            Err(e) => {
                                warn!("trial {t} with M={count}: {e}");
                                None
                            }
                        }
                    })
                    .collect();
                let done: Vec<f64> = errs.iter().flatten().copied().collect();
                let ok = done.iter().filter(|&&e| e <= threshold).count();
                rows.push(SweepRow {
                    dist,
                    rho,
                    samples: count,
                    success: Proportion::wilson(ok, cfg.trials, 1.96),
                    mean_error: robpoly_core::stats::mean(&done),
                    errors: errs.len() - done.len(),
                    seed,
                });
            }
        }
    }
    let mut w = open_out(cfg.out.as_deref())?;
    {
        let mut wtr = csv::Writer::from_writer(&mut w);
        wtr.write_record([
            "dist",
            "rho",
            "M",
            "trials",
            "success_rate",
            "ci_low",
            "ci_high",
            "mean_error",
            "failed_runs",
            "seed",
        ])
        .map_err(robpoly_core::Error::from)?;
        for r in &rows {
            let dist = match r.dist {
                Distribution::Uniform => "uniform",
                Distribution::Chebyshev => "chebyshev",
            };
            wtr.write_record([
                dist.to_string(),
                r.rho.to_string(),
                r.samples.to_string(),
                r.success.trials.to_string(),
                format!("{:?}", r.success.rate),
                format!("{:?}", r.success.ci_low),
                format!("{:?}", r.success.ci_high),
                format!("{:?}", r.mean_error),
                r.errors.to_string(),
                r.seed.to_string(),
            ])
            .map_err(robpoly_core::Error::from)?;
        }
        wtr.flush()?;
    }
    w.flush()?;
    write_meta(cfg.out.as_deref(), &json!({"config": cfg, "success_threshold": threshold}))
}

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

pub fn verify_norms(cfg: &RunConfig) -> Result<(), CliError> {
    let max_d = cfg.degree.unwrap_or(5).max(1);
    let max_n = cfg.dim.unwrap_or(3).max(1);
    let mut checks = Vec::new();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 5));

    let mut sandwich_rows = Vec::new();
    let mut fails = 0;
    for _ in 0..cfg.trials {
        let d = rng.gen_range(1..=max_d);
        let n = rng.gen_range(1..=max_n);
        let r = check_sandwich(&MultiPoly::random(n, d, &mut rng));
        fails += (!r.pass) as usize;
        sandwich_rows.push((d, n, r.ratio, r.bound));
    }
    checks.push(Check {
        name: "sandwich".into(),
        pass: fails == 0,
        detail: format!("{fails}/{} random polynomials exceed (2d)^(2n)", cfg.trials),
    });

    let mut tight_rows = Vec::new();
    let mut worst = 0.0f64;
    for d in [3, 5, 7] {
        for n in [1, 2] {
            let t = check_tightness(d, n)?;
            worst = worst.max(t.rel_error);
            tight_rows.push((d, n, t.ratio, t.bound));
        }
    }
    checks.push(Check {
        name: "tightness".into(),
        pass: worst <= 1e-5,
        detail: format!("worst relative error {worst:.2e} against ((m+1)(m+2)/2)^n"),
    });

    let mut markov_worst = 0.0f64;
    for d in 1..=10 {
        let want = (d * d) as f64;
        markov_worst = markov_worst.max((markov_ratio(&chebyshev_t(d))? - want).abs() / want);
    }
    checks.push(Check {
        name: "markov".into(),
        pass: markov_worst <= 1e-6,
        detail: format!("‖T_d'‖/‖T_d‖ vs d², worst relative error {markov_worst:.2e}"),
    });

    let windows = [chebyshev_t(6), UniPoly::constant(1.0), UniPoly::monomial(vec![0.0, 1.0])];
    let window_ok = windows
        .iter()
        .map(check_univariate_window)
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .all(|w| w.holds);
    checks.push(Check {
        name: "univariate_window".into(),
        pass: window_ok,
        detail: "T_6, constant, x".into(),
    });

    let mut grad_fails = 0;
    for _ in 0..cfg.trials {
        let d = rng.gen_range(1..=max_d.min(4));
        let n = rng.gen_range(1..=max_n);
        grad_fails += (!check_gradient_bound(&MultiPoly::random(n, d, &mut rng), 33).holds) as usize;
    }
    checks.push(Check {
        name: "gradient".into(),
        pass: grad_fails == 0,
        detail: format!("{grad_fails}/{} exceed 2(nd)²‖p‖∞", cfg.trials),
    });

    let mut ortho = 0.0f64;
    for k in 1..=8 {
        let f = UniPoly::monomial((0..k).map(|_| rng.gen_range(-1.0..1.0)).collect());
        ortho = ortho.max(legendre_orthogonality_residual(k, &f));
    }
    checks.push(Check {
        name: "legendre_orthogonality".into(),
        pass: ortho <= 1e-9,
        detail: format!("largest |∫P_k f| = {ortho:.2e} for deg f < k ≤ 8"),
    });

    let all_pass = checks.iter().all(|c| c.pass);
    let table: Vec<Value> = checks
        .iter()
        .map(|c| json!({"check": c.name, "pass": c.pass, "detail": c.detail}))
        .collect();
    let tightness: Vec<Value> = tight_rows
        .iter()
        .map(|(d, n, r, b)| json!({"d": d, "n": n, "ratio": r, "bound": b}))
        .collect();
    let summary = json!({"config": cfg, "all_pass": all_pass, "checks": table, "tightness": tightness});
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        write_ratio_csv(&sandwich_rows, BufWriter::new(File::create(dir.join("sandwich.csv"))?))?;
        write_ratio_csv(&tight_rows, BufWriter::new(File::create(dir.join("tightness.csv"))?))?;
        write_json(Some(&dir.join("summary.json")), &summary)?;
    }
    write_json(None, &summary)?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Failed("one or more norm checks failed".into()))
    }
}

pub fn lowerbound(cfg: &RunConfig) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let details: Value = match cfg.kind {
        LowerBoundKind::Uniform => {
            let d = cfg.degree.unwrap_or(4);
            let n = cfg.dim.unwrap_or(2);
            let c = cfg.c.unwrap_or(1.5);
            let pair = build_uniform_adversary(d, n, c)?;
            let base = avoidance_sample_count(d, n, c);
            let grid = if cfg.samples_grid.is_empty() {
                let mut g = vec![0, base / 2, base, 2 * base, 4 * base, 8 * base];
                g.dedup();
                g
            } else {
                cfg.samples_grid.clone()
            };
            let est = default_estimator(d, n);
            let mut reports = Vec::new();
            for (i, &m) in grid.iter().enumerate() {
                let r = run_indistinguishability_experiment(&pair, m, cfg.trials, derive_seed(cfg.seed, i as u64), &est)?;
                rows.push((m, r.failure));
                reports.push(r);
            }
            json!({"d": d, "n": n, "c": c, "alpha": pair.alpha, "corner_gap": pair.corner_gap,
                   "avoidance_count": base, "runs": reports})
        }
        LowerBoundKind::Linear => {
            let n = cfg.dim.unwrap_or(200);
            let c = cfg.c.unwrap_or(2.0);
            let grid = if cfg.samples_grid.is_empty() {
                vec![1, 2, 5, 10, 20, 50]
            } else {
                cfg.samples_grid.clone()
            };
            let mut reports = Vec::new();
            for (i, &m) in grid.iter().enumerate() {
                let r = run_linear_lb_experiment(n, cfg.sigma, c, m, cfg.trials, cfg.dist, derive_seed(cfg.seed, i as u64))?;
                rows.push((m, r.failure));
                reports.push(r);
            }
            json!({"n": n, "c": c, "sigma": cfg.sigma, "runs": reports})
        }
    };
    let mut w = open_out(cfg.out.as_deref())?;
    write_failure_csv(&rows, &mut w)?;
    w.flush()?;
    let meta = json!({"config": cfg, "details": details});
    write_meta(cfg.out.as_deref(), &meta)?;
    if cfg.out.is_some() {
        write_json(None, &meta)?;
    }
    Ok(())
}
