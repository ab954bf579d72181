//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use whs::cutoff::{cutoff_multiplier, required_points};
use whs::data::{DataSpec, ForcingSpec};
use whs::gevrey::{bracket_norm, omega_h, weight_identity};
use whs::harness::{
    convergence_study, cost_accuracy, default_ladder, run_rung, stability_study, CostLimits, StudyOptions,
};
use whs::linalg::{hermitian_eigenvalues, hermiticity_defect};
use whs::model::{real_matrix, FnCoefficients};
use whs::operator::estimate_cbar;
use whs::problems::PRESET_NAMES;
use whs::scheme::{validate_constraints, RunOptions, ZeroForcing};
use whs::symmetrizer::{fit_theta, probe_sweep, random_points, SymmetrizerConfig};
use whs::{make_grid, preset, run, ConstraintKind, Error, SchemeConfig, SystemModel};

use common::{cutoff, dense_trajectory, relative_error, to_vector, C};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail = format!("{detail}; runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64());
        }
    }
    println!("[{}] {name} ({:.2}s): {detail}", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    pass
}

fn oracle_equivalence() -> Outcome {
    let cases: [(&str, usize, Option<&str>); 6] = [
        ("jordan", 64, None),
        ("degwave:a=t2", 64, None),
        ("degwave:a=1", 64, None),
        ("varsmooth", 64, None),
        ("varsmooth", 64, Some("bump:amp=0.5,freq=3,center=0.5,width=0.6,comp=1")),
        ("blockjordan", 32, None),
    ];
    let steps = 16;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, n, forcing) in cases {
        let p = preset(name).unwrap();
        assert!(n * p.model.m() <= 128);
        let grid = make_grid(1, n, p.defaults.half_period).unwrap();
        let h = common::finest_resolved(&grid).max(1.0 / 8.0);
        let mut config = p.config(h, p.defaults.beta * h);
        config.cbar = estimate_cbar(&p.model, &grid, steps as f64 * config.k).unwrap().value;
        let g = p.data(&grid).unwrap();
        let forcing = match forcing {
            Some(s) => ForcingSpec::parse(s).unwrap(),
            None => ForcingSpec::Zero,
        };
        let traj = run(&p.model, &g, &forcing, &config, steps, RunOptions::default()).unwrap();
        assert!(traj.completed());
        let dense = dense_trajectory(&p.model, &grid, &g, &forcing, h, config.k, steps);
        assert_eq!(traj.states.len(), steps + 1);
        let err = traj
            .states
            .iter()
            .map(|(n, u)| relative_error(&to_vector(u), &dense[*n]))
            .fold(0.0, f64::max);
        worst = worst.max(err);
        parts.push(format!("{name}{} {err:.1e}", if forcing == ForcingSpec::Zero { "" } else { "+f" }));
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.2e} <= 1e-9 [{}]", parts.join(", ")))
}

fn cayley_unitarity() -> Outcome {
    let a = real_matrix(2, &[0.0, 1.0, 1.0, 0.0]);
    let b = real_matrix(2, &[0.0, 0.7, -0.7, 0.0]);
    let model = SystemModel::new("skew", Arc::new(FnCoefficients::constant(vec![a], b)), 0, 0.0).unwrap();
    let grid = make_grid(1, 64, std::f64::consts::PI).unwrap();
    let h = 0.125;
    let steps = 1000;
    let mut config = SchemeConfig::new(0, h, 0.0);
    config.cbar = estimate_cbar(&model, &grid, 0.0).unwrap().value;
    config.k = h / (2.0 * config.cbar);
    config.a = 1e-3;
    config.tau = 1.0;
    config.ell = 1.0;
    let g = DataSpec::Gauss { width: 0.7 }.build(&grid, 2, config.rho);
    let traj = run(&model, &g, &ZeroForcing, &config, steps, RunOptions { store_every: 1, weights: false }).unwrap();
    assert!(traj.completed());
    let worst = traj
        .diagnostics
        .windows(2)
        .map(|w| (w[1].l2_norm / w[0].l2_norm - 1.0).abs())
        .fold(0.0, f64::max);
    let bound = 10.0 * config.neumann_tol;
    outcome(worst <= bound, format!("max per-step |ratio - 1| = {worst:.2e} <= {bound:.0e} over {steps} steps"))
}

fn spectrum_invariant() -> Outcome {
    let mut worst = 0.0f64;
    let mut runs = 0;
    let mut cases: Vec<(&str, ForcingSpec)> = PRESET_NAMES.iter().map(|n| (*n, ForcingSpec::Zero)).collect();
    cases.push(("degwave:a=t2,t0=0.25", ForcingSpec::Zero));
    cases.push(("varsmooth", ForcingSpec::parse("bump:amp=1,freq=2,width=0.3").unwrap()));
    for (name, forcing) in cases {
        let p = preset(name).unwrap();
        let ladder = if p.model.d() == 1 { default_ladder(3) } else { vec![0.25, 0.125, 0.0625] };
        for h in ladder {
            let grid = p.grid(h).unwrap();
            let opts = RunOptions { store_every: 1, weights: false };
            let r = run_rung(&p, &grid, h, p.defaults.beta, p.horizon(), &forcing, opts).unwrap();
            let mask = cutoff_multiplier(&grid, h, 2).unwrap();
            assert_eq!(r.trajectory.states.len(), r.steps + 1);
            for (_, u) in &r.trajectory.states {
                worst = worst.max(u.max_outside(&mask));
            }
            runs += 1;
        }
    }
    outcome(worst == 0.0, format!("max |u_q| outside supp chi_2h = {worst:e} over {runs} runs, every stored state"))
}

fn constraint_ledger() -> Outcome {
    // Passes every constraint for 10 steps.
    let base = || {
        let mut c = SchemeConfig::new(1, 0.1, 0.02);
        c.ell = 10.0;
        c
    };
    let mut cases: Vec<(ConstraintKind, SchemeConfig, usize)> = Vec::new();
    let mut c = base();
    c.h = 0.2;
    cases.push((ConstraintKind::CutoffBelowShift, c, 10));
    let mut c = base();
    c.cbar = 3.0;
    cases.push((ConstraintKind::Cfl, c, 10));
    let mut c = base();
    c.k = 0.05;
    cases.push((ConstraintKind::WeightStep, c, 10));
    let mut c = base();
    c.b = 2.0;
    cases.push((ConstraintKind::Damping, c, 10));
    let mut c = base();
    c.a = 2.0;
    c.k = 0.01;
    cases.push((ConstraintKind::Decay, c, 10));
    cases.push((ConstraintKind::Horizon, base(), 100));

    let mut ok = validate_constraints(&base(), 10).unwrap().pass();
    let mut named = Vec::new();
    let model = preset("jordan").unwrap().model;
    let grid = make_grid(1, 64, std::f64::consts::PI).unwrap();
    let g = DataSpec::Gauss { width: 1.0 }.build(&grid, 2, 0.875);
    for (kind, config, steps) in &cases {
        let report = validate_constraints(config, *steps).unwrap();
        let only = report.violations().map(|v| v.kind).collect::<Vec<_>>() == vec![*kind];
        let err = run(&model, &g, &ZeroForcing, config, *steps, RunOptions::default()).unwrap_err();
        let hit = matches!(err, Error::Constraint { kind: k, .. } if k == *kind);
        let msg = err.to_string().contains(&format!("{} violated", kind.as_str()));
        ok &= only && hit && msg;
        named.push(format!("{}{}", kind.as_str(), if only && hit && msg { "" } else { " (MISSING)" }));
    }
    // k_max for h = 0.1, ell = 10, k = 0.05, a = 1, rho = 7/8.
    let mut c = base();
    c.k = 0.05;
    let k_max = validate_constraints(&c, 0).unwrap().k_max;
    let expect = 2f64.ln() / 3.0 * 0.1f64.powf(0.875);
    ok &= (k_max - expect).abs() < 1e-12 && (k_max - 0.0308).abs() < 5e-5;
    outcome(ok, format!("{} constraints rejected with named errors [{}]; k_max = {k_max:.4}", cases.len(), named.join("; ")))
}

fn weight_identity_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let (mut worst, mut bound_ok, mut checked) = (0.0f64, true, 0usize);
    let mut configs = 0;
    let steps = 20;
    while configs < 5 {
        let theta = rng.gen_range(0..=2u32);
        let h = 2f64.powf(-rng.gen_range(3.0..6.0));
        let mut c = SchemeConfig::new(theta, h, 0.0);
        c.ell = rng.gen_range(1.0..1.0 / h);
        c.a = rng.gen_range(0.1..2.0);
        c.tau = rng.gen_range(0.5..2.0);
        c.k = rng.gen_range(0.2..1.0) * validate_constraints(&c, steps).unwrap().k_max;
        if !validate_constraints(&c, steps).unwrap().pass() {
            continue;
        }
        configs += 1;
        let spec = c.weight(0.0, true);
        let grid = make_grid(1, required_points(std::f64::consts::PI, h), std::f64::consts::PI).unwrap();
        for n in 0..steps {
            let t_n = n as f64 * c.k;
            for &xi in grid.frequency_norms() {
                let sigma = bracket_norm(xi, c.ell).powf(c.rho);
                let chi = cutoff(h * xi);
                let omega = omega_h(xi, c.a, c.k, c.rho, c.ell, h);
                // W^n = e^{(tau - a t_n) sigma chi}, W^{n+1} = W^n e^{-a k sigma chi}.
                let w_n = ((c.tau - c.a * t_n) * sigma * chi).exp();
                let x = c.a * c.k * sigma * chi;
                let lhs = w_n * (-x).exp_m1() / c.k;
                let rhs = -c.a * omega * chi * (w_n * (-x).exp() + w_n);
                let scale = lhs.abs().max(rhs.abs());
                let res = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
                let lib = weight_identity(xi, t_n, c.k, &spec).unwrap().relative_residual();
                worst = worst.max(res).max(lib);
                bound_ok &= omega >= sigma / 4.0 && omega <= sigma;
                checked += 1;
            }
        }
    }
    outcome(
        worst <= 1e-13 && bound_ok,
        format!("5 configs, {checked} (xi, t_n) points: max residual {worst:.2e} <= 1e-13, omega in [sigma/4, sigma]: {bound_ok}"),
    )
}

fn symmetrizer_suite() -> Outcome {
    let probes = 200;
    let (mut lyap, mut rih, mut herm) = (0.0f64, 0.0f64, 0.0f64);
    let mut pd = true;
    let mut stability = Vec::new();
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let p = preset(name).unwrap();
        let mut mins = Vec::new();
        for ell in [10.0, 20.0, 40.0] {
            let h = 1.0 / ell;
            let mut sc = p.config(h, 0.0);
            sc.ell = ell;
            let cfg = SymmetrizerConfig { quadrature_check: false, ..SymmetrizerConfig::from_scheme(&sc) };
            let xi_max = 2.0 * std::f64::consts::SQRT_2 / h;
            let pts = random_points(&p.model, probes, 1000 + i as u64, 1.0, (0.5, xi_max), cfg.tau_bar);
            let res = probe_sweep(&p.model, &pts, &cfg).unwrap();
            let mut c_min = f64::INFINITY;
            for r in &res {
                let bs = cfg.b * r.sigma;
                let id = whs::linalg::identity(r.r.nrows());
                let l = r.m.adjoint() * &r.r + &r.r * &r.m + &id * C::from(bs);
                lyap = lyap.max(l.norm() / bs);
                let ih = &r.h_trunc * C::i();
                let rr = &r.r * &ih + ih.adjoint() * &r.r - (&id * C::from(-bs) + &r.r * C::from(2.0 * bs));
                rih = rih.max(rr.norm() / (bs * r.r.norm().max(1.0)));
                herm = herm.max(hermiticity_defect(&r.r));
                let min_eig = hermitian_eigenvalues(&r.r)[0];
                pd &= min_eig > 0.0;
                let br = bracket_norm(r.point.xi.iter().map(|v| v * v).sum::<f64>().sqrt(), ell);
                c_min = c_min.min(min_eig * br.powf(2.0 * cfg.nu));
            }
            mins.push(c_min);
        }
        let lo = mins.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mins.iter().cloned().fold(0.0, f64::max);
        stability.push((name.to_string(), lo, hi / lo));
    }

    // Scalar x-independent speed: M = i eta - b sigma with eta real, so R = 1/2.
    let speed = |t: f64, _: &[f64]| real_matrix(1, &[1.0 + 0.5 * t.sin()]);
    let scalar = FnCoefficients::new(1, vec![Box::new(speed)], Box::new(|_, _| real_matrix(1, &[0.0])), true);
    let model = SystemModel::new("scalar", Arc::new(scalar), 0, 2.0).unwrap();
    let sc = SchemeConfig::new(0, 0.1, 0.0);
    let cfg = SymmetrizerConfig::from_scheme(&sc);
    let pts = random_points(&model, probes, 77, 1.0, (0.5, 28.0), cfg.tau_bar);
    let scalar_err = probe_sweep(&model, &pts, &cfg)
        .unwrap()
        .iter()
        .map(|r| (r.r[(0, 0)] - C::from(0.5)).norm())
        .fold(0.0, f64::max);

    let c_ok = stability.iter().all(|(_, lo, ratio)| *lo > 0.0 && *ratio < 3.0);
    let pass = lyap <= 1e-9 && rih <= 1e-9 && herm <= 1e-14 && pd && c_ok && scalar_err <= 1e-14;
    let c_desc: Vec<String> = stability.iter().map(|(n, lo, ratio)| format!("{n} c>={lo:.3} x{ratio:.2}")).collect();
    outcome(
        pass,
        format!(
            "{probes} probes x 3 ell x {} presets: lyapunov {lyap:.1e}, RiH {rih:.1e}, PD {pd}, c_est [{}], scalar |R - 1/2| {scalar_err:.1e}",
            PRESET_NAMES.len(),
            c_desc.join(", ")
        ),
    )
}

fn theta_regularity() -> Outcome {
    let samples = 64;
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, lo, hi) in [
        ("jordan", 0.8, 1.2),
        ("blockjordan", 0.8, 1.2),
        ("degwave:a=1", f64::NEG_INFINITY, 0.2),
        ("varsmooth", f64::NEG_INFINITY, 0.2),
        ("sym2d", f64::NEG_INFINITY, 0.2),
    ] {
        let fit = fit_theta(&preset(name).unwrap().model, samples, 1.0).unwrap();
        ok &= fit.theta_hat >= lo && fit.theta_hat <= hi;
        parts.push(format!("{name} {:.3}", fit.theta_hat));
    }
    outcome(ok, format!("theta_hat [{}]; Jordan in [0.8, 1.2], symmetric <= 0.2", parts.join(", ")))
}

fn convergence_rate() -> Outcome {
    let ladder = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let opts = StudyOptions::default();
    let jordan = convergence_study(&preset("jordan").unwrap(), &ladder, &opts).unwrap();
    let vs = convergence_study(&preset("varsmooth").unwrap(), &ladder, &opts).unwrap();
    let jw = jordan.rate_weighted.unwrap();
    let vp = vs.rate_plain.unwrap();
    let pass = jw.rate >= 0.85 && jw.r2 >= 0.95 && vp.rate >= 0.85;
    outcome(
        pass,
        format!(
            "jordan weighted rate {:.3} (R^2 {:.4}); varsmooth plain rate {:.3} (R^2 {:.4})",
            jw.rate, jw.r2, vp.rate, vp.r2
        ),
    )
}

fn stability_constant() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut names: Vec<&str> = PRESET_NAMES.to_vec();
    names.push("degwave:a=t2,t0=0.25");
    for name in names {
        let p = preset(name).unwrap();
        let ladder = if p.model.d() == 1 { default_ladder(3) } else { vec![0.25, 0.125, 0.0625] };
        let s = stability_study(&p, &ladder, &StudyOptions::default()).unwrap();
        let finite = s.rows.iter().all(|r| r.c_fit.is_finite() && r.c_fit > 0.0);
        ok &= finite && s.spread < 2.0;
        parts.push(format!("{name} {:.3}", s.spread));
    }
    outcome(ok, format!("max/min C_fit over 3 rungs < 2 [{}]", parts.join(", ")))
}

fn cost_polynomial() -> Outcome {
    let p = preset("varsmooth").unwrap();
    let r = cost_accuracy(&p, &[1e-2, 3e-3, 1e-3], &StudyOptions::default(), CostLimits::default()).unwrap();
    let skipped = r.rows.iter().filter(|row| row.skipped.is_some()).count();
    let Some(fit) = r.fit else {
        return outcome(false, format!("no fit ({skipped} rungs skipped)"));
    };
    let bound = p.model.d() as f64 + 2.0;
    outcome(
        skipped == 0 && fit.rate <= bound && fit.r2 >= 0.9,
        format!("slope {:.3} <= {bound}, R^2 {:.4} >= 0.9", fit.rate, fit.r2),
    )
}

fn main() {
    let results = [
        criterion("oracle equivalence", Some(Duration::from_secs(10)), oracle_equivalence),
        criterion("Cayley unitarity", None, cayley_unitarity),
        criterion("spectrum invariant", None, spectrum_invariant),
        criterion("constraint ledger", None, constraint_ledger),
        criterion("weight identity", None, weight_identity_bounds),
        criterion("symmetrizer suite", None, symmetrizer_suite),
        criterion("theta regularity", Some(Duration::from_secs(60)), theta_regularity),
        criterion("convergence rate", Some(Duration::from_secs(300)), convergence_rate),
        criterion("stability constant", None, stability_constant),
        criterion("cost polynomial", None, cost_polynomial),
    ];
    let failed = results.iter().filter(|r| !**r).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
