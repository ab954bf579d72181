//! Experiment drivers: refinement studies against reference solutions,
//! stability audits of weighted energies, and cost-accuracy scaling.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::ForcingSpec;
use crate::error::{Error, Result};
use crate::gevrey::{weighted_norm, WeightSpec};
use crate::grid::{make_grid, GridSpec, SpectralField};
use crate::operator::estimate_cbar;
use crate::problems::ProblemPreset;
use crate::scheme::{run, RunOptions, SchemeConfig, Trajectory};
use crate::symmetrizer::least_squares;

/// The refinement ladder `1/8, 1/16, ...` with `rungs` entries.
pub fn default_ladder(rungs: usize) -> Vec<f64> {
    (0..rungs).map(|i| 0.125 / 2f64.powi(i as i32)).collect()
}

/// Least-squares slope of `log y` against `log x` with its `R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits `log y = rate log x + c` over rows with positive finite values;
/// `None` with fewer than three usable rows.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Option<RateFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    if lx.len() < 3 {
        return None;
    }
    let (rate, intercept, rms) = least_squares(&lx, &ly);
    let mean = ly.iter().sum::<f64>() / ly.len() as f64;
    let tss: f64 = ly.iter().map(|y| (y - mean).powi(2)).sum();
    let rss = rms * rms * ly.len() as f64;
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Some(RateFit { rate, intercept, r2, points: lx.len() })
}

/// Steps and step size reaching `horizon` with `k <= beta h`.
pub fn step_plan(horizon: f64, beta: f64, h: f64) -> Result<(usize, f64)> {
    if !(horizon > 0.0 && beta > 0.0 && h > 0.0) || !(horizon / (beta * h)).is_finite() {
        return Err(Error::InvalidArgument(format!("bad step plan T={horizon} beta={beta} h={h}")));
    }
    let n = (horizon / (beta * h) - 1e-9).ceil().max(1.0) as usize;
    Ok((n, horizon / n as f64))
}

/// Smallest even `n' >= n` of the form `2^a 3^b 5^c`.
pub fn next_smooth(n: usize) -> usize {
    let mut c = n.max(2) + n % 2;
    loop {
        let mut v = c;
        for p in [2, 3, 5] {
            while v.is_multiple_of(p) {
                v /= p;
            }
        }
        if v == 1 {
            return c;
        }
        c += 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyRow {
    pub h: f64,
    pub k: f64,
    pub ell: f64,
    pub n_g: usize,
    pub steps: usize,
    /// `|| <D>^-nu e^{(tau - a t_n)<D>^rho} (u(t_n) - u^n) ||`.
    pub error_weighted: f64,
    pub error_plain: f64,
    /// `error_weighted / ((k + h) || <D>^{2+nu} e^{tau <D>^rho} g ||)`.
    pub fitted_c: f64,
    /// Wall seconds of the run.
    pub runtime: f64,
    pub fft_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub model: String,
    pub horizon: f64,
    /// Sorted by `h` descending.
    pub rows: Vec<StudyRow>,
    pub rate_weighted: Option<RateFit>,
    pub rate_plain: Option<RateFit>,
    /// Smallest `C` with `error_weighted <= C (k + h) ||g||_{2+nu}` on every row.
    pub c_weighted: f64,
    /// Smallest `C` with `error_plain <= C (k + h) h^-nu ||g||_{2+nu}` on every row.
    pub c_plain: f64,
    /// `h` of the self-convergence reference, `None` for closed-form references.
    pub reference_h: Option<f64>,
}

pub const STUDY_HEADER: &str = "h,k,ell,N_g,error_weighted,error_plain,fitted_C,runtime,fft_count";

fn fmt_rate(f: &Option<RateFit>) -> String {
    match f {
        Some(f) => format!("{:.6},{:.6}", f.rate, f.r2),
        None => "nan,nan".into(),
    }
}

impl StudyResult {
    /// CSV with a fixed header and a trailing `# rate` line. The runtime
    /// column is left empty unless `timing` is set, so output is reproducible.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::new();
        writeln!(out, "{STUDY_HEADER}").unwrap();
        for r in &self.rows {
            let rt = if timing { format!("{:.6}", r.runtime) } else { String::new() };
            writeln!(
                out,
                "{},{:.12e},{},{},{:.12e},{:.12e},{:.12e},{rt},{}",
                r.h, r.k, r.ell, r.n_g, r.error_weighted, r.error_plain, r.fitted_c, r.fft_count
            )
            .unwrap();
        }
        writeln!(
            out,
            "# rate weighted,r2,plain,r2 = {},{}",
            fmt_rate(&self.rate_weighted),
            fmt_rate(&self.rate_plain)
        )
        .unwrap();
        out
    }
}

/// Options shared by the drivers; `None` fields take the preset defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub beta: Option<f64>,
    pub horizon: Option<f64>,
    pub forcing: ForcingSpec,
    /// Self-convergence reference resolution factor for presets without a
    /// closed form.
    pub reference_factor: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions { beta: None, horizon: None, forcing: ForcingSpec::Zero, reference_factor: 4.0 }
    }
}

/// One scheme run with the preset constants and an estimated `C_bar`.
pub struct RungRun {
    pub grid: GridSpec,
    pub config: SchemeConfig,
    pub steps: usize,
    pub trajectory: Trajectory,
    pub runtime: f64,
    pub fft_count: u64,
}

/// Runs `preset` at mesh width `h` on `grid` to `horizon`. The FFT counter
/// covers the time stepping only.
pub fn run_rung(
    preset: &ProblemPreset,
    grid: &GridSpec,
    h: f64,
    beta: f64,
    horizon: f64,
    forcing: &ForcingSpec,
    opts: RunOptions,
) -> Result<RungRun> {
    let (steps, k) = step_plan(horizon, beta, h)?;
    let mut config = preset.config(h, k);
    config.cbar = estimate_cbar(&preset.model, grid, horizon)?.value;
    let g = preset.data(grid)?;
    grid.reset_fft_count();
    let start = Instant::now();
    let trajectory = run(&preset.model, &g, forcing, &config, steps, opts)?;
    let runtime = start.elapsed().as_secs_f64();
    if let Some((n, e)) = &trajectory.failure {
        return Err(Error::InvalidArgument(format!("run failed at step {n}: {e}")));
    }
    Ok(RungRun { grid: grid.clone(), config, steps, trajectory, runtime, fft_count: grid.fft_count() })
}

fn weight_spec(config: &SchemeConfig, sigma: f64) -> WeightSpec {
    config.weight(sigma, false)
}

/// Convergence of the scheme along `k = beta h` against the closed form, or
/// against a run at `h_min / reference_factor` for x-dependent presets.
pub fn convergence_study(preset: &ProblemPreset, ladder: &[f64], opts: &StudyOptions) -> Result<StudyResult> {
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("empty ladder".into()));
    }
    let mut hs = ladder.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let beta = opts.beta.unwrap_or(preset.defaults.beta);
    let horizon = opts.horizon.unwrap_or_else(|| preset.horizon());
    let closed_form = preset.has_exact() && opts.forcing == ForcingSpec::Zero;
    let no_store = RunOptions { store_every: usize::MAX, weights: false };

    let reference = |h_ref: f64| -> Result<SpectralField> {
        let grid = preset.grid(h_ref)?;
        Ok(run_rung(preset, &grid, h_ref, beta, horizon, &opts.forcing, no_store)?
            .trajectory
            .final_state()
            .clone())
    };
    let h_ref = hs[hs.len() - 1] / opts.reference_factor;
    let (reference, runs) = rayon::join(
        || if closed_form { Ok(None) } else { reference(h_ref).map(Some) },
        || {
            hs.par_iter()
                .map(|&h| {
                    let grid = preset.grid(h)?;
                    run_rung(preset, &grid, h, beta, horizon, &opts.forcing, no_store)
                })
                .collect::<Result<Vec<_>>>()
        },
    );
    let (reference, runs) = (reference?, runs?);

    let mut rows = Vec::with_capacity(runs.len());
    let (mut c_weighted, mut c_plain) = (0.0f64, 0.0f64);
    for (h, r) in hs.iter().zip(&runs) {
        let t_n = r.steps as f64 * r.config.k;
        let u_h = r.trajectory.final_state();
        let (exact, approx) = match &reference {
            None => (preset.exact(&preset.data(&r.grid)?, t_n)?, u_h.clone()),
            Some(u_ref) => (u_ref.clone(), u_h.resample(u_ref.grid())?),
        };
        let g = preset.data(exact.grid())?;
        let diff = exact.sub(&approx)?;
        let error_weighted = weighted_norm(&diff, t_n, &weight_spec(&r.config, -r.config.nu))?.ln.exp();
        let error_plain = diff.norm();
        let data_norm = weighted_norm(&g, 0.0, &weight_spec(&r.config, 2.0 + r.config.nu))?.ln.exp();
        let scale = (r.config.k + h) * data_norm;
        let fitted_c = error_weighted / scale;
        c_weighted = c_weighted.max(fitted_c);
        c_plain = c_plain.max(error_plain / (scale * h.powf(-r.config.nu)));
        rows.push(StudyRow {
            h: *h,
            k: r.config.k,
            ell: r.config.ell,
            n_g: r.grid.points_per_dim(),
            steps: r.steps,
            error_weighted,
            error_plain,
            fitted_c,
            runtime: r.runtime,
            fft_count: r.fft_count,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ew: Vec<f64> = rows.iter().map(|r| r.error_weighted).collect();
    let ep: Vec<f64> = rows.iter().map(|r| r.error_plain).collect();
    Ok(StudyResult {
        model: preset.name.clone(),
        horizon,
        rate_weighted: fit_rate(&xs, &ew),
        rate_plain: fit_rate(&xs, &ep),
        rows,
        c_weighted,
        c_plain,
        reference_h: reference.as_ref().map(|_| h_ref),
    })
}

/// Per-step energies of a stability audit, all as natural logs of squared norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditStep {
    pub n: usize,
    pub t: f64,
    /// `ln || <D>^-nu e^{(tau - a t_n)<D>^rho} u^n ||^2`.
    pub ln_lhs: f64,
    /// `ln_lhs` plus the dissipation sum `k a sum_{p <= n} || <D>^{2 nu} ... u^p ||^2`.
    pub ln_lhs_dissipative: f64,
    /// `ln (|| <D>^nu e^{tau <D>^rho} g ||^2 + k sum_{p < n} || <D>^-nu ... f^p ||^2)`.
    pub ln_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    /// `max_n LHS_n / RHS_n` without the dissipation sum.
    pub c_fit: f64,
    /// Same with the dissipation sum on the left.
    pub c_fit_dissipative: f64,
    pub worst_step: usize,
    pub forcing_band_limited: bool,
    pub steps: Vec<AuditStep>,
}

fn ln_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Fitted constants of the discrete stability estimate along `traj`.
pub fn stability_audit(traj: &Trajectory) -> Result<AuditReport> {
    let cfg = &traj.config;
    if traj.diagnostics.is_empty() || traj.ln_data.is_nan() {
        return Err(Error::InvalidArgument("trajectory was run without weighted diagnostics".into()));
    }
    let ln_k = cfg.k.ln();
    let ln_ka = (cfg.k * cfg.a).ln();
    let mut ln_rhs = 2.0 * traj.ln_data;
    let mut ln_diss = f64::NEG_INFINITY;
    let mut steps = Vec::with_capacity(traj.diagnostics.len());
    let (mut c_fit, mut c_diss, mut worst) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
    for (i, d) in traj.diagnostics.iter().enumerate() {
        if i > 0 {
            let f = traj.diagnostics[i - 1].ln_forcing;
            if f > f64::NEG_INFINITY {
                ln_rhs = ln_add(ln_rhs, ln_k + 2.0 * f);
            }
        }
        if cfg.a > 0.0 && cfg.k > 0.0 {
            ln_diss = ln_add(ln_diss, ln_ka + 2.0 * d.ln_dissipation);
        }
        let ln_lhs = 2.0 * d.ln_energy;
        let ln_lhs_dissipative = ln_add(ln_lhs, ln_diss);
        if ln_lhs - ln_rhs > c_fit {
            c_fit = ln_lhs - ln_rhs;
            worst = d.n;
        }
        c_diss = c_diss.max(ln_lhs_dissipative - ln_rhs);
        steps.push(AuditStep { n: d.n, t: d.t, ln_lhs, ln_lhs_dissipative, ln_rhs });
    }
    Ok(AuditReport {
        c_fit: c_fit.exp(),
        c_fit_dissipative: c_diss.exp(),
        worst_step: worst,
        forcing_band_limited: traj.forcing_band_limited,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRow {
    pub h: f64,
    pub k: f64,
    pub ell: f64,
    pub n_g: usize,
    pub steps: usize,
    pub c_fit: f64,
    pub c_fit_dissipative: f64,
    pub runtime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityStudy {
    pub model: String,
    pub horizon: f64,
    pub rows: Vec<StabilityRow>,
    /// `max c_fit / min c_fit` over the rows.
    pub spread: f64,
    pub spread_dissipative: f64,
}

pub const STABILITY_HEADER: &str = "h,k,ell,N_g,steps,c_fit,c_fit_dissipative,runtime";

impl StabilityStudy {
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::new();
        writeln!(out, "{STABILITY_HEADER}").unwrap();
        for r in &self.rows {
            let rt = if timing { format!("{:.6}", r.runtime) } else { String::new() };
            writeln!(
                out,
                "{},{:.12e},{},{},{},{:.12e},{:.12e},{rt}",
                r.h, r.k, r.ell, r.n_g, r.steps, r.c_fit, r.c_fit_dissipative
            )
            .unwrap();
        }
        writeln!(out, "# spread = {:.6},{:.6}", self.spread, self.spread_dissipative).unwrap();
        out
    }
}

fn spread(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = v.fold(f64::INFINITY, f64::min);
    max / min
}

/// Stability audits of the preset along a ladder.
pub fn stability_study(preset: &ProblemPreset, ladder: &[f64], opts: &StudyOptions) -> Result<StabilityStudy> {
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("empty ladder".into()));
    }
    let mut hs = ladder.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let beta = opts.beta.unwrap_or(preset.defaults.beta);
    let horizon = opts.horizon.unwrap_or_else(|| preset.horizon());
    let opts_run = RunOptions { store_every: usize::MAX, weights: true };
    let rows = hs
        .par_iter()
        .map(|&h| {
            let grid = preset.grid(h)?;
            let r = run_rung(preset, &grid, h, beta, horizon, &opts.forcing, opts_run)?;
            let audit = stability_audit(&r.trajectory)?;
            Ok(StabilityRow {
                h,
                k: r.config.k,
                ell: r.config.ell,
                n_g: grid.points_per_dim(),
                steps: r.steps,
                c_fit: audit.c_fit,
                c_fit_dissipative: audit.c_fit_dissipative,
                runtime: r.runtime,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityStudy {
        model: preset.name.clone(),
        horizon,
        spread: spread(rows.iter().map(|r| r.c_fit)),
        spread_dissipative: spread(rows.iter().map(|r| r.c_fit_dissipative)),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub eps: f64,
    pub h: f64,
    pub k: f64,
    pub n_g: usize,
    pub steps: usize,
    /// `|| u_h - u_{2h} || / || u_h ||` at the final time.
    pub error: f64,
    pub fft_count: u64,
    /// `fft_count N_g^d log2 N_g^d`.
    pub fft_proxy: f64,
    pub runtime: f64,
    /// Reason the rung was not run.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub model: String,
    pub horizon: f64,
    pub rows: Vec<CostRow>,
    /// Fit of `fft_proxy` against `1/eps` over completed rows.
    pub fit: Option<RateFit>,
}

pub const COST_HEADER: &str = "eps,h,k,N_g,steps,error,fft_count,fft_proxy,runtime,skipped";

impl CostReport {
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::new();
        writeln!(out, "{COST_HEADER}").unwrap();
        for r in &self.rows {
            let rt = if timing { format!("{:.6}", r.runtime) } else { String::new() };
            writeln!(
                out,
                "{},{:.12e},{:.12e},{},{},{:.12e},{},{:.6e},{rt},{}",
                r.eps,
                r.h,
                r.k,
                r.n_g,
                r.steps,
                r.error,
                r.fft_count,
                r.fft_proxy,
                r.skipped.as_deref().unwrap_or("")
            )
            .unwrap();
        }
        writeln!(out, "# slope,r2 = {}", fmt_rate(&self.fit)).unwrap();
        out
    }
}

/// Limits for [`cost_accuracy`]; larger rungs are reported as skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostLimits {
    pub max_points: usize,
    pub max_steps: usize,
}

impl Default for CostLimits {
    fn default() -> Self {
        CostLimits { max_points: 1 << 20, max_steps: 200_000 }
    }
}

/// Cost of reaching accuracy `eps` with `h = eps^{1/(1-nu)}`, `k = beta h`, on
/// 5-smooth grids; accuracy is measured against a companion run at `2h`.
pub fn cost_accuracy(
    preset: &ProblemPreset,
    eps_ladder: &[f64],
    opts: &StudyOptions,
    limits: CostLimits,
) -> Result<CostReport> {
    if eps_ladder.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::InvalidArgument("eps must lie in (0, 1)".into()));
    }
    let mut eps = eps_ladder.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let beta = opts.beta.unwrap_or(preset.defaults.beta);
    let horizon = opts.horizon.unwrap_or(0.25);
    let nu = preset.config(1.0, 0.0).nu;
    let d = preset.model.d();
    let no_store = RunOptions { store_every: usize::MAX, weights: false };
    let smooth_grid = |h: f64| -> Result<GridSpec> {
        let base = preset.grid(h)?.points_per_dim();
        make_grid(d, next_smooth(base), preset.defaults.half_period)
    };

    let rows = eps
        .par_iter()
        .map(|&e| -> Result<CostRow> {
            let h = e.powf(1.0 / (1.0 - nu));
            let grid = smooth_grid(h)?;
            let (steps, k) = step_plan(horizon, beta, h)?;
            let mut row = CostRow {
                eps: e,
                h,
                k,
                n_g: grid.points_per_dim(),
                steps,
                error: f64::NAN,
                fft_count: 0,
                fft_proxy: f64::NAN,
                runtime: 0.0,
                skipped: None,
            };
            if grid.len() > limits.max_points || steps > limits.max_steps {
                row.skipped = Some(format!("exceeds cap ({} points, {} steps)", grid.len(), steps));
                return Ok(row);
            }
            let fine = run_rung(preset, &grid, h, beta, horizon, &opts.forcing, no_store)?;
            let coarse_grid = smooth_grid(2.0 * h)?;
            let coarse = run_rung(preset, &coarse_grid, 2.0 * h, beta, horizon, &opts.forcing, no_store)?;
            let u = fine.trajectory.final_state();
            let diff = u.sub(&coarse.trajectory.final_state().resample(&grid)?)?;
            row.error = diff.norm() / u.norm();
            row.fft_count = fine.fft_count;
            row.fft_proxy = grid.fft_cost();
            row.runtime = fine.runtime;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let done: Vec<&CostRow> = rows.iter().filter(|r| r.skipped.is_none()).collect();
    let xs: Vec<f64> = done.iter().map(|r| 1.0 / r.eps).collect();
    let ys: Vec<f64> = done.iter().map(|r| r.fft_proxy).collect();
    Ok(CostReport { model: preset.name.clone(), horizon, fit: fit_rate(&xs, &ys), rows })
}

/// Per-step diagnostics CSV written by `run`.
pub const DIAGNOSTICS_HEADER: &str = "n,t,l2_norm,weighted_energy,neumann_terms,neumann_residual";

pub fn diagnostics_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    writeln!(out, "{DIAGNOSTICS_HEADER}").unwrap();
    for d in &traj.diagnostics {
        let w = crate::gevrey::WeightedNorm::from_ln(d.ln_energy);
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12}e{},{},{:.3e}",
            d.n, d.t, d.l2_norm, w.mantissa, w.exponent10, d.neumann_terms, d.neumann_residual
        )
        .unwrap();
    }
    out
}
