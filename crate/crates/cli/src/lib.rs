//! `whs` command-line driver.
//!
//! Every subcommand accepts `--config FILE`, a `key = value` file whose keys
//! are the long flag names; explicit flags win over file entries.
//!
//! Exit codes: 0 success, 1 constraint or stability violation, 2 bad input,
//! 3 resource cap.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use whs::config::ConfigFile;
use whs::cutoff::required_points;
use whs::data::{DataSpec, ForcingSpec};
use whs::dump::{CoefficientTable, FieldDump};
use whs::gevrey::{bracket_norm, omega_h, regularity_params, weight_identity, MAX_PLAIN_EXPONENT};
use whs::grid::forward_transform;
use whs::harness::{
    convergence_study, cost_accuracy, default_ladder, diagnostics_csv, stability_study, CostLimits, StudyOptions,
};
use whs::model::table_model;
use whs::operator::{check_hyperbolicity, estimate_cbar, DEFAULT_HYPERBOLICITY_TOL};
use whs::problems::PresetDefaults;
use whs::scheme::{default_ell, validate_constraints, RunOptions};
use whs::symmetrizer::{fit_theta, probe, DerivativeMode, ProbePoint, SymmetrizerConfig};
use whs::{make_grid, preset, Error, ProblemPreset, Result};

const MAX_RUN_POINTS: usize = 1 << 22;
const MAX_RUN_STEPS: usize = 1_000_000;
const MAX_LADDER: usize = 10;
const DEFAULT_H: f64 = 1.0 / 16.0;

#[derive(Parser, Debug)]
#[command(name = "whs", version, about = "Spectral Crank-Nicolson runs and diagnostics for weakly hyperbolic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scheme once and write diagnostics and the final state.
    Run(RunArgs),
    /// Convergence study along a halving ladder of h.
    Converge(StudyArgs),
    /// Stability audit along a halving ladder of h.
    Stability(StudyArgs),
    /// Symmetrizer quantities at one (t, x, xi, tau).
    SymmetrizerProbe(ProbeArgs),
    /// Fit the Jordan exponent from the growth of exp(i s calH).
    ThetaFit(ThetaArgs),
    /// Check that the principal symbol has real eigenvalues.
    Hyperbolicity(HyperArgs),
    /// Tabulate the discrete weight and its identity on a 1-d lattice.
    Weights(WeightArgs),
    /// Cost of reaching a relative accuracy eps.
    Cost(CostArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Preset name, e.g. jordan, degwave:a=t2, degwave:a=1, varsmooth.
    #[arg(long)]
    model: Option<String>,
    /// `key = value` file merged under the explicit flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// WHC1 coefficient table used instead of a preset.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    #[arg(long)]
    theta: Option<u32>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Step ratio used when `--k` is absent.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    cbar: Option<f64>,
    /// Grid points per dimension.
    #[arg(long)]
    points: Option<usize>,
    /// Initial data: gevrey:p=..,tau0=.. or gauss:width=..
    #[arg(long)]
    data: Option<String>,
    /// WHS1 field dump used as initial data.
    #[arg(long)]
    input: Option<PathBuf>,
    /// zero or bump:amp=..,freq=..,center=..,width=..,comp=..
    #[arg(long)]
    forcing: Option<String>,
    /// Output directory for diagnostics.csv, final.whs and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    /// Number of rungs h = 1/8, 1/16, ...
    #[arg(long)]
    ladder: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    forcing: Option<String>,
    /// Fill the runtime column.
    #[arg(long)]
    timing: bool,
    /// CSV output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t: Option<f64>,
    /// Comma-separated position.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Comma-separated frequency.
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    theta: Option<u32>,
    #[arg(long)]
    h: Option<f64>,
    /// Weight budget tau_bar; defaults to the preset's.
    #[arg(long)]
    tau_bar: Option<f64>,
    /// Force finite-difference x-derivatives with this step.
    #[arg(long)]
    fd_step: Option<f64>,
    /// JSON output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThetaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    /// JSON output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HyperArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WeightArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    theta: Option<u32>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Time level t_n of the identity.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CostArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated accuracies.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    forcing: Option<String>,
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Config file entries behind the explicit flags.
struct Merged {
    file: ConfigFile,
}

impl Merged {
    fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Merged> {
        let file = match path {
            Some(p) => ConfigFile::read(p)?,
            None => ConfigFile::default(),
        };
        file.check_keys(allowed)?;
        Ok(Merged { file })
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get_parsed(key),
        }
    }

    fn flag(&self, set: bool, key: &str) -> Result<bool> {
        Ok(set || self.file.get_parsed::<bool>(key)?.unwrap_or(false))
    }

    fn model(&self, common: &Common) -> Result<Option<String>> {
        self.pick(common.model.clone(), "model")
    }

    fn require_model(&self, common: &Common) -> Result<ProblemPreset> {
        let name = self.model(common)?.ok_or_else(|| Error::InvalidArgument("--model is required".into()))?;
        preset(&name)
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            let x: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("bad {what} entry `{v}`")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Parse(format!("{what} entries must be finite")))
            }
        })
        .collect()
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{what} = {v} must be positive")))
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, text)?;
    }
    Ok(())
}

fn to_json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Exit code for an error: 1 constraint or stability, 3 resource, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Constraint { .. } | Error::NotHurwitz { .. } | Error::NeumannDiverged { .. } | Error::WeightBudget { .. } => 1,
        Error::ResourceCap(_) | Error::WeightOverflow { .. } => 3,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = String::new();
    let result = dispatch(cli.command, &mut stdout);
    print!("{stdout}");
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut String) -> Result<i32> {
    match cmd {
        Command::Run(a) => cmd_run(a, out),
        Command::Converge(a) => cmd_study(a, false, out),
        Command::Stability(a) => cmd_study(a, true, out),
        Command::SymmetrizerProbe(a) => cmd_probe(a, out),
        Command::ThetaFit(a) => cmd_theta(a, out),
        Command::Hyperbolicity(a) => cmd_hyper(a, out),
        Command::Weights(a) => cmd_weights(a, out),
        Command::Cost(a) => cmd_cost(a, out),
    }
}

fn table_preset(path: &Path, theta: Option<u32>) -> Result<ProblemPreset> {
    let table = CoefficientTable::decode(&std::fs::read(path)?)?;
    let half_period = table.grid.half_period();
    let model = table_model(table, theta)?;
    Ok(ProblemPreset {
        name: "table".into(),
        description: "coefficients read from a WHC1 table",
        model,
        defaults: PresetDefaults {
            half_period,
            tau: 1.0,
            a: 1.0,
            b: 1.0,
            ell: None,
            beta: 0.25,
            data: DataSpec::Gauss { width: 1.0 },
            points: None,
        },
    })
}

fn cmd_run(args: RunArgs, out: &mut String) -> Result<i32> {
    let m = Merged::load(
        args.common.config.as_deref(),
        &[
            "model", "coeffs", "theta", "h", "k", "beta", "steps", "t-final", "ell", "a", "b", "tau", "cbar", "points",
            "data", "input", "forcing", "out",
        ],
    )?;
    let coeffs: Option<PathBuf> = m.pick(args.coeffs, "coeffs")?;
    let theta: Option<u32> = m.pick(args.theta, "theta")?;
    let model_name = m.model(&args.common)?;
    let preset = match (&model_name, &coeffs) {
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("give either --model or --coeffs".into())),
        (Some(name), None) => {
            if theta.is_some() {
                return Err(Error::InvalidArgument("--theta applies to --coeffs tables only".into()));
            }
            preset(name)?
        }
        (None, Some(path)) => table_preset(path, theta)?,
        (None, None) => return Err(Error::InvalidArgument("--model or --coeffs is required".into())),
    };

    let h = positive(m.pick(args.h, "h")?.unwrap_or(DEFAULT_H), "h")?;
    let beta = positive(m.pick(args.beta, "beta")?.unwrap_or(preset.defaults.beta), "beta")?;
    let k = m.pick(args.k, "k")?.unwrap_or(beta * h);
    let k = positive(k, "k")?;
    let steps = match (m.pick(args.steps, "steps")?, m.pick(args.t_final, "t-final")?) {
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("give either --steps or --t-final".into())),
        (Some(n), None) => n,
        (None, t) => {
            let t = t.unwrap_or_else(|| preset.horizon());
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("t-final = {t} must be nonnegative")));
            }
            let n = (t / k - 1e-9).ceil().max(0.0);
            if n > MAX_RUN_STEPS as f64 {
                return Err(Error::ResourceCap(format!("{n} steps exceed {MAX_RUN_STEPS}")));
            }
            n as usize
        }
    };
    if steps > MAX_RUN_STEPS {
        return Err(Error::ResourceCap(format!("{steps} steps exceed {MAX_RUN_STEPS}")));
    }

    let mut config = preset.config(h, k);
    let (a, b) = (m.pick(args.a, "a")?, m.pick(args.b, "b")?);
    config.a = a.unwrap_or(config.a);
    config.b = b.unwrap_or(config.b);
    config.tau = m.pick(args.tau, "tau")?.unwrap_or(config.tau);
    config.ell = match m.pick(args.ell, "ell")? {
        Some(ell) => ell,
        None if preset.defaults.ell.is_none() => default_ell(config.a, config.b, config.rho),
        None => config.ell,
    };
    // Constraint failures are reported before any grid is built.
    validate_constraints(&config, steps)?.into_result()?;

    let input: Option<PathBuf> = m.pick(args.input, "input")?;
    let data: Option<String> = m.pick(args.data, "data")?;
    let g = match input {
        Some(path) => {
            if data.is_some() {
                return Err(Error::InvalidArgument("give either --data or --input".into()));
            }
            match FieldDump::read(&path)? {
                FieldDump::Spectral(s) => s,
                FieldDump::Physical(p) => forward_transform(&p),
            }
        }
        None => {
            let points = match m.pick(args.points, "points")? {
                Some(n) => n,
                None => preset.grid(h)?.points_per_dim(),
            };
            let d = preset.model.d();
            if (points as f64).powi(d as i32) > MAX_RUN_POINTS as f64 {
                return Err(Error::ResourceCap(format!("{points}^{d} grid points exceed {MAX_RUN_POINTS}")));
            }
            let grid = make_grid(d, points, preset.defaults.half_period)?;
            let spec = match data {
                Some(s) => DataSpec::parse(&s)?,
                None => preset.defaults.data,
            };
            spec.build(&grid, preset.model.m(), config.rho)
        }
    };
    let grid = g.grid().clone();
    let forcing = match m.pick(args.forcing, "forcing")? {
        Some(s) => ForcingSpec::parse(&s)?,
        None => ForcingSpec::Zero,
    };
    let t_final = steps as f64 * k;
    config.cbar = match m.pick(args.cbar, "cbar")? {
        Some(c) => positive(c, "cbar")?,
        None => estimate_cbar(&preset.model, &grid, t_final)?.value,
    };

    let traj = whs::run(&preset.model, &g, &forcing, &config, steps, RunOptions { store_every: usize::MAX, weights: true })?;
    let diagnostics = diagnostics_csv(&traj);
    let last = traj.diagnostics.last().expect("u^0 has diagnostics");
    let summary = json!({
        "model": preset.name,
        "n_g": grid.points_per_dim(),
        "steps": traj.final_step(),
        "t": last.t,
        "l2_norm": last.l2_norm,
        "config": config,
        "failure": traj.failure.as_ref().map(|(n, e)| format!("step {n}: {e}")),
    });
    match m.pick(args.out, "out")? {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("diagnostics.csv"), &diagnostics)?;
            FieldDump::Spectral(traj.final_state().clone()).write(&dir.join("final.whs"))?;
            std::fs::write(dir.join("summary.json"), to_json(&summary))?;
            writeln!(out, "steps = {}, t = {:.6e}, l2_norm = {:.6e}", traj.final_step(), last.t, last.l2_norm).unwrap();
        }
        None => out.push_str(&diagnostics),
    }
    match traj.failure {
        Some((_, e)) => Err(e),
        None => Ok(0),
    }
}

fn study_options(m: &Merged, beta: Option<f64>, horizon: Option<f64>, forcing: Option<String>) -> Result<StudyOptions> {
    let beta = m.pick(beta, "beta")?.map(|b| positive(b, "beta")).transpose()?;
    let horizon = m.pick(horizon, "horizon")?.map(|t| positive(t, "horizon")).transpose()?;
    let forcing = match m.pick(forcing, "forcing")? {
        Some(s) => ForcingSpec::parse(&s)?,
        None => ForcingSpec::Zero,
    };
    Ok(StudyOptions { beta, horizon, forcing, ..StudyOptions::default() })
}

fn cmd_study(args: StudyArgs, stability: bool, out: &mut String) -> Result<i32> {
    let m = Merged::load(
        args.common.config.as_deref(),
        &["model", "ladder", "beta", "horizon", "forcing", "timing", "out"],
    )?;
    let preset = m.require_model(&args.common)?;
    let rungs = m.pick(args.ladder, "ladder")?.unwrap_or(4);
    if !(1..=MAX_LADDER).contains(&rungs) {
        return Err(Error::InvalidArgument(format!("ladder = {rungs} must lie in 1..={MAX_LADDER}")));
    }
    let opts = study_options(&m, args.beta, args.horizon, args.forcing)?;
    let timing = m.flag(args.timing, "timing")?;
    let ladder = default_ladder(rungs);
    let csv = if stability {
        stability_study(&preset, &ladder, &opts)?.to_csv(timing)
    } else {
        convergence_study(&preset, &ladder, &opts)?.to_csv(timing)
    };
    write_output(m.pick(args.out, "out")?.as_deref(), &csv)?;
    out.push_str(&csv);
    Ok(0)
}

fn cmd_probe(args: ProbeArgs, out: &mut String) -> Result<i32> {
    let m = Merged::load(
        args.common.config.as_deref(),
        &["model", "t", "x", "xi", "tau", "b", "ell", "theta", "h", "tau-bar", "fd-step", "out"],
    )?;
    let preset = m.require_model(&args.common)?;
    let d = preset.model.d();
    let xi = match m.pick(args.xi, "xi")? {
        Some(s) => parse_list(&s, "xi")?,
        None => return Err(Error::InvalidArgument("--xi is required".into())),
    };
    let x = match m.pick(args.x, "x")? {
        Some(s) => parse_list(&s, "x")?,
        None => vec![0.0; d],
    };
    if xi.len() != d || x.len() != d {
        return Err(Error::InvalidArgument(format!("x and xi need {d} entries")));
    }
    let h = positive(m.pick(args.h, "h")?.unwrap_or(DEFAULT_H), "h")?;
    let mut cfg = SymmetrizerConfig::from_scheme(&preset.config(h, 0.0));
    if let Some(theta) = m.pick(args.theta, "theta")? {
        let p = regularity_params(i64::from(theta))?;
        cfg.theta = theta;
        cfg.rho = p.rho;
        cfg.nu = p.nu;
    }
    cfg.b = m.pick(args.b, "b")?.unwrap_or(cfg.b);
    cfg.ell = m.pick(args.ell, "ell")?.unwrap_or(cfg.ell);
    cfg.tau_bar = m.pick(args.tau_bar, "tau-bar")?.unwrap_or(cfg.tau_bar);
    if let Some(step) = m.pick(args.fd_step, "fd-step")? {
        cfg.derivatives = DerivativeMode::FiniteDifference { step: positive(step, "fd-step")? };
    }
    if !(cfg.ell >= 1.0 && cfg.ell.is_finite()) {
        return Err(Error::InvalidArgument(format!("ell = {} must be >= 1", cfg.ell)));
    }
    if !(cfg.b > 0.0 && cfg.b.is_finite()) {
        return Err(Error::InvalidArgument(format!("b = {} must be positive", cfg.b)));
    }
    let point = ProbePoint {
        t: m.pick(args.t, "t")?.unwrap_or(0.0),
        x,
        xi,
        tau: m.pick(args.tau, "tau")?.unwrap_or(0.0),
    };
    let result = probe(&preset.model, &point, &cfg)?;
    let text = to_json(&result);
    write_output(m.pick(args.out, "out")?.as_deref(), &text)?;
    out.push_str(&text);
    Ok(0)
}

fn cmd_theta(args: ThetaArgs, out: &mut String) -> Result<i32> {
    let m = Merged::load(args.common.config.as_deref(), &["model", "samples", "t-max", "out"])?;
    let preset = m.require_model(&args.common)?;
    let samples = m.pick(args.samples, "samples")?.unwrap_or(64);
    if samples > 1 << 16 {
        return Err(Error::ResourceCap(format!("{samples} samples exceed {}", 1 << 16)));
    }
    let t_max = m.pick(args.t_max, "t-max")?.unwrap_or(1.0);
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("t-max = {t_max} must be nonnegative")));
    }
    let fit = fit_theta(&preset.model, samples, t_max)?;
    writeln!(out, "theta_hat = {:.6}", fit.theta_hat).unwrap();
    writeln!(out, "residual = {:.3e}", fit.residual).unwrap();
    if let Some(note) = &fit.note {
        writeln!(out, "note = {note}").unwrap();
    }
    writeln!(out, "eps,max_norm").unwrap();
    for (e, n) in fit.eps.iter().zip(&fit.max_norm) {
        writeln!(out, "{e:.6e},{n:.9e}").unwrap();
    }
    write_output(m.pick(args.out, "out")?.as_deref(), &to_json(&fit))?;
    Ok(0)
}

fn cmd_hyper(args: HyperArgs, out: &mut String) -> Result<i32> {
    let m = Merged::load(args.common.config.as_deref(), &["model", "samples", "tol", "out"])?;
    let preset = m.require_model(&args.common)?;
    let samples = m.pick(args.samples, "samples")?.unwrap_or(1024);
    if samples > 1 << 20 {
        return Err(Error::ResourceCap(format!("{samples} samples exceed {}", 1 << 20)));
    }
    let tol = m.pick(args.tol, "tol")?.unwrap_or(DEFAULT_HYPERBOLICITY_TOL);
    let report = check_hyperbolicity(&preset.model, samples, tol)?;
    let text = to_json(&report);
    write_output(m.pick(args.out, "out")?.as_deref(), &text)?;
    out.push_str(&text);
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_weights(args: WeightArgs, out: &mut String) -> Result<i32> {
    let m = Merged::load(
        args.common.config.as_deref(),
        &["model", "theta", "h", "k", "ell", "a", "tau", "t", "points", "out"],
    )?;
    let h = positive(m.pick(args.h, "h")?.unwrap_or(DEFAULT_H), "h")?;
    let theta = m.pick(args.theta, "theta")?;
    let mut config = match (m.model(&args.common)?, theta) {
        (Some(name), None) => {
            let p = preset(&name)?;
            p.config(h, p.defaults.beta * h)
        }
        (None, Some(theta)) => whs::SchemeConfig::new(theta, h, 0.25 * h),
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("give either --model or --theta".into())),
        (None, None) => return Err(Error::InvalidArgument("--model or --theta is required".into())),
    };
    config.k = positive(m.pick(args.k, "k")?.unwrap_or(config.k), "k")?;
    config.a = m.pick(args.a, "a")?.unwrap_or(config.a);
    config.tau = m.pick(args.tau, "tau")?.unwrap_or(config.tau);
    config.ell = match m.pick(args.ell, "ell")? {
        Some(ell) => ell,
        None => config.ell,
    };
    let t = m.pick(args.t, "t")?.unwrap_or(0.0);
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be nonnegative")));
    }
    validate_constraints(&config, 0)?.into_result()?;
    let points = m.pick(args.points, "points")?.unwrap_or_else(|| required_points(std::f64::consts::PI, h));
    if points > MAX_RUN_POINTS {
        return Err(Error::ResourceCap(format!("{points} points exceed {MAX_RUN_POINTS}")));
    }
    let grid = make_grid(1, points, std::f64::consts::PI)?;
    let spec = config.weight(0.0, true);

    let mut csv = String::from("xi,exponent,omega,omega_lower,omega_upper,identity_residual\n");
    let (mut worst, mut in_bounds) = (0.0f64, true);
    let mut xis: Vec<f64> = grid.frequency_norms().to_vec();
    xis.sort_by(f64::total_cmp);
    xis.dedup();
    for xi in xis {
        let exponent = spec.exponent(xi, t)?;
        let omega = omega_h(xi, config.a, config.k, config.rho, config.ell, h);
        let upper = bracket_norm(xi, config.ell).powf(config.rho);
        let lower = upper / 4.0;
        in_bounds &= omega >= lower * (1.0 - 1e-15) && omega <= upper * (1.0 + 1e-15);
        let res = if exponent <= MAX_PLAIN_EXPONENT {
            let r = weight_identity(xi, t, config.k, &spec)?.relative_residual();
            worst = worst.max(r);
            format!("{r:.3e}")
        } else {
            String::new()
        };
        writeln!(csv, "{xi:.6e},{exponent:.12e},{omega:.12e},{lower:.12e},{upper:.12e},{res}").unwrap();
    }
    writeln!(csv, "# max_identity_residual = {worst:.3e}, omega_in_bounds = {in_bounds}").unwrap();
    write_output(m.pick(args.out, "out")?.as_deref(), &csv)?;
    out.push_str(&csv);
    Ok(0)
}

fn cmd_cost(args: CostArgs, out: &mut String) -> Result<i32> {
    let m = Merged::load(
        args.common.config.as_deref(),
        &["model", "eps", "beta", "horizon", "forcing", "max-points", "max-steps", "timing", "out"],
    )?;
    let preset = preset(&m.model(&args.common)?.unwrap_or_else(|| "varsmooth".into()))?;
    let eps = parse_list(&m.pick(args.eps, "eps")?.unwrap_or_else(|| "1e-2,3e-3,1e-3".into()), "eps")?;
    if eps.is_empty() || eps.len() > MAX_LADDER {
        return Err(Error::InvalidArgument(format!("eps needs 1..={MAX_LADDER} entries")));
    }
    let opts = study_options(&m, args.beta, args.horizon, args.forcing)?;
    let defaults = CostLimits::default();
    let limits = CostLimits {
        max_points: m.pick(args.max_points, "max-points")?.unwrap_or(defaults.max_points),
        max_steps: m.pick(args.max_steps, "max-steps")?.unwrap_or(defaults.max_steps),
    };
    let report = cost_accuracy(&preset, &eps, &opts, limits)?;
    let csv = report.to_csv(m.flag(args.timing, "timing")?);
    write_output(m.pick(args.out, "out")?.as_deref(), &csv)?;
    out.push_str(&csv);
    let skipped = report.rows.iter().filter(|r| r.skipped.is_some()).count();
    if skipped > 0 {
        return Err(Error::ResourceCap(format!("{skipped} of {} rungs skipped", report.rows.len())));
    }
    Ok(0)
}
