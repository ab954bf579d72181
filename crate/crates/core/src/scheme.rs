//! Spectral Crank-Nicolson stepping
//! `(I - k/2 G_h^n) u^{n+1} = (I + k/2 G_h^n) u^n + k chi_2h f^n`
//! with a Neumann-series solve and the admissibility constraints on `(k, h, ell, a, b, tau)`.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::cutoff::{cutoff_multiplier, ensure_resolved};
use crate::error::{Error, Result};
use crate::gevrey::{regularity_params, weighted_norm, WeightSpec};
use crate::grid::{GridSpec, Multiplier, SpectralField};
use crate::model::SystemModel;
use crate::operator::FrozenOperator;

/// Relative slack when comparing a constraint value with its bound.
const CONSTRAINT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConstraintKind {
    /// `h <= 1/ell`
    CutoffBelowShift,
    /// `k h^-1 <= 1/(2 cbar)`
    Cfl,
    /// `a k h^-rho <= log(2)/3`
    WeightStep,
    /// `b ell^-(1-rho) <= 1`
    Damping,
    /// `a ell^(-rho/6) <= 1`
    Decay,
    /// `n k a <= tau`
    Horizon,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 6] = [
        ConstraintKind::CutoffBelowShift,
        ConstraintKind::Cfl,
        ConstraintKind::WeightStep,
        ConstraintKind::Damping,
        ConstraintKind::Decay,
        ConstraintKind::Horizon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::CutoffBelowShift => "h <= 1/ell",
            ConstraintKind::Cfl => "k h^-1 <= 1/(2 cbar)",
            ConstraintKind::WeightStep => "a k h^-rho <= log(2)/3",
            ConstraintKind::Damping => "b ell^-(1-rho) <= 1",
            ConstraintKind::Decay => "a ell^(-rho/6) <= 1",
            ConstraintKind::Horizon => "n k a <= tau",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub k: f64,
    pub h: f64,
    pub ell: f64,
    /// Weight decay rate.
    pub a: f64,
    /// Symmetrizer damping.
    pub b: f64,
    /// Initial weight exponent budget.
    pub tau: f64,
    pub theta: u32,
    pub rho: f64,
    pub nu: f64,
    pub neumann_tol: f64,
    pub neumann_max_terms: usize,
    pub cbar: f64,
}

/// Smallest `ell >= 1` with `b ell^-(1-rho) <= 1` and `a ell^(-rho/6) <= 1`.
pub fn default_ell(a: f64, b: f64, rho: f64) -> f64 {
    1f64.max(b.max(0.0).powf(1.0 / (1.0 - rho))).max(a.max(0.0).powf(6.0 / rho))
}

impl SchemeConfig {
    /// Config with `rho, nu` from `theta`, `a = b = tau = cbar = 1`, default `ell`
    /// and the default Neumann tolerance.
    pub fn new(theta: u32, h: f64, k: f64) -> Self {
        let p = regularity_params(i64::from(theta)).expect("theta is nonnegative");
        SchemeConfig {
            k,
            h,
            ell: default_ell(1.0, 1.0, p.rho),
            a: 1.0,
            b: 1.0,
            tau: 1.0,
            theta,
            rho: p.rho,
            nu: p.nu,
            neumann_tol: 1e-12,
            neumann_max_terms: 64,
            cbar: 1.0,
        }
    }

    /// Resets `ell` to [`default_ell`] for the current `a, b, rho`.
    pub fn with_default_ell(mut self) -> Self {
        self.ell = default_ell(self.a, self.b, self.rho);
        self
    }

    fn check_ranges(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} = {v} out of range")));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h", self.h);
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return bad("k", self.k);
        }
        if !(self.ell >= 1.0 && self.ell.is_finite()) {
            return bad("ell", self.ell);
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return bad("a", self.a);
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return bad("b", self.b);
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau", self.tau);
        }
        if !(self.cbar > 0.0 && self.cbar.is_finite()) {
            return bad("cbar", self.cbar);
        }
        if !((0.5..1.0).contains(&self.rho)) {
            return bad("rho", self.rho);
        }
        if !(self.neumann_tol > 0.0) || self.neumann_max_terms == 0 {
            return bad("neumann_tol", self.neumann_tol);
        }
        Ok(())
    }

    /// `ell`-shifted weight `<D>^sigma e^{(tau - a t)<D>^rho}` with this config's constants.
    pub fn weight(&self, sigma: f64, truncated: bool) -> WeightSpec {
        WeightSpec {
            sigma,
            tau_bar: self.tau,
            rate: self.a,
            rho: self.rho,
            ell: self.ell,
            cutoff_h: truncated.then_some(self.h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
    /// Largest admissible time step for the other parameters as given.
    pub k_max: f64,
}

impl ConstraintReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn into_result(self) -> Result<ConstraintReport> {
        let first = self.violations().next().copied();
        match first {
            Some(c) => Err(Error::Constraint { kind: c.kind, value: c.value, bound: c.bound }),
            None => Ok(self),
        }
    }
}

/// Checks every constraint for a run of `n_steps` steps.
pub fn validate_constraints(config: &SchemeConfig, n_steps: usize) -> Result<ConstraintReport> {
    config.check_ranges()?;
    let c = config;
    let n = n_steps as f64;
    let log2_3 = 2f64.ln() / 3.0;
    let entries = [
        (ConstraintKind::CutoffBelowShift, c.h, 1.0 / c.ell),
        (ConstraintKind::Cfl, c.k / c.h, 1.0 / (2.0 * c.cbar)),
        (ConstraintKind::WeightStep, c.a * c.k * c.h.powf(-c.rho), log2_3),
        (ConstraintKind::Damping, c.b * c.ell.powf(-(1.0 - c.rho)), 1.0),
        (ConstraintKind::Decay, c.a * c.ell.powf(-c.rho / 6.0), 1.0),
        (ConstraintKind::Horizon, n * c.k * c.a, c.tau),
    ];
    let checks = entries
        .iter()
        .map(|&(kind, value, bound)| ConstraintCheck { kind, value, bound, pass: value <= bound * (1.0 + CONSTRAINT_SLACK) })
        .collect();
    let mut k_max = c.h / (2.0 * c.cbar);
    if c.a > 0.0 {
        k_max = k_max.min(log2_3 * c.h.powf(c.rho) / c.a);
        if n_steps > 0 {
            k_max = k_max.min(c.tau / (n * c.a));
        }
    }
    Ok(ConstraintReport { checks, k_max })
}

/// `u^0 = chi_2h(D) g`.
pub fn initial_truncation(g: &SpectralField, h: f64) -> Result<SpectralField> {
    let chi2h = cutoff_multiplier(g.grid(), h, 2)?;
    g.apply_multiplier(&chi2h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveInfo {
    /// Number of applications of `k/2 G_h` summed.
    pub terms: usize,
    /// `|| (I - k/2 G_h) x - rhs || / || rhs ||`.
    pub residual: f64,
    /// Largest ratio of consecutive term norms.
    pub max_ratio: f64,
}

/// Time-frozen truncated operator `G_h^n` with its band multiplier.
pub struct TruncatedOperator {
    op: FrozenOperator,
    chi2h: Multiplier,
}

impl TruncatedOperator {
    pub fn new(model: &SystemModel, grid: &GridSpec, t: f64, h: f64) -> Result<Self> {
        let chi2h = cutoff_multiplier(grid, h, 2)?;
        Ok(TruncatedOperator { op: FrozenOperator::new(model, grid, t)?, chi2h })
    }

    pub fn time(&self) -> f64 {
        self.op.time()
    }

    pub fn band(&self) -> &Multiplier {
        &self.chi2h
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        self.op.apply_truncated(u, &self.chi2h)
    }
}

/// Solves `(I - k/2 G_h^n) x = rhs` by the Neumann series, stopping at the first
/// term with norm `<= neumann_tol ||rhs||`.
pub fn cn_solve(op: &TruncatedOperator, rhs: &SpectralField, config: &SchemeConfig) -> Result<(SpectralField, SolveInfo)> {
    let half_k = Complex64::from(config.k / 2.0);
    let rhs_norm = rhs.norm();
    if config.k == 0.0 || rhs_norm == 0.0 {
        return Ok((rhs.clone(), SolveInfo { terms: 0, residual: 0.0, max_ratio: 0.0 }));
    }
    let threshold = config.neumann_tol * rhs_norm;
    let mut x = rhs.clone();
    let mut term = rhs.clone();
    let mut prev = rhs_norm;
    let mut max_ratio: f64 = 0.0;
    let mut terms = 0;
    loop {
        if terms >= config.neumann_max_terms {
            return Err(Error::NeumannDiverged { terms, ratio: max_ratio });
        }
        term = op.apply(&term)?;
        term.scale(half_k);
        terms += 1;
        let tn = term.norm();
        max_ratio = max_ratio.max(tn / prev);
        prev = tn;
        x.axpy(Complex64::new(1.0, 0.0), &term)?;
        if tn <= threshold {
            break;
        }
    }
    let mut res = op.apply(&x)?;
    res.scale(-half_k);
    res.axpy(Complex64::new(1.0, 0.0), &x)?;
    let residual = res.sub(rhs)?.norm() / rhs_norm;
    Ok((x, SolveInfo { terms, residual, max_ratio }))
}

/// One step from `u^n`; `f_n = None` is zero forcing.
pub fn cn_step(
    op: &TruncatedOperator,
    u_n: &SpectralField,
    f_n: Option<&SpectralField>,
    config: &SchemeConfig,
) -> Result<(SpectralField, SolveInfo)> {
    let mut rhs = op.apply(u_n)?;
    rhs.scale(Complex64::from(config.k / 2.0));
    rhs.axpy(Complex64::new(1.0, 0.0), u_n)?;
    if let Some(f) = f_n {
        rhs.axpy(Complex64::from(config.k), &f.apply_multiplier(op.band())?)?;
    }
    cn_solve(op, &rhs, config)
}

/// Source term sampled at `t_n = n k`.
pub trait Forcing: Sync {
    /// `None` means identically zero.
    fn sample(&self, t: f64, grid: &GridSpec, m: usize) -> Result<Option<SpectralField>>;
}

pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn sample(&self, _t: f64, _grid: &GridSpec, _m: usize) -> Result<Option<SpectralField>> {
        Ok(None)
    }
}

impl<F> Forcing for F
where
    F: Fn(f64, &GridSpec, usize) -> Result<Option<SpectralField>> + Sync,
{
    fn sample(&self, t: f64, grid: &GridSpec, m: usize) -> Result<Option<SpectralField>> {
        self(t, grid, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub n: usize,
    pub t: f64,
    pub l2_norm: f64,
    /// `ln || <D>_ell^-nu e^{(tau - a t_n)<D>_ell^rho} u^n ||`.
    pub ln_energy: f64,
    /// `ln || <D>_ell^{2 nu} e^{(tau - a t_n)<D>_ell^rho} u^n ||`.
    pub ln_dissipation: f64,
    /// `ln || <D>_ell^-nu e^{(tau - a t_n)<D>_ell^rho} f^n ||`, `-inf` for zero forcing.
    pub ln_forcing: f64,
    /// Neumann data of the solve producing `u^n` (zero at `n = 0`).
    pub neumann_terms: usize,
    pub neumann_residual: f64,
    pub neumann_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every `store_every`-th state (the last state is always kept).
    pub store_every: usize,
    /// Compute the weighted energies per step.
    pub weights: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { store_every: 1, weights: true }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SchemeConfig,
    pub states: Vec<(usize, SpectralField)>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// `ln || <D>_ell^nu e^{tau <D>_ell^rho} g ||` for the untruncated data.
    pub ln_data: f64,
    /// Whether every sampled `f^n` satisfied `chi_h f^n = f^n`.
    pub forcing_band_limited: bool,
    /// Step index and error of the first failure, if any.
    pub failure: Option<(usize, Error)>,
}

impl Trajectory {
    pub fn final_state(&self) -> &SpectralField {
        &self.states.last().expect("trajectory stores u^0").1
    }

    pub fn final_step(&self) -> usize {
        self.states.last().expect("trajectory stores u^0").0
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

fn ln_weighted(field: &SpectralField, t: f64, spec: &WeightSpec) -> Result<f64> {
    Ok(weighted_norm(field, t, spec)?.ln)
}

/// Runs `n_steps` steps from `chi_2h g`. Validation errors are returned; step
/// errors truncate the trajectory and are recorded in `failure`.
pub fn run(
    model: &SystemModel,
    g: &SpectralField,
    forcing: &dyn Forcing,
    config: &SchemeConfig,
    n_steps: usize,
    opts: RunOptions,
) -> Result<Trajectory> {
    model.check_field(g)?;
    validate_constraints(config, n_steps)?.into_result()?;
    let grid = g.grid();
    ensure_resolved(grid, config.h)?;
    let chi_h = cutoff_multiplier(grid, config.h, 1)?;
    let store_every = opts.store_every.max(1);
    let energy = config.weight(-config.nu, false);
    let dissipation = config.weight(2.0 * config.nu, false);
    let data = config.weight(config.nu, false);
    let m = model.m();

    let ln_data = if opts.weights { ln_weighted(g, 0.0, &data)? } else { f64::NAN };
    let mut u = initial_truncation(g, config.h)?;
    let mut traj = Trajectory {
        config: config.clone(),
        states: vec![(0, u.clone())],
        diagnostics: Vec::with_capacity(n_steps + 1),
        ln_data,
        forcing_band_limited: true,
        failure: None,
    };
    let reuse = model.coeffs.t_independent();
    let mut op: Option<TruncatedOperator> = None;
    let mut info = SolveInfo { terms: 0, residual: 0.0, max_ratio: 0.0 };

    for n in 0..=n_steps {
        let t = n as f64 * config.k;
        let f_n = if n < n_steps {
            match forcing.sample(t, grid, m) {
                Ok(f) => f,
                Err(e) => {
                    traj.failure = Some((n, e));
                    break;
                }
            }
        } else {
            None
        };
        if let Some(f) = &f_n {
            traj.forcing_band_limited &= f.apply_multiplier(&chi_h)? == *f;
        }
        let diag = if opts.weights {
            let ln_forcing = match &f_n {
                Some(f) => ln_weighted(f, t, &energy),
                None => Ok(f64::NEG_INFINITY),
            };
            match (ln_weighted(&u, t, &energy), ln_weighted(&u, t, &dissipation), ln_forcing) {
                (Ok(e), Ok(d), Ok(f)) => (e, d, f),
                (Err(err), _, _) | (_, Err(err), _) | (_, _, Err(err)) => {
                    traj.failure = Some((n, err));
                    break;
                }
            }
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        traj.diagnostics.push(StepDiagnostics {
            n,
            t,
            l2_norm: u.norm(),
            ln_energy: diag.0,
            ln_dissipation: diag.1,
            ln_forcing: diag.2,
            neumann_terms: info.terms,
            neumann_residual: info.residual,
            neumann_ratio: info.max_ratio,
        });
        if n == n_steps {
            break;
        }
        if op.is_none() || !reuse {
            match TruncatedOperator::new(model, grid, t, config.h) {
                Ok(o) => op = Some(o),
                Err(e) => {
                    traj.failure = Some((n, e));
                    break;
                }
            }
        }
        match cn_step(op.as_ref().expect("operator built above"), &u, f_n.as_ref(), config) {
            Ok((next, step_info)) => {
                u = next;
                info = step_info;
            }
            Err(e) => {
                traj.failure = Some((n, e));
                break;
            }
        }
        let idx = n + 1;
        if idx % store_every == 0 || idx == n_steps {
            traj.states.push((idx, u.clone()));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::model::{real_matrix, FnCoefficients};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn example() -> SchemeConfig {
        SchemeConfig { ell: 10.0, a: 1.0, b: 1.0, tau: 1.0, cbar: 1.0, ..SchemeConfig::new(1, 0.1, 0.05) }
    }

    fn first_violation(c: &SchemeConfig, n: usize) -> Option<ConstraintKind> {
        validate_constraints(c, n).unwrap().violations().next().map(|v| v.kind)
    }

    #[test]
    fn worked_example_fails_weight_step() {
        let c = example();
        assert!((c.rho - 0.875).abs() < 1e-15);
        let r = validate_constraints(&c, 1).unwrap();
        let kinds: Vec<_> = r.violations().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ConstraintKind::WeightStep]);
        let w = r.checks.iter().find(|c| c.kind == ConstraintKind::WeightStep).unwrap();
        assert!((w.value - 0.05 * 0.1f64.powf(-0.875)).abs() < 1e-12);
        assert!((r.k_max - 0.030_8).abs() < 1e-4, "{}", r.k_max);
        let err = r.into_result().unwrap_err();
        assert!(err.to_string().starts_with("a k h^-rho <= log(2)/3 violated"));
    }

    #[test]
    fn zero_step_passes() {
        let c = SchemeConfig { k: 0.0, ..example() };
        assert!(validate_constraints(&c, 100).unwrap().pass());
    }

    #[test]
    fn each_constraint_can_fail_alone() {
        let c = SchemeConfig { h: 0.2, k: 0.0, ..example() };
        assert_eq!(first_violation(&c, 0), Some(ConstraintKind::CutoffBelowShift));
        let c = SchemeConfig { k: 0.02, cbar: 3.0, a: 0.1, ..example() };
        assert_eq!(first_violation(&c, 1), Some(ConstraintKind::Cfl));
        let c = SchemeConfig { k: 0.001, b: 2.0, ..example() };
        assert_eq!(first_violation(&c, 1), Some(ConstraintKind::Damping));
        let c = SchemeConfig { k: 0.001, a: 2.0, ..example() };
        assert_eq!(first_violation(&c, 1), Some(ConstraintKind::Decay));
        let c = SchemeConfig { k: 0.001, tau: 0.01, ..example() };
        assert_eq!(first_violation(&c, 11), Some(ConstraintKind::Horizon));
        assert_eq!(first_violation(&c, 10), None);
    }

    #[test]
    fn default_ell_is_minimal() {
        let (a, b, rho) = (1.3, 1.2, 0.875);
        let ell = default_ell(a, b, rho);
        let c = SchemeConfig { a, b, rho, ell, h: 1.0 / ell, k: 0.0, ..example() };
        assert!(validate_constraints(&c, 0).unwrap().pass());
        let c = SchemeConfig { ell: ell * 0.99, ..c };
        assert!(!validate_constraints(&c, 0).unwrap().pass());
        assert_eq!(default_ell(0.5, 0.5, 0.5), 1.0);
    }

    #[test]
    fn bad_ranges_are_rejected() {
        assert!(validate_constraints(&SchemeConfig { h: 0.0, ..example() }, 0).is_err());
        assert!(validate_constraints(&SchemeConfig { ell: 0.5, ..example() }, 0).is_err());
        assert!(validate_constraints(&SchemeConfig { k: f64::NAN, ..example() }, 0).is_err());
    }

    fn scalar(omega: f64) -> SystemModel {
        let c = FnCoefficients::constant(vec![real_matrix(1, &[omega])], real_matrix(1, &[0.0]));
        SystemModel::new("scalar", Arc::new(c), 0, 0.0).unwrap()
    }

    #[test]
    fn scalar_skew_solve_closed_form() {
        let g = make_grid(1, 64, PI).unwrap();
        let model = scalar(1.0);
        let h = 0.25;
        let cfg = SchemeConfig { k: 0.05, h, ell: 4.0, ..SchemeConfig::new(0, h, 0.05) };
        let op = TruncatedOperator::new(&model, &g, 0.0, h).unwrap();
        let rhs = initial_truncation(&SpectralField::from_fn(&g, 1, |xi| vec![Complex64::new(1.0 / (1.0 + xi[0] * xi[0]), 0.0)]), h).unwrap();
        let (x, info) = cn_solve(&op, &rhs, &cfg).unwrap();
        assert!(info.residual <= 2.0 * cfg.neumann_tol);
        for p in 0..g.len() {
            let xi = g.frequency(p)[0];
            let chi = op.band().values()[p];
            let sym = Complex64::new(0.0, xi) * chi * chi;
            let expect = rhs.mode(p)[0] / (Complex64::from(1.0) - sym * 0.025);
            assert!((x.mode(p)[0] - expect).norm() < 1e-13);
        }
        let (y, _) = cn_step(&op, &rhs, None, &cfg).unwrap();
        assert!((y.norm() - rhs.norm()).abs() < 10.0 * cfg.neumann_tol * rhs.norm());
    }

    #[test]
    fn k_zero_is_identity() {
        let g = make_grid(1, 32, PI).unwrap();
        let model = scalar(2.0);
        let cfg = SchemeConfig { k: 0.0, ..SchemeConfig::new(0, 0.5, 0.0) };
        let op = TruncatedOperator::new(&model, &g, 0.0, 0.5).unwrap();
        let rhs = SpectralField::from_fn(&g, 1, |xi| vec![Complex64::new(xi[0], 1.0)]);
        assert_eq!(cn_solve(&op, &rhs, &cfg).unwrap().0, rhs);
    }

    #[test]
    fn divergence_is_reported() {
        let g = make_grid(1, 64, PI).unwrap();
        let model = scalar(1.0);
        let cfg = SchemeConfig { k: 4.0, neumann_max_terms: 8, ..SchemeConfig::new(0, 0.25, 4.0) };
        let op = TruncatedOperator::new(&model, &g, 0.0, 0.25).unwrap();
        let rhs = initial_truncation(&SpectralField::from_fn(&g, 1, |_| vec![Complex64::new(1.0, 0.0)]), 0.25).unwrap();
        assert!(matches!(cn_solve(&op, &rhs, &cfg), Err(Error::NeumannDiverged { terms: 8, .. })));
    }

    #[test]
    fn initial_truncation_examples() {
        let g = make_grid(1, 64, PI).unwrap();
        let h = 0.25;
        let inside = SpectralField::from_fn(&g, 1, |xi| vec![Complex64::from(if xi[0].abs() <= 1.0 / h { 1.0 } else { 0.0 })]);
        assert_eq!(initial_truncation(&inside, h).unwrap(), inside);
        let outside =
            SpectralField::from_fn(&g, 1, |xi| vec![Complex64::from(if xi[0].abs() >= 2f64.sqrt() / h { 1.0 } else { 0.0 })]);
        assert_eq!(initial_truncation(&outside, h).unwrap().norm(), 0.0);
    }

    #[test]
    fn run_rejects_invalid_config_and_keeps_states() {
        let g = make_grid(1, 64, PI).unwrap();
        let model = scalar(1.0);
        let u0 = SpectralField::from_fn(&g, 1, |xi| vec![Complex64::new((-xi[0] * xi[0]).exp(), 0.0)]);
        let bad = SchemeConfig { k: 1.0, ..SchemeConfig::new(0, 0.25, 1.0) };
        assert!(matches!(run(&model, &u0, &ZeroForcing, &bad, 3, RunOptions::default()), Err(Error::Constraint { .. })));
        let cfg = SchemeConfig { k: 0.01, tau: 1.0, a: 1.0, ell: 4.0, ..SchemeConfig::new(0, 0.25, 0.01) };
        let opts = RunOptions { store_every: 4, weights: true };
        let tr = run(&model, &u0, &ZeroForcing, &cfg, 10, opts).unwrap();
        assert!(tr.completed());
        let idx: Vec<usize> = tr.states.iter().map(|s| s.0).collect();
        assert_eq!(idx, vec![0, 4, 8, 10]);
        assert_eq!(tr.diagnostics.len(), 11);
        assert!(tr.forcing_band_limited);
    }
}
