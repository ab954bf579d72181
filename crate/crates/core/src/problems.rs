//! Built-in test systems and their reference solutions.
//!
//! Names: `jordan`, `degwave:a=t2` (optionally `degwave:a=t2,t0=0.25` for
//! `a(t) = (t - t0)^2`), `degwave:a=1`, `varsmooth`, `blockjordan`, `sym2d`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::cutoff::required_points;
use crate::data::DataSpec;
use crate::error::{Error, Result};
use crate::gevrey::regularity_params;
use crate::grid::{make_grid, GridSpec, SpectralField};
use crate::model::{real_matrix, CMat, Coefficients, FnCoefficients, SystemModel};
use crate::operator::symbol_g;
use crate::scheme::{default_ell, SchemeConfig};

pub const PRESET_NAMES: [&str; 6] = ["jordan", "degwave:a=t2", "degwave:a=1", "varsmooth", "blockjordan", "sym2d"];

/// Experiment constants attached to a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetDefaults {
    pub half_period: f64,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    /// `None` means [`default_ell`].
    pub ell: Option<f64>,
    /// Step ratio `k = beta h`.
    pub beta: f64,
    pub data: DataSpec,
    /// Fixed grid size for ladder runs; `None` sizes the grid per rung.
    pub points: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ProblemPreset {
    pub name: String,
    pub description: &'static str,
    pub model: SystemModel,
    pub defaults: PresetDefaults,
}

impl ProblemPreset {
    /// Final time of convergence and audit runs, half the weight budget `tau / (2 a)`.
    pub fn horizon(&self) -> f64 {
        self.defaults.tau / (2.0 * self.defaults.a)
    }

    /// Whether [`ProblemPreset::exact`] is available.
    pub fn has_exact(&self) -> bool {
        self.model.x_independent()
    }

    /// Reference solution at time `t` for x-independent presets.
    pub fn exact(&self, g: &SpectralField, t: f64) -> Result<SpectralField> {
        if self.model.coeffs.t_independent() {
            exact_constant_coeff(&self.model, g, t)
        } else {
            modewise_reference(&self.model, g, t)
        }
    }

    pub fn grid(&self, h: f64) -> Result<GridSpec> {
        let d = self.model.d();
        let n = self.defaults.points.unwrap_or_else(|| required_points(self.defaults.half_period, h));
        make_grid(d, n, self.defaults.half_period)
    }

    pub fn data(&self, grid: &GridSpec) -> Result<SpectralField> {
        let rho = regularity_params(i64::from(self.model.theta))?.rho;
        Ok(self.defaults.data.build(grid, self.model.m(), rho))
    }

    /// Scheme config with this preset's constants; `cbar` is left at 1.
    pub fn config(&self, h: f64, k: f64) -> SchemeConfig {
        let mut c = SchemeConfig::new(self.model.theta, h, k);
        c.a = self.defaults.a;
        c.b = self.defaults.b;
        c.tau = self.defaults.tau;
        c.ell = self.defaults.ell.unwrap_or_else(|| default_ell(c.a, c.b, c.rho));
        c
    }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<ProblemPreset> {
    let name = name.trim();
    let unknown = || Error::UnknownModel(format!("`{name}` (known: {})", PRESET_NAMES.join(", ")));
    if name.len() > 256 {
        return Err(unknown());
    }
    match name {
        "jordan" => return jordan(),
        "degwave:a=1" => return degenerate_wave(None),
        "varsmooth" => return variable_smooth(),
        "blockjordan" => return block_jordan(),
        "sym2d" => return symmetric_2d(),
        _ => {}
    }
    let body = name.strip_prefix("degwave:").ok_or_else(unknown)?;
    let mut profile = None;
    let mut t0 = 0.0;
    for item in body.split(',') {
        match item.split_once('=') {
            Some(("a", v)) => profile = Some(v),
            Some(("t0", v)) => {
                t0 = v.parse::<f64>().map_err(|_| Error::Parse(format!("bad t0 `{v}`")))?;
                if !t0.is_finite() {
                    return Err(Error::Parse("t0 must be finite".into()));
                }
            }
            _ => return Err(unknown()),
        }
    }
    match profile {
        Some("t2") => degenerate_wave(Some(t0)),
        Some("1") if t0 == 0.0 => degenerate_wave(None),
        Some(p) => Err(Error::UnknownModel(format!("degwave profile `{p}` (expected t2 or 1)"))),
        None => Err(unknown()),
    }
}

pub fn jordan() -> Result<ProblemPreset> {
    let coeffs = FnCoefficients::constant(vec![real_matrix(2, &[0.0, 1.0, 0.0, 0.0])], CMat::zeros(2, 2));
    Ok(ProblemPreset {
        name: "jordan".into(),
        description: "m = 2 nilpotent Jordan block, polynomial growth of order 1",
        model: SystemModel::new("jordan", Arc::new(coeffs), 1, 0.0)?,
        defaults: PresetDefaults {
            half_period: PI,
            tau: 0.02,
            a: 0.01,
            b: 1.0,
            ell: Some(4.0),
            beta: 0.5,
            data: DataSpec::Gevrey { p: 3.0, tau0: 0.03 },
            points: Some(2048),
        },
    })
}

/// `u_tt = a(t) u_xx` as a system in `(u_t, u_x)`; `t0 = Some(s)` gives
/// `a(t) = (t - s)^2`, `None` gives `a = 1`.
pub fn degenerate_wave(t0: Option<f64>) -> Result<ProblemPreset> {
    let (name, theta) = match t0 {
        Some(0.0) => ("degwave:a=t2".to_string(), 1),
        Some(s) => (format!("degwave:a=t2,t0={s}"), 1),
        None => ("degwave:a=1".to_string(), 0),
    };
    let coeffs = match t0 {
        Some(s) => FnCoefficients::new(
            2,
            vec![Box::new(move |t, _: &[f64]| real_matrix(2, &[0.0, (t - s) * (t - s), 1.0, 0.0]))],
            Box::new(|_, _| CMat::zeros(2, 2)),
            true,
        ),
        None => FnCoefficients::constant(vec![real_matrix(2, &[0.0, 1.0, 1.0, 0.0])], CMat::zeros(2, 2)),
    };
    Ok(ProblemPreset {
        description: if t0.is_some() {
            "degenerate wave a(t) = (t - t0)^2, eigenvalues +-|t - t0|"
        } else {
            "strictly hyperbolic wave a = 1, eigenvalues +-1"
        },
        model: SystemModel::new(name.clone(), Arc::new(coeffs), theta, 0.0)?,
        name,
        defaults: PresetDefaults {
            half_period: PI,
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

/// Smooth bump `kappa e^{-x^2/w^2}` clamped to zero for `|x| > R`.
#[derive(Debug, Clone, Copy)]
struct Bump {
    kappa: f64,
    width: f64,
    radius: f64,
}

impl Bump {
    /// `n`-th derivative via Hermite polynomials.
    fn derivative(&self, x: f64, n: usize) -> f64 {
        if x.abs() > self.radius {
            return 0.0;
        }
        let y = x / self.width;
        let (mut h0, mut h1) = (1.0, 2.0 * y);
        let hn = if n == 0 {
            h0
        } else {
            for k in 1..n {
                let next = 2.0 * y * h1 - 2.0 * k as f64 * h0;
                h0 = h1;
                h1 = next;
            }
            h1
        };
        self.kappa * (-1.0 / self.width).powi(n as i32) * hn * (-y * y).exp()
    }
}

/// `A_1 = Q diag(1, -1) Q^{-1}` with `Q = [[1, q], [0, 1]]` and a rotating,
/// time-modulated `B`.
struct VarSmooth {
    q: Bump,
    phi: Bump,
}

impl VarSmooth {
    fn beta(t: f64) -> f64 {
        0.5 * (1.0 + (2.0 * t).sin())
    }
}

impl Coefficients for VarSmooth {
    fn m(&self) -> usize {
        2
    }
    fn d(&self) -> usize {
        1
    }
    fn a(&self, _j: usize, _t: f64, x: &[f64]) -> CMat {
        real_matrix(2, &[1.0, -2.0 * self.q.derivative(x[0], 0), 0.0, -1.0])
    }
    fn b(&self, t: f64, x: &[f64]) -> CMat {
        let s = Self::beta(t) * self.phi.derivative(x[0], 0);
        real_matrix(2, &[0.0, s, -s, 0.0])
    }
    fn a_dx(&self, _j: usize, _t: f64, x: &[f64], alpha: &[usize]) -> Result<CMat> {
        let n = alpha[0];
        let diag = if n == 0 { 1.0 } else { 0.0 };
        Ok(real_matrix(2, &[diag, -2.0 * self.q.derivative(x[0], n), 0.0, -diag]))
    }
    fn analytic_derivatives(&self) -> bool {
        true
    }
}

pub fn variable_smooth() -> Result<ProblemPreset> {
    let radius = 2.4;
    let coeffs = VarSmooth {
        q: Bump { kappa: 0.5, width: 0.4, radius },
        phi: Bump { kappa: 1.0, width: 0.4, radius },
    };
    let mut model = SystemModel::new("varsmooth", Arc::new(coeffs), 0, radius)?;
    model.gevrey_index = Some(2.0);
    Ok(ProblemPreset {
        name: "varsmooth".into(),
        description: "x-dependent diagonalizable system Q(x) diag(1,-1) Q(x)^-1 with smooth rotation B",
        model,
        defaults: PresetDefaults {
            half_period: PI,
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

/// Two 2x2 Jordan blocks with eigenvalues `+1` and `-1`.
pub fn block_jordan() -> Result<ProblemPreset> {
    #[rustfmt::skip]
    let a = real_matrix(4, &[
        1.0, 1.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, -1.0, 1.0,
        0.0, 0.0, 0.0, -1.0,
    ]);
    let coeffs = FnCoefficients::constant(vec![a], CMat::zeros(4, 4));
    Ok(ProblemPreset {
        name: "blockjordan".into(),
        description: "m = 4 direct sum of two Jordan blocks of size 2",
        model: SystemModel::new("blockjordan", Arc::new(coeffs), 1, 0.0)?,
        defaults: PresetDefaults {
            half_period: PI,
            tau: 0.02,
            a: 0.01,
            b: 1.0,
            ell: Some(4.0),
            beta: 0.25,
            data: DataSpec::Gevrey { p: 3.0, tau0: 0.03 },
            points: None,
        },
    })
}

/// Constant symmetric system in two space dimensions.
pub fn symmetric_2d() -> Result<ProblemPreset> {
    let coeffs = FnCoefficients::constant(
        vec![real_matrix(2, &[1.0, 0.0, 0.0, -1.0]), real_matrix(2, &[0.0, 1.0, 1.0, 0.0])],
        CMat::zeros(2, 2),
    );
    Ok(ProblemPreset {
        name: "sym2d".into(),
        description: "d = 2 symmetric system diag(1,-1) d_1 + [[0,1],[1,0]] d_2",
        model: SystemModel::new("sym2d", Arc::new(coeffs), 0, 0.0)?,
        defaults: PresetDefaults {
            half_period: PI,
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

fn check_x_independent(model: &SystemModel) -> Result<()> {
    if !model.x_independent() {
        return Err(Error::InvalidArgument(format!("model `{}` depends on x", model.name)));
    }
    Ok(())
}

/// `u(t) = e^{t(iA(xi) + B)} g` mode by mode.
pub fn exact_constant_coeff(model: &SystemModel, g: &SpectralField, t: f64) -> Result<SpectralField> {
    check_x_independent(model)?;
    if !model.coeffs.t_independent() {
        return Err(Error::InvalidArgument(format!("model `{}` depends on t", model.name)));
    }
    model.check_field(g)?;
    let x = vec![0.0; model.d()];
    g.apply_matrix_symbol(|xi| (symbol_g(model, 0.0, &x, xi) * Complex64::from(t)).exp())
}

/// Closed form for the Jordan preset: `(u_0 + i t xi u_1, u_1)`.
pub fn jordan_exact(g: &SpectralField, t: f64) -> Result<SpectralField> {
    if g.components() != 2 || g.grid().dim() != 1 {
        return Err(Error::ShapeMismatch("Jordan closed form needs d = 1, m = 2".into()));
    }
    let mut out = g.clone();
    let len = g.grid().len();
    for p in 0..len {
        let xi = g.grid().frequency(p)[0];
        let (u0, u1) = (g.coeffs()[p], g.coeffs()[len + p]);
        out.coeffs_mut()[p] = u0 + Complex64::new(0.0, t * xi) * u1;
    }
    Ok(out)
}

/// Per-mode classical RK4 for x-independent, time-dependent models, with the
/// substep chosen so that `dt |G(xi)| <= 0.02` at the largest mode.
pub fn modewise_reference(model: &SystemModel, g: &SpectralField, t: f64) -> Result<SpectralField> {
    check_x_independent(model)?;
    model.check_field(g)?;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t = {t} must be finite and nonnegative")));
    }
    let grid = g.grid();
    let x = vec![0.0; model.d()];
    let probe = [0.0, 0.5 * t, t];
    let scale = probe
        .iter()
        .map(|&s| crate::linalg::spectral_norm(&symbol_g(model, s, &x, &vec![grid.max_frequency(); model.d()])))
        .fold(1e-300, f64::max);
    let steps = ((t * scale / 0.02).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let mut out = g.clone();
    for p in 0..grid.len() {
        let xi = grid.frequency(p);
        let mut u = DVector::from_vec(g.mode(p));
        if u.iter().all(|z| *z == Complex64::default()) {
            continue;
        }
        let rhs = |s: f64, v: &DVector<Complex64>| symbol_g(model, s, &x, xi) * v;
        for i in 0..steps {
            let s = i as f64 * dt;
            let h = Complex64::from(dt);
            let k1 = rhs(s, &u);
            let k2 = rhs(s + 0.5 * dt, &(&u + &k1 * (h * 0.5)));
            let k3 = rhs(s + 0.5 * dt, &(&u + &k2 * (h * 0.5)));
            let k4 = rhs(s + dt, &(&u + &k3 * h));
            u += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * (h / 6.0);
        }
        out.set_mode(p, u.as_slice());
    }
    Ok(out)
}
