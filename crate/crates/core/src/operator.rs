//! The discrete operator `G(t) = sum_j A_j(t, x) d_j + B(t, x)`, its truncation
//! `G_h = chi_2h(D) G chi_2h(D)`, the constant `C_bar` and the hyperbolicity check.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cutoff::cutoff_multiplier;
use crate::error::Result;
use crate::grid::{forward_transform, inverse_transform, GridSpec, Multiplier, PhysicalField, SpectralField};
use crate::linalg::{max_abs_imag_eig, spectral_norm};
use crate::model::{CMat, SystemModel};
use crate::sampling::{halton, sphere_coords, sphere_point};

/// `A(t, x, xi) = sum_j A_j(t, x) xi_j`.
pub fn symbol_a(model: &SystemModel, t: f64, x: &[f64], xi: &[f64]) -> CMat {
    let m = model.m();
    let mut out = CMat::zeros(m, m);
    for (j, &v) in xi.iter().enumerate().take(model.d()) {
        if v != 0.0 {
            out += model.a(j, t, x) * Complex64::from(v);
        }
    }
    out
}

/// Full symbol `iA(t, x, xi) + B(t, x)`.
pub fn symbol_g(model: &SystemModel, t: f64, x: &[f64], xi: &[f64]) -> CMat {
    symbol_a(model, t, x, xi) * Complex64::i() + model.b(t, x)
}

fn flatten(a: &CMat) -> Vec<Complex64> {
    let m = a.nrows();
    (0..m * m).map(|i| a[(i / m, i % m)]).collect()
}

#[inline]
fn matvec_acc(mat: &[Complex64], m: usize, v: &[Complex64], out: &mut [Complex64], adjoint: bool) {
    for r in 0..m {
        let mut acc = Complex64::default();
        for c in 0..m {
            acc += if adjoint { mat[c * m + r].conj() } else { mat[r * m + c] } * v[c];
        }
        out[r] += acc;
    }
}

enum Samples {
    /// x-independent: row-major `A_j` and `B`.
    Constant { a: Vec<Vec<Complex64>>, b: Vec<Complex64> },
    /// Per node `p`, row-major matrix at offset `p m^2`.
    Nodes { a: Vec<Vec<Complex64>>, b: Option<Vec<Complex64>> },
}

/// `G(t)` with its coefficients sampled once at a fixed time.
pub struct FrozenOperator {
    grid: GridSpec,
    m: usize,
    d: usize,
    t: f64,
    samples: Samples,
}

impl FrozenOperator {
    pub fn new(model: &SystemModel, grid: &GridSpec, t: f64) -> Result<Self> {
        model.check_grid(grid)?;
        let (m, d) = (model.m(), model.d());
        let samples = if model.x_independent() {
            let origin = vec![0.0; d];
            Samples::Constant {
                a: (0..d).map(|j| flatten(&model.a(j, t, &origin))).collect(),
                b: flatten(&model.b(t, &origin)),
            }
        } else {
            let len = grid.len();
            let mut a = vec![Vec::with_capacity(len * m * m); d];
            let mut b = Vec::with_capacity(len * m * m);
            for p in 0..len {
                let x = grid.node(p);
                for (j, aj) in a.iter_mut().enumerate() {
                    aj.extend(flatten(&model.a(j, t, x)));
                }
                b.extend(flatten(&model.b(t, x)));
            }
            let b = (!b.iter().all(|z| *z == Complex64::default())).then_some(b);
            Samples::Nodes { a, b }
        };
        Ok(FrozenOperator { grid: grid.clone(), m, d, t, samples })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check(&self, u: &SpectralField) -> Result<()> {
        if u.grid() != &self.grid || u.components() != self.m {
            return Err(crate::error::Error::ShapeMismatch(format!(
                "operator expects {} components on {:?}, got {} on {:?}",
                self.m,
                self.grid,
                u.components(),
                u.grid()
            )));
        }
        Ok(())
    }

    /// `G u` (or `G* u` when `adjoint`).
    fn apply_inner(&self, u: &SpectralField, adjoint: bool) -> Result<SpectralField> {
        self.check(u)?;
        let (m, d, len) = (self.m, self.d, self.grid.len());
        match &self.samples {
            Samples::Constant { a, b } => {
                let mut out = SpectralField::zeros(&self.grid, m);
                let mut sym = vec![Complex64::default(); m * m];
                let mut v = vec![Complex64::default(); m];
                let mut w = vec![Complex64::default(); m];
                for p in 0..len {
                    let xi = self.grid.frequency(p);
                    sym.copy_from_slice(b);
                    for j in 0..d {
                        let s = Complex64::new(0.0, xi[j]);
                        for (e, aj) in sym.iter_mut().zip(&a[j]) {
                            *e += s * aj;
                        }
                    }
                    for c in 0..m {
                        v[c] = u.coeffs()[c * len + p];
                        w[c] = Complex64::default();
                    }
                    matvec_acc(&sym, m, &v, &mut w, adjoint);
                    for (c, wc) in w.iter().enumerate() {
                        out.coeffs_mut()[c * len + p] = *wc;
                    }
                }
                Ok(out)
            }
            Samples::Nodes { a, b } if !adjoint => {
                let mut acc = vec![Complex64::default(); m * len];
                let mut v = vec![Complex64::default(); m];
                let mut w = vec![Complex64::default(); m];
                let mut add_term = |phys: &PhysicalField, mats: &[Complex64]| {
                    for p in 0..len {
                        for c in 0..m {
                            v[c] = phys.data()[c * len + p];
                            w[c] = Complex64::default();
                        }
                        matvec_acc(&mats[p * m * m..(p + 1) * m * m], m, &v, &mut w, false);
                        for c in 0..m {
                            acc[c * len + p] += w[c];
                        }
                    }
                };
                for (j, aj) in a.iter().enumerate() {
                    let du = u.apply_symbol(|xi| Complex64::new(0.0, xi[j]));
                    add_term(&inverse_transform(&du), aj);
                }
                if let Some(b) = b {
                    add_term(&inverse_transform(u), b);
                }
                Ok(forward_transform(&PhysicalField::from_vec(&self.grid, m, acc)?))
            }
            Samples::Nodes { a, b } => {
                let phys = inverse_transform(u);
                let mut v = vec![Complex64::default(); m];
                let mut w = vec![Complex64::default(); m];
                let mut pointwise = |mats: &[Complex64]| -> Result<SpectralField> {
                    let mut acc = vec![Complex64::default(); m * len];
                    for p in 0..len {
                        for c in 0..m {
                            v[c] = phys.data()[c * len + p];
                            w[c] = Complex64::default();
                        }
                        matvec_acc(&mats[p * m * m..(p + 1) * m * m], m, &v, &mut w, true);
                        for c in 0..m {
                            acc[c * len + p] = w[c];
                        }
                    }
                    Ok(forward_transform(&PhysicalField::from_vec(&self.grid, m, acc)?))
                };
                let mut out = SpectralField::zeros(&self.grid, m);
                for (j, aj) in a.iter().enumerate() {
                    // (A_j d_j)* = -d_j A_j*.
                    let z = pointwise(aj)?.apply_symbol(|xi| Complex64::new(0.0, -xi[j]));
                    out.axpy(Complex64::new(1.0, 0.0), &z)?;
                }
                if let Some(b) = b {
                    out.axpy(Complex64::new(1.0, 0.0), &pointwise(b)?)?;
                }
                Ok(out)
            }
        }
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        self.apply_inner(u, false)
    }

    pub fn apply_adjoint(&self, u: &SpectralField) -> Result<SpectralField> {
        self.apply_inner(u, true)
    }

    /// `chi_2h G chi_2h u` for the given `chi_2h` samples.
    pub fn apply_truncated(&self, u: &SpectralField, chi2h: &Multiplier) -> Result<SpectralField> {
        let mut out = self.apply(&u.apply_multiplier(chi2h)?)?;
        out.apply_multiplier_in_place(chi2h)?;
        Ok(out)
    }

    /// Largest spectral norm of the sampled coefficients, `(sum_j sup |A_j|, sup |B|)`.
    pub fn coefficient_bounds(&self) -> (f64, f64) {
        let m = self.m;
        let norm = |flat: &[Complex64]| spectral_norm(&CMat::from_fn(m, m, |r, c| flat[r * m + c]));
        let sup = |all: &[Complex64]| all.chunks(m * m).map(norm).fold(0.0, f64::max);
        match &self.samples {
            Samples::Constant { a, b } => (a.iter().map(|aj| norm(aj)).sum(), norm(b)),
            Samples::Nodes { a, b } => (a.iter().map(|aj| sup(aj)).sum(), b.as_deref().map_or(0.0, sup)),
        }
    }
}

pub fn apply_g(model: &SystemModel, t: f64, field: &SpectralField) -> Result<SpectralField> {
    model.check_field(field)?;
    FrozenOperator::new(model, field.grid(), t)?.apply(field)
}

pub fn apply_g_adjoint(model: &SystemModel, t: f64, field: &SpectralField) -> Result<SpectralField> {
    model.check_field(field)?;
    FrozenOperator::new(model, field.grid(), t)?.apply_adjoint(field)
}

pub fn apply_g_h(model: &SystemModel, t: f64, field: &SpectralField, h: f64) -> Result<SpectralField> {
    model.check_field(field)?;
    let chi2h = cutoff_multiplier(field.grid(), h, 2)?;
    FrozenOperator::new(model, field.grid(), t)?.apply_truncated(field, &chi2h)
}

pub const CBAR_SAFETY: f64 = 1.1;
const POWER_ITERATIONS: usize = 50;
const POWER_STAGNATION: f64 = 1e-6;
const CBAR_TIME_SAMPLES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CbarEstimate {
    /// `(sqrt 3 / 2) max_t sigma_max(<D>^{-1} G(t))` from power iteration.
    pub raw: f64,
    /// Value used by the scheme: `1.1 raw`, or at least the coefficient bound
    /// when power iteration did not settle.
    pub value: f64,
    /// `(sqrt 3 / 2)(sum_j sup |A_j| + sup |B|)`.
    pub fallback: f64,
    /// Relative stagnation below `1e-6` reached at every sampled time.
    pub converged: bool,
    /// Largest relative change in the final iteration over sampled times.
    pub last_change: f64,
    pub iterations: usize,
    pub used_fallback: bool,
}

/// Relative change in the last iteration below which a capped power
/// iteration is still trusted; the safety factor covers the remainder.
const POWER_SETTLED: f64 = 1e-3;

struct PowerResult {
    sigma: f64,
    converged: bool,
    last_change: f64,
    iterations: usize,
}

/// Power iteration on `M* M` for `M = <D>^{-1} G` with `ell = 1`.
fn power_sigma(op: &FrozenOperator, inv_bracket: &Multiplier, seed: u64) -> Result<PowerResult> {
    let grid = op.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..op.m * grid.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut v = SpectralField::from_vec(grid, op.m, data)?;
    v.scale(Complex64::from(1.0 / v.norm()));
    let mut sigma = 0.0;
    let mut last_change = f64::INFINITY;
    for it in 1..=POWER_ITERATIONS {
        let mv = op.apply(&v)?.apply_multiplier(inv_bracket)?;
        let next_sigma = mv.norm();
        if it > 1 {
            last_change = (next_sigma - sigma).abs() / next_sigma.max(f64::MIN_POSITIVE);
        }
        sigma = next_sigma;
        let mut w = op.apply_adjoint(&mv.apply_multiplier(inv_bracket)?)?;
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(PowerResult { sigma, converged: true, last_change: 0.0, iterations: it });
        }
        if last_change <= POWER_STAGNATION {
            return Ok(PowerResult { sigma, converged: true, last_change, iterations: it });
        }
        w.scale(Complex64::from(1.0 / wn));
        v = w;
    }
    Ok(PowerResult { sigma, converged: false, last_change, iterations: POWER_ITERATIONS })
}

/// Estimates `C_bar` over `t` in `[0, t_max]`.
pub fn estimate_cbar(model: &SystemModel, grid: &GridSpec, t_max: f64) -> Result<CbarEstimate> {
    model.check_grid(grid)?;
    let times: Vec<f64> = if model.coeffs.t_independent() || t_max <= 0.0 {
        vec![0.0]
    } else {
        (0..CBAR_TIME_SAMPLES).map(|i| t_max * i as f64 / (CBAR_TIME_SAMPLES - 1) as f64).collect()
    };
    let inv_bracket = Multiplier::from_values(grid.frequency_norms().iter().map(|r| 1.0 / 1f64.hypot(*r)).collect());
    let half_root3 = 3f64.sqrt() / 2.0;
    let (mut sigma, mut bound, mut last_change) = (0.0f64, 0.0f64, 0.0f64);
    let (mut converged, mut iterations) = (true, 0);
    for (i, &t) in times.iter().enumerate() {
        let op = FrozenOperator::new(model, grid, t)?;
        let r = power_sigma(&op, &inv_bracket, 0x5eed + i as u64)?;
        sigma = sigma.max(r.sigma);
        converged &= r.converged;
        last_change = last_change.max(r.last_change);
        iterations = iterations.max(r.iterations);
        let (a, b) = op.coefficient_bounds();
        bound = bound.max(a + b);
    }
    let raw = half_root3 * sigma;
    let fallback = half_root3 * bound;
    let trusted = raw.is_finite() && (converged || last_change <= POWER_SETTLED);
    let value = if trusted { CBAR_SAFETY * raw } else { (CBAR_SAFETY * raw).max(fallback) };
    Ok(CbarEstimate { raw, value, fallback, converged, last_change, iterations, used_fallback: !trusted })
}

pub const DEFAULT_HYPERBOLICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperbolicityReport {
    pub max_imag: f64,
    pub worst_t: f64,
    pub worst_x: Vec<f64>,
    pub worst_xi: Vec<f64>,
    pub samples: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Largest `|Im lambda(A(t, x, xi))|` over Halton samples with `t` in `[0, 1]`,
/// `x` in the box of half width `support_radius + 1` and `|xi| = 1`.
pub fn check_hyperbolicity(model: &SystemModel, sample_count: usize, tol: f64) -> Result<HyperbolicityReport> {
    if !(tol > 0.0) {
        return Err(crate::error::Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let d = model.d();
    let box_half = model.support_radius + 1.0;
    let dims = 1 + d + sphere_coords(d);
    let mut report = HyperbolicityReport {
        max_imag: 0.0,
        worst_t: 0.0,
        worst_x: vec![0.0; d],
        worst_xi: vec![0.0; d],
        samples: sample_count,
        tol,
        pass: true,
    };
    for i in 0..sample_count {
        let u = halton(i as u64, dims);
        let t = u[0];
        let x: Vec<f64> = u[1..=d].iter().map(|v| box_half * (2.0 * v - 1.0)).collect();
        let xi = sphere_point(d, &u[1 + d..]);
        let im = max_abs_imag_eig(&symbol_a(model, t, &x, &xi));
        if im > report.max_imag || i == 0 {
            report.max_imag = im;
            report.worst_t = t;
            report.worst_x = x;
            report.worst_xi = xi;
        }
    }
    report.pass = report.max_imag < tol;
    Ok(report)
}
