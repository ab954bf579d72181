//! Pointwise symmetrizer machinery: the Taylor symbols `calH_r`, the
//! conjugated symbol `H` and its truncation `H^h`, `M^h = i H^h - b<xi>^rho`,
//! the symmetrizer `R` solving `M* R + R M = -b<xi>^rho I`, and the empirical
//! regularity index.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::cutoff::{chi_h, chi_h_gradient};
use crate::error::{Error, Result};
use crate::gevrey::bracket;
use crate::linalg::{
    hermitian_eigenvalues, hermitian_part, hermiticity_defect, identity, lyapunov_quadrature, max_abs_imag_eig,
    solve_lyapunov, spectral_abscissa, spectral_norm,
};
use crate::model::{CMat, SystemModel};
use crate::operator::symbol_a;
use crate::sampling::{halton, sphere_coords, sphere_point};
use crate::scheme::SchemeConfig;

/// Source of the x-derivatives `d^alpha A_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DerivativeMode {
    /// Analytic when the model provides it, finite differences otherwise.
    Auto,
    Analytic,
    /// Nested fourth-order central differences with one Richardson step.
    FiniteDifference { step: f64 },
}

pub const DEFAULT_FD_STEP: f64 = 5e-3;

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// All multi-indices in `d` variables with `|alpha| <= order`, by increasing order.
pub fn multi_indices(d: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(d, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, order, &mut Vec::new(), &mut out);
    out.sort_by_key(|a| a.iter().sum::<usize>());
    out
}

fn factorial(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&k| (1..=k).map(|v| v as f64).product::<f64>()).product()
}

fn power(y: &[f64], alpha: &[usize]) -> f64 {
    y.iter().zip(alpha).map(|(v, &k)| v.powi(k as i32)).product()
}

/// Fourth-order central first derivative along `axis`, Richardson-extrapolated.
fn fd_first(f: &dyn Fn(&[f64]) -> Result<CMat>, x: &[f64], axis: usize, step: f64) -> Result<CMat> {
    let stencil = |h: f64| -> Result<CMat> {
        let at = |s: f64| {
            let mut p = x.to_vec();
            p[axis] += s * h;
            f(&p)
        };
        Ok((at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * c(8.0)) * c(1.0 / (12.0 * h)))
    };
    let coarse = stencil(step)?;
    let fine = stencil(step / 2.0)?;
    Ok((fine * c(16.0) - coarse) * c(1.0 / 15.0))
}

fn fd_derivative(f: &dyn Fn(&[f64]) -> Result<CMat>, x: &[f64], alpha: &[usize], step: f64) -> Result<CMat> {
    match alpha.iter().position(|&k| k > 0) {
        None => f(x),
        Some(axis) => {
            let mut rest = alpha.to_vec();
            rest[axis] -= 1;
            let inner = move |p: &[f64]| fd_derivative(f, p, &rest, step);
            fd_first(&inner, x, axis, step)
        }
    }
}

/// `d^alpha/dx^alpha A_j(t, x)` (plain real derivative).
pub fn a_derivative(
    model: &SystemModel,
    j: usize,
    t: f64,
    x: &[f64],
    alpha: &[usize],
    mode: DerivativeMode,
) -> Result<CMat> {
    let order: usize = alpha.iter().sum();
    if order == 0 {
        return Ok(model.a(j, t, x));
    }
    let analytic = model.coeffs.analytic_derivatives();
    match mode {
        DerivativeMode::Analytic if !analytic => {
            Err(Error::DerivativeUnsupported { model: model.name.clone(), order })
        }
        DerivativeMode::Analytic => model.coeffs.a_dx(j, t, x, alpha),
        DerivativeMode::Auto if analytic => model.coeffs.a_dx(j, t, x, alpha),
        DerivativeMode::Auto => fd_derivative(&|p| Ok(model.a(j, t, p)), x, alpha, DEFAULT_FD_STEP),
        DerivativeMode::FiniteDifference { step } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidArgument(format!("finite-difference step {step}")));
            }
            fd_derivative(&|p| Ok(model.a(j, t, p)), x, alpha, step)
        }
    }
}

/// `D_x^alpha A_j`, with `D = -i d/dx`.
fn da(model: &SystemModel, j: usize, t: f64, x: &[f64], alpha: &[usize], mode: DerivativeMode) -> Result<CMat> {
    let order: usize = alpha.iter().sum();
    let phase = Complex64::new(0.0, -1.0).powi(order as i32);
    Ok(a_derivative(model, j, t, x, alpha, mode)? * phase)
}

/// `calH_r(t, x, xi, y, eta; eps)` for a symbol linear in `xi`: only `beta = 0`
/// and `|beta| = 1` terms survive.
#[allow(clippy::too_many_arguments)]
pub fn cal_h(
    model: &SystemModel,
    t: f64,
    x: &[f64],
    xi: &[f64],
    y: &[f64],
    eta: &[f64],
    eps: f64,
    r: usize,
    mode: DerivativeMode,
) -> Result<CMat> {
    let d = model.d();
    if x.len() != d || xi.len() != d || y.len() != d || eta.len() != d {
        return Err(Error::ShapeMismatch(format!("calH arguments must have length d = {d}")));
    }
    let m = model.m();
    let mut out = CMat::zeros(m, m);
    for alpha in multi_indices(d, r) {
        let order: usize = alpha.iter().sum();
        let w = eps.powi(order as i32) / factorial(&alpha) * power(y, &alpha);
        let beta_weight = eps.powi(order as i32 + 1) / factorial(&alpha) * power(y, &alpha);
        let with_beta = order < r && eta.iter().any(|&e| e != 0.0) && beta_weight != 0.0;
        if w == 0.0 && !with_beta {
            continue;
        }
        for j in 0..d {
            if xi[j] == 0.0 && !with_beta {
                continue;
            }
            let dj = da(model, j, t, x, &alpha, mode)?;
            if w != 0.0 && xi[j] != 0.0 {
                out += &dj * c(w * xi[j]);
            }
            if with_beta && eta[j] != 0.0 {
                out += &dj * Complex64::new(0.0, -beta_weight * eta[j]);
            }
        }
    }
    Ok(out)
}

/// Constants used by the pointwise constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetrizerConfig {
    pub tau_bar: f64,
    pub b: f64,
    pub ell: f64,
    pub rho: f64,
    pub nu: f64,
    pub theta: u32,
    pub h: f64,
    pub derivatives: DerivativeMode,
    /// Cross-check `R` against quadrature of its integral definition.
    pub quadrature_check: bool,
}

impl SymmetrizerConfig {
    pub fn from_scheme(config: &SchemeConfig) -> Self {
        SymmetrizerConfig {
            tau_bar: config.tau,
            b: config.b,
            ell: config.ell,
            rho: config.rho,
            nu: config.nu,
            theta: config.theta,
            h: config.h,
            derivatives: DerivativeMode::Auto,
            quadrature_check: true,
        }
    }

    /// Taylor order `max(2 theta, m)`.
    pub fn order(&self, m: usize) -> usize {
        (2 * self.theta as usize).max(m)
    }
}

/// `grad_xi(<xi>_ell^rho chi_h(xi))`.
pub fn weight_gradient(xi: &[f64], ell: f64, rho: f64, h: f64) -> Result<Vec<f64>> {
    let br = bracket(xi, ell)?;
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let chi = chi_h(r, h);
    let dchi = chi_h_gradient(xi, h);
    let p = br.powf(rho);
    Ok(xi.iter().zip(&dchi).map(|(v, dc)| rho * p / (br * br) * v * chi + p * dc).collect())
}

/// `H` and `H^h = chi_2h^2 H` at one point, with the rescaled-symbol cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSymbol {
    pub order: usize,
    pub y: Vec<f64>,
    pub h_full: CMat,
    pub h_trunc: CMat,
    /// `||H^h - chi_2h^2 <xi> calH_N(xi/<xi>, y/<xi>^(rho-1), 0; <xi>^(rho-1))||`, relative.
    pub rescaled_residual: f64,
}

pub fn taylor_symbol_h(
    model: &SystemModel,
    t: f64,
    x: &[f64],
    xi: &[f64],
    tau: f64,
    cfg: &SymmetrizerConfig,
) -> Result<TaylorSymbol> {
    if !(0.0..=cfg.tau_bar).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau = {tau} outside [0, {}]", cfg.tau_bar)));
    }
    let d = model.d();
    let m = model.m();
    let order = cfg.order(m);
    let grad = weight_gradient(xi, cfg.ell, cfg.rho, cfg.h)?;
    let y: Vec<f64> = grad.iter().map(|g| (cfg.tau_bar - tau) * g).collect();

    let mut h_full = CMat::zeros(m, m);
    for alpha in multi_indices(d, order) {
        let w = power(&y, &alpha) / factorial(&alpha);
        if w == 0.0 {
            continue;
        }
        let mut term = CMat::zeros(m, m);
        for (j, &v) in xi.iter().enumerate() {
            if v != 0.0 {
                term += da(model, j, t, x, &alpha, cfg.derivatives)? * c(v);
            }
        }
        h_full += term * c(w);
    }
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let chi2 = chi_h(r, 2.0 * cfg.h).powi(2);
    let h_trunc = &h_full * c(chi2);

    let br = bracket(xi, cfg.ell)?;
    let eps = br.powf(cfg.rho - 1.0);
    let xi_n: Vec<f64> = xi.iter().map(|v| v / br).collect();
    let y_n: Vec<f64> = y.iter().map(|v| v / eps).collect();
    let zero = vec![0.0; d];
    let rescaled = cal_h(model, t, x, &xi_n, &y_n, &zero, eps, order, cfg.derivatives)? * c(chi2 * br);
    let rescaled_residual = (&rescaled - &h_trunc).norm() / h_trunc.norm().max(1.0);
    Ok(TaylorSymbol { order, y, h_full, h_trunc, rescaled_residual })
}

/// `M^h = i H^h - b sigma I`; errors when it is not Hurwitz.
pub fn build_m(h_trunc: &CMat, b: f64, sigma: f64) -> Result<CMat> {
    if !(sigma > 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidArgument(format!("build_m needs sigma > 0, b >= 0 (got {sigma}, {b})")));
    }
    let m = h_trunc.nrows();
    let out = h_trunc * Complex64::i() - identity(m) * c(b * sigma);
    let abscissa = spectral_abscissa(&out);
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizerSolution {
    /// Hermitian part of the Lyapunov solution.
    pub r: CMat,
    /// Hermiticity defect of the raw solve.
    pub hermiticity_defect: f64,
    /// `||M* R + R M + b sigma I|| / (b sigma)`.
    pub lyapunov_residual: f64,
    /// Relative distance to the quadrature of the integral, when computed.
    pub quadrature_deviation: Option<f64>,
}

/// `R = b sigma int_0^inf (e^{sM})* e^{sM} ds` via the Lyapunov equation.
pub fn solve_symmetrizer(m_mat: &CMat, b: f64, sigma: f64, quadrature_check: bool) -> Result<SymmetrizerSolution> {
    let n = m_mat.nrows();
    let bs = b * sigma;
    if !(bs > 0.0) {
        return Err(Error::InvalidArgument(format!("b sigma = {bs} must be positive")));
    }
    let raw = solve_lyapunov(m_mat, &(identity(n) * c(-bs)))?;
    let defect = hermiticity_defect(&raw);
    let r = hermitian_part(&raw);
    let res = m_mat.adjoint() * &r + &r * m_mat + identity(n) * c(bs);
    let lyapunov_residual = res.norm() / bs;
    let quadrature_deviation = if quadrature_check {
        let q = lyapunov_quadrature(m_mat, bs)?;
        Some((&q - &r).norm() / r.norm())
    } else {
        None
    };
    Ok(SymmetrizerSolution { r, hermiticity_defect: defect, lyapunov_residual, quadrature_deviation })
}

/// `R (i H^h) + (i H^h)* R = -b sigma + 2 b sigma R`, residual relative to `b sigma max(1, ||R||)`.
pub fn rih_residual(r: &CMat, h_trunc: &CMat, b: f64, sigma: f64) -> f64 {
    let n = r.nrows();
    let ih = h_trunc * Complex64::i();
    let lhs = r * &ih + ih.adjoint() * r;
    let rhs = identity(n) * c(-b * sigma) + r * c(2.0 * b * sigma);
    (lhs - rhs).norm() / (b * sigma * r.norm().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    pub min_eig: f64,
    pub bracket: f64,
    /// `min_eig(R) <xi>^{2 nu}`.
    pub c_est: f64,
}

pub fn verify_lower_bound(r: &CMat, nu: f64, bracket_val: f64) -> LowerBound {
    let min_eig = hermitian_eigenvalues(r)[0];
    LowerBound { min_eig, bracket: bracket_val, c_est: min_eig * bracket_val.powf(2.0 * nu) }
}

fn ser_mat<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> =
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    rows.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub tau: f64,
}

/// Every pointwise quantity at one `(t, x, xi, tau)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetrizerProbe {
    pub point: ProbePoint,
    pub order: usize,
    #[serde(serialize_with = "ser_mat")]
    pub h: CMat,
    #[serde(serialize_with = "ser_mat")]
    pub h_trunc: CMat,
    #[serde(serialize_with = "ser_mat")]
    pub m: CMat,
    #[serde(serialize_with = "ser_mat")]
    pub r: CMat,
    pub sigma: f64,
    pub abscissa: f64,
    pub lyapunov_residual: f64,
    pub rih_residual: f64,
    pub rescaled_residual: f64,
    pub quadrature_deviation: Option<f64>,
    pub hermiticity_defect: f64,
    pub min_eig: f64,
    pub c_est: f64,
    pub config: SymmetrizerConfig,
}

pub fn probe(model: &SystemModel, point: &ProbePoint, cfg: &SymmetrizerConfig) -> Result<SymmetrizerProbe> {
    let ts = taylor_symbol_h(model, point.t, &point.x, &point.xi, point.tau, cfg)?;
    let br = bracket(&point.xi, cfg.ell)?;
    let sigma = br.powf(cfg.rho);
    let m_mat = build_m(&ts.h_trunc, cfg.b, sigma)?;
    let sol = solve_symmetrizer(&m_mat, cfg.b, sigma, cfg.quadrature_check)?;
    let lb = verify_lower_bound(&sol.r, cfg.nu, br);
    Ok(SymmetrizerProbe {
        point: point.clone(),
        order: ts.order,
        rih_residual: rih_residual(&sol.r, &ts.h_trunc, cfg.b, sigma),
        abscissa: spectral_abscissa(&m_mat),
        h: ts.h_full,
        h_trunc: ts.h_trunc,
        m: m_mat,
        r: sol.r,
        sigma,
        lyapunov_residual: sol.lyapunov_residual,
        rescaled_residual: ts.rescaled_residual,
        quadrature_deviation: sol.quadrature_deviation,
        hermiticity_defect: sol.hermiticity_defect,
        min_eig: lb.min_eig,
        c_est: lb.c_est,
        config: *cfg,
    })
}

/// Random probe points: `t` in `[0, t_max]`, `x` in the box of half width
/// `support_radius + 1`, `|xi|` in `[xi_min, xi_max]` (log-uniform), `tau` in `[0, tau_bar]`.
pub fn random_points(
    model: &SystemModel,
    count: usize,
    seed: u64,
    t_max: f64,
    xi_range: (f64, f64),
    tau_bar: f64,
) -> Vec<ProbePoint> {
    let d = model.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = model.support_radius + 1.0;
    let (lo, hi) = (xi_range.0.max(1e-6), xi_range.1.max(xi_range.0.max(1e-6)));
    (0..count)
        .map(|_| {
            let t = rng.gen::<f64>() * t_max;
            let x: Vec<f64> = (0..d)
                .map(|_| if model.x_independent() { 0.0 } else { half * (2.0 * rng.gen::<f64>() - 1.0) })
                .collect();
            let u: Vec<f64> = (0..sphere_coords(d)).map(|_| rng.gen()).collect();
            let radius = (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp();
            let xi = sphere_point(d, &u).into_iter().map(|v| v * radius).collect();
            ProbePoint { t, x, xi, tau: rng.gen::<f64>() * tau_bar }
        })
        .collect()
}

/// Probes in parallel; results keep the order of `points`.
pub fn probe_sweep(model: &SystemModel, points: &[ProbePoint], cfg: &SymmetrizerConfig) -> Result<Vec<SymmetrizerProbe>> {
    points.par_iter().map(|p| probe(model, p, cfg)).collect()
}

/// `max |Im zeta|` over eigenvalues of `calH_m` at Halton samples, one entry per `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCheck {
    pub eps: Vec<f64>,
    pub max_imag: Vec<f64>,
    /// `max_imag / eps` per level.
    pub ratio: Vec<f64>,
}

pub fn spectral_check(model: &SystemModel, samples: usize, eps_levels: &[f64], t_max: f64) -> Result<SpectralCheck> {
    let pts = unit_samples(model, samples, t_max);
    let r = model.m();
    let mut max_imag = Vec::with_capacity(eps_levels.len());
    for &eps in eps_levels {
        let mut worst = 0.0f64;
        for s in &pts {
            let hm = cal_h(model, s.t, &s.x, &s.xi, &s.y, &s.eta, eps, r, DerivativeMode::Auto)?;
            worst = worst.max(max_abs_imag_eig(&hm));
        }
        max_imag.push(worst);
    }
    let ratio = max_imag.iter().zip(eps_levels).map(|(v, e)| v / e).collect();
    Ok(SpectralCheck { eps: eps_levels.to_vec(), max_imag, ratio })
}

struct UnitSample {
    t: f64,
    x: Vec<f64>,
    xi: Vec<f64>,
    y: Vec<f64>,
    eta: Vec<f64>,
}

/// Halton samples with `|xi| <= 1` and `|(y, eta)| <= 1`; every fourth point
/// puts `xi` on the unit sphere and `(y, eta)` on the unit sphere in `R^{2d}`.
fn unit_samples(model: &SystemModel, count: usize, t_max: f64) -> Vec<UnitSample> {
    let d = model.d();
    let half = model.support_radius + 1.0;
    let dims = 1 + d + sphere_coords(d) + 1 + 2 * d + 1;
    (0..count)
        .map(|i| {
            let u = halton(i as u64, dims.min(10));
            let mut it = u.into_iter().chain(std::iter::repeat(0.5));
            let t = it.next().unwrap() * t_max;
            let x: Vec<f64> = (0..d)
                .map(|_| {
                    let v = it.next().unwrap();
                    if model.x_independent() { 0.0 } else { half * (2.0 * v - 1.0) }
                })
                .collect();
            let dir: Vec<f64> = (0..sphere_coords(d)).map(|_| it.next().unwrap()).collect();
            let rad = if i % 4 == 0 { 1.0 } else { it.next().unwrap() };
            let xi: Vec<f64> = sphere_point(d, &dir).into_iter().map(|v| v * rad).collect();
            let mut ye: Vec<f64> = (0..2 * d).map(|_| 2.0 * it.next().unwrap() - 1.0).collect();
            let n = ye.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if i % 4 == 0 { 1.0 / n.max(1e-12) } else { it.next().unwrap() / n.max(1.0) };
            ye.iter_mut().for_each(|v| *v *= scale);
            let eta = ye.split_off(d);
            UnitSample { t, x, xi, y: ye, eta }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaFit {
    pub theta_hat: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub eps: Vec<f64>,
    pub max_norm: Vec<f64>,
    pub samples: usize,
    pub degenerate: bool,
    pub note: Option<String>,
}

/// Slope of `log max ||e^{i s calH_N}||` against `log(1/eps)` with `s = 1/eps`
/// and `eps = 2^-3 .. 2^-10`, maximized over `samples` points.
pub fn fit_theta(model: &SystemModel, samples: usize, t_max: f64) -> Result<ThetaFit> {
    if samples == 0 {
        return Err(Error::InvalidArgument("fit_theta needs at least one sample".into()));
    }
    let order = (2 * model.theta as usize).max(model.m());
    let pts = unit_samples(model, samples, t_max);
    let eps: Vec<f64> = (3..=10).map(|k| 2f64.powi(-k)).collect();
    let max_norm = eps
        .par_iter()
        .map(|&e| {
            let mut worst = 0.0f64;
            for s in &pts {
                let hm = cal_h(model, s.t, &s.x, &s.xi, &s.y, &s.eta, e, order, DerivativeMode::Auto)?;
                let ex = (hm * Complex64::new(0.0, 1.0 / e)).exp();
                worst = worst.max(spectral_norm(&ex));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = max_norm.iter().map(|v| v.ln()).collect();
    let (slope, _, residual) = least_squares(&xs, &ys);
    let degenerate = ys.iter().all(|v| v.abs() < 1e-3);
    Ok(ThetaFit {
        theta_hat: if degenerate { 0.0 } else { slope },
        residual,
        eps,
        max_norm,
        samples,
        degenerate,
        note: degenerate.then(|| "all norms within 1e-3 of 1; reporting 0".to_string()),
    })
}

/// Least-squares line `y = slope x + intercept`; returns `(slope, intercept, rms residual)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// `A(xi) - i eps A(eta)`, which is `calH_r` (r >= 1) for x-independent models.
pub fn cal_h_constant(model: &SystemModel, t: f64, xi: &[f64], eta: &[f64], eps: f64) -> CMat {
    let x = vec![0.0; model.d()];
    let a = symbol_a(model, t, &x, xi);
    let b = symbol_a(model, t, &x, eta);
    a - b * Complex64::new(0.0, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::problems::{jordan, preset, variable_smooth};

    fn cfg(theta: u32, ell: f64, h: f64) -> SymmetrizerConfig {
        let mut s = SchemeConfig::new(theta, h, 0.0);
        s.ell = ell;
        s.tau = 0.5;
        SymmetrizerConfig::from_scheme(&s)
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(1, 3), vec![vec![0], vec![1], vec![2], vec![3]]);
        let m2 = multi_indices(2, 2);
        assert_eq!(m2.len(), 6);
        assert_eq!(m2[0], vec![0, 0]);
        assert!(m2.windows(2).all(|w| w[0].iter().sum::<usize>() <= w[1].iter().sum::<usize>()));
    }

    #[test]
    fn cal_h_at_zero_eps_is_symbol() {
        let p = variable_smooth().unwrap();
        let h = cal_h(&p.model, 0.2, &[0.3], &[0.7], &[0.5], &[0.4], 0.0, 3, DerivativeMode::Auto).unwrap();
        assert_eq!(h, symbol_a(&p.model, 0.2, &[0.3], &[0.7]));
    }

    #[test]
    fn cal_h_constant_coefficients() {
        let p = jordan().unwrap();
        for r in 1..4 {
            let h = cal_h(&p.model, 0.0, &[0.0], &[0.8], &[0.3], &[-0.6], 0.25, r, DerivativeMode::Auto).unwrap();
            let expect = cal_h_constant(&p.model, 0.0, &[0.8], &[-0.6], 0.25);
            assert!((h - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn finite_differences_match_analytic() {
        let p = variable_smooth().unwrap();
        for &x in &[-0.5, 0.05, 0.3, 1.1] {
            for r in 0..=2 {
                let a = cal_h(&p.model, 0.1, &[x], &[0.9], &[0.7], &[0.2], 0.5, r, DerivativeMode::Analytic).unwrap();
                let f = cal_h(&p.model, 0.1, &[x], &[0.9], &[0.7], &[0.2], 0.5, r, DerivativeMode::FiniteDifference {
                    step: DEFAULT_FD_STEP,
                })
                .unwrap();
                assert!((&a - &f).norm() <= 1e-8 * a.norm().max(1.0), "x={x} r={r} {}", (&a - &f).norm());
            }
        }
    }

    #[test]
    fn tau_bar_gives_plain_symbol() {
        let p = variable_smooth().unwrap();
        let c = cfg(0, 1.0, 0.05);
        let ts = taylor_symbol_h(&p.model, 0.0, &[0.2], &[3.0], c.tau_bar, &c).unwrap();
        assert_eq!(ts.h_full, symbol_a(&p.model, 0.0, &[0.2], &[3.0]));
        assert!(taylor_symbol_h(&p.model, 0.0, &[0.2], &[3.0], c.tau_bar + 0.1, &c).is_err());
    }

    #[test]
    fn constant_model_h_is_symbol_for_all_tau() {
        let p = jordan().unwrap();
        let c = cfg(1, 4.0, 0.05);
        for tau in [0.0, 0.2, 0.5] {
            let ts = taylor_symbol_h(&p.model, 0.0, &[0.0], &[12.0], tau, &c).unwrap();
            assert_eq!(ts.h_full, symbol_a(&p.model, 0.0, &[0.0], &[12.0]));
        }
    }

    #[test]
    fn rescaled_symbol_agrees_on_variable_model() {
        let p = variable_smooth().unwrap();
        let c = cfg(0, 2.0, 0.05);
        for &(x, xi, tau) in &[(0.1, 5.0, 0.0), (-0.4, 20.0, 0.25), (0.35, 27.0, 0.1), (0.0, -14.0, 0.0)] {
            let ts = taylor_symbol_h(&p.model, 0.3, &[x], &[xi], tau, &c).unwrap();
            assert!(ts.rescaled_residual < 1e-10, "{}", ts.rescaled_residual);
            assert!(ts.h_full != symbol_a(&p.model, 0.3, &[x], &[xi]) || tau == c.tau_bar);
        }
    }

    #[test]
    fn m_examples() {
        let zero = CMat::zeros(2, 2);
        let m = build_m(&zero, 2.0, 1.5).unwrap();
        assert_eq!(m, identity(2) * c(-3.0));
        let herm = crate::model::real_matrix(2, &[1.0, 2.0, 2.0, -1.0]);
        let m = build_m(&herm, 1.0, 0.7).unwrap();
        for z in crate::linalg::eigenvalues(&m) {
            assert!((z.re + 0.7).abs() < 1e-12);
        }
        assert!(matches!(build_m(&zero, 0.0, 1.0), Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn scalar_symmetrizer_is_one_half() {
        let m = DMatrix::from_element(1, 1, Complex64::new(-0.8, 3.0));
        let s = solve_symmetrizer(&m, 2.0, 0.4, true).unwrap();
        assert!((s.r[(0, 0)] - c(0.5)).norm() <= 1e-14);
        assert!(s.lyapunov_residual < 1e-14);
        let lb = verify_lower_bound(&s.r, 0.125, 3.0);
        assert!((lb.c_est - 0.5 * 3f64.powf(0.25)).abs() < 1e-14);
        let r = solve_symmetrizer(&(-identity(2)), 1.0, 1.0, true).unwrap().r;
        assert!((r - identity(2) * c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn jordan_symmetrizer_closed_form() {
        // M = i a N - c I gives R = [[1/2, i a/(4c)], [-i a/(4c), 1/2 + a^2/(4 c^2)]]
        let (a, cc) = (3.0, 0.8);
        let n = crate::model::real_matrix(2, &[0.0, 1.0, 0.0, 0.0]);
        let m = build_m(&(n * c(a)), 1.0, cc).unwrap();
        let r = solve_symmetrizer(&m, 1.0, cc, true).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[
            c(0.5),
            Complex64::new(0.0, a / (4.0 * cc)),
            Complex64::new(0.0, -a / (4.0 * cc)),
            c(0.5 + a * a / (4.0 * cc * cc)),
        ]);
        assert!((&r.r - &expect).norm() < 1e-13);
        assert!(r.quadrature_deviation.unwrap() < 1e-8);
        assert!(rih_residual(&r.r, &(crate::model::real_matrix(2, &[0.0, a, 0.0, 0.0])), 1.0, cc) < 1e-13);
    }

    #[test]
    fn jordan_abscissa_is_minus_b_sigma() {
        let p = jordan().unwrap();
        let c = cfg(1, 4.0, 0.02);
        let pt = ProbePoint { t: 0.0, x: vec![0.0], xi: vec![30.0], tau: 0.1 };
        let pr = probe(&p.model, &pt, &c).unwrap();
        assert!((pr.abscissa + c.b * pr.sigma).abs() < 1e-6 * pr.sigma);
        assert!(pr.min_eig > 0.0 && pr.lyapunov_residual < 1e-12 && pr.rih_residual < 1e-12);
    }

    #[test]
    fn probe_serializes() {
        let p = preset("degwave:a=1").unwrap();
        let c = cfg(0, 1.0, 0.1);
        let pr = probe(&p.model, &ProbePoint { t: 0.0, x: vec![0.0], xi: vec![2.0], tau: 0.0 }, &c).unwrap();
        let v = serde_json::to_value(&pr).unwrap();
        assert_eq!(v["r"].as_array().unwrap().len(), 2);
        assert_eq!(v["order"], 2);
    }

    #[test]
    fn symmetric_theta_is_small_and_jordan_is_one() {
        let s = fit_theta(&preset("degwave:a=1").unwrap().model, 16, 1.0).unwrap();
        assert!(s.theta_hat <= 0.2, "{s:?}");
        let j = fit_theta(&jordan().unwrap().model, 16, 1.0).unwrap();
        assert!((j.theta_hat - 1.0).abs() <= 0.2, "{j:?}");
    }

    #[test]
    fn least_squares_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, i, r) = least_squares(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14 && r < 1e-14);
    }
}
