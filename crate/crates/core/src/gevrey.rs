//! Regularity exponents, the shifted bracket and Gevrey-type weights.

use num_rational::Ratio;
use num_complex::Complex64;

use crate::cutoff::chi_h;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Multiplier, SpectralField};

/// Largest exponent for which the plain weight still fits in an f64.
pub const MAX_PLAIN_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityParams {
    pub theta: u32,
    pub s: f64,
    pub rho: f64,
    pub nu: f64,
}

/// Exact rational `(s, rho, nu)` for a regularity index.
pub fn regularity_params_exact(theta: u32) -> (Ratio<i64>, Ratio<i64>, Ratio<i64>) {
    let t = i64::from(theta);
    let s = Ratio::new(2 + 6 * t, 1 + 6 * t);
    let rho = s.recip();
    let nu = Ratio::from_integer(t) * (Ratio::from_integer(1) - rho);
    (s, rho, nu)
}

/// `s = (2+6 theta)/(1+6 theta)`, `rho = 1/s`, `nu = theta (1 - rho)`.
pub fn regularity_params(theta: i64) -> Result<RegularityParams> {
    let theta = u32::try_from(theta).map_err(|_| Error::InvalidArgument(format!("theta = {theta} must be >= 0")))?;
    let (s, rho, nu) = regularity_params_exact(theta);
    debug_assert!(rho >= Ratio::from_integer(3) * nu + Ratio::new(1, 2));
    let f = |r: Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
    Ok(RegularityParams { theta, s: f(s), rho: f(rho), nu: f(nu) })
}

/// `<xi>_ell = sqrt(ell^2 + |xi|^2)`.
pub fn bracket(xi: &[f64], ell: f64) -> Result<f64> {
    if !(ell >= 1.0) {
        return Err(Error::InvalidArgument(format!("ell = {ell} must be >= 1")));
    }
    Ok(bracket_norm(xi.iter().map(|v| v * v).sum::<f64>().sqrt(), ell))
}

#[inline]
pub fn bracket_norm(xi_norm: f64, ell: f64) -> f64 {
    ell.hypot(xi_norm)
}

/// Exponent `sigma log<xi> + (tau - a t) <xi>^rho [chi_h]` of a weighted norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub sigma: f64,
    pub tau_bar: f64,
    pub rate: f64,
    pub rho: f64,
    pub ell: f64,
    pub cutoff_h: Option<f64>,
}

impl WeightSpec {
    pub fn budget(&self, t: f64) -> Result<f64> {
        let remaining = self.tau_bar - self.rate * t;
        // Tolerate rounding when t sits exactly on the budget edge.
        if remaining < -1e-12 * self.tau_bar.abs().max(1e-300) {
            return Err(Error::WeightBudget { remaining });
        }
        Ok(remaining.max(0.0))
    }

    pub fn exponent(&self, xi_norm: f64, t: f64) -> Result<f64> {
        Ok(self.exponent_with_budget(xi_norm, self.budget(t)?))
    }

    fn exponent_with_budget(&self, xi_norm: f64, budget: f64) -> f64 {
        let br = bracket_norm(xi_norm, self.ell);
        let cut = self.cutoff_h.map_or(1.0, |h| chi_h(xi_norm, h));
        let sob = if self.sigma == 0.0 { 0.0 } else { self.sigma * br.ln() };
        let gev = if budget == 0.0 || cut == 0.0 { 0.0 } else { budget * br.powf(self.rho) * cut };
        sob + gev
    }

    fn check(&self) -> Result<()> {
        if !(self.ell >= 1.0) || !(0.0..1.0).contains(&self.rho) || self.rate < 0.0 || self.tau_bar < 0.0 {
            return Err(Error::InvalidArgument(format!("bad weight spec {self:?}")));
        }
        Ok(())
    }
}

/// A nonnegative quantity held as its natural log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorm {
    pub ln: f64,
    /// Decimal mantissa in `[1, 10)`, zero for the zero norm.
    pub mantissa: f64,
    pub exponent10: i64,
    /// Plain value, `None` when it would overflow.
    pub value: Option<f64>,
}

impl WeightedNorm {
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            return WeightedNorm { ln, mantissa: 0.0, exponent10: 0, value: Some(0.0) };
        }
        let log10 = ln / std::f64::consts::LN_10;
        let exponent10 = log10.floor() as i64;
        let mut mantissa = 10f64.powf(log10 - exponent10 as f64);
        let mut exponent10 = exponent10;
        if mantissa >= 10.0 {
            mantissa /= 10.0;
            exponent10 += 1;
        }
        let value = ln.exp();
        WeightedNorm { ln, mantissa, exponent10, value: value.is_finite().then_some(value) }
    }
}

/// `ln sqrt(sum_i c_i e^{2 e_i})` with a max shift, for `c_i >= 0`.
pub fn log_weighted_sum(terms: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let max = terms.clone().filter(|&(c, _)| c > 0.0).map(|(_, e)| e).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.filter(|&(c, _)| c > 0.0).map(|(c, e)| c * (2.0 * (e - max)).exp()).sum();
    max + 0.5 * s.ln()
}

/// Weighted L2 norm `|| <D>^sigma e^{(tau - a t)<D>^rho [chi_h]} u ||`, overflow safe.
pub fn weighted_norm(field: &SpectralField, t: f64, spec: &WeightSpec) -> Result<WeightedNorm> {
    spec.check()?;
    let budget = spec.budget(t)?;
    let grid = field.grid();
    let exps: Vec<f64> = grid.frequency_norms().iter().map(|&r| spec.exponent_with_budget(r, budget)).collect();
    let len = grid.len();
    let coeffs = field.coeffs();
    let vol = grid.volume();
    let terms = (0..coeffs.len()).map(|i| (coeffs[i].norm_sqr() * vol, exps[i % len]));
    Ok(WeightedNorm::from_ln(log_weighted_sum(terms)))
}

/// Lattice samples of the exponent `e(xi)` at time `t`.
pub fn weight_exponents(grid: &GridSpec, t: f64, spec: &WeightSpec) -> Result<Vec<f64>> {
    spec.check()?;
    let budget = spec.budget(t)?;
    Ok(grid.frequency_norms().iter().map(|&r| spec.exponent_with_budget(r, budget)).collect())
}

/// Plain samples of `e^{e(xi)}` (or `e^{-e(xi)}` when `inverse`).
pub fn weight_multiplier(t: f64, spec: &WeightSpec, grid: &GridSpec, inverse: bool) -> Result<Multiplier> {
    let exps = weight_exponents(grid, t, spec)?;
    let sign = if inverse { -1.0 } else { 1.0 };
    let max_exponent = exps.iter().map(|e| sign * e).fold(f64::NEG_INFINITY, f64::max);
    if max_exponent > MAX_PLAIN_EXPONENT {
        return Err(Error::WeightOverflow { max_exponent });
    }
    Ok(Multiplier::from_values(exps.into_iter().map(|e| (sign * e).exp()).collect()))
}

/// Applies `e^{e(xi)}` to a field after shifting by `-shift`; the caller keeps
/// `shift` to undo it in log space.
pub fn apply_weight_shifted(field: &SpectralField, exps: &[f64], shift: f64) -> SpectralField {
    let len = field.grid().len();
    let mut out = field.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        *c *= Complex64::from((exps[i % len] - shift).exp());
    }
    out
}

/// `omega_h = sigma tanh(x/2)/x` with `sigma = <xi>^rho`, `x = a k sigma chi_h`; `sigma/2` when `x = 0`.
pub fn omega_h(xi_norm: f64, a: f64, k: f64, rho: f64, ell: f64, h: f64) -> f64 {
    let sigma = bracket_norm(xi_norm, ell).powf(rho);
    let x = a * k * sigma * chi_h(xi_norm, h);
    if x == 0.0 {
        sigma / 2.0
    } else {
        sigma * (x / 2.0).tanh() / x
    }
}

/// Both sides of `(W^{n+1} - W^n)/k = -2 a omega_h chi_h (W^{n+1} + W^n)/2` at one lattice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub omega: f64,
    pub sigma: f64,
}

impl WeightIdentity {
    pub fn relative_residual(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / scale
        }
    }
}

/// Evaluates the discrete weight identity at `xi` between `t_n` and `t_n + k`.
pub fn weight_identity(xi_norm: f64, t_n: f64, k: f64, spec: &WeightSpec) -> Result<WeightIdentity> {
    let h = spec
        .cutoff_h
        .ok_or_else(|| Error::InvalidArgument("weight identity needs the truncated weight".into()))?;
    if k <= 0.0 {
        return Err(Error::InvalidArgument(format!("k = {k} must be positive")));
    }
    let e_n = spec.exponent(xi_norm, t_n)?;
    spec.budget(t_n + k)?;
    if e_n > MAX_PLAIN_EXPONENT {
        return Err(Error::WeightOverflow { max_exponent: e_n });
    }
    let w_n = e_n.exp();
    let sigma = bracket_norm(xi_norm, spec.ell).powf(spec.rho);
    let chi = chi_h(xi_norm, h);
    let x = spec.rate * k * sigma * chi;
    let omega = omega_h(xi_norm, spec.rate, k, spec.rho, spec.ell, h);
    // W^{n+1} = W^n e^{-x}; expm1 keeps the difference free of cancellation.
    let lhs = w_n * (-x).exp_m1() / k;
    let rhs = -2.0 * spec.rate * omega * chi * (w_n * (-x).exp() + w_n) / 2.0;
    Ok(WeightIdentity { lhs, rhs, omega, sigma })
}
