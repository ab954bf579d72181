//! Smooth radial cutoff `chi` with plateau `|x| <= 2` and support `|x| <= 2 sqrt 2`,
//! and its scaled lattice samples `chi(h xi)`, `chi(2h xi)`.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Multiplier};

pub const PLATEAU_RADIUS: f64 = 2.0;
pub const SUPPORT_RADIUS: f64 = 2.0 * std::f64::consts::SQRT_2;
const GLUE_WIDTH: f64 = SUPPORT_RADIUS - PLATEAU_RADIUS;

fn flat(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn flat_derivative(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp() / (s * s)
    } else {
        0.0
    }
}

/// Radial profile `c(r)`: one on `[0, 2]`, zero beyond `2 sqrt 2`, exponential glue between.
pub fn chi(r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(Error::InvalidArgument(format!("cutoff radius {r} is negative")));
    }
    Ok(chi_unchecked(r))
}

pub(crate) fn chi_unchecked(r: f64) -> f64 {
    if r <= PLATEAU_RADIUS {
        return 1.0;
    }
    if r >= SUPPORT_RADIUS {
        return 0.0;
    }
    let a = flat((SUPPORT_RADIUS - r) / GLUE_WIDTH);
    let b = flat((r - PLATEAU_RADIUS) / GLUE_WIDTH);
    a / (a + b)
}

/// `c'(r)`, zero outside the glue band.
pub fn chi_derivative(r: f64) -> f64 {
    if r <= PLATEAU_RADIUS || r >= SUPPORT_RADIUS {
        return 0.0;
    }
    let sa = (SUPPORT_RADIUS - r) / GLUE_WIDTH;
    let sb = (r - PLATEAU_RADIUS) / GLUE_WIDTH;
    let (a, b) = (flat(sa), flat(sb));
    let da = -flat_derivative(sa) / GLUE_WIDTH;
    let db = flat_derivative(sb) / GLUE_WIDTH;
    (da * b - a * db) / ((a + b) * (a + b))
}

/// `chi_h(xi) = c(h |xi|)`.
pub fn chi_h(xi_norm: f64, h: f64) -> f64 {
    chi_unchecked(h * xi_norm)
}

/// Gradient of `xi -> c(h |xi|)`.
pub fn chi_h_gradient(xi: &[f64], h: f64) -> Vec<f64> {
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return vec![0.0; xi.len()];
    }
    let dc = chi_derivative(h * r) * h;
    xi.iter().map(|v| dc * v / r).collect()
}

/// Outcome of [`validate_resolution`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionReport {
    pub pass: bool,
    pub max_frequency: f64,
    pub needed: f64,
    /// Smallest even `N_g` passing for this `h` and period.
    pub required_points: usize,
}

/// Passes iff the largest lattice frequency reaches `2 sqrt 2 / h` plus one lattice spacing.
pub fn validate_resolution(grid: &GridSpec, h: f64) -> ResolutionReport {
    let needed = SUPPORT_RADIUS / h + grid.frequency_spacing();
    let max_frequency = grid.max_frequency();
    ResolutionReport {
        pass: h > 0.0 && max_frequency >= needed,
        max_frequency,
        needed,
        required_points: required_points(grid.half_period(), h),
    }
}

fn passes(points: usize, half_period: f64, h: f64) -> bool {
    let pi = std::f64::consts::PI;
    pi * (points / 2 - 1) as f64 / half_period >= SUPPORT_RADIUS / h + pi / half_period
}

/// Smallest even point count passing [`validate_resolution`]: `2 ceil(2 sqrt 2 L / (pi h)) + 4`,
/// corrected for rounding at the boundary.
pub fn required_points(half_period: f64, h: f64) -> usize {
    let q = (SUPPORT_RADIUS * half_period / (std::f64::consts::PI * h)).ceil() as usize;
    let mut n = (2 * q + 4).max(8);
    while !passes(n, half_period, h) {
        n += 2;
    }
    while n > 8 && passes(n - 2, half_period, h) {
        n -= 2;
    }
    n
}

pub(crate) fn ensure_resolved(grid: &GridSpec, h: f64) -> Result<()> {
    let report = validate_resolution(grid, h);
    if report.pass {
        Ok(())
    } else {
        Err(Error::UnderResolved {
            h,
            max_xi: report.max_frequency,
            needed: report.needed,
            required_points: report.required_points,
        })
    }
}

/// Lattice samples of `chi(scale h xi)` for `scale` in `{1, 2}`.
pub fn cutoff_multiplier(grid: &GridSpec, h: f64, scale: u32) -> Result<Multiplier> {
    if scale != 1 && scale != 2 {
        return Err(Error::InvalidArgument(format!("cutoff scale must be 1 or 2, got {scale}")));
    }
    ensure_resolved(grid, h)?;
    let sh = scale as f64 * h;
    Ok(Multiplier::from_values(grid.frequency_norms().iter().map(|&r| chi_h(r, sh)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn profile_values() {
        assert_eq!(chi(0.0).unwrap(), 1.0);
        assert_eq!(chi(2.0).unwrap(), 1.0);
        assert_eq!(chi(3.0).unwrap(), 0.0);
        assert_eq!(chi(SUPPORT_RADIUS).unwrap(), 0.0);
        let mid = chi((2.0 + SUPPORT_RADIUS) / 2.0).unwrap();
        assert!((mid - 0.5).abs() < 1e-15);
        assert!(chi(-0.1).is_err());
    }

    #[test]
    fn profile_is_monotone_and_bounded() {
        let mut prev = 1.0;
        for i in 0..=2000 {
            let r = 1.9 + i as f64 * 1e-3;
            let v = chi(r).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        for i in 1..40 {
            let r = 2.0 + i as f64 * (SUPPORT_RADIUS - 2.0) / 40.0;
            let e = 1e-6;
            let fd = (chi_unchecked(r + e) - chi_unchecked(r - e)) / (2.0 * e);
            assert!((fd - chi_derivative(r)).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn first_four_derivatives_vanish_smoothly_at_the_joints() {
        // Repeated central differences of growing order stay small approaching
        // both joints: the glue is flat to all orders there.
        let e: f64 = 2e-3;
        for joint in [PLATEAU_RADIUS, SUPPORT_RADIUS] {
            for order in 1..=4 {
                let mut worst: f64 = 0.0;
                for offset in [-0.02, -0.01, 0.0, 0.01, 0.02] {
                    let r = joint + offset;
                    let mut acc = 0.0;
                    for k in 0..=order {
                        let binom = (0..k).fold(1.0, |b, i| b * (order - i) as f64 / (i + 1) as f64);
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        let x = r + (order as f64 / 2.0 - k as f64) * e;
                        acc += sign * binom * chi_unchecked(x.max(0.0));
                    }
                    worst = worst.max((acc / e.powi(order)).abs());
                }
                assert!(worst < 1e-3, "order {order} at {joint}: {worst}");
            }
        }
    }

    #[test]
    fn resolution_examples() {
        let fine = make_grid(1, 256, PI).unwrap();
        let r = validate_resolution(&fine, 0.1);
        assert!(r.pass);
        assert!((r.max_frequency - 127.0).abs() < 1e-12);
        let coarse = make_grid(1, 16, PI).unwrap();
        let r = validate_resolution(&coarse, 0.1);
        assert!(!r.pass);
        assert_eq!(r.required_points, 2 * (SUPPORT_RADIUS / 0.1).ceil() as usize + 4);
        let ok = make_grid(1, r.required_points, PI).unwrap();
        assert!(validate_resolution(&ok, 0.1).pass);
        let smaller = make_grid(1, r.required_points - 2, PI).unwrap();
        assert!(!validate_resolution(&smaller, 0.1).pass);
    }

    #[test]
    fn scaled_multipliers() {
        let g = make_grid(1, 256, PI).unwrap();
        let h = 0.05;
        let c1 = cutoff_multiplier(&g, h, 1).unwrap();
        let c2 = cutoff_multiplier(&g, h, 2).unwrap();
        for p in 0..g.len() {
            let r = g.frequency_norm(p);
            if r <= 2.0 / h {
                assert_eq!(c1.values()[p], 1.0);
            }
            if r >= SUPPORT_RADIUS / h {
                assert_eq!(c1.values()[p], 0.0);
            }
            if r == 0.0 {
                assert_eq!(c2.values()[p], 1.0);
            }
        }
        assert!(c1.values().iter().any(|&v| v > 0.0 && v < 1.0));
        assert!(cutoff_multiplier(&g, 0.001, 2).is_err());
        assert!(cutoff_multiplier(&g, h, 3).is_err());
    }

    #[test]
    fn chi_h_is_one_on_support_of_chi_2h() {
        for k in 3..=8 {
            let h = 2f64.powi(-k);
            let g = make_grid(1, required_points(PI, h), PI).unwrap();
            let c1 = cutoff_multiplier(&g, h, 1).unwrap();
            let c2 = cutoff_multiplier(&g, h, 2).unwrap();
            assert_eq!(c1.product(&c2), c2);
        }
    }

    #[test]
    fn scaled_derivative_bounds() {
        // |d/dxi chi(h xi)| <= C h with the derivative supported in 2/h <= |xi| <= 3/h.
        let c1 = (0..4000)
            .map(|i| chi_derivative(2.0 + i as f64 * 1e-3).abs())
            .fold(0.0, f64::max);
        for k in 2..8 {
            let h = 2f64.powi(-k);
            for i in 0..500 {
                let xi = i as f64 * 4.0 / (h * 500.0);
                let g = chi_h_gradient(&[xi], h)[0];
                assert!(g.abs() <= c1 * h * (1.0 + 1e-12));
                if g != 0.0 {
                    assert!(xi * h >= 2.0 && xi * h <= 3.0);
                }
            }
        }
    }
}
