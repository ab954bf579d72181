//! Small dense complex linear algebra used pointwise in frequency.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::CMat;

/// Eigenvalues; closed form for `m <= 2` so exactly nilpotent or real-split
/// 2x2 symbols report exactly real spectra.
pub fn eigenvalues(a: &CMat) -> Vec<Complex64> {
    match a.nrows() {
        0 => vec![],
        1 => vec![a[(0, 0)]],
        2 => {
            let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            let mean = (p + s) / 2.0;
            let half = (p - s) / 2.0;
            let root = (half * half + q * r).sqrt();
            vec![mean + root, mean - root]
        }
        _ => a.clone().schur().unpack().1.diagonal().iter().copied().collect(),
    }
}

pub fn max_abs_imag_eig(a: &CMat) -> f64 {
    eigenvalues(a).iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &CMat) -> f64 {
    eigenvalues(a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::from(0.5)
}

/// `|| A - A* || / max(|| A ||, tiny)`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    (a - a.adjoint()).norm() / a.norm().max(f64::MIN_POSITIVE)
}

/// Eigenvalues of the Hermitian part, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(a).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn identity(m: usize) -> CMat {
    DMatrix::identity(m, m)
}

/// Solves `M* R + R M = Q` through the `m^2 x m^2` Kronecker system.
pub fn solve_lyapunov(m_mat: &CMat, q: &CMat) -> Result<CMat> {
    let m = m_mat.nrows();
    let n = m * m;
    let adj = m_mat.adjoint();
    // Column-major vec: vec(A X) = (I (x) A) vec X, vec(X B) = (B^T (x) I) vec X.
    let mut k = DMatrix::<Complex64>::zeros(n, n);
    for col in 0..m {
        for row in 0..m {
            let i = col * m + row;
            for r in 0..m {
                k[(i, col * m + r)] += adj[(row, r)];
                k[(i, r * m + row)] += m_mat[(r, col)];
            }
        }
    }
    let rhs = DVector::from_iterator(n, q.iter().copied());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator is singular".into()))?;
    let r = DMatrix::from_column_slice(m, m, x.as_slice());
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("Lyapunov solution is not finite".into()));
    }
    Ok(r)
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// `scale * int_0^inf (e^{sM})* e^{sM} ds` by composite 8-point Gauss-Legendre,
/// panel by panel until the tail is negligible.
pub fn lyapunov_quadrature(m_mat: &CMat, scale: f64) -> Result<CMat> {
    let abscissa = spectral_abscissa(m_mat);
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }
    let m = m_mat.nrows();
    let width = 0.25 / spectral_norm(m_mat).max(-abscissa);
    let step = (m_mat * Complex64::from(width)).exp();
    let mut total = CMat::zeros(m, m);
    // e^{s_0 M} at the left edge of the current panel.
    let mut left = identity(m);
    let local: Vec<CMat> = GL_NODES
        .iter()
        .map(|&z| (m_mat * Complex64::from(width * (z + 1.0) / 2.0)).exp())
        .collect();
    let mut quiet = 0;
    for _ in 0..2_000_000 {
        let mut panel = CMat::zeros(m, m);
        for (e, &w) in local.iter().zip(&GL_WEIGHTS) {
            let v = e * &left;
            panel += v.adjoint() * v * Complex64::from(w * width / 2.0);
        }
        total += &panel;
        if panel.norm() <= 1e-17 * total.norm() {
            quiet += 1;
            if quiet >= 8 {
                return Ok(total * Complex64::from(scale));
            }
        } else {
            quiet = 0;
        }
        left = &step * left;
    }
    Err(Error::ResourceCap("Lyapunov quadrature did not settle".into()))
}
