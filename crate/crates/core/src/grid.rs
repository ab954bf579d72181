//! Periodic lattice on the torus `[-L, L)^d`, its dual frequency lattice, the
//! discrete Fourier pipeline and diagonal Fourier multipliers.
//!
//! Spectral coefficients are normalised so that
//! `u(x_j) = sum_q c_q exp(i xi_q . x_j)`: a constant field `c` has the single
//! coefficient `c` at `q = 0`, and the sampled plane wave `exp(i xi_q x)` has
//! coefficient one at `q`. Storage follows FFT order along every axis
//! (`q = 0, 1, .., N/2-1, -N/2, .., -1`); the dump format reorders to the
//! natural ascending lattice.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

struct GridInner {
    d: usize,
    n: usize,
    half_period: f64,
    len: usize,
    nodes: Vec<f64>,
    freqs: Vec<f64>,
    freq_norms: Vec<f64>,
    // (-1)^(q_1 + .. + q_d): phase from the lattice starting at -L.
    phase: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    fft_count: AtomicU64,
}

/// Periodic spatial lattice with `points_per_dim` nodes per axis on `[-L, L)^d`.
///
/// Cloning is cheap; clones share FFT plans and the transform counter.
#[derive(Clone)]
pub struct GridSpec {
    inner: Arc<GridInner>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("d", &self.inner.d)
            .field("points_per_dim", &self.inner.n)
            .field("half_period", &self.inner.half_period)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.inner.d == other.inner.d
            && self.inner.n == other.inner.n
            && self.inner.half_period == other.inner.half_period
    }
}

/// Builds the lattice. `points_per_dim` must be even and at least 8.
pub fn make_grid(d: usize, points_per_dim: usize, half_period: f64) -> Result<GridSpec> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidGrid(format!("dimension {d} outside 1..={MAX_DIM}")));
    }
    if points_per_dim < 8 {
        return Err(Error::InvalidGrid(format!(
            "points_per_dim = {points_per_dim} is below the minimum of 8"
        )));
    }
    if !points_per_dim.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("points_per_dim = {points_per_dim} is odd")));
    }
    if !(half_period > 0.0 && half_period.is_finite()) {
        return Err(Error::InvalidGrid(format!("half_period = {half_period} must be positive")));
    }
    let n = points_per_dim;
    let len = n
        .checked_pow(d as u32)
        .filter(|&l| l <= 1 << 26)
        .ok_or_else(|| Error::InvalidGrid(format!("{n}^{d} lattice points is too many")))?;

    let dx = 2.0 * half_period / n as f64;
    let dxi = std::f64::consts::PI / half_period;
    let mut nodes = vec![0.0; len * d];
    let mut freqs = vec![0.0; len * d];
    let mut freq_norms = vec![0.0; len];
    let mut phase = vec![0.0; len];
    let mut idx = [0usize; MAX_DIM];
    for p in 0..len {
        let mut rem = p;
        for axis in (0..d).rev() {
            idx[axis] = rem % n;
            rem /= n;
        }
        let mut qsum = 0i64;
        let mut norm2 = 0.0;
        for axis in 0..d {
            let i = idx[axis];
            let q = signed_wavenumber(i, n);
            qsum += q;
            nodes[p * d + axis] = -half_period + i as f64 * dx;
            let xi = q as f64 * dxi;
            freqs[p * d + axis] = xi;
            norm2 += xi * xi;
        }
        freq_norms[p] = norm2.sqrt();
        phase[p] = if qsum.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    }

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    Ok(GridSpec {
        inner: Arc::new(GridInner {
            d,
            n,
            half_period,
            len,
            nodes,
            freqs,
            freq_norms,
            phase,
            forward,
            inverse,
            fft_count: AtomicU64::new(0),
        }),
    })
}

/// FFT-order index to signed wavenumber `q` in `-N/2..N/2`.
fn signed_wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.inner.d
    }

    pub fn points_per_dim(&self) -> usize {
        self.inner.n
    }

    pub fn half_period(&self) -> f64 {
        self.inner.half_period
    }

    /// Total lattice size `N_g^d`.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    /// Node coordinates of flat index `p`.
    pub fn node(&self, p: usize) -> &[f64] {
        let d = self.inner.d;
        &self.inner.nodes[p * d..(p + 1) * d]
    }

    /// Frequency vector of flat storage index `p`.
    pub fn frequency(&self, p: usize) -> &[f64] {
        let d = self.inner.d;
        &self.inner.freqs[p * d..(p + 1) * d]
    }

    pub fn frequency_norm(&self, p: usize) -> f64 {
        self.inner.freq_norms[p]
    }

    pub fn frequency_norms(&self) -> &[f64] {
        &self.inner.freq_norms
    }

    /// Signed lattice wavenumbers of index `p`.
    pub fn wavenumbers(&self, p: usize) -> Vec<i64> {
        let (d, n) = (self.inner.d, self.inner.n);
        let mut out = vec![0; d];
        let mut rem = p;
        for axis in (0..d).rev() {
            out[axis] = signed_wavenumber(rem % n, n);
            rem /= n;
        }
        out
    }

    /// Flat storage index of the signed wavenumber vector `q`.
    pub fn index_of(&self, q: &[i64]) -> Option<usize> {
        let n = self.inner.n as i64;
        if q.len() != self.inner.d {
            return None;
        }
        let mut p = 0usize;
        for &qa in q {
            if qa < -n / 2 || qa >= n / 2 {
                return None;
            }
            p = p * n as usize + qa.rem_euclid(n) as usize;
        }
        Some(p)
    }

    /// Largest symmetric lattice frequency `pi (N/2 - 1) / L`.
    pub fn max_frequency(&self) -> f64 {
        std::f64::consts::PI * (self.inner.n / 2 - 1) as f64 / self.inner.half_period
    }

    /// Spacing of the dual lattice, `pi / L`.
    pub fn frequency_spacing(&self) -> f64 {
        std::f64::consts::PI / self.inner.half_period
    }

    /// Volume of `[-L, L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.inner.half_period).powi(self.inner.d as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.inner.len as f64
    }

    /// Number of full `N_g^d` transforms performed on this grid (all clones).
    pub fn fft_count(&self) -> u64 {
        self.inner.fft_count.load(Ordering::Relaxed)
    }

    /// FFT cost proxy: transform count times `P log2 P`.
    pub fn fft_cost(&self) -> f64 {
        let p = self.inner.len as f64;
        self.fft_count() as f64 * p * p.log2()
    }

    pub fn reset_fft_count(&self) {
        self.inner.fft_count.store(0, Ordering::Relaxed);
    }

    /// Same lattice with a fresh transform counter.
    pub fn fresh(&self) -> GridSpec {
        make_grid(self.inner.d, self.inner.n, self.inner.half_period).expect("already validated")
    }

    fn transform_in_place(&self, data: &mut [Complex64], forward: bool) {
        let inner = &self.inner;
        let n = inner.n;
        let fft = if forward { &inner.forward } else { &inner.inverse };
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // Last axis is contiguous.
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        for axis in 0..inner.d.saturating_sub(1) {
            let stride = n.pow((inner.d - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..inner.len).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
        inner.fft_count.fetch_add(1, Ordering::Relaxed);
    }

    fn check(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!("grids differ: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// `m`-component complex field sampled on the lattice nodes, component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    grid: GridSpec,
    m: usize,
    data: Vec<Complex64>,
}

/// `m`-component field as spectral coefficients, component-major, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    m: usize,
    coeffs: Vec<Complex64>,
}

impl PhysicalField {
    pub fn zeros(grid: &GridSpec, m: usize) -> Self {
        Self { grid: grid.clone(), m, data: vec![Complex64::default(); m * grid.len()] }
    }

    pub fn from_vec(grid: &GridSpec, m: usize, data: Vec<Complex64>) -> Result<Self> {
        if m == 0 || data.len() != m * grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {m} x {} values, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid: grid.clone(), m, data })
    }

    /// Samples `f(x)` (returning `m` values) at every node.
    pub fn from_fn(grid: &GridSpec, m: usize, f: impl Fn(&[f64]) -> Vec<Complex64>) -> Self {
        let len = grid.len();
        let mut data = vec![Complex64::default(); m * len];
        for p in 0..len {
            let v = f(grid.node(p));
            for c in 0..m {
                data[c * len + p] = v[c];
            }
        }
        Self { grid: grid.clone(), m, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    /// Quadrature L2 norm `sqrt(cell volume * sum |u|^2)`.
    pub fn norm(&self) -> f64 {
        (self.grid.cell_volume() * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }
}

/// Forward transform to spectral coefficients.
pub fn forward_transform(field: &PhysicalField) -> SpectralField {
    let grid = &field.grid;
    let len = grid.len();
    let mut coeffs = field.data.clone();
    let scale = 1.0 / len as f64;
    for c in 0..field.m {
        let block = &mut coeffs[c * len..(c + 1) * len];
        grid.transform_in_place(block, true);
        for (v, &s) in block.iter_mut().zip(&grid.inner.phase) {
            *v *= s * scale;
        }
    }
    SpectralField { grid: grid.clone(), m: field.m, coeffs }
}

/// Inverse transform back to node samples.
pub fn inverse_transform(field: &SpectralField) -> PhysicalField {
    let grid = &field.grid;
    let len = grid.len();
    let mut data = field.coeffs.clone();
    for c in 0..field.m {
        let block = &mut data[c * len..(c + 1) * len];
        for (v, &s) in block.iter_mut().zip(&grid.inner.phase) {
            *v *= s;
        }
        grid.transform_in_place(block, false);
    }
    PhysicalField { grid: grid.clone(), m: field.m, data }
}

/// Real multiplier sampled on the frequency lattice (storage order).
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    values: Vec<f64>,
}

impl Multiplier {
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        Self { values: (0..grid.len()).map(|p| f(grid.frequency(p))).collect() }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise product of two multipliers.
    pub fn product(&self, other: &Multiplier) -> Multiplier {
        Multiplier { values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect() }
    }
}

impl SpectralField {
    pub fn zeros(grid: &GridSpec, m: usize) -> Self {
        Self { grid: grid.clone(), m, coeffs: vec![Complex64::default(); m * grid.len()] }
    }

    pub fn from_vec(grid: &GridSpec, m: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if m == 0 || coeffs.len() != m * grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {m} x {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid: grid.clone(), m, coeffs })
    }

    /// Coefficients from a function of the frequency vector returning `m` values.
    pub fn from_fn(grid: &GridSpec, m: usize, f: impl Fn(&[f64]) -> Vec<Complex64>) -> Self {
        let len = grid.len();
        let mut coeffs = vec![Complex64::default(); m * len];
        for p in 0..len {
            let v = f(grid.frequency(p));
            for c in 0..m {
                coeffs[c * len + p] = v[c];
            }
        }
        Self { grid: grid.clone(), m, coeffs }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    /// Coefficient vector (all components) at lattice index `p`.
    pub fn mode(&self, p: usize) -> Vec<Complex64> {
        let len = self.grid.len();
        (0..self.m).map(|c| self.coeffs[c * len + p]).collect()
    }

    pub fn set_mode(&mut self, p: usize, v: &[Complex64]) {
        let len = self.grid.len();
        for (c, z) in v.iter().enumerate() {
            self.coeffs[c * len + p] = *z;
        }
    }

    /// Spectral L2 norm, equal to the physical quadrature norm (Parseval).
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// L2 inner product `(self, other)`, linear in the first slot.
    pub fn inner(&self, other: &SpectralField) -> Result<Complex64> {
        self.check_shape(other)?;
        let s: Complex64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.volume())
    }

    pub fn check_shape(&self, other: &SpectralField) -> Result<()> {
        self.grid.check(&other.grid)?;
        if self.m != other.m {
            return Err(Error::ShapeMismatch(format!(
                "component counts differ: {} vs {}",
                self.m, other.m
            )));
        }
        Ok(())
    }

    pub fn scale(&mut self, s: Complex64) {
        for z in &mut self.coeffs {
            *z *= s;
        }
    }

    pub fn scaled(&self, s: Complex64) -> SpectralField {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex64, other: &SpectralField) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    /// Applies a scalar symbol `xi -> complex` coefficient-wise.
    pub fn apply_symbol(&self, symbol: impl Fn(&[f64]) -> Complex64) -> SpectralField {
        let len = self.grid.len();
        let samples: Vec<Complex64> = (0..len).map(|p| symbol(self.grid.frequency(p))).collect();
        let mut out = self.clone();
        for c in 0..self.m {
            for (z, s) in out.coeffs[c * len..(c + 1) * len].iter_mut().zip(&samples) {
                *z *= s;
            }
        }
        out
    }

    /// Applies an `m x m` matrix symbol mode by mode.
    pub fn apply_matrix_symbol(
        &self,
        symbol: impl Fn(&[f64]) -> DMatrix<Complex64>,
    ) -> Result<SpectralField> {
        let len = self.grid.len();
        let mut out = self.clone();
        for p in 0..len {
            let s = symbol(self.grid.frequency(p));
            if s.nrows() != self.m || s.ncols() != self.m {
                return Err(Error::ShapeMismatch(format!(
                    "symbol is {}x{}, field has {} components",
                    s.nrows(),
                    s.ncols(),
                    self.m
                )));
            }
            let v = s * nalgebra::DVector::from_vec(self.mode(p));
            out.set_mode(p, v.as_slice());
        }
        Ok(out)
    }

    /// Applies a sampled real multiplier.
    pub fn apply_multiplier(&self, mult: &Multiplier) -> Result<SpectralField> {
        let mut out = self.clone();
        out.apply_multiplier_in_place(mult)?;
        Ok(out)
    }

    pub fn apply_multiplier_in_place(&mut self, mult: &Multiplier) -> Result<()> {
        let len = self.grid.len();
        if mult.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "multiplier has {} samples, lattice has {len}",
                mult.len()
            )));
        }
        for c in 0..self.m {
            for (z, &s) in self.coeffs[c * len..(c + 1) * len].iter_mut().zip(&mult.values) {
                *z *= s;
            }
        }
        Ok(())
    }

    /// Largest coefficient modulus over lattice points where `mask` is zero.
    pub fn max_outside(&self, mask: &Multiplier) -> f64 {
        let len = self.grid.len();
        let mut worst: f64 = 0.0;
        for c in 0..self.m {
            for (z, &s) in self.coeffs[c * len..(c + 1) * len].iter().zip(&mask.values) {
                if s == 0.0 {
                    worst = worst.max(z.norm());
                }
            }
        }
        worst
    }

    /// Re-expresses the field on another lattice with the same period by
    /// copying shared modes and zero-filling the rest.
    pub fn resample(&self, grid: &GridSpec) -> Result<SpectralField> {
        if grid.dim() != self.grid.dim() || grid.half_period() != self.grid.half_period() {
            return Err(Error::ShapeMismatch("resample needs equal dimension and period".into()));
        }
        let mut out = SpectralField::zeros(grid, self.m);
        let src_len = self.grid.len();
        let dst_len = grid.len();
        for p in 0..src_len {
            if let Some(dst) = grid.index_of(&self.grid.wavenumbers(p)) {
                for c in 0..self.m {
                    out.coeffs[c * dst_len + dst] = self.coeffs[c * src_len + p];
                }
            }
        }
        Ok(out)
    }
}
