//! System coefficients `A_j(t, x)`, `B(t, x)` and their metadata.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dump::CoefficientTable;
use crate::error::{Error, Result};
use crate::grid::{forward_transform, GridSpec, SpectralField};

pub type CMat = DMatrix<Complex64>;

/// Coefficient evaluators. Implementations must be deterministic and reentrant.
pub trait Coefficients: Send + Sync {
    fn m(&self) -> usize;
    fn d(&self) -> usize;
    fn a(&self, j: usize, t: f64, x: &[f64]) -> CMat;
    fn b(&self, t: f64, x: &[f64]) -> CMat;

    /// `d^alpha/dx^alpha A_j(t, x)` (plain real derivatives).
    fn a_dx(&self, j: usize, t: f64, x: &[f64], alpha: &[usize]) -> Result<CMat> {
        if alpha.iter().all(|&a| a == 0) {
            return Ok(self.a(j, t, x));
        }
        if self.x_independent() {
            return Ok(CMat::zeros(self.m(), self.m()));
        }
        Err(Error::DerivativeUnsupported {
            model: "custom".into(),
            order: alpha.iter().sum(),
        })
    }

    fn x_independent(&self) -> bool {
        false
    }

    fn t_independent(&self) -> bool {
        false
    }

    /// True when `a_dx` is exact for every order.
    fn analytic_derivatives(&self) -> bool {
        self.x_independent()
    }
}

/// A hyperbolic system together with its declared structure.
#[derive(Clone)]
pub struct SystemModel {
    pub name: String,
    pub coeffs: Arc<dyn Coefficients>,
    /// Declared regularity index, at most `m - 1`.
    pub theta: u32,
    /// Radius beyond which the coefficients no longer depend on `x`.
    pub support_radius: f64,
    /// Gevrey index of the coefficients in `x`; recorded, never checked.
    pub gevrey_index: Option<f64>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("m", &self.m())
            .field("d", &self.d())
            .field("theta", &self.theta)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl SystemModel {
    pub fn new(name: impl Into<String>, coeffs: Arc<dyn Coefficients>, theta: u32, support_radius: f64) -> Result<Self> {
        let m = coeffs.m();
        if m == 0 || coeffs.d() == 0 || coeffs.d() > crate::grid::MAX_DIM {
            return Err(Error::InvalidArgument(format!("bad model shape m={m} d={}", coeffs.d())));
        }
        if theta as usize >= m {
            return Err(Error::InvalidArgument(format!("theta = {theta} exceeds m - 1 = {}", m - 1)));
        }
        Ok(SystemModel { name: name.into(), coeffs, theta, support_radius, gevrey_index: None })
    }

    pub fn m(&self) -> usize {
        self.coeffs.m()
    }

    pub fn d(&self) -> usize {
        self.coeffs.d()
    }

    pub fn a(&self, j: usize, t: f64, x: &[f64]) -> CMat {
        self.coeffs.a(j, t, x)
    }

    pub fn b(&self, t: f64, x: &[f64]) -> CMat {
        self.coeffs.b(t, x)
    }

    pub fn x_independent(&self) -> bool {
        self.coeffs.x_independent()
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if grid.dim() != self.d() {
            return Err(Error::ShapeMismatch(format!(
                "model `{}` has d = {}, grid has d = {}",
                self.name,
                self.d(),
                grid.dim()
            )));
        }
        Ok(())
    }

    pub fn check_field(&self, field: &SpectralField) -> Result<()> {
        self.check_grid(field.grid())?;
        if field.components() != self.m() {
            return Err(Error::ShapeMismatch(format!(
                "model `{}` has m = {}, field has {} components",
                self.name,
                self.m(),
                field.components()
            )));
        }
        Ok(())
    }
}

type MatFn = dyn Fn(f64, &[f64]) -> CMat + Send + Sync;

/// Coefficients from closures; `x_independent` is declared by the caller.
pub struct FnCoefficients {
    m: usize,
    d: usize,
    a: Vec<Box<MatFn>>,
    b: Box<MatFn>,
    x_independent: bool,
    t_independent: bool,
}

impl FnCoefficients {
    pub fn new(m: usize, a: Vec<Box<MatFn>>, b: Box<MatFn>, x_independent: bool) -> Self {
        FnCoefficients { m, d: a.len(), a, b, x_independent, t_independent: false }
    }

    pub fn time_independent(mut self) -> Self {
        self.t_independent = true;
        self
    }

    /// Time- and space-independent matrices.
    pub fn constant(a: Vec<CMat>, b: CMat) -> Self {
        let m = b.nrows();
        let a = a
            .into_iter()
            .map(|aj| Box::new(move |_: f64, _: &[f64]| aj.clone()) as Box<MatFn>)
            .collect();
        FnCoefficients::new(m, a, Box::new(move |_, _| b.clone()), true).time_independent()
    }
}

impl Coefficients for FnCoefficients {
    fn m(&self) -> usize {
        self.m
    }
    fn d(&self) -> usize {
        self.d
    }
    fn a(&self, j: usize, t: f64, x: &[f64]) -> CMat {
        (self.a[j])(t, x)
    }
    fn b(&self, t: f64, x: &[f64]) -> CMat {
        (self.b)(t, x)
    }
    fn x_independent(&self) -> bool {
        self.x_independent
    }
    fn t_independent(&self) -> bool {
        self.t_independent
    }
}

/// Real matrix from row-major entries.
pub fn real_matrix(m: usize, entries: &[f64]) -> CMat {
    DMatrix::from_row_slice(m, m, &entries.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>())
}

/// Coefficients read from a [`CoefficientTable`]: linear in time between
/// nodes (constant beyond the ends), trigonometric interpolation in `x`.
pub struct TableCoefficients {
    table: CoefficientTable,
    /// Per time node and matrix, the spectral coefficients of each entry.
    spectra: Vec<Vec<SpectralField>>,
    x_independent: bool,
    t_independent: bool,
}

impl TableCoefficients {
    pub fn new(table: CoefficientTable) -> Self {
        let spectra: Vec<Vec<SpectralField>> =
            table.matrices.iter().map(|per_t| per_t.iter().map(forward_transform).collect()).collect();
        let len = table.grid.len();
        let x_independent = table.matrices.iter().flatten().all(|f| {
            (0..f.components()).all(|c| {
                let comp = f.component(c);
                comp.iter().all(|&z| z == comp[0])
            })
        });
        let t_independent = table.matrices.windows(2).all(|w| w[0] == w[1]);
        debug_assert!(len > 0);
        TableCoefficients { table, spectra, x_independent, t_independent }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.table.grid
    }

    fn time_weights(&self, t: f64) -> (usize, usize, f64) {
        let ts = &self.table.times;
        if ts.len() == 1 || t <= ts[0] {
            return (0, 0, 0.0);
        }
        if t >= ts[ts.len() - 1] {
            let last = ts.len() - 1;
            return (last, last, 0.0);
        }
        let i = ts.partition_point(|&s| s <= t) - 1;
        (i, i + 1, (t - ts[i]) / (ts[i + 1] - ts[i]))
    }

    fn node_index(&self, x: &[f64]) -> Option<usize> {
        let g = &self.table.grid;
        let (n, l) = (g.points_per_dim(), g.half_period());
        let step = 2.0 * l / n as f64;
        let mut p = 0;
        for &xi in x {
            let s = (xi + l) / step;
            let r = s.round();
            if (s - r).abs() > 1e-12 {
                return None;
            }
            p = p * n + (r as i64).rem_euclid(n as i64) as usize;
        }
        Some(p)
    }

    fn entry(&self, k: usize, s: usize, x: &[f64], alpha: &[usize]) -> CMat {
        let m = self.table.m;
        let plain = alpha.iter().all(|&a| a == 0);
        if plain {
            if let Some(p) = self.node_index(x) {
                let f = &self.table.matrices[k][s];
                return CMat::from_fn(m, m, |r, c| f.component(r * m + c)[p]);
            }
        }
        let spec = &self.spectra[k][s];
        let g = spec.grid();
        let mut out = CMat::zeros(m, m);
        for p in 0..g.len() {
            let xi = g.frequency(p);
            let mut factor = Complex64::from_polar(1.0, xi.iter().zip(x).map(|(a, b)| a * b).sum());
            for (a, &order) in alpha.iter().enumerate() {
                factor *= Complex64::new(0.0, xi[a]).powu(order as u32);
            }
            if factor == Complex64::default() {
                continue;
            }
            for r in 0..m {
                for c in 0..m {
                    out[(r, c)] += spec.component(r * m + c)[p] * factor;
                }
            }
        }
        out
    }

    fn eval(&self, s: usize, t: f64, x: &[f64], alpha: &[usize]) -> CMat {
        let (i0, i1, w) = self.time_weights(t);
        let a = self.entry(i0, s, x, alpha);
        if i0 == i1 || w == 0.0 {
            return a;
        }
        let b = self.entry(i1, s, x, alpha);
        a * Complex64::from(1.0 - w) + b * Complex64::from(w)
    }
}

impl Coefficients for TableCoefficients {
    fn m(&self) -> usize {
        self.table.m
    }
    fn d(&self) -> usize {
        self.table.grid.dim()
    }
    fn a(&self, j: usize, t: f64, x: &[f64]) -> CMat {
        self.eval(j, t, x, &vec![0; self.d()])
    }
    fn b(&self, t: f64, x: &[f64]) -> CMat {
        self.eval(self.d(), t, x, &vec![0; self.d()])
    }
    fn a_dx(&self, j: usize, t: f64, x: &[f64], alpha: &[usize]) -> Result<CMat> {
        Ok(self.eval(j, t, x, alpha))
    }
    fn x_independent(&self) -> bool {
        self.x_independent
    }
    fn t_independent(&self) -> bool {
        self.t_independent
    }
    fn analytic_derivatives(&self) -> bool {
        true
    }
}

/// Model backed by a coefficient table; `theta` defaults to `m - 1`.
pub fn table_model(table: CoefficientTable, theta: Option<u32>) -> Result<SystemModel> {
    let m = table.m as u32;
    let radius = table.grid.half_period() * (table.grid.dim() as f64).sqrt();
    let coeffs = Arc::new(TableCoefficients::new(table));
    SystemModel::new("table", coeffs, theta.unwrap_or(m - 1), radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, PhysicalField};

    fn table() -> CoefficientTable {
        let g = make_grid(1, 16, std::f64::consts::PI).unwrap();
        let a0 = PhysicalField::from_fn(&g, 4, |x| {
            let s = Complex64::new(x[0].sin(), 0.0);
            vec![Complex64::new(1.0, 0.0), s, Complex64::default(), Complex64::new(-1.0, 0.0)]
        });
        let a1 = PhysicalField::from_fn(&g, 4, |x| {
            let s = Complex64::new(3.0 * x[0].sin(), 0.0);
            vec![Complex64::new(1.0, 0.0), s, Complex64::default(), Complex64::new(-1.0, 0.0)]
        });
        let b = PhysicalField::zeros(&g, 4);
        CoefficientTable { grid: g, m: 2, times: vec![0.0, 2.0], matrices: vec![vec![a0, b.clone()], vec![a1, b]] }
    }

    #[test]
    fn table_interpolates_in_time_and_space() {
        let tc = TableCoefficients::new(table());
        assert!(!tc.x_independent());
        assert!(!tc.t_independent());
        // Off-node and mid-time: 0.5 sin + 0.5 * 3 sin = 2 sin.
        let x = 0.3;
        let a = tc.a(0, 1.0, &[x]);
        assert!((a[(0, 1)].re - 2.0 * x.sin()).abs() < 1e-12);
        assert!((a[(0, 0)].re - 1.0).abs() < 1e-12);
        let da = tc.a_dx(0, 0.0, &[x], &[1]).unwrap();
        assert!((da[(0, 1)].re - x.cos()).abs() < 1e-12);
        let d2 = tc.a_dx(0, 0.0, &[x], &[2]).unwrap();
        assert!((d2[(0, 1)].re + x.sin()).abs() < 1e-12);
        // Clamped beyond the last node.
        assert!((tc.a(0, 5.0, &[x])[(0, 1)].re - 3.0 * x.sin()).abs() < 1e-12);
    }

    #[test]
    fn table_model_from_decoded_bytes() {
        let t = table();
        let decoded = CoefficientTable::decode(&t.encode()).unwrap();
        let model = table_model(decoded, None).unwrap();
        assert_eq!(model.m(), 2);
        assert_eq!(model.theta, 1);
        let x = model.coeffs.a(0, 0.0, &[-std::f64::consts::PI + std::f64::consts::PI / 8.0]);
        assert!((x[(0, 1)].re - (-std::f64::consts::PI + std::f64::consts::PI / 8.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn theta_must_be_below_m() {
        let c = Arc::new(FnCoefficients::constant(vec![real_matrix(1, &[1.0])], real_matrix(1, &[0.0])));
        assert!(SystemModel::new("s", c.clone(), 1, 0.0).is_err());
        assert!(SystemModel::new("s", c, 0, 0.0).is_ok());
    }
}
