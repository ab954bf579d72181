//! Dense reference implementations used as test oracles.
//!
//! Everything here is built from explicit DFT matrices and pointwise
//! coefficient samples, without the FFT plans, multipliers or the Neumann
//! solver of the library.

#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use whs::scheme::Forcing;
use whs::{GridSpec, SpectralField, SystemModel};

pub type C = Complex64;

/// Cutoff profile: one up to 2, zero from `2 sqrt 2`, `e^{-1/s}` glue.
pub fn cutoff(r: f64) -> f64 {
    let (p, s) = (2.0, 2.0 * SQRT_2);
    if r <= p {
        return 1.0;
    }
    if r >= s {
        return 0.0;
    }
    let f = |z: f64| if z > 0.0 { (-1.0 / z).exp() } else { 0.0 };
    let a = f((s - r) / (s - p));
    let b = f((r - p) / (s - p));
    a / (a + b)
}

/// Lattice nodes and frequencies in FFT storage order.
pub struct Lattice {
    pub nodes: Vec<Vec<f64>>,
    pub freqs: Vec<Vec<f64>>,
}

pub fn lattice(d: usize, n: usize, l: f64) -> Lattice {
    let len = n.pow(d as u32);
    let mut nodes = Vec::with_capacity(len);
    let mut freqs = Vec::with_capacity(len);
    for p in 0..len {
        let mut idx = vec![0; d];
        let mut rem = p;
        for axis in (0..d).rev() {
            idx[axis] = rem % n;
            rem /= n;
        }
        nodes.push(idx.iter().map(|&i| -l + i as f64 * 2.0 * l / n as f64).collect());
        freqs.push(
            idx.iter()
                .map(|&i| {
                    let q = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
                    q as f64 * PI / l
                })
                .collect(),
        );
    }
    Lattice { nodes, freqs }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense `G(t)` on coefficient vectors (component-major, FFT order).
pub fn dense_g(model: &SystemModel, lat: &Lattice, t: f64) -> DMatrix<C> {
    let (m, d, len) = (model.m(), model.d(), lat.nodes.len());
    let fwd = DMatrix::from_fn(len, len, |q, p| C::from_polar(1.0 / len as f64, -dot(&lat.freqs[q], &lat.nodes[p])));
    let inv = DMatrix::from_fn(len, len, |p, q| C::from_polar(1.0, dot(&lat.freqs[q], &lat.nodes[p])));
    let mut g = DMatrix::zeros(m * len, m * len);
    let a: Vec<Vec<_>> = (0..d).map(|j| lat.nodes.iter().map(|x| model.a(j, t, x)).collect()).collect();
    let b: Vec<_> = lat.nodes.iter().map(|x| model.b(t, x)).collect();
    let mut add = |samples: &dyn Fn(usize, usize, usize) -> C, right: &DMatrix<C>| {
        for r in 0..m {
            for c in 0..m {
                let diag = DMatrix::from_fn(len, len, |p, q| if p == q { samples(p, r, c) } else { C::default() });
                let block = &fwd * diag * right;
                let mut view = g.view_mut((r * len, c * len), (len, len));
                view += block;
            }
        }
    };
    for (j, aj) in a.iter().enumerate().take(d) {
        let deriv = DMatrix::from_fn(len, len, |p, q| if p == q { C::new(0.0, lat.freqs[q][j]) } else { C::default() });
        let right = &inv * deriv;
        add(&|p, r, c| aj[p][(r, c)], &right);
    }
    add(&|p, r, c| b[p][(r, c)], &inv);
    g
}

/// Diagonal of `chi(scale h |xi|)` repeated over `m` components.
pub fn dense_cutoff(lat: &Lattice, m: usize, h: f64, scale: f64) -> DVector<C> {
    let len = lat.freqs.len();
    DVector::from_fn(m * len, |i, _| C::from(cutoff(scale * h * norm(&lat.freqs[i % len]))))
}

pub fn to_vector(f: &SpectralField) -> DVector<C> {
    DVector::from_column_slice(f.coeffs())
}

/// Crank-Nicolson trajectory `u^0 .. u^n_steps` by dense LU solves.
pub fn dense_trajectory(
    model: &SystemModel,
    grid: &GridSpec,
    g: &SpectralField,
    forcing: &dyn Forcing,
    h: f64,
    k: f64,
    n_steps: usize,
) -> Vec<DVector<C>> {
    let lat = lattice(grid.dim(), grid.points_per_dim(), grid.half_period());
    let m = model.m();
    let chi = dense_cutoff(&lat, m, h, 2.0);
    let mut u = to_vector(g).component_mul(&chi);
    let mut out = vec![u.clone()];
    let dim = u.len();
    let id = DMatrix::<C>::identity(dim, dim);
    let half = C::from(k / 2.0);
    for n in 0..n_steps {
        let t = n as f64 * k;
        let gm = dense_g(model, &lat, t);
        let gh = DMatrix::from_fn(dim, dim, |r, c| chi[r] * gm[(r, c)] * chi[c]);
        let mut rhs = (&id + &gh * half) * &u;
        if let Some(f) = forcing.sample(t, grid, m).unwrap() {
            rhs += to_vector(&f).component_mul(&chi) * C::from(k);
        }
        u = (&id - &gh * half).lu().solve(&rhs).expect("I - k/2 G_h is invertible");
        out.push(u.clone());
    }
    out
}

pub fn relative_error(a: &DVector<C>, b: &DVector<C>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Smallest `h` on the halving ladder from 1 that `grid` resolves.
pub fn finest_resolved(grid: &GridSpec) -> f64 {
    let resolves = |h: f64| whs::cutoff::validate_resolution(grid, h).pass;
    let mut h = 1.0;
    assert!(resolves(h), "grid too coarse for h = 1");
    while resolves(h / 2.0) {
        h /= 2.0;
    }
    h
}
