//! Low-discrepancy sample points.

const PRIMES: [u32; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical inverse of `index` in `base`, in `[0, 1)`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / f64::from(base);
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    out
}

/// Point `index` of the Halton sequence in `[0, 1)^dims`, skipping the origin.
pub fn halton(index: u64, dims: usize) -> Vec<f64> {
    assert!(dims <= PRIMES.len(), "at most {} Halton dimensions", PRIMES.len());
    PRIMES[..dims].iter().map(|&p| radical_inverse(index + 1, p)).collect()
}

/// Maps `d - 1` unit-interval coordinates (one for `d = 1`) to the unit sphere in `R^d`.
pub fn sphere_point(d: usize, u: &[f64]) -> Vec<f64> {
    use std::f64::consts::PI;
    match d {
        1 => vec![if u[0] < 0.5 { 1.0 } else { -1.0 }],
        2 => {
            let a = 2.0 * PI * u[0];
            vec![a.cos(), a.sin()]
        }
        3 => {
            let z = 2.0 * u[0] - 1.0;
            let a = 2.0 * PI * u[1];
            let r = (1.0 - z * z).max(0.0).sqrt();
            vec![r * a.cos(), r * a.sin(), z]
        }
        _ => panic!("sphere_point supports d <= 3"),
    }
}

/// Number of unit-interval coordinates `sphere_point` consumes.
pub fn sphere_coords(d: usize) -> usize {
    d.saturating_sub(1).max(1)
}
