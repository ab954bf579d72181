//! Binary field dumps and coefficient tables.
//!
//! Field dump: an ASCII header line `WHS1 d N_g L m repr\n` with
//! `repr` in `{phys, spec}`, followed by little-endian f64 pairs `(re, im)`,
//! component-major, then row-major over the lattice. Physical dumps list
//! nodes `x_j = -L + j 2L/N_g`; spectral dumps list wavenumbers in ascending
//! order `q = -N_g/2 .. N_g/2 - 1` along every axis.
//!
//! Coefficient table: header `WHC1 d N_g L m nt\n`, then `nt` little-endian
//! f64 time nodes, then for each time node the `d + 1` matrices `A_1 .. A_d, B`
//! each stored like a physical field payload with `m * m` components
//! (component index `r * m + c`).

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{make_grid, GridSpec, PhysicalField, SpectralField};

const FIELD_MAGIC: &str = "WHS1";
const TABLE_MAGIC: &str = "WHC1";
const MAX_HEADER: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldDump {
    Physical(PhysicalField),
    Spectral(SpectralField),
}

fn header_line(bytes: &[u8]) -> Result<(&str, &[u8])> {
    let end = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Parse("header is not UTF-8".into()))?;
    Ok((header, &bytes[end + 1..]))
}

fn parse_usize(tok: &str, what: &str) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse(format!("bad {what} `{tok}`")))
}

fn parse_period(tok: &str) -> Result<f64> {
    let l: f64 = tok.parse().map_err(|_| Error::Parse(format!("bad half period `{tok}`")))?;
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::Parse(format!("half period `{tok}` must be positive")));
    }
    Ok(l)
}

/// Checks `count` pairs of f64 fit exactly in `payload` before any allocation.
fn expect_pairs(payload: &[u8], count: Option<usize>) -> Result<usize> {
    let count = count.ok_or_else(|| Error::Parse("size overflow".into()))?;
    let bytes = count.checked_mul(16).ok_or_else(|| Error::Parse("size overflow".into()))?;
    if payload.len() != bytes {
        return Err(Error::Parse(format!("payload has {} bytes, expected {bytes}", payload.len())));
    }
    Ok(count)
}

fn read_f64(chunk: &[u8]) -> f64 {
    f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"))
}

fn read_pairs(payload: &[u8]) -> Vec<Complex64> {
    payload.chunks_exact(16).map(|c| Complex64::new(read_f64(&c[..8]), read_f64(&c[8..]))).collect()
}

fn push_pair(out: &mut Vec<u8>, z: Complex64) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

fn lattice_points(d: usize, n: usize) -> Option<usize> {
    n.checked_pow(u32::try_from(d).ok()?)
}

/// Storage (FFT order) index for the `j`-th lattice point in ascending order.
fn natural_to_storage(grid: &GridSpec, j: usize) -> usize {
    let (d, n) = (grid.dim(), grid.points_per_dim());
    let mut rem = j;
    let mut digits = [0usize; crate::grid::MAX_DIM];
    for axis in (0..d).rev() {
        digits[axis] = (rem % n + n / 2) % n;
        rem /= n;
    }
    digits[..d].iter().fold(0, |acc, &i| acc * n + i)
}

fn header(magic: &str, grid: &GridSpec, m: usize, tail: &str) -> String {
    format!("{magic} {} {} {} {m} {tail}\n", grid.dim(), grid.points_per_dim(), grid.half_period())
}

impl FieldDump {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            FieldDump::Physical(f) => {
                let mut out = header(FIELD_MAGIC, f.grid(), f.components(), "phys").into_bytes();
                out.reserve(f.data().len() * 16);
                for &z in f.data() {
                    push_pair(&mut out, z);
                }
                out
            }
            FieldDump::Spectral(f) => {
                let grid = f.grid();
                let len = grid.len();
                let mut out = header(FIELD_MAGIC, grid, f.components(), "spec").into_bytes();
                out.reserve(f.coeffs().len() * 16);
                for c in 0..f.components() {
                    let comp = f.component(c);
                    for j in 0..len {
                        push_pair(&mut out, comp[natural_to_storage(grid, j)]);
                    }
                }
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<FieldDump> {
        let (header, payload) = header_line(bytes)?;
        let toks: Vec<&str> = header.split_ascii_whitespace().collect();
        if toks.len() != 6 || toks[0] != FIELD_MAGIC {
            return Err(Error::Parse(format!("bad field header `{header}`")));
        }
        let d = parse_usize(toks[1], "dimension")?;
        let n = parse_usize(toks[2], "N_g")?;
        let l = parse_period(toks[3])?;
        let m = parse_usize(toks[4], "component count")?;
        let spectral = match toks[5] {
            "phys" => false,
            "spec" => true,
            other => return Err(Error::Parse(format!("unknown representation `{other}`"))),
        };
        if m == 0 || d == 0 || d > crate::grid::MAX_DIM {
            return Err(Error::Parse(format!("bad shape d={d} m={m}")));
        }
        let len = lattice_points(d, n).ok_or_else(|| Error::Parse("size overflow".into()))?;
        expect_pairs(payload, len.checked_mul(m))?;
        let grid = make_grid(d, n, l).map_err(|e| Error::Parse(e.to_string()))?;
        let values = read_pairs(payload);
        if spectral {
            let mut coeffs = vec![Complex64::default(); values.len()];
            for c in 0..m {
                for j in 0..len {
                    coeffs[c * len + natural_to_storage(&grid, j)] = values[c * len + j];
                }
            }
            Ok(FieldDump::Spectral(SpectralField::from_vec(&grid, m, coeffs)?))
        } else {
            Ok(FieldDump::Physical(PhysicalField::from_vec(&grid, m, values)?))
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<FieldDump> {
        FieldDump::decode(&std::fs::read(path)?)
    }
}

/// Sampled coefficients `A_j(t_k, x_p)`, `B(t_k, x_p)` on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub grid: GridSpec,
    pub m: usize,
    pub times: Vec<f64>,
    /// `matrices[k][s]` is the field of matrix `s` (`0..d` for `A_{s+1}`, `d`
    /// for `B`) at time node `k`, as `m * m` physical components.
    pub matrices: Vec<Vec<PhysicalField>>,
}

impl CoefficientTable {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = header(TABLE_MAGIC, &self.grid, self.m, &self.times.len().to_string()).into_bytes();
        for t in &self.times {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for per_time in &self.matrices {
            for field in per_time {
                for &z in field.data() {
                    push_pair(&mut out, z);
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<CoefficientTable> {
        let (header, rest) = header_line(bytes)?;
        let toks: Vec<&str> = header.split_ascii_whitespace().collect();
        if toks.len() != 6 || toks[0] != TABLE_MAGIC {
            return Err(Error::Parse(format!("bad coefficient table header `{header}`")));
        }
        let d = parse_usize(toks[1], "dimension")?;
        let n = parse_usize(toks[2], "N_g")?;
        let l = parse_period(toks[3])?;
        let m = parse_usize(toks[4], "component count")?;
        let nt = parse_usize(toks[5], "time node count")?;
        if m == 0 || nt == 0 || d == 0 || d > crate::grid::MAX_DIM {
            return Err(Error::Parse(format!("bad shape d={d} m={m} nt={nt}")));
        }
        let time_bytes = nt.checked_mul(8).ok_or_else(|| Error::Parse("size overflow".into()))?;
        if rest.len() < time_bytes {
            return Err(Error::Parse("truncated time nodes".into()));
        }
        let (time_part, payload) = rest.split_at(time_bytes);
        let len = lattice_points(d, n).ok_or_else(|| Error::Parse("size overflow".into()))?;
        let per_matrix = len.checked_mul(m * m);
        let total = per_matrix.and_then(|v| v.checked_mul(d + 1)).and_then(|v| v.checked_mul(nt));
        expect_pairs(payload, total)?;
        let times: Vec<f64> = time_part.chunks_exact(8).map(read_f64).collect();
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("time nodes must be finite and strictly increasing".into()));
        }
        let grid = make_grid(d, n, l).map_err(|e| Error::Parse(e.to_string()))?;
        let values = read_pairs(payload);
        let block = len * m * m;
        let mut matrices = Vec::with_capacity(nt);
        for k in 0..nt {
            let mut per_time = Vec::with_capacity(d + 1);
            for s in 0..=d {
                let start = (k * (d + 1) + s) * block;
                per_time.push(PhysicalField::from_vec(&grid, m * m, values[start..start + block].to_vec())?);
            }
            matrices.push(per_time);
        }
        Ok(CoefficientTable { grid, m, times, matrices })
    }
}
