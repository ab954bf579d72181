//! Initial data and forcing descriptions, parsed from short text specs.
//!
//! Data: `gevrey:p=3,tau0=0.03` (spectral profile `<xi>^-p e^{-tau0 <xi>^rho}`)
//! or `gauss:width=1` (the periodized `e^{-|x|^2/width^2}`, built from its
//! Fourier coefficients), copied into every component.
//!
//! Forcing: `zero` or
//! `bump:amp=1,freq=0,center=0,width=0.5,comp=0`, meaning
//! `f(t, x) = amp cos(freq t) e^{-|x - center|^2/width^2}` in component `comp`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{forward_transform, GridSpec, PhysicalField, SpectralField};
use crate::scheme::Forcing;

const MAX_SPEC_LEN: usize = 1024;

fn parse_kv(body: &str, allowed: &[&str]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    if body.is_empty() {
        return Ok(out);
    }
    for item in body.split(',') {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Error::Parse(format!("unknown key `{k}` (expected one of {allowed:?})")));
        }
        let v: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("bad number `{v}` for `{k}`")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("`{k}` must be finite")));
        }
        if out.insert(k.to_string(), v).is_some() {
            return Err(Error::Parse(format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

fn split_spec(spec: &str) -> Result<(&str, &str)> {
    if spec.len() > MAX_SPEC_LEN {
        return Err(Error::Parse("spec too long".into()));
    }
    let spec = spec.trim();
    Ok(spec.split_once(':').unwrap_or((spec, "")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataSpec {
    Gevrey { p: f64, tau0: f64 },
    Gauss { width: f64 },
}

impl DataSpec {
    pub fn parse(spec: &str) -> Result<DataSpec> {
        let (kind, body) = split_spec(spec)?;
        match kind {
            "gevrey" => {
                let kv = parse_kv(body, &["p", "tau0"])?;
                let p = kv.get("p").copied().unwrap_or(3.0);
                let tau0 = kv.get("tau0").copied().unwrap_or(0.03);
                if tau0 < 0.0 {
                    return Err(Error::Parse("tau0 must be >= 0".into()));
                }
                Ok(DataSpec::Gevrey { p, tau0 })
            }
            "gauss" => {
                let kv = parse_kv(body, &["width"])?;
                let width = kv.get("width").copied().unwrap_or(1.0);
                if width <= 0.0 {
                    return Err(Error::Parse("width must be positive".into()));
                }
                Ok(DataSpec::Gauss { width })
            }
            other => Err(Error::Parse(format!("unknown data kind `{other}` (expected gevrey or gauss)"))),
        }
    }

    /// Samples the data on `grid` with `m` identical components; `rho` is the
    /// Gevrey exponent of the profile.
    pub fn build(&self, grid: &GridSpec, m: usize, rho: f64) -> SpectralField {
        match *self {
            DataSpec::Gevrey { p, tau0 } => SpectralField::from_fn(grid, m, |xi| {
                let br = 1f64.hypot(xi.iter().map(|v| v * v).sum::<f64>().sqrt());
                vec![Complex64::from(br.powf(-p) * (-tau0 * br.powf(rho)).exp()); m]
            }),
            DataSpec::Gauss { width } => {
                let d = grid.dim() as i32;
                let amp = (width * std::f64::consts::PI.sqrt() / (2.0 * grid.half_period())).powi(d);
                SpectralField::from_fn(grid, m, |xi| {
                    let r2: f64 = xi.iter().map(|v| v * v).sum();
                    vec![Complex64::from(amp * (-0.25 * r2 * width * width).exp()); m]
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Bump { amp: f64, freq: f64, center: f64, width: f64, comp: usize },
}

impl ForcingSpec {
    pub fn parse(spec: &str) -> Result<ForcingSpec> {
        let (kind, body) = split_spec(spec)?;
        match kind {
            "zero" if body.is_empty() => Ok(ForcingSpec::Zero),
            "bump" => {
                let kv = parse_kv(body, &["amp", "freq", "center", "width", "comp"])?;
                let get = |k: &str, d: f64| kv.get(k).copied().unwrap_or(d);
                let width = get("width", 0.5);
                if width <= 0.0 {
                    return Err(Error::Parse("width must be positive".into()));
                }
                let comp = get("comp", 0.0);
                if comp < 0.0 || comp.fract() != 0.0 || comp > 64.0 {
                    return Err(Error::Parse(format!("comp = {comp} must be a small nonnegative integer")));
                }
                Ok(ForcingSpec::Bump {
                    amp: get("amp", 1.0),
                    freq: get("freq", 0.0),
                    center: get("center", 0.0),
                    width,
                    comp: comp as usize,
                })
            }
            other => Err(Error::Parse(format!("unknown forcing `{other}` (expected zero or bump:...)"))),
        }
    }
}

impl Forcing for ForcingSpec {
    fn sample(&self, t: f64, grid: &GridSpec, m: usize) -> Result<Option<SpectralField>> {
        match *self {
            ForcingSpec::Zero => Ok(None),
            ForcingSpec::Bump { amp, freq, center, width, comp } => {
                if comp >= m {
                    return Err(Error::InvalidArgument(format!("forcing component {comp} >= m = {m}")));
                }
                let s = amp * (freq * t).cos();
                let phys = PhysicalField::from_fn(grid, m, |x| {
                    let r2: f64 = x.iter().map(|v| (v - center) * (v - center)).sum();
                    let mut v = vec![Complex64::default(); m];
                    v[comp] = Complex64::from(s * (-r2 / (width * width)).exp());
                    v
                });
                Ok(Some(forward_transform(&phys)))
            }
        }
    }
}
