//! Image stacks: the 3D (x, y, t) luminance volumes the observer looks at.
//!
//! Synthetic backgrounds are 3D power-law noise; lesions are separable
//! Gaussian bumps. [`normalize_to_display`] maps a stack onto the display's
//! luminance range so every stack is shown at the same effective contrast.

mod corpus;
mod io;

pub use corpus::{Corpus, CorpusManifest, CorpusSpec, LesionShape, ManifestEntry};
pub use io::{read_stack, stack_from_bytes, stack_to_bytes, write_stack, HEADER_LEN, MAGIC};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::Fft3;

#[derive(Debug, Error)]
pub enum StackError {
    #[error("invalid dimensions {nx}x{ny}x{nt}: {reason}")]
    Dimensions {
        nx: usize,
        ny: usize,
        nt: usize,
        reason: &'static str,
    },
    #[error("stack data has {got} values, dims need {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("stack contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("lesion center ({0}, {1}, {2}) lies outside the volume")]
    CenterOutside(f64, f64, f64),
    #[error("stack is constant (min = max = {0}); cannot normalize")]
    Degenerate(f64),
    #[error("malformed stack header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Volume dimensions; linear index is `x + nx * (y + ny * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Result<Self, StackError> {
        if nx == 0 || ny == 0 || nt == 0 {
            return Err(StackError::Dimensions {
                nx,
                ny,
                nt,
                reason: "every dimension must be positive",
            });
        }
        Ok(Self { nx, ny, nt })
    }

    /// Default 64×64×32 stack.
    pub fn standard() -> Self {
        Self {
            nx: 64,
            ny: 64,
            nt: 32,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        x + self.nx * (y + self.ny * t)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.nx;
        let y = (index / self.nx) % self.ny;
        let t = index / self.slice_len();
        (x, y, t)
    }

    /// Linear index of the bin at `-k mod N` on every axis.
    #[inline]
    pub fn conjugate(&self, index: usize) -> usize {
        let (x, y, t) = self.coords(index);
        self.index(
            (self.nx - x) % self.nx,
            (self.ny - y) % self.ny,
            (self.nt - t) % self.nt,
        )
    }

    /// Requirements for generation and perception: square slices, every
    /// axis even and at least 8.
    pub fn check_transformable(&self) -> Result<(), StackError> {
        let Dims { nx, ny, nt } = *self;
        let err = |reason| StackError::Dimensions { nx, ny, nt, reason };
        if nx != ny {
            return Err(err("slices must be square"));
        }
        if nx < 8 || nt < 8 {
            return Err(err("every dimension must be at least 8"));
        }
        if nx % 2 != 0 || nt % 2 != 0 {
            return Err(err("every dimension must be even"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Absent,
    Present,
}

impl Label {
    pub fn code(self) -> u32 {
        match self {
            Label::Absent => 0,
            Label::Present => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Label::Absent),
            1 => Some(Label::Present),
            _ => None,
        }
    }
}

/// A 3D stack of slices with its truth label and generation seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    data: Vec<f64>,
    dims: Dims,
    pub label: Label,
    pub seed: u64,
}

impl ImageStack {
    pub fn new(data: Vec<f64>, dims: Dims, label: Label, seed: u64) -> Result<Self, StackError> {
        if dims.nx != dims.ny {
            return Err(StackError::Dimensions {
                nx: dims.nx,
                ny: dims.ny,
                nt: dims.nt,
                reason: "slices must be square",
            });
        }
        if data.len() != dims.len() {
            return Err(StackError::DataLength {
                expected: dims.len(),
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(StackError::NonFinite(i));
        }
        Ok(Self {
            data,
            dims,
            label,
            seed,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.dims.slice_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.data[self.dims.index(x, y, t)]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Same shape and metadata, new values (still checked for finiteness).
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self, StackError> {
        Self::new(data, self.dims, self.label, self.seed)
    }
}

/// Display and viewing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewingConditions {
    /// Maximum display luminance, cd/m².
    pub l_max: f64,
    /// Effective contrast `L_max / L_min`.
    pub contrast: f64,
    /// Spatial sampling rate, pixels per degree.
    pub ssr: f64,
    /// Slices per second.
    pub browse_speed: f64,
}

impl Default for ViewingConditions {
    fn default() -> Self {
        Self {
            l_max: 300.0,
            contrast: 200.0,
            ssr: 7.0,
            browse_speed: 25.0,
        }
    }
}

impl ViewingConditions {
    pub fn validate(&self) -> Result<(), StackError> {
        let check = |name, value: f64, ok: bool, reason| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(StackError::Parameter {
                    name,
                    value,
                    reason,
                })
            }
        };
        check("l_max", self.l_max, self.l_max > 0.0, "must be > 0")?;
        check(
            "contrast",
            self.contrast,
            self.contrast > 1.0,
            "must be > 1",
        )?;
        check("ssr", self.ssr, self.ssr > 0.0, "must be > 0")?;
        check(
            "browse_speed",
            self.browse_speed,
            self.browse_speed > 0.0,
            "must be > 0",
        )
    }

    pub fn l_min(&self) -> f64 {
        self.l_max / self.contrast
    }
}

/// Gaussian lesion: peak `amplitude` at `center` (voxel coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    pub amplitude: f64,
    pub sigma_xy: f64,
    pub sigma_t: f64,
    pub center: [f64; 3],
}

impl LesionSpec {
    /// Lesion centred at voxel `(nx/2, ny/2, nt/2)`.
    pub fn centered(dims: Dims, amplitude: f64, sigma_xy: f64, sigma_t: f64) -> Self {
        Self {
            amplitude,
            sigma_xy,
            sigma_t,
            center: [
                (dims.nx / 2) as f64,
                (dims.ny / 2) as f64,
                (dims.nt / 2) as f64,
            ],
        }
    }

    fn validate(&self, dims: Dims) -> Result<(), StackError> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(StackError::Parameter {
                name: "amplitude",
                value: self.amplitude,
                reason: "must be finite and >= 0",
            });
        }
        for (name, value) in [("sigma_xy", self.sigma_xy), ("sigma_t", self.sigma_t)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(StackError::Parameter {
                    name,
                    value,
                    reason: "must be > 0",
                });
            }
        }
        let [cx, cy, ct] = self.center;
        let inside = |c: f64, n: usize| c >= 0.0 && c <= (n - 1) as f64;
        if !(inside(cx, dims.nx) && inside(cy, dims.ny) && inside(ct, dims.nt)) {
            return Err(StackError::CenterOutside(cx, cy, ct));
        }
        Ok(())
    }

    /// Per-axis Gaussian profiles `(gx, gy, gt)`; the bump is their outer
    /// product times `amplitude`.
    pub fn profiles(&self, dims: Dims) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let profile = |n: usize, c: f64, s: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let d = i as f64 - c;
                    (-d * d / (2.0 * s * s)).exp()
                })
                .collect()
        };
        (
            profile(dims.nx, self.center[0], self.sigma_xy),
            profile(dims.ny, self.center[1], self.sigma_xy),
            profile(dims.nt, self.center[2], self.sigma_t),
        )
    }
}

/// Power-law filtered Gaussian noise with power spectrum `∝ |f|^(-beta)`,
/// affinely mapped to `[0, 1]`. Deterministic in `seed`.
pub fn generate_background(dims: Dims, beta: f64, seed: u64) -> Result<ImageStack, StackError> {
    dims.check_transformable()?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(StackError::Parameter {
            name: "beta",
            value: beta,
            reason: "must be finite and >= 0",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex64> = (0..dims.len())
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();

    if beta > 0.0 {
        let fft = Fft3::new(dims);
        fft.forward(&mut buf);
        let folded = |k: usize, n: usize| k.min(n - k) as f64 / n as f64;
        let fx: Vec<f64> = (0..dims.nx).map(|k| folded(k, dims.nx)).collect();
        let fy: Vec<f64> = (0..dims.ny).map(|k| folded(k, dims.ny)).collect();
        let ft: Vec<f64> = (0..dims.nt).map(|k| folded(k, dims.nt)).collect();
        for (i, v) in buf.iter_mut().enumerate() {
            let (x, y, t) = dims.coords(i);
            let f2 = fx[x] * fx[x] + fy[y] * fy[y] + ft[t] * ft[t];
            *v *= if f2 > 0.0 { f2.powf(-beta / 4.0) } else { 0.0 };
        }
        fft.inverse(&mut buf);
    }

    let raw: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(StackError::Degenerate(lo));
    }
    let data = raw.iter().map(|v| (v - lo) / span).collect();
    ImageStack::new(data, dims, Label::Absent, seed)
}

/// Adds the lesion bump and marks the stack signal-present.
pub fn insert_lesion(stack: &ImageStack, lesion: &LesionSpec) -> Result<ImageStack, StackError> {
    let dims = stack.dims();
    lesion.validate(dims)?;
    let (gx, gy, gt) = lesion.profiles(dims);
    let mut data = stack.data().to_vec();
    for t in 0..dims.nt {
        for y in 0..dims.ny {
            let gyt = lesion.amplitude * gy[y] * gt[t];
            let row = dims.index(0, y, t);
            for x in 0..dims.nx {
                data[row + x] += gyt * gx[x];
            }
        }
    }
    let mut out = stack.with_data(data)?;
    out.label = Label::Present;
    Ok(out)
}

/// Linear map sending the stack's minimum to `l_max / contrast` and its
/// maximum to `l_max`.
pub fn normalize_to_display(
    stack: &ImageStack,
    vc: &ViewingConditions,
) -> Result<ImageStack, StackError> {
    vc.validate()?;
    let (lo, hi) = stack.min_max();
    if !(hi > lo) {
        return Err(StackError::Degenerate(lo));
    }
    let (l_min, l_max) = (vc.l_min(), vc.l_max);
    if lo == l_min && hi == l_max {
        return Ok(stack.clone());
    }
    let scale = (l_max - l_min) / (hi - lo);
    let data = stack
        .data()
        .iter()
        .map(|&v| {
            if v == hi {
                l_max
            } else if v == lo {
                l_min
            } else {
                (l_min + (v - lo) * scale).clamp(l_min, l_max)
            }
        })
        .collect();
    stack.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dims {
        Dims::new(16, 16, 8).unwrap()
    }

    #[test]
    fn conjugate_index_is_an_involution() {
        let d = small();
        for i in 0..d.len() {
            assert_eq!(d.conjugate(d.conjugate(i)), i);
        }
        assert_eq!(d.conjugate(0), 0);
        assert_eq!(d.conjugate(d.index(1, 0, 0)), d.index(15, 0, 0));
    }

    #[test]
    fn background_is_deterministic_and_in_unit_range() {
        let a = generate_background(small(), 3.0, 7).unwrap();
        let b = generate_background(small(), 3.0, 7).unwrap();
        let c = generate_background(small(), 3.0, 8).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
        let (lo, hi) = a.min_max();
        assert_eq!((lo, hi), (0.0, 1.0));
        assert_eq!(a.label, Label::Absent);
    }

    #[test]
    fn rejects_unsupported_dims() {
        assert!(generate_background(Dims::new(6, 6, 8).unwrap(), 3.0, 1).is_err());
        assert!(generate_background(Dims::new(15, 15, 8).unwrap(), 3.0, 1).is_err());
        assert!(generate_background(Dims::new(16, 8, 8).unwrap(), 3.0, 1).is_err());
        assert!(generate_background(small(), -1.0, 1).is_err());
    }

    #[test]
    fn white_noise_has_no_lag_one_correlation() {
        let dims = Dims::standard();
        let s = generate_background(dims, 0.0, 11).unwrap();
        let mean = s.mean();
        let v: Vec<f64> = s.data().iter().map(|x| x - mean).collect();
        let var: f64 = v.iter().map(|x| x * x).sum::<f64>();
        let lag: f64 = v.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
        let rho = lag / var;
        let three_sigma = 3.0 / (v.len() as f64).sqrt();
        assert!(rho.abs() < three_sigma, "rho = {rho}");
    }

    #[test]
    fn lesion_peak_and_zero_amplitude() {
        let bg = generate_background(small(), 3.0, 3).unwrap();
        let lesion = LesionSpec {
            amplitude: 0.25,
            sigma_xy: 2.0,
            sigma_t: 1.5,
            center: [8.0, 7.0, 4.0],
        };
        let with = insert_lesion(&bg, &lesion).unwrap();
        assert_eq!(with.label, Label::Present);
        let delta = with.get(8, 7, 4) - bg.get(8, 7, 4);
        assert!((delta - 0.25).abs() < 1e-15);

        let zero = LesionSpec {
            amplitude: 0.0,
            ..lesion
        };
        let same = insert_lesion(&bg, &zero).unwrap();
        assert_eq!(same.data(), bg.data());
        assert_eq!(same.label, Label::Present);

        let outside = LesionSpec {
            center: [16.0, 0.0, 0.0],
            ..lesion
        };
        assert!(matches!(
            insert_lesion(&bg, &outside),
            Err(StackError::CenterOutside(..))
        ));
    }

    #[test]
    fn normalization_endpoints() {
        let bg = generate_background(small(), 3.0, 5).unwrap();
        let vc = ViewingConditions::default();
        let out = normalize_to_display(&bg, &vc).unwrap();
        assert_eq!(out.min_max(), (1.5, 300.0));
        let again = normalize_to_display(&out, &vc).unwrap();
        assert_eq!(again.data(), out.data());

        let flat = ImageStack::new(vec![0.5; small().len()], small(), Label::Absent, 0).unwrap();
        assert!(matches!(
            normalize_to_display(&flat, &vc),
            Err(StackError::Degenerate(_))
        ));
    }

    #[test]
    fn viewing_condition_validation() {
        let bad = ViewingConditions {
            contrast: 1.0,
            ..ViewingConditions::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(ViewingConditions::default().l_min(), 1.5);
    }
}
