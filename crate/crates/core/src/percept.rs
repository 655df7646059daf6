//! Perception of a displayed stack in the spatiotemporal frequency domain.
//!
//! The stack is transformed with a 3D FFT, each frequency component is
//! modified independently by one of three methods, and the result is
//! transformed back:
//!
//! * **LF** multiplies every component by the contrast sensitivity `S(u, w)`.
//! * **PM** replaces a component's modulation by its detection probability
//!   `p(m, S)`, keeping its phase.
//! * **MC** keeps a component with probability `p` at unit modulation (phase
//!   kept) and zeroes it otherwise.
//!
//! Amplitudes use the modulation convention: a non-self-conjugate bin with
//! coefficient `X` carries modulation `m = 2|X| / (N L̄)` where `N` is the
//! voxel count and `L̄` the mean luminance; a self-conjugate bin carries
//! `|X| / (N L̄)`. PM and MC write back in the same convention, so a kept MC
//! pair is a unit-modulation cosine.
//!
//! Each conjugate pair is visited once and both bins are written from the
//! same decision, which keeps the spectrum exactly Hermitian. The DC term is
//! always passed through.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::csf::{detection_probability_unchecked, BartenParams, Csf, CsfError, FieldGeometry};
use crate::fft::Fft3;
use crate::stackgen::{Dims, ImageStack, StackError, ViewingConditions};

/// Largest tolerated `max|Im| / max|Re|` after the inverse transform.
pub const IMAGINARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PerceptError {
    #[error("the DC bin has no modulation")]
    DcModulation,
    #[error("bin ({0}, {1}, {2}) is outside the spectrum")]
    BinOutOfRange(usize, usize, usize),
    #[error("mean luminance {0} must be positive")]
    NonPositiveMean(f64),
    #[error("inverse transform left an imaginary residue of {0:e} (relative)")]
    ImaginaryResidue(f64),
    #[error(transparent)]
    Csf(#[from] CsfError),
    #[error(transparent)]
    Stack(#[from] StackError),
}

/// Which perception model to apply. Monte Carlo carries its seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerceptMethod {
    #[serde(rename = "LF")]
    Lf,
    #[serde(rename = "PM")]
    Pm,
    #[serde(rename = "MC")]
    Mc { seed: u64 },
}

/// Method without a seed, as named in configs and result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodKind {
    LF,
    PM,
    MC,
}

impl MethodKind {
    pub fn with_seed(self, seed: u64) -> PerceptMethod {
        match self {
            MethodKind::LF => PerceptMethod::Lf,
            MethodKind::PM => PerceptMethod::Pm,
            MethodKind::MC => PerceptMethod::Mc { seed },
        }
    }

    pub fn is_stochastic(self) -> bool {
        self == MethodKind::MC
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MethodKind::LF => "LF",
            MethodKind::PM => "PM",
            MethodKind::MC => "MC",
        };
        f.write_str(s)
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "LF" => Ok(MethodKind::LF),
            "PM" => Ok(MethodKind::PM),
            "MC" => Ok(MethodKind::MC),
            other => Err(format!("unknown method {other:?} (expected LF, PM or MC)")),
        }
    }
}

impl From<PerceptMethod> for MethodKind {
    fn from(m: PerceptMethod) -> Self {
        match m {
            PerceptMethod::Lf => MethodKind::LF,
            PerceptMethod::Pm => MethodKind::PM,
            PerceptMethod::Mc { .. } => MethodKind::MC,
        }
    }
}

/// Complex spectrum of a real stack.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStack {
    pub coeffs: Vec<Complex64>,
    dims: Dims,
    mean_lum: f64,
}

impl SpectralStack {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// DC / N, the mean of the source stack.
    pub fn mean_lum(&self) -> f64 {
        self.mean_lum
    }

    pub fn is_self_conjugate(&self, index: usize) -> bool {
        self.dims.conjugate(index) == index
    }

    /// Converts `|X|` to modulation for bin `index`.
    fn modulation_scale(&self, self_conjugate: bool) -> f64 {
        let n = self.dims.len() as f64;
        if self_conjugate {
            1.0 / (n * self.mean_lum)
        } else {
            2.0 / (n * self.mean_lum)
        }
    }

    /// Largest `|X(k) − conj(X(−k))|` over the spectrum.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.dims.conjugate(i)].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Physical frequency of each FFT index: cycles/deg on the two spatial axes
/// and cycles/s along the slice axis. Indices are folded with
/// `min(k, N − k)` so the map is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMap {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub w: Vec<f64>,
}

impl FrequencyMap {
    pub fn new(dims: Dims, ssr: f64, browse_speed: f64) -> Self {
        let axis = |n: usize, rate: f64| -> Vec<f64> {
            (0..n)
                .map(|k| k.min(n - k) as f64 / n as f64 * rate)
                .collect()
        };
        Self {
            u1: axis(dims.nx, ssr),
            u2: axis(dims.ny, ssr),
            w: axis(dims.nt, browse_speed),
        }
    }

    pub fn spatial(&self, kx: usize, ky: usize) -> f64 {
        self.u1[kx].hypot(self.u2[ky])
    }

    pub fn temporal(&self, kt: usize) -> f64 {
        self.w[kt]
    }
}

/// A contrast-sensitivity model evaluated on non-negative frequencies.
pub trait Sensitivity {
    fn sensitivity_at(&self, u: f64, w: f64) -> f64;

    /// `S` for every folded index triple `(kx ≤ nx/2, ky ≤ ny/2, kt ≤ nt/2)`.
    fn folded_grid(&self, dims: Dims, map: &FrequencyMap) -> Vec<f64> {
        let (hx, hy, ht) = (dims.nx / 2 + 1, dims.ny / 2 + 1, dims.nt / 2 + 1);
        let mut out = Vec::with_capacity(hx * hy * ht);
        for kt in 0..ht {
            let w = map.temporal(kt);
            for ky in 0..hy {
                for kx in 0..hx {
                    out.push(self.sensitivity_at(map.spatial(kx, ky), w));
                }
            }
        }
        out
    }
}

impl Sensitivity for Csf {
    fn sensitivity_at(&self, u: f64, w: f64) -> f64 {
        self.sensitivity(u, w)
    }

    fn folded_grid(&self, dims: Dims, map: &FrequencyMap) -> Vec<f64> {
        let (hx, hy, ht) = (dims.nx / 2 + 1, dims.ny / 2 + 1, dims.nt / 2 + 1);
        let temporal: Vec<(f64, f64)> = (0..ht)
            .map(|kt| self.temporal_filters(map.temporal(kt)))
            .collect();
        let spatial: Vec<(f64, f64)> = (0..hy)
            .flat_map(|ky| (0..hx).map(move |kx| (kx, ky)))
            .map(|(kx, ky)| {
                let u = map.spatial(kx, ky);
                (u, self.lateral_inhibition(u))
            })
            .collect();
        let mut out = Vec::with_capacity(hx * hy * ht);
        for &(h1, h2) in &temporal {
            for &(u, f) in &spatial {
                out.push(self.sensitivity_from_terms(u, h1, h2, f));
            }
        }
        out
    }
}

/// Frequency-independent sensitivity.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSensitivity(pub f64);

impl Sensitivity for ConstantSensitivity {
    fn sensitivity_at(&self, _u: f64, _w: f64) -> f64 {
        self.0
    }
}

/// Per-bin sensitivity lookup for one spectrum shape.
#[derive(Debug, Clone)]
pub struct SensitivityGrid {
    dims: Dims,
    folded: Vec<f64>,
}

impl SensitivityGrid {
    pub fn build(dims: Dims, map: &FrequencyMap, model: &impl Sensitivity) -> Self {
        Self {
            dims,
            folded: model.folded_grid(dims, map),
        }
    }

    #[inline]
    pub fn at(&self, index: usize) -> f64 {
        let (x, y, t) = self.dims.coords(index);
        let fold = |k: usize, n: usize| k.min(n - k);
        let (hx, hy) = (self.dims.nx / 2 + 1, self.dims.ny / 2 + 1);
        let (fx, fy, ft) = (
            fold(x, self.dims.nx),
            fold(y, self.dims.ny),
            fold(t, self.dims.nt),
        );
        self.folded[fx + hx * (fy + hy * ft)]
    }
}

/// Forward transform of a real stack.
pub fn forward(stack: &ImageStack) -> SpectralStack {
    forward_with(&Fft3::new(stack.dims()), stack)
}

pub fn forward_with(fft: &Fft3, stack: &ImageStack) -> SpectralStack {
    let mut coeffs: Vec<Complex64> = stack
        .data()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft.forward(&mut coeffs);
    let dims = stack.dims();
    let mean_lum = coeffs[0].re / dims.len() as f64;
    SpectralStack {
        coeffs,
        dims,
        mean_lum,
    }
}

/// Inverse transform; returns the real part and the relative imaginary
/// residue `max|Im| / max|Re|`.
pub fn inverse(spec: &SpectralStack) -> (Vec<f64>, f64) {
    inverse_with(&Fft3::new(spec.dims), spec)
}

pub fn inverse_with(fft: &Fft3, spec: &SpectralStack) -> (Vec<f64>, f64) {
    let mut buf = spec.coeffs.clone();
    fft.inverse(&mut buf);
    let max_re = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let max_im = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let residue = if max_re > 0.0 {
        max_im / max_re
    } else {
        max_im
    };
    (buf.into_iter().map(|c| c.re).collect(), residue)
}

/// Modulation of the component at index triple `k`.
pub fn modulation(spec: &SpectralStack, k: (usize, usize, usize)) -> Result<f64, PerceptError> {
    let d = spec.dims;
    if k.0 >= d.nx || k.1 >= d.ny || k.2 >= d.nt {
        return Err(PerceptError::BinOutOfRange(k.0, k.1, k.2));
    }
    let index = d.index(k.0, k.1, k.2);
    if index == 0 {
        return Err(PerceptError::DcModulation);
    }
    if !(spec.mean_lum > 0.0) {
        return Err(PerceptError::NonPositiveMean(spec.mean_lum));
    }
    Ok(spec.coeffs[index].norm() * spec.modulation_scale(spec.is_self_conjugate(index)))
}

/// Visits each non-DC conjugate pair once, in increasing order of the lower
/// linear index, and writes `f(index, coeff, self_conjugate)` to the pair.
/// Self-conjugate results are forced real. Returns the number of visits.
fn for_each_pair(
    spec: &mut SpectralStack,
    mut f: impl FnMut(usize, Complex64, bool) -> Complex64,
) -> usize {
    let dims = spec.dims;
    let mut visits = 0;
    spec.coeffs[0].im = 0.0;
    for i in 1..spec.coeffs.len() {
        let c = dims.conjugate(i);
        if c < i {
            continue;
        }
        visits += 1;
        let self_conjugate = c == i;
        let out = f(i, spec.coeffs[i], self_conjugate);
        if self_conjugate {
            spec.coeffs[i] = Complex64::new(out.re, 0.0);
        } else {
            spec.coeffs[i] = out;
            spec.coeffs[c] = out.conj();
        }
    }
    visits
}

fn check_mean(spec: &SpectralStack) -> Result<(), PerceptError> {
    if spec.mean_lum > 0.0 && spec.mean_lum.is_finite() {
        Ok(())
    } else {
        Err(PerceptError::NonPositiveMean(spec.mean_lum))
    }
}

/// Unit phasor of `c`; zero maps to `1 + 0i`. For self-conjugate bins the
/// phasor is the sign of the real part.
fn phasor(c: Complex64, self_conjugate: bool) -> Complex64 {
    if self_conjugate {
        return Complex64::new(if c.re < 0.0 { -1.0 } else { 1.0 }, 0.0);
    }
    let n = c.norm();
    if n > 0.0 {
        c / n
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Linear filtering: every non-DC component scaled by `S(u, w)`.
pub fn apply_lf(spec: &mut SpectralStack, grid: &SensitivityGrid) -> usize {
    for_each_pair(spec, |i, c, _| c * grid.at(i))
}

/// Rewrites each pair at modulation `rule(i, m, S)` with its phase kept.
fn apply_modulation_rule(
    spec: &mut SpectralStack,
    grid: &SensitivityGrid,
    mut rule: impl FnMut(usize, f64, f64) -> f64,
) -> Result<usize, PerceptError> {
    check_mean(spec)?;
    let n_lum = spec.dims.len() as f64 * spec.mean_lum;
    Ok(for_each_pair(spec, |i, c, self_conjugate| {
        let to_mod = if self_conjugate {
            1.0 / n_lum
        } else {
            2.0 / n_lum
        };
        let m = c.norm() * to_mod;
        let new_m = rule(i, m, grid.at(i));
        phasor(c, self_conjugate) * (new_m / to_mod)
    }))
}

/// Probability map with a caller-supplied `p(m, S)`.
pub fn apply_pm_with(
    spec: &mut SpectralStack,
    grid: &SensitivityGrid,
    mut probability: impl FnMut(f64, f64) -> f64,
) -> Result<usize, PerceptError> {
    apply_modulation_rule(spec, grid, |_, m, s| probability(m, s))
}

/// Probability map: modulation replaced by `p = ½ + ½ erf(k (mS − 1)/√2)`.
pub fn apply_pm(
    spec: &mut SpectralStack,
    grid: &SensitivityGrid,
    k_crozier: f64,
) -> Result<usize, PerceptError> {
    apply_pm_with(spec, grid, |m, s| {
        detection_probability_unchecked(m * s, k_crozier)
    })
}

/// Monte Carlo with a caller-supplied `p(m, S)`. One uniform draw per pair,
/// taken in visit order from a ChaCha8 stream seeded with `seed`.
pub fn apply_mc_with(
    spec: &mut SpectralStack,
    grid: &SensitivityGrid,
    seed: u64,
    mut probability: impl FnMut(f64, f64) -> f64,
) -> Result<usize, PerceptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_modulation_rule(spec, grid, |_, m, s| {
        let draw: f64 = rng.gen();
        if draw < probability(m, s) {
            1.0
        } else {
            0.0
        }
    })
}

pub fn apply_mc(
    spec: &mut SpectralStack,
    grid: &SensitivityGrid,
    k_crozier: f64,
    seed: u64,
) -> Result<usize, PerceptError> {
    apply_mc_with(spec, grid, seed, |m, s| {
        detection_probability_unchecked(m * s, k_crozier)
    })
}

/// Reusable perception pipeline for one stack shape.
pub struct Perceiver {
    fft: Fft3,
    params: BartenParams,
}

impl Perceiver {
    pub fn new(dims: Dims, params: BartenParams) -> Result<Self, PerceptError> {
        dims.check_transformable()?;
        params.validate()?;
        Ok(Self {
            fft: Fft3::new(dims),
            params,
        })
    }

    pub fn params(&self) -> &BartenParams {
        &self.params
    }

    pub fn forward(&self, stack: &ImageStack) -> SpectralStack {
        forward_with(&self.fft, stack)
    }

    /// The eye model for a stack of mean luminance `l_avg` viewed under `vc`;
    /// the field size is the slice width in degrees, `nx / ssr`.
    pub fn csf_for(&self, l_avg: f64, vc: &ViewingConditions) -> Result<Csf, PerceptError> {
        let x0 = self.fft.dims().nx as f64 / vc.ssr;
        Ok(Csf::new(FieldGeometry::new(x0, l_avg)?, self.params)?)
    }

    /// forward → method → inverse, using Barten's CSF.
    pub fn perceive(
        &self,
        stack: &ImageStack,
        method: PerceptMethod,
        vc: &ViewingConditions,
    ) -> Result<ImageStack, PerceptError> {
        vc.validate()?;
        let spec = self.forward(stack);
        check_mean(&spec)?;
        let csf = self.csf_for(spec.mean_lum, vc)?;
        self.perceive_spectrum(stack, spec, method, vc, &csf)
    }

    /// As [`Perceiver::perceive`] with any sensitivity model.
    pub fn perceive_with(
        &self,
        stack: &ImageStack,
        method: PerceptMethod,
        vc: &ViewingConditions,
        model: &impl Sensitivity,
    ) -> Result<ImageStack, PerceptError> {
        vc.validate()?;
        let spec = self.forward(stack);
        self.perceive_spectrum(stack, spec, method, vc, model)
    }

    fn perceive_spectrum(
        &self,
        stack: &ImageStack,
        mut spec: SpectralStack,
        method: PerceptMethod,
        vc: &ViewingConditions,
        model: &impl Sensitivity,
    ) -> Result<ImageStack, PerceptError> {
        let dims = stack.dims();
        let map = FrequencyMap::new(dims, vc.ssr, vc.browse_speed);
        let grid = SensitivityGrid::build(dims, &map, model);
        let k = self.params.k_crozier;
        match method {
            PerceptMethod::Lf => {
                apply_lf(&mut spec, &grid);
            }
            PerceptMethod::Pm => {
                apply_pm(&mut spec, &grid, k)?;
            }
            PerceptMethod::Mc { seed } => {
                apply_mc(&mut spec, &grid, k, seed)?;
            }
        }
        let (data, residue) = inverse_with(&self.fft, &spec);
        if residue > IMAGINARY_TOLERANCE {
            return Err(PerceptError::ImaginaryResidue(residue));
        }
        Ok(stack.with_data(data)?)
    }
}

/// One-shot perception with default Barten parameters.
pub fn perceive(
    stack: &ImageStack,
    method: PerceptMethod,
    vc: &ViewingConditions,
) -> Result<ImageStack, PerceptError> {
    Perceiver::new(stack.dims(), BartenParams::default())?.perceive(stack, method, vc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stackgen::{generate_background, normalize_to_display, Label};
    use std::f64::consts::PI;

    fn dims() -> Dims {
        Dims::new(16, 16, 8).unwrap()
    }

    fn display_stack(seed: u64) -> ImageStack {
        let bg = generate_background(dims(), 3.0, seed).unwrap();
        normalize_to_display(&bg, &ViewingConditions::default()).unwrap()
    }

    #[test]
    fn constant_stack_has_only_dc() {
        let d = dims();
        let s = ImageStack::new(vec![4.5; d.len()], d, Label::Absent, 0).unwrap();
        let spec = forward(&s);
        assert!((spec.mean_lum() - 4.5).abs() < 1e-12);
        for c in &spec.coeffs[1..] {
            assert!(c.norm() < 1e-9);
        }
    }

    #[test]
    fn temporal_cosine_occupies_one_pair() {
        let d = dims();
        let data: Vec<f64> = (0..d.len())
            .map(|i| {
                let (_, _, t) = d.coords(i);
                10.0 + (2.0 * PI * 3.0 * t as f64 / d.nt as f64).cos()
            })
            .collect();
        let spec = forward(&ImageStack::new(data, d, Label::Absent, 0).unwrap());
        let nonzero: Vec<usize> = (1..d.len())
            .filter(|&i| spec.coeffs[i].norm() > 1e-9)
            .collect();
        assert_eq!(nonzero, vec![d.index(0, 0, 3), d.index(0, 0, 5)]);
        let m = modulation(&spec, (0, 0, 3)).unwrap();
        assert!((m - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dc_modulation_is_an_error() {
        let spec = forward(&display_stack(1));
        assert!(matches!(
            modulation(&spec, (0, 0, 0)),
            Err(PerceptError::DcModulation)
        ));
        assert!(modulation(&spec, (16, 0, 0)).is_err());
    }

    #[test]
    fn zero_bin_has_zero_modulation() {
        let mut spec = forward(&display_stack(1));
        let i = spec.dims().index(2, 3, 1);
        let c = spec.dims().conjugate(i);
        spec.coeffs[i] = Complex64::default();
        spec.coeffs[c] = Complex64::default();
        assert_eq!(modulation(&spec, (2, 3, 1)).unwrap(), 0.0);
    }

    #[test]
    fn visits_half_the_spectrum() {
        let mut spec = forward(&display_stack(2));
        let grid = SensitivityGrid::build(
            dims(),
            &FrequencyMap::new(dims(), 7.0, 25.0),
            &ConstantSensitivity(1.0),
        );
        let visits = apply_lf(&mut spec, &grid);
        assert_eq!(visits, (dims().len() - 8) / 2 + 7);
    }

    #[test]
    fn frequency_map_folding() {
        let map = FrequencyMap::new(Dims::standard(), 7.0, 25.0);
        assert_eq!(map.u1[1], 7.0 / 64.0);
        assert_eq!(map.u1[63], 7.0 / 64.0);
        assert_eq!(map.u1[32], 3.5);
        assert_eq!(map.w[16], 12.5);
        assert_eq!(map.spatial(3, 4), 5.0 * 7.0 / 64.0);
    }

    #[test]
    fn method_kind_parsing() {
        assert_eq!("pm".parse::<MethodKind>().unwrap(), MethodKind::PM);
        assert!("XX".parse::<MethodKind>().is_err());
        assert_eq!(MethodKind::MC.with_seed(4), PerceptMethod::Mc { seed: 4 });
    }
}
