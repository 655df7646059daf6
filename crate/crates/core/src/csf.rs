//! Barten's spatiotemporal contrast sensitivity and the psychometric
//! detection probability built on top of it.
//!
//! ```text
//! S(u, w) = M_opt(u) / ( k * sqrt( (2/T) (1/X0² + 1/Xmax² + u²/Nmax²)
//!                                  * (1/(η p E) + Φ0 / [H1(w) (1 − H2(w) F(u))]²) ) )
//! ```
//!
//! Units: `u` in cycles/deg, `w` in cycles/s, luminance in cd/m², field size
//! `X0` in degrees. `σ0` and `C_ab` are stored in arcmin and arcmin/mm; the
//! `1/60` factor in the line-spread width converts them to degrees.
//!
//! The noise term places `Φ0` over `[H1 (1 − H2 F)]²` exactly as written in
//! the formula above, which is the form this crate commits to.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsfError {
    #[error("{name} = {value} is outside the model domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
}

fn domain(name: &'static str, value: f64, expected: &'static str) -> CsfError {
    CsfError::Domain {
        name,
        value,
        expected,
    }
}

/// Constants of the spatiotemporal CSF model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BartenParams {
    /// Crozier coefficient; also the signal-to-noise ratio at threshold.
    pub k_crozier: f64,
    /// Quantum efficiency of the eye.
    pub eta: f64,
    /// Spectral density of neural noise, s·deg².
    pub phi0: f64,
    /// Maximum angular integration size, deg.
    pub x_max: f64,
    /// Maximum number of integrated cycles.
    pub n_max: f64,
    /// Integration time, s.
    pub t_int: f64,
    /// Photon conversion factor, photons/(s·deg²·Td).
    pub p_photon: f64,
    /// Base line-spread width, arcmin.
    pub sigma0: f64,
    /// Pupil-dependent line-spread growth, arcmin/mm.
    pub c_ab: f64,
    /// Lateral inhibition cutoff, cycles/deg.
    pub u0: f64,
    pub n1: f64,
    pub n2: f64,
    pub tau10: f64,
    pub tau20: f64,
}

impl Default for BartenParams {
    fn default() -> Self {
        Self {
            k_crozier: 3.0,
            eta: 0.03,
            phi0: 3e-8,
            x_max: 12.0,
            n_max: 15.0,
            t_int: 0.1,
            p_photon: 1.285e6,
            sigma0: 0.5,
            c_ab: 0.08,
            u0: 7.0,
            n1: 7.0,
            n2: 4.0,
            tau10: 0.032,
            tau20: 0.018,
        }
    }
}

impl BartenParams {
    pub fn validate(&self) -> Result<(), CsfError> {
        let fields = [
            ("k_crozier", self.k_crozier),
            ("eta", self.eta),
            ("phi0", self.phi0),
            ("x_max", self.x_max),
            ("n_max", self.n_max),
            ("t_int", self.t_int),
            ("p_photon", self.p_photon),
            ("sigma0", self.sigma0),
            ("c_ab", self.c_ab),
            ("u0", self.u0),
            ("n1", self.n1),
            ("n2", self.n2),
            ("tau10", self.tau10),
            ("tau20", self.tau20),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(domain(name, value, "finite and > 0"));
            }
        }
        Ok(())
    }
}

/// Apparent image size and mean luminance of the viewed object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldGeometry {
    /// Apparent size, deg.
    pub x0: f64,
    /// Average luminance over space and time, cd/m².
    pub l_avg: f64,
}

impl FieldGeometry {
    pub fn new(x0: f64, l_avg: f64) -> Result<Self, CsfError> {
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(domain("x0", x0, "finite and > 0"));
        }
        if !(l_avg.is_finite() && l_avg > 0.0) {
            return Err(domain("l_avg", l_avg, "finite and > 0"));
        }
        Ok(Self { x0, l_avg })
    }

    /// Equivalent field diameter `D = 2 X0 / √π`, deg.
    pub fn diameter(&self) -> f64 {
        2.0 * self.x0 / PI.sqrt()
    }
}

/// Pupil diameter in mm for a field of luminance `l_avg` and size `x0`.
pub fn pupil_diameter(l_avg: f64, x0: f64) -> Result<f64, CsfError> {
    if !(l_avg.is_finite() && l_avg > 0.0) {
        return Err(domain("l_avg", l_avg, "finite and > 0"));
    }
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(domain("x0", x0, "finite and > 0"));
    }
    Ok(5.0 - 3.0 * (0.4 * (l_avg * x0 * x0 / 1600.0).ln()).tanh())
}

/// Retinal illuminance in Trolands, corrected for the Stiles-Crawford effect.
pub fn retinal_illuminance(l_avg: f64, d_pupil: f64) -> Result<f64, CsfError> {
    if !(l_avg.is_finite() && l_avg > 0.0) {
        return Err(domain("l_avg", l_avg, "finite and > 0"));
    }
    if !(d_pupil > 0.0 && d_pupil < 9.0) {
        return Err(domain("d_pupil", d_pupil, "in (0, 9) mm"));
    }
    let stiles_crawford = 1.0 - (d_pupil / 9.7).powi(2) + (d_pupil / 12.4).powi(4);
    Ok(PI * d_pupil * d_pupil * l_avg / 4.0 * stiles_crawford)
}

/// Lateral inhibition term `F(u)`.
pub fn lateral_inhibition(u: f64, u0: f64) -> f64 {
    1.0 - (1.0 - (-(u / u0).powi(2)).exp()).sqrt()
}

/// Temporal filter `H(w)` of order `n` with time constant `tau`.
pub fn temporal_filter(w: f64, tau: f64, n: f64) -> f64 {
    let x = 2.0 * PI * tau * w;
    (1.0 + x * x).powf(-n / 2.0)
}

/// Optical MTF of the eye for pupil diameter `d_pupil` (mm).
pub fn optical_mtf(u: f64, d_pupil: f64, params: &BartenParams) -> f64 {
    let sigma = line_spread_sigma(d_pupil, params);
    (-2.0 * (PI * sigma * u).powi(2)).exp()
}

fn line_spread_sigma(d_pupil: f64, params: &BartenParams) -> f64 {
    (params.sigma0.powi(2) + (params.c_ab * d_pupil).powi(2)).sqrt() / 60.0
}

/// The CSF model specialised to one field geometry.
///
/// Everything that depends only on luminance and field size (pupil, retinal
/// illuminance, photon noise, temporal time constants) is computed once in
/// [`Csf::new`]; [`Csf::sensitivity`] is then cheap per frequency.
#[derive(Debug, Clone)]
pub struct Csf {
    params: BartenParams,
    geometry: FieldGeometry,
    pupil: f64,
    illuminance: f64,
    sigma: f64,
    photon_noise: f64,
    field_term: f64,
    tau1: f64,
    tau2: f64,
}

impl Csf {
    pub fn new(geometry: FieldGeometry, params: BartenParams) -> Result<Self, CsfError> {
        params.validate()?;
        let geometry = FieldGeometry::new(geometry.x0, geometry.l_avg)?;
        let pupil = pupil_diameter(geometry.l_avg, geometry.x0)?;
        let illuminance = retinal_illuminance(geometry.l_avg, pupil)?;
        let d = geometry.diameter();
        let tau1 =
            params.tau10 / (1.0 + 0.55 * (1.0 + (1.0 + d).powf(0.6) * illuminance / 3.5).ln());
        let tau2 = params.tau20
            / (1.0 + 0.37 * (1.0 + (1.0 + d / 3.2).powi(5) * illuminance / 120.0).ln());
        Ok(Self {
            params,
            geometry,
            pupil,
            illuminance,
            sigma: line_spread_sigma(pupil, &params),
            photon_noise: 1.0 / (params.eta * params.p_photon * illuminance),
            field_term: 1.0 / geometry.x0.powi(2) + 1.0 / params.x_max.powi(2),
            tau1,
            tau2,
        })
    }

    pub fn params(&self) -> &BartenParams {
        &self.params
    }

    pub fn geometry(&self) -> FieldGeometry {
        self.geometry
    }

    /// Pupil diameter, mm.
    pub fn pupil(&self) -> f64 {
        self.pupil
    }

    /// Retinal illuminance, Td.
    pub fn illuminance(&self) -> f64 {
        self.illuminance
    }

    /// Luminance-adapted time constants `(τ1, τ2)`, s.
    pub fn time_constants(&self) -> (f64, f64) {
        (self.tau1, self.tau2)
    }

    pub fn optical_mtf(&self, u: f64) -> f64 {
        (-2.0 * (PI * self.sigma * u).powi(2)).exp()
    }

    pub fn lateral_inhibition(&self, u: f64) -> f64 {
        lateral_inhibition(u, self.params.u0)
    }

    /// `(H1(w), H2(w))`.
    pub fn temporal_filters(&self, w: f64) -> (f64, f64) {
        (
            temporal_filter(w, self.tau1, self.params.n1),
            temporal_filter(w, self.tau2, self.params.n2),
        )
    }

    /// Sensitivity for non-negative frequencies.
    pub fn try_sensitivity(&self, u: f64, w: f64) -> Result<f64, CsfError> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(domain("u", u, "finite and >= 0"));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(domain("w", w, "finite and >= 0"));
        }
        Ok(self.sensitivity(u, w))
    }

    /// Sensitivity at spatial frequency `u` and temporal frequency `w`.
    ///
    /// Callers guarantee `u, w >= 0`; see [`Csf::try_sensitivity`] for the
    /// checked form. At `u = w = 0` the lateral-inhibition term cancels the
    /// temporal response and the result is exactly 0.
    pub fn sensitivity(&self, u: f64, w: f64) -> f64 {
        let (h1, h2) = self.temporal_filters(w);
        let f = self.lateral_inhibition(u);
        self.sensitivity_from_terms(u, h1, h2, f)
    }

    /// Sensitivity from precomputed `H1(w)`, `H2(w)` and `F(u)`; lets callers
    /// that sweep a frequency grid hoist the per-axis terms out of the loop.
    pub fn sensitivity_from_terms(&self, u: f64, h1: f64, h2: f64, f: f64) -> f64 {
        let p = &self.params;
        let spatial = (2.0 / p.t_int) * (self.field_term + (u / p.n_max).powi(2));
        let gain = h1 * (1.0 - h2 * f);
        if gain <= 0.0 {
            return 0.0;
        }
        let noise = self.photon_noise + p.phi0 / (gain * gain);
        self.optical_mtf(u) / (p.k_crozier * (spatial * noise).sqrt())
    }
}

/// One-shot evaluation of `S(u, w)`.
pub fn csf(
    u: f64,
    w: f64,
    geometry: FieldGeometry,
    params: &BartenParams,
) -> Result<f64, CsfError> {
    Csf::new(geometry, *params)?.try_sensitivity(u, w)
}

/// Probability of detecting a component of modulation `m` at sensitivity `s`:
/// `p = ½ + ½ erf(k (m s − 1) / √2)`.
pub fn detection_probability(m: f64, s: f64, k_crozier: f64) -> Result<f64, CsfError> {
    if !(m.is_finite() && m >= 0.0) {
        return Err(domain("m", m, "finite and >= 0"));
    }
    if !(s >= 0.0) {
        return Err(domain("s", s, ">= 0"));
    }
    Ok(detection_probability_unchecked(m * s, k_crozier))
}

/// `p` as a function of the threshold multiple `m·S`.
#[inline]
pub fn detection_probability_unchecked(ms: f64, k_crozier: f64) -> f64 {
    let z = k_crozier * (ms - 1.0);
    0.5 + 0.5 * erf(z / SQRT_2)
}
