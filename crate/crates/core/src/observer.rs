//! Multi-slice channelized Hotelling observer (type 'b').
//!
//! Every slice is reduced to Laguerre-Gauss channel responses. A Hotelling
//! template is trained on the central slice's responses and applied to all
//! slices, giving one scalar per slice; a second Hotelling stage combines
//! those per-slice scalars into the case score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::stackgen::{ImageStack, Label};

#[derive(Debug, Error)]
pub enum ObserverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training needs at least 2 cases per class (absent {absent}, present {present})")]
    TooFewCases { absent: usize, present: usize },
    #[error("{stage} covariance is singular even after ridge regularization")]
    Singular { stage: &'static str },
    #[error("invalid channel parameters: {0}")]
    Channels(String),
}

/// Laguerre-Gauss channels, unit energy, centred at `((nx−1)/2, (ny−1)/2)`:
/// `LG_j(r) = exp(−π r²/a²) L_j(2π r²/a²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgChannelSet {
    pub n_channels: usize,
    pub spread: f64,
    pub nx: usize,
    pub ny: usize,
    channels: Vec<Vec<f64>>,
}

/// Laguerre polynomials `L_0..L_{n−1}` at `x`.
fn laguerre_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n == 1 {
        return out;
    }
    out.push(1.0 - x);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

impl LgChannelSet {
    pub fn new(
        nx: usize,
        ny: usize,
        n_channels: usize,
        spread: f64,
    ) -> Result<Self, ObserverError> {
        if n_channels == 0 || nx == 0 || ny == 0 {
            return Err(ObserverError::Channels(format!(
                "{n_channels} channels on a {nx}x{ny} grid"
            )));
        }
        if !(spread.is_finite() && spread > 0.0) {
            return Err(ObserverError::Channels(format!(
                "spread {spread} must be > 0"
            )));
        }
        let (cx, cy) = ((nx as f64 - 1.0) / 2.0, (ny as f64 - 1.0) / 2.0);
        let a2 = spread * spread;
        let mut channels = vec![vec![0.0; nx * ny]; n_channels];
        for y in 0..ny {
            for x in 0..nx {
                let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let envelope = (-PI * r2 / a2).exp();
                let lag = laguerre_all(n_channels, 2.0 * PI * r2 / a2);
                for (j, l) in lag.into_iter().enumerate() {
                    channels[j][x + nx * y] = envelope * l;
                }
            }
        }
        for c in &mut channels {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(ObserverError::Channels(
                    "channel has zero energy on the grid".into(),
                ));
            }
            c.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self {
            n_channels,
            spread,
            nx,
            ny,
            channels,
        })
    }

    /// 15 channels with spread 10 pixels.
    pub fn standard(nx: usize, ny: usize) -> Result<Self, ObserverError> {
        Self::new(nx, ny, 15, 10.0)
    }

    pub fn channel(&self, j: usize) -> &[f64] {
        &self.channels[j]
    }

    /// Channel responses `v_j = ⟨slice, c_j⟩`.
    pub fn channelize(&self, slice: &[f64]) -> Result<Vec<f64>, ObserverError> {
        if slice.len() != self.nx * self.ny {
            return Err(ObserverError::DimensionMismatch(format!(
                "slice has {} pixels, channels expect {}x{}",
                slice.len(),
                self.nx,
                self.ny
            )));
        }
        Ok(self
            .channels
            .iter()
            .map(|c| c.iter().zip(slice).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Channel responses of every slice of `stack`.
    pub fn stack_features(&self, stack: &ImageStack) -> Result<StackFeatures, ObserverError> {
        let dims = stack.dims();
        let mut values = Vec::with_capacity(dims.nt * self.n_channels);
        for t in 0..dims.nt {
            values.extend(self.channelize(stack.slice(t))?);
        }
        Ok(StackFeatures {
            nt: dims.nt,
            n_channels: self.n_channels,
            values,
        })
    }
}

/// Per-slice channel responses of one stack: `nt` rows of `n_channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackFeatures {
    pub nt: usize,
    pub n_channels: usize,
    values: Vec<f64>,
}

impl StackFeatures {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ObserverError> {
        let n_channels = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_channels == 0 || rows.iter().any(|r| r.len() != n_channels) {
            return Err(ObserverError::DimensionMismatch(
                "feature rows must be non-empty and equally long".into(),
            ));
        }
        Ok(Self {
            nt: rows.len(),
            n_channels,
            values: rows.concat(),
        })
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_channels..(t + 1) * self.n_channels]
    }
}

/// Training statistics and weights of one Hotelling stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotellingStage {
    pub weights: Vec<f64>,
    pub mean_absent: Vec<f64>,
    pub mean_present: Vec<f64>,
    /// Average of the two class covariances, row-major.
    pub covariance: Vec<f64>,
    pub ridge: f64,
}

fn mean_vector(rows: &[Vec<f64>], dim: usize) -> DVector<f64> {
    let mut m = DVector::zeros(dim);
    for r in rows {
        m += DVector::from_column_slice(r);
    }
    m / rows.len() as f64
}

fn covariance(rows: &[Vec<f64>], mean: &DVector<f64>) -> DMatrix<f64> {
    let dim = mean.len();
    let mut c = DMatrix::zeros(dim, dim);
    for r in rows {
        let d = DVector::from_column_slice(r) - mean;
        c += &d * d.transpose();
    }
    c / (rows.len() as f64 - 1.0)
}

/// `w = (Σ̄ + ridge·I)⁻¹ (μ₊ − μ₋)` with `Σ̄` the average class covariance and
/// `ridge = ridge_factor · trace(Σ̄) / dim`.
pub fn fit_hotelling(
    absent: &[Vec<f64>],
    present: &[Vec<f64>],
    ridge_factor: f64,
    stage: &'static str,
) -> Result<HotellingStage, ObserverError> {
    if absent.len() < 2 || present.len() < 2 {
        return Err(ObserverError::TooFewCases {
            absent: absent.len(),
            present: present.len(),
        });
    }
    let dim = absent[0].len();
    if absent.iter().chain(present).any(|r| r.len() != dim) {
        return Err(ObserverError::DimensionMismatch(format!(
            "{stage} feature vectors differ in length"
        )));
    }
    let mu0 = mean_vector(absent, dim);
    let mu1 = mean_vector(present, dim);
    let cov = (covariance(absent, &mu0) + covariance(present, &mu1)) * 0.5;
    let ridge = ridge_factor * cov.trace() / dim as f64;
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(ObserverError::Singular { stage });
    }
    let regularized = &cov + DMatrix::identity(dim, dim) * ridge;
    let chol = regularized
        .cholesky()
        .ok_or(ObserverError::Singular { stage })?;
    let weights = chol.solve(&(&mu1 - &mu0));
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(ObserverError::Singular { stage });
    }
    Ok(HotellingStage {
        weights: weights.as_slice().to_vec(),
        mean_absent: mu0.as_slice().to_vec(),
        mean_present: mu1.as_slice().to_vec(),
        covariance: cov.transpose().as_slice().to_vec(),
        ridge,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChoConfig {
    pub n_channels: usize,
    pub spread: f64,
    pub ridge_factor: f64,
}

impl Default for ChoConfig {
    fn default() -> Self {
        Self {
            n_channels: 15,
            spread: 10.0,
            ridge_factor: 1e-6,
        }
    }
}

/// A trained type-'b' msCHO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoModel {
    pub n_channels: usize,
    pub spread: f64,
    pub nt: usize,
    pub central_slice: usize,
    pub ridge_factor: f64,
    /// Channel template trained on the central slice.
    pub central: HotellingStage,
    /// Weights over the per-slice scalars.
    pub slice_stage: HotellingStage,
    /// Seed of the train/test split this model came from, if any.
    pub split_seed: Option<u64>,
}

impl ChoModel {
    pub fn template_central(&self) -> &[f64] {
        &self.central.weights
    }

    pub fn slice_weights(&self) -> &[f64] {
        &self.slice_stage.weights
    }

    fn check(&self, f: &StackFeatures) -> Result<(), ObserverError> {
        if f.nt != self.nt || f.n_channels != self.n_channels {
            return Err(ObserverError::DimensionMismatch(format!(
                "features are {}x{}, model expects {}x{}",
                f.nt, f.n_channels, self.nt, self.n_channels
            )));
        }
        Ok(())
    }

    /// Central-template response of every slice.
    pub fn slice_scalars(&self, f: &StackFeatures) -> Result<Vec<f64>, ObserverError> {
        self.check(f)?;
        Ok((0..f.nt)
            .map(|t| dot(self.template_central(), f.slice(t)))
            .collect())
    }

    pub fn score(&self, f: &StackFeatures) -> Result<f64, ObserverError> {
        let s = self.slice_scalars(f)?;
        Ok(dot(self.slice_weights(), &s))
    }

    pub fn score_stack(
        &self,
        channels: &LgChannelSet,
        stack: &ImageStack,
    ) -> Result<f64, ObserverError> {
        if channels.n_channels != self.n_channels || channels.spread != self.spread {
            return Err(ObserverError::DimensionMismatch(
                "channel set differs from the one the model was trained with".into(),
            ));
        }
        self.score(&channels.stack_features(stack)?)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Trains both stages from per-class channel features.
pub fn train(
    absent: &[&StackFeatures],
    present: &[&StackFeatures],
    config: &ChoConfig,
) -> Result<ChoModel, ObserverError> {
    if absent.len() < 2 || present.len() < 2 {
        return Err(ObserverError::TooFewCases {
            absent: absent.len(),
            present: present.len(),
        });
    }
    let first = absent[0];
    let (nt, n_channels) = (first.nt, first.n_channels);
    if absent
        .iter()
        .chain(present)
        .any(|f| f.nt != nt || f.n_channels != n_channels)
    {
        return Err(ObserverError::DimensionMismatch(
            "training stacks differ in shape".into(),
        ));
    }
    let central_slice = nt / 2;
    let rows = |set: &[&StackFeatures]| -> Vec<Vec<f64>> {
        set.iter()
            .map(|f| f.slice(central_slice).to_vec())
            .collect()
    };
    let central = fit_hotelling(
        &rows(absent),
        &rows(present),
        config.ridge_factor,
        "central-slice",
    )?;

    let scalars = |set: &[&StackFeatures]| -> Vec<Vec<f64>> {
        set.iter()
            .map(|f| (0..nt).map(|t| dot(&central.weights, f.slice(t))).collect())
            .collect()
    };
    let slice_stage = fit_hotelling(
        &scalars(absent),
        &scalars(present),
        config.ridge_factor,
        "slice",
    )?;

    Ok(ChoModel {
        n_channels,
        spread: config.spread,
        nt,
        central_slice,
        ridge_factor: config.ridge_factor,
        central,
        slice_stage,
        split_seed: None,
    })
}

/// Channelizes labelled stacks and trains on them.
pub fn train_stacks(
    stacks: &[ImageStack],
    channels: &LgChannelSet,
    config: &ChoConfig,
) -> Result<ChoModel, ObserverError> {
    let features = stacks
        .iter()
        .map(|s| channels.stack_features(s).map(|f| (s.label, f)))
        .collect::<Result<Vec<_>, _>>()?;
    let absent: Vec<&StackFeatures> = features
        .iter()
        .filter(|(l, _)| *l == Label::Absent)
        .map(|(_, f)| f)
        .collect();
    let present: Vec<&StackFeatures> = features
        .iter()
        .filter(|(l, _)| *l == Label::Present)
        .map(|(_, f)| f)
        .collect();
    let mut config = *config;
    config.n_channels = channels.n_channels;
    config.spread = channels.spread;
    train(&absent, &present, &config)
}
