//! Synthetic data with known statistics, shared by the integration tests and
//! the acceptance suite.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use stcsf::observer::StackFeatures;
use stcsf::stackgen::Label;
use stcsf::stats::{CaseScores, McmcInput};

/// Field size of a 64-pixel slice at 7 px/deg.
pub const RETINA_X0: f64 = 64.0 / 7.0;

/// CSF values from `oracle/csf_oracle.py` (50-digit mpmath, written
/// independently of this crate): (u cpd, w Hz, L cd/m², X0 deg, S)
pub const GOLDEN: [(f64, f64, f64, f64, f64); 12] = [
    (4.0, 0.0, 150.0, RETINA_X0, 657.83090382318761958),
    (4.0, 2.0, 150.0, RETINA_X0, 647.88498229142629439),
    (0.5, 5.0, 150.0, RETINA_X0, 264.28987674505752622),
    (1.0, 10.0, 300.0, RETINA_X0, 402.00001097186217794),
    (3.5, 12.5, 300.0, RETINA_X0, 401.02558368751074568),
    (2.0, 1.0, 10.0, 5.0, 408.37634911616124028),
    (8.0, 3.0, 1000.0, 20.0, 545.26415660232525147),
    (0.1, 0.5, 50.0, 2.0, 12.776594583535512306),
    (15.0, 8.0, 0.5, 30.0, 23.733274818024179379),
    (6.0, 25.0, 100.0, 64.0 / 14.0, 60.688707436216736193),
    (0.0, 4.0, 150.0, 64.0 / 3.0, 53.944694288238005114),
    (30.0, 0.25, 500.0, 12.0, 44.109460858476676951),
];

/// Lower Cholesky factor of the toy channel covariance.
pub const CHOL: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.4, 0.9, 0.0], [-0.3, 0.2, 0.7]];
/// Mean shift of the central slice in signal-present cases.
pub const SHIFT: [f64; 3] = [0.6, 0.9, -0.3];
pub const NT: usize = 3;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian channel features; the signal shifts the central slice only.
pub fn toy_case(rng: &mut ChaCha8Rng, present: bool) -> StackFeatures {
    let rows: Vec<Vec<f64>> = (0..NT)
        .map(|t| {
            let z: Vec<f64> = (0..3).map(|_| normal(rng)).collect();
            (0..3)
                .map(|i| {
                    let noise: f64 = (0..3).map(|j| CHOL[i][j] * z[j]).sum();
                    noise
                        + if present && t == NT / 2 {
                            SHIFT[i]
                        } else {
                            0.0
                        }
                })
                .collect()
        })
        .collect();
    StackFeatures::from_rows(&rows).unwrap()
}

pub fn toy_set(seed: u64, n: usize) -> (Vec<StackFeatures>, Vec<StackFeatures>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let absent = (0..n).map(|_| toy_case(&mut rng, false)).collect();
    let present = (0..n).map(|_| toy_case(&mut rng, true)).collect();
    (absent, present)
}

pub fn refs(v: &[StackFeatures]) -> Vec<&StackFeatures> {
    v.iter().collect()
}

pub fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

/// `(Σ̄ + ridge·I)⁻¹ Δμ` from the central-slice sample statistics, with the
/// ridge scaled like the observer's (`factor · trace / dim`).
pub fn regularized_template(
    absent: &[StackFeatures],
    present: &[StackFeatures],
    ridge_factor: f64,
) -> [f64; 3] {
    let stats = |set: &[StackFeatures]| {
        let rows: Vec<&[f64]> = set.iter().map(|f| f.slice(NT / 2)).collect();
        let n = rows.len() as f64;
        let mut mean = [0.0; 3];
        for r in &rows {
            for i in 0..3 {
                mean[i] += r[i] / n;
            }
        }
        let mut cov = [[0.0; 3]; 3];
        for r in &rows {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
                }
            }
        }
        (mean, cov)
    };
    let (m0, c0) = stats(absent);
    let (m1, c1) = stats(present);
    let mut sigma = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sigma[i][j] = 0.5 * (c0[i][j] + c1[i][j]);
        }
    }
    let ridge = ridge_factor * (sigma[0][0] + sigma[1][1] + sigma[2][2]) / 3.0;
    for (i, row) in sigma.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let inv = inverse3(sigma);
    let mut w = [0.0; 3];
    for i in 0..3 {
        w[i] = (0..3).map(|j| inv[i][j] * (m1[j] - m0[j])).sum();
    }
    w
}

/// AUC of the ideal linear observer on the toy data, `Φ(d/√2)`.
pub fn toy_ideal_auc() -> f64 {
    let mut sigma = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sigma[i][j] = (0..3).map(|k| CHOL[i][k] * CHOL[j][k]).sum();
        }
    }
    let inv = inverse3(sigma);
    let mut d2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            d2 += SHIFT[i] * inv[i][j] * SHIFT[j];
        }
    }
    0.5 * (1.0 + statrs::function::erf::erf(d2.sqrt() / 2.0))
}

pub fn case_scores(reader: usize, absent: &[f64], present: &[f64]) -> CaseScores {
    let mut s = absent.to_vec();
    s.extend_from_slice(present);
    let mut l = vec![Label::Absent; absent.len()];
    l.extend(vec![Label::Present; present.len()]);
    CaseScores::new(reader, s, l).unwrap()
}

/// Scores a labelled test set with any scoring function.
pub fn score_sets(
    absent: &[StackFeatures],
    present: &[StackFeatures],
    score: impl Fn(&StackFeatures) -> f64,
) -> CaseScores {
    let a: Vec<f64> = absent.iter().map(&score).collect();
    let p: Vec<f64> = present.iter().map(&score).collect();
    case_scores(0, &a, &p)
}

/// Reader-by-case ensemble: shared case difficulty plus reader noise, with
/// an optional per-reader skill offset.
pub struct Ensemble {
    pub readers: usize,
    pub cases: usize,
    pub skill_sd: f64,
}

impl Ensemble {
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> McmcInput {
        let a: Vec<f64> = (0..self.cases).map(|_| normal(rng)).collect();
        let b: Vec<f64> = (0..self.cases).map(|_| normal(rng)).collect();
        let readers = (0..self.readers)
            .map(|r| {
                let skill = 1.2 + self.skill_sd * normal(rng);
                let x: Vec<f64> = a.iter().map(|&c| 0.7 * c + 0.7 * normal(rng)).collect();
                let y: Vec<f64> = b
                    .iter()
                    .map(|&c| skill + 0.7 * c + 0.7 * normal(rng))
                    .collect();
                case_scores(r, &x, &y)
            })
            .collect();
        McmcInput::new(readers).unwrap()
    }
}
