//! Figures of merit: Mann-Whitney AUC, the one-shot MRMC variance of the
//! reader-averaged AUC, and the detectability index `d′ = 2 erf⁻¹(2 AUC − 1)`.
//!
//! The MRMC variance follows the U-statistic moment decomposition for a
//! fully-crossed design. With `s_rij = ψ(x_ri, y_rj)` the success kernel of
//! reader `r` on absent case `i` and present case `j`, eight second moments
//! are estimated, split by whether the two kernels share the reader, the
//! absent case and the present case:
//!
//! | moment | reader | absent | present |
//! |--------|--------|--------|---------|
//! | M1     | same   | same   | same    |
//! | M2     | same   | same   | differ  |
//! | M3     | same   | differ | same    |
//! | M4     | same   | differ | differ  |
//! | M5..M8 | differ | (as M1..M4)      ||
//!
//! and `Var(Ā) = Σ c_k M_k − M8`, each `c_k` being the fraction of index
//! tuples falling in that class.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf;
use std::f64::consts::PI;
use thiserror::Error;

use crate::observer::{train, ChoConfig, ChoModel, StackFeatures};
use crate::seed::{derive_seed, stream};
use crate::stackgen::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least one case of each class (absent {absent}, present {present})")]
    OneClass { absent: usize, present: usize },
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    Length { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFinite(f64),
    #[error("MRMC input has no readers")]
    NoReaders,
    #[error("reader {0} did not score the same labelled case set as reader 0")]
    NotFullyCrossed(usize),
    #[error("variance needs at least two cases per class")]
    TooFewForVariance,
    #[error("AUC {0} gives an infinite d′ (saturated)")]
    Saturated(f64),
    #[error("AUC {0} is outside [0, 1]")]
    AucRange(f64),
    #[error("{0}")]
    Readers(String),
}

/// One reader's decision variables over a case set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseScores {
    pub reader_id: usize,
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl CaseScores {
    pub fn new(reader_id: usize, scores: Vec<f64>, labels: Vec<Label>) -> Result<Self, StatsError> {
        if scores.len() != labels.len() {
            return Err(StatsError::Length {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(StatsError::NonFinite(s));
        }
        Ok(Self {
            reader_id,
            scores,
            labels,
        })
    }

    /// `(absent scores, present scores)`, each in case order.
    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut absent = Vec::new();
        let mut present = Vec::new();
        for (&s, &l) in self.scores.iter().zip(&self.labels) {
            match l {
                Label::Absent => absent.push(s),
                Label::Present => present.push(s),
            }
        }
        (absent, present)
    }
}

/// Mann-Whitney kernel: 1 if the present score wins, ½ on a tie.
#[inline]
pub fn psi(absent: f64, present: f64) -> f64 {
    if present > absent {
        1.0
    } else if present == absent {
        0.5
    } else {
        0.0
    }
}

fn check_classes(absent: &[f64], present: &[f64]) -> Result<(), StatsError> {
    if absent.is_empty() || present.is_empty() {
        return Err(StatsError::OneClass {
            absent: absent.len(),
            present: present.len(),
        });
    }
    Ok(())
}

/// Area under the ROC curve as the mean of `ψ` over all (absent, present)
/// pairs. Sort-based, `O(n log n)`.
pub fn auc(scores: &CaseScores) -> Result<f64, StatsError> {
    let (absent, present) = scores.split();
    check_classes(&absent, &present)?;
    let mut sorted = absent.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut wins = 0.0;
    for &y in &present {
        let below = sorted.partition_point(|&x| x < y);
        let not_above = sorted.partition_point(|&x| x <= y);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(wins / (absent.len() * present.len()) as f64)
}

/// Unbiased case-only variance of a single reader's AUC.
pub fn auc_variance(scores: &CaseScores) -> Result<f64, StatsError> {
    let input = McmcInput::new(vec![scores.clone()])?;
    Ok(mrmc_one_shot(&input)?.auc_variance)
}

/// A fully-crossed reader × case design.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcInput {
    pub readers: Vec<CaseScores>,
}

impl McmcInput {
    pub fn new(readers: Vec<CaseScores>) -> Result<Self, StatsError> {
        let first = readers.first().ok_or(StatsError::NoReaders)?;
        for (r, reader) in readers.iter().enumerate().skip(1) {
            if reader.labels != first.labels {
                return Err(StatsError::NotFullyCrossed(r));
            }
        }
        Ok(Self { readers })
    }

    pub fn n_readers(&self) -> usize {
        self.readers.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcResult {
    pub auc_mean: f64,
    /// One-shot variance of the reader-averaged AUC, floored at zero.
    pub auc_variance: f64,
    /// `2 √variance`.
    pub error_bar: f64,
    /// `±∞` when the mean AUC is exactly 0 or 1; see `saturated`.
    pub d_prime: f64,
    pub saturated: bool,
    /// Set when fewer than two readers were supplied: the variance is then
    /// case-only and carries no reader component.
    pub single_reader: bool,
    pub reader_aucs: Vec<f64>,
    pub moments: [f64; 8],
    pub n_readers: usize,
    pub n_absent: usize,
    pub n_present: usize,
}

/// Raw kernel sums for the moment estimators.
struct KernelSums {
    /// Σ s² per class (same reader, same i, same j), summed over readers.
    same_all: f64,
    same_i: f64,
    same_j: f64,
    differ_both: f64,
}

pub fn mrmc_one_shot(input: &McmcInput) -> Result<McmcResult, StatsError> {
    let r_count = input.n_readers();
    let split: Vec<(Vec<f64>, Vec<f64>)> = input.readers.iter().map(CaseScores::split).collect();
    let (n0, n1) = (split[0].0.len(), split[0].1.len());
    check_classes(&split[0].0, &split[0].1)?;
    if n0 < 2 || n1 < 2 {
        return Err(StatsError::TooFewForVariance);
    }

    let mut total = vec![0.0; n0 * n1];
    let mut within = KernelSums {
        same_all: 0.0,
        same_i: 0.0,
        same_j: 0.0,
        differ_both: 0.0,
    };
    let mut reader_aucs = Vec::with_capacity(r_count);
    let mut col = vec![0.0; n1];
    for (absent, present) in &split {
        let (mut s, mut q, mut rows2) = (0.0, 0.0, 0.0);
        col.iter_mut().for_each(|c| *c = 0.0);
        for (i, &x) in absent.iter().enumerate() {
            let mut row = 0.0;
            for (j, &y) in present.iter().enumerate() {
                let k = psi(x, y);
                row += k;
                q += k * k;
                col[j] += k;
                total[i * n1 + j] += k;
            }
            s += row;
            rows2 += row * row;
        }
        let cols2: f64 = col.iter().map(|c| c * c).sum();
        reader_aucs.push(s / (n0 * n1) as f64);
        within.same_all += q;
        within.same_i += rows2 - q;
        within.same_j += cols2 - q;
        within.differ_both += s * s - rows2 - cols2 + q;
    }

    // all reader pairs (r, r'), including r = r'
    let t2: f64 = total.iter().map(|t| t * t).sum();
    let t_rows2: f64 = total
        .chunks(n1)
        .map(|r| r.iter().sum::<f64>().powi(2))
        .sum();
    let t_cols2: f64 = (0..n1)
        .map(|j| (0..n0).map(|i| total[i * n1 + j]).sum::<f64>().powi(2))
        .sum();
    let t_sum: f64 = total.iter().sum();
    let cross = KernelSums {
        same_all: t2 - within.same_all,
        same_i: (t_rows2 - t2) - within.same_i,
        same_j: (t_cols2 - t2) - within.same_j,
        differ_both: (t_sum * t_sum - t_rows2 - t_cols2 + t2) - within.differ_both,
    };

    let (r, n0f, n1f) = (r_count as f64, n0 as f64, n1 as f64);
    let counts = [
        n0f * n1f,
        n0f * n1f * (n1f - 1.0),
        n0f * (n0f - 1.0) * n1f,
        n0f * (n0f - 1.0) * n1f * (n1f - 1.0),
    ];
    let mut moments = [0.0; 8];
    let w = [
        within.same_all,
        within.same_i,
        within.same_j,
        within.differ_both,
    ];
    let c = [
        cross.same_all,
        cross.same_i,
        cross.same_j,
        cross.differ_both,
    ];
    for k in 0..4 {
        moments[k] = w[k] / (r * counts[k]);
        if r_count > 1 {
            moments[k + 4] = c[k] / (r * (r - 1.0) * counts[k]);
        }
    }

    let base = r * n0f * n1f;
    let coef_case = [
        1.0 / base,
        (n1f - 1.0) / base,
        (n0f - 1.0) / base,
        (n0f - 1.0) * (n1f - 1.0) / base,
    ];
    let mut variance = 0.0;
    for k in 0..4 {
        variance += coef_case[k] * moments[k];
        variance += (r - 1.0) * coef_case[k] * moments[k + 4];
    }
    let single_reader = r_count < 2;
    variance -= if single_reader {
        moments[3]
    } else {
        moments[7]
    };
    let auc_variance = variance.max(0.0);

    let auc_mean = reader_aucs.iter().sum::<f64>() / r;
    let (d_prime, saturated) = match d_prime(auc_mean) {
        Ok(d) => (d, false),
        Err(_) if auc_mean >= 1.0 => (f64::INFINITY, true),
        Err(_) => (f64::NEG_INFINITY, true),
    };
    Ok(McmcResult {
        auc_mean,
        auc_variance,
        error_bar: 2.0 * auc_variance.sqrt(),
        d_prime,
        saturated,
        single_reader,
        reader_aucs,
        moments,
        n_readers: r_count,
        n_absent: n0,
        n_present: n1,
    })
}

/// Inverse error function on the open interval `(-1, 1)`: statrs' value
/// polished by Newton steps, on `erfc` in the tails to keep relative
/// precision.
pub fn erf_inv(y: f64) -> Result<f64, StatsError> {
    if !(y > -1.0 && y < 1.0) {
        return Err(StatsError::AucRange((y + 1.0) / 2.0));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let a = y.abs();
    let mut x = erf::erf_inv(a);
    for _ in 0..3 {
        let slope = 2.0 / PI.sqrt() * (-x * x).exp();
        let residual = if a > 0.5 {
            (1.0 - a) - erf::erfc(x)
        } else {
            erf::erf(x) - a
        };
        if slope == 0.0 || residual == 0.0 {
            break;
        }
        x -= residual / slope;
    }
    Ok(x.copysign(y))
}

/// `d′ = 2 erf⁻¹(2 AUC − 1)`.
pub fn d_prime(auc: f64) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&auc) {
        return Err(StatsError::AucRange(auc));
    }
    if auc == 0.0 || auc == 1.0 {
        return Err(StatsError::Saturated(auc));
    }
    Ok(2.0 * erf_inv(2.0 * auc - 1.0)?)
}

/// Half-width of the d′ interval induced by an AUC half-width `auc_bar`
/// (first-order propagation through `d′(AUC)`).
pub fn d_prime_error_bar(auc: f64, auc_bar: f64) -> f64 {
    match erf_inv(2.0 * auc - 1.0) {
        Ok(x) => auc_bar * 2.0 * PI.sqrt() * (x * x).exp(),
        Err(_) => f64::INFINITY,
    }
}

/// How virtual readers are built from a labelled case set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReaderConfig {
    pub n_readers: usize,
    /// Fraction of each class's training pool given to each reader.
    pub train_fraction: f64,
    pub cho: ChoConfig,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        Self {
            n_readers: 4,
            train_fraction: 0.75,
            cho: ChoConfig::default(),
        }
    }
}

/// Common test half plus each reader's training subset (case indices).
#[derive(Debug, Clone, PartialEq)]
pub struct ReaderSplit {
    pub test: Vec<usize>,
    pub train: Vec<Vec<usize>>,
}

/// Per class, half the cases (rounded down) form the common test set; each
/// reader trains on a seeded random `train_fraction` of the remaining pool.
pub fn split_cases(
    labels: &[Label],
    n_readers: usize,
    train_fraction: f64,
    master_seed: u64,
) -> Result<ReaderSplit, StatsError> {
    if n_readers == 0 {
        return Err(StatsError::NoReaders);
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(StatsError::Readers(format!(
            "train_fraction {train_fraction} must be in (0, 1]"
        )));
    }
    let mut test = Vec::new();
    let mut pools = Vec::new();
    for (c, class) in [Label::Absent, Label::Present].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(master_seed, stream::TEST_SPLIT, c as u64));
        idx.shuffle(&mut rng);
        let n_test = idx.len() / 2;
        let pool = idx.split_off(n_test);
        let n_train = ((pool.len() as f64 * train_fraction).round() as usize).min(pool.len());
        if n_test < 2 || n_train < 2 {
            return Err(StatsError::Readers(format!(
                "{} {:?} cases are too few for a test half and a training subset of 2+",
                labels.iter().filter(|&&l| l == class).count(),
                class
            )));
        }
        test.extend(idx);
        pools.push((pool, n_train));
    }
    test.sort_unstable();

    let train = (0..n_readers)
        .map(|r| {
            let mut chosen = Vec::new();
            for (c, (pool, n_train)) in pools.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    master_seed,
                    stream::READER_TRAIN,
                    (r * 2 + c) as u64,
                ));
                let mut p = pool.clone();
                p.shuffle(&mut rng);
                chosen.extend_from_slice(&p[..*n_train]);
            }
            chosen.sort_unstable();
            chosen
        })
        .collect();
    Ok(ReaderSplit { test, train })
}

#[derive(Debug, Clone)]
pub struct TrainedReader {
    pub model: ChoModel,
    pub scores: CaseScores,
}

/// Trains `config.n_readers` msCHO readers and scores the common test set.
///
/// `features(reader, case)` supplies channel features of a case as seen by
/// that reader; deterministic perception methods can ignore `reader`.
pub fn make_readers<F, E>(
    labels: &[Label],
    config: &ReaderConfig,
    master_seed: u64,
    features: F,
) -> Result<Vec<TrainedReader>, E>
where
    F: Fn(usize, usize) -> Result<StackFeatures, E>,
    E: From<StatsError> + From<crate::observer::ObserverError>,
{
    let split = split_cases(labels, config.n_readers, config.train_fraction, master_seed)?;
    let test_labels: Vec<Label> = split.test.iter().map(|&i| labels[i]).collect();
    let mut readers = Vec::with_capacity(config.n_readers);
    for (r, train_idx) in split.train.iter().enumerate() {
        let feats = train_idx
            .iter()
            .map(|&i| features(r, i).map(|f| (labels[i], f)))
            .collect::<Result<Vec<_>, E>>()?;
        let absent: Vec<&StackFeatures> = feats
            .iter()
            .filter(|(l, _)| *l == Label::Absent)
            .map(|(_, f)| f)
            .collect();
        let present: Vec<&StackFeatures> = feats
            .iter()
            .filter(|(l, _)| *l == Label::Present)
            .map(|(_, f)| f)
            .collect();
        let mut model = train(&absent, &present, &config.cho)?;
        model.split_seed = Some(master_seed);
        let scores = split
            .test
            .iter()
            .map(|&i| Ok(model.score(&features(r, i)?)?))
            .collect::<Result<Vec<f64>, E>>()?;
        readers.push(TrainedReader {
            model,
            scores: CaseScores::new(r, scores, test_labels.clone())?,
        });
    }
    Ok(readers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(absent: &[f64], present: &[f64]) -> CaseScores {
        let mut s = absent.to_vec();
        s.extend_from_slice(present);
        let mut l = vec![Label::Absent; absent.len()];
        l.extend(vec![Label::Present; present.len()]);
        CaseScores::new(0, s, l).unwrap()
    }

    #[test]
    fn separated_and_tied_auc() {
        assert_eq!(auc(&scores(&[0.0, 1.0], &[2.0, 3.0])).unwrap(), 1.0);
        assert_eq!(auc(&scores(&[1.0, 1.0], &[1.0, 1.0])).unwrap(), 0.5);
        assert_eq!(auc(&scores(&[2.0, 3.0], &[0.0, 1.0])).unwrap(), 0.0);
        assert!(matches!(
            auc(&scores(&[1.0, 2.0], &[])),
            Err(StatsError::OneClass { .. })
        ));
    }

    #[test]
    fn d_prime_anchors() {
        assert_eq!(d_prime(0.5).unwrap(), 0.0);
        let a = 0.5 * (1.0 + erf::erf(1.0));
        assert!((d_prime(a).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(d_prime(1.0), Err(StatsError::Saturated(_))));
        assert!(matches!(d_prime(0.0), Err(StatsError::Saturated(_))));
        assert!(d_prime(1.2).is_err());
    }

    #[test]
    fn erf_inv_round_trips() {
        for &x in &[-3.3, -1.0, -0.2, 1e-6, 0.3, 0.9, 1.7, 2.5, 3.5] {
            let back = erf_inv(erf::erf(x)).unwrap();
            assert!((back - x).abs() < 1e-12 * x.abs().max(1.0), "{x} -> {back}");
        }
        // deep in the tail only the residual is well conditioned
        for &x in &[4.5, -5.0, 5.5] {
            let y = erf::erf(x);
            assert!((erf::erf(erf_inv(y).unwrap()) - y).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let mut labels = vec![Label::Absent; 20];
        labels.extend(vec![Label::Present; 20]);
        let a = split_cases(&labels, 4, 0.75, 9).unwrap();
        let b = split_cases(&labels, 4, 0.75, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test.len(), 20);
        for t in &a.train {
            assert_eq!(t.len(), 16);
            assert!(t.iter().all(|i| !a.test.contains(i)));
        }
        assert_ne!(a.train[0], a.train[1]);
        assert!(split_cases(&labels[..3], 1, 0.75, 9).is_err());
    }

    #[test]
    fn not_fully_crossed_rejected() {
        let a = scores(&[0.0, 1.0], &[2.0, 3.0]);
        let mut b = a.clone();
        b.labels.swap(0, 3);
        assert!(matches!(
            McmcInput::new(vec![a, b]),
            Err(StatsError::NotFullyCrossed(1))
        ));
    }
}
