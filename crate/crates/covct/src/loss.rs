//! Ordinal classification loss over severity categories.
//!
//! Scans carry one of five graded classes (0 = negative, 1..=4 increasing
//! severity) or a positive-unknown marker for scans known positive but never
//! graded. The loss blends a focal term with an earth-mover term over a
//! ground distance derived from adjacent class distances:
//!
//! * focal, graded label c:      `-(1 - p_c)^gamma * ln p_c`
//! * focal, positive-unknown:    `-p_0^gamma * ln(1 - p_0)`
//! * EMD, graded label c:        `sum_j p_j * d[j][c]`
//! * EMD, positive-unknown:      `p_0 * d_negpos`
//! * combined:                   `(1 - lambda) * focal + lambda * EMD`
//!
//! `d[a][b]` is the cumulative sum of adjacent distances between classes `a`
//! and `b`; the negative-to-positive distance is a separate scalar used only
//! by the positive-unknown EMD term. Log arguments are clamped below at
//! 1e-12. Everything is generic in the class count N >= 2; the pipeline uses
//! N = 5.

use std::ops::Deref;

use rand::Rng;

use crate::error::{Error, Result};

/// Class count used by the CT pipeline: negative plus four severity grades.
pub const NUM_CLASSES: usize = 5;

/// Floor applied to log arguments.
pub const LOG_FLOOR: f64 = 1e-12;

/// A validated probability vector: finite, non-negative, summing to 1 within
/// 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidProbVector {
                reason: format!("needs >= 2 entries, got {}", p.len()),
            });
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidProbVector {
                reason: format!("entry {bad} is negative or non-finite"),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbVector {
                reason: format!("entries sum to {sum}, not 1"),
            });
        }
        Ok(ProbVector(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The supervision available for one scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CategoryLabel {
    /// A fully graded class index (0 = negative).
    Full(usize),
    /// Known positive, severity never graded.
    PositiveUnknown,
}

/// Ground distances: one entry per adjacent class pair, plus the separate
/// negative-to-positive distance used by positive-unknown labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpec {
    adjacent: Vec<f64>,
    neg_pos: f64,
}

impl DistanceSpec {
    pub fn new(adjacent: Vec<f64>, neg_pos: f64) -> Result<Self> {
        if adjacent.is_empty() {
            return Err(Error::InvalidLossParameter {
                reason: "needs at least one adjacent distance".into(),
            });
        }
        if adjacent.iter().any(|d| !d.is_finite() || *d < 0.0) || !neg_pos.is_finite() || neg_pos < 0.0 {
            return Err(Error::InvalidLossParameter {
                reason: "distances must be finite and non-negative".into(),
            });
        }
        Ok(DistanceSpec { adjacent, neg_pos })
    }

    /// Unit distances for `classes` classes.
    pub fn unit(classes: usize) -> Self {
        assert!(classes >= 2, "need at least two classes");
        DistanceSpec {
            adjacent: vec![1.0; classes - 1],
            neg_pos: 1.0,
        }
    }

    pub fn class_count(&self) -> usize {
        self.adjacent.len() + 1
    }

    pub fn adjacent(&self) -> &[f64] {
        &self.adjacent
    }

    pub fn neg_pos(&self) -> f64 {
        self.neg_pos
    }

    /// Class positions on the severity axis: cumulative sums of the adjacent
    /// distances, starting at 0.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.class_count());
        cum.push(0.0);
        for &d in &self.adjacent {
            cum.push(cum.last().unwrap() + d);
        }
        cum
    }

    /// The full symmetric ground-distance matrix with zero diagonal.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let cum = self.cumulative();
        let n = cum.len();
        (0..n)
            .map(|a| (0..n).map(|b| (cum[a] - cum[b]).abs()).collect())
            .collect()
    }
}

/// Loss hyperparameters. `gamma` is the focal exponent, `lambda` the EMD
/// blend weight in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    gamma: f64,
    lambda: f64,
    distances: DistanceSpec,
}

impl LossConfig {
    pub fn new(gamma: f64, lambda: f64, distances: DistanceSpec) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidLossParameter {
                reason: format!("gamma must be finite and >= 0, got {gamma}"),
            });
        }
        if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLossParameter {
                reason: format!("lambda must be in [0, 1], got {lambda}"),
            });
        }
        Ok(LossConfig {
            gamma,
            lambda,
            distances,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn distances(&self) -> &DistanceSpec {
        &self.distances
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> ProbVector {
    assert!(logits.len() >= 2, "softmax needs >= 2 logits");
    assert!(
        logits.iter().all(|z| z.is_finite()),
        "softmax needs finite logits"
    );
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVector(exps.into_iter().map(|e| e / sum).collect())
}

fn check_label(label: CategoryLabel, classes: usize) {
    if let CategoryLabel::Full(c) = label {
        assert!(c < classes, "class index {c} out of range for {classes} classes");
    }
}

/// Focal loss on an already-normalized probability vector.
pub fn focal_loss(p: &ProbVector, label: CategoryLabel, gamma: f64) -> f64 {
    assert!(gamma.is_finite() && gamma >= 0.0, "gamma must be finite and >= 0");
    check_label(label, p.len());
    match label {
        CategoryLabel::Full(c) => {
            let pc = p[c];
            -(1.0 - pc).powf(gamma) * pc.max(LOG_FLOOR).ln()
        }
        CategoryLabel::PositiveUnknown => {
            let p0 = p[0];
            -p0.powf(gamma) * (1.0 - p0).max(LOG_FLOOR).ln()
        }
    }
}

/// Earth-mover loss on an already-normalized probability vector.
pub fn emd_loss(p: &ProbVector, label: CategoryLabel, distances: &DistanceSpec) -> f64 {
    assert_eq!(
        p.len(),
        distances.class_count(),
        "probability vector and distance spec disagree on class count"
    );
    check_label(label, p.len());
    match label {
        CategoryLabel::Full(c) => {
            let cum = distances.cumulative();
            p.iter()
                .zip(&cum)
                .map(|(&pj, &pos)| pj * (pos - cum[c]).abs())
                .sum()
        }
        CategoryLabel::PositiveUnknown => p[0] * distances.neg_pos(),
    }
}

/// Combined loss on raw logits: `(1 - lambda) * focal + lambda * EMD` over
/// the softmax of `logits`.
pub fn combined_loss(logits: &[f64], label: CategoryLabel, cfg: &LossConfig) -> f64 {
    assert_eq!(
        logits.len(),
        cfg.distances.class_count(),
        "logits and distance spec disagree on class count"
    );
    let p = softmax(logits);
    (1.0 - cfg.lambda) * focal_loss(&p, label, cfg.gamma)
        + cfg.lambda * emd_loss(&p, label, &cfg.distances)
}

/// Analytic gradient of `combined_loss` with respect to the logits.
///
/// Both focal variants depend on a single probability `p_t`; with
/// `g = d(loss)/d(p_t)` the chain rule through the softmax Jacobian
/// `dp_i/dz_k = p_i (delta_ik - p_k)` gives `g * p_t * (delta_tk - p_k)`.
/// The graded EMD term reduces to `p_k * (d[k][c] - loss_emd)`.
pub fn combined_loss_grad(logits: &[f64], label: CategoryLabel, cfg: &LossConfig) -> Vec<f64> {
    assert_eq!(
        logits.len(),
        cfg.distances.class_count(),
        "logits and distance spec disagree on class count"
    );
    check_label(label, logits.len());
    let p = softmax(logits);
    let n = p.len();
    let gamma = cfg.gamma;
    let mut grad = vec![0.0; n];

    // Focal part: (t, g) with g = d(focal)/d(p_t). The gamma == 0 branch
    // avoids 0 * inf when the power term degenerates.
    let (t, g) = match label {
        CategoryLabel::Full(c) => {
            let pc = p[c];
            let power_term = if gamma == 0.0 {
                0.0
            } else {
                gamma * (1.0 - pc).powf(gamma - 1.0) * pc.max(LOG_FLOOR).ln()
            };
            (c, power_term - (1.0 - pc).powf(gamma) / pc)
        }
        CategoryLabel::PositiveUnknown => {
            let p0 = p[0];
            let power_term = if gamma == 0.0 {
                0.0
            } else {
                -gamma * p0.powf(gamma - 1.0) * (1.0 - p0).max(LOG_FLOOR).ln()
            };
            (0, power_term + p0.powf(gamma) / (1.0 - p0))
        }
    };
    let focal_weight = (1.0 - cfg.lambda) * g * p[t];
    for k in 0..n {
        let delta = if k == t { 1.0 } else { 0.0 };
        grad[k] += focal_weight * (delta - p[k]);
    }

    match label {
        CategoryLabel::Full(c) => {
            let cum = cfg.distances.cumulative();
            let loss_emd: f64 = p
                .iter()
                .zip(&cum)
                .map(|(&pj, &pos)| pj * (pos - cum[c]).abs())
                .sum();
            for k in 0..n {
                grad[k] += cfg.lambda * p[k] * ((cum[k] - cum[c]).abs() - loss_emd);
            }
        }
        CategoryLabel::PositiveUnknown => {
            let weight = cfg.lambda * cfg.distances.neg_pos() * p[0];
            for k in 0..n {
                let delta = if k == 0 { 1.0 } else { 0.0 };
                grad[k] += weight * (delta - p[k]);
            }
        }
    }
    grad
}

/// Mean combined loss over a batch.
pub fn mean_combined_loss<Z: AsRef<[f64]>>(batch: &[(Z, CategoryLabel)], cfg: &LossConfig) -> f64 {
    assert!(!batch.is_empty(), "batch must not be empty");
    batch
        .iter()
        .map(|(z, label)| combined_loss(z.as_ref(), *label, cfg))
        .sum::<f64>()
        / batch.len() as f64
}

/// Central finite-difference gradient of an arbitrary scalar function.
pub fn finite_difference_gradient<F: Fn(&[f64]) -> f64>(f: F, z: &[f64], step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(z.len());
    let mut probe = z.to_vec();
    for k in 0..z.len() {
        probe[k] = z[k] + step;
        let hi = f(&probe);
        probe[k] = z[k] - step;
        let lo = f(&probe);
        probe[k] = z[k];
        grad.push((hi - lo) / (2.0 * step));
    }
    grad
}

/// Worst relative error between two gradients, with components below 1 in
/// magnitude compared absolutely: `|a - b| / max(1, |a|, |b|)`.
pub fn max_gradient_error(analytic: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(analytic.len(), reference.len());
    analytic
        .iter()
        .zip(reference)
        .map(|(&a, &b)| (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs()))
        .fold(0.0, f64::max)
}

/// Draws one randomized gradient-check trial: logits in [-4, 4], a uniform
/// label over the graded classes plus positive-unknown, gamma in [0, 3],
/// lambda in [0, 1] and distances in [0.1, 2].
pub fn sample_gradcheck_trial<R: Rng + ?Sized>(
    rng: &mut R,
    classes: usize,
) -> (Vec<f64>, CategoryLabel, LossConfig) {
    assert!(classes >= 2);
    let logits: Vec<f64> = (0..classes).map(|_| rng.random_range(-4.0..4.0)).collect();
    let pick = rng.random_range(0..=classes);
    let label = if pick == classes {
        CategoryLabel::PositiveUnknown
    } else {
        CategoryLabel::Full(pick)
    };
    let gamma = rng.random_range(0.0..3.0);
    let lambda = rng.random_range(0.0..1.0);
    let adjacent: Vec<f64> = (0..classes - 1)
        .map(|_| rng.random_range(0.1..2.0))
        .collect();
    let neg_pos = rng.random_range(0.1..2.0);
    let cfg = LossConfig::new(gamma, lambda, DistanceSpec::new(adjacent, neg_pos).unwrap())
        .expect("sampled parameters are in range");
    (logits, label, cfg)
}

/// Runs one randomized analytic-vs-finite-difference comparison and returns
/// the worst relative error. The reference side differentiates the forward
/// loss only.
pub fn gradient_check<R: Rng + ?Sized>(rng: &mut R, classes: usize, step: f64) -> f64 {
    let (logits, label, cfg) = sample_gradcheck_trial(rng, classes);
    let analytic = combined_loss_grad(&logits, label, &cfg);
    let reference =
        finite_difference_gradient(|z| combined_loss(z, label, &cfg), &logits, step);
    max_gradient_error(&analytic, &reference)
}
