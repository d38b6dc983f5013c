//! Network-blind threshold rule: remove a node iff its maliciousness
//! probability exceeds a threshold fitted on labelled training data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub theta_star: f64,
    pub alpha: f64,
    /// `α·FPR + (1 - α)·FNR` on the training data at `theta_star`.
    pub training_objective: f64,
}

/// `0`, `1` and the midpoints between consecutive distinct probabilities.
pub fn candidate_thresholds(probabilities: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = probabilities.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = vec![0.0];
    out.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(1.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `α·FPR + (1 - α)·FNR` when nodes with `p > theta` are flagged.
pub fn objective(samples: &[(f64, u8)], alpha: f64, theta: f64) -> f64 {
    let (mut fp, mut fn_, mut neg, mut pos) = (0usize, 0usize, 0usize, 0usize);
    for &(p, label) in samples {
        let flagged = p > theta;
        if label == 1 {
            pos += 1;
            fn_ += usize::from(!flagged);
        } else {
            neg += 1;
            fp += usize::from(flagged);
        }
    }
    alpha * fp as f64 / neg as f64 + (1.0 - alpha) * fn_ as f64 / pos as f64
}

/// Sweeps [`candidate_thresholds`] and keeps the minimizer, preferring the
/// largest threshold on ties.
pub fn fit_threshold(samples: &[(f64, u8)], alpha: f64) -> Result<ThresholdRule> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} must be in [0, 1]")));
    }
    for &(p, label) in samples {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        if label > 1 {
            return Err(Error::Domain(format!("label {label} is not 0 or 1")));
        }
    }
    let positives = samples.iter().filter(|s| s.1 == 1).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::invalid("training data needs both labels"));
    }
    let probs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut best = ThresholdRule {
        theta_star: 1.0,
        alpha,
        training_objective: f64::INFINITY,
    };
    for theta in candidate_thresholds(&probs).into_iter().rev() {
        let obj = objective(samples, alpha, theta);
        if obj < best.training_objective {
            best.theta_star = theta;
            best.training_objective = obj;
        }
    }
    Ok(best)
}

/// `sᵢ = 1` iff `μᵢ > θ*`.
pub fn apply(rule: &ThresholdRule, mu: &Vector) -> Vec<u8> {
    mu.iter().map(|&p| u8::from(p > rule.theta_star)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rule(theta: f64) -> ThresholdRule {
        ThresholdRule {
            theta_star: theta,
            alpha: 0.5,
            training_objective: 0.0,
        }
    }

    #[test]
    fn separable_data() {
        let r = fit_threshold(&[(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)], 0.5).unwrap();
        assert_eq!(r.training_objective, 0.0);
        assert_eq!(r.theta_star, 0.5);
    }

    #[test]
    fn inverted_labels() {
        let r = fit_threshold(&[(0.9, 0), (0.1, 1)], 0.5).unwrap();
        assert_eq!(r.training_objective, 0.5);
        assert_eq!(r.theta_star, 1.0);
    }

    #[test]
    fn zero_alpha_ignores_false_positives() {
        let data = [(0.7, 1), (0.4, 1), (0.6, 0), (0.05, 0), (0.3, 0)];
        let r = fit_threshold(&data, 0.0).unwrap();
        assert_eq!(r.training_objective, 0.0);
        assert!(r.theta_star <= 0.4);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(fit_threshold(&[(0.2, 0), (0.3, 0)], 0.5).is_err());
        assert!(fit_threshold(&[(0.2, 1)], 0.5).is_err());
        assert!(fit_threshold(&[(0.2, 1), (0.1, 0)], 1.5).is_err());
    }

    #[test]
    fn apply_examples() {
        let mu = |x: &[f64]| Vector::from_row_slice(x);
        assert_eq!(apply(&rule(0.5), &mu(&[0.5, 0.51])), vec![0, 1]);
        assert_eq!(apply(&rule(1.0), &mu(&[1.0, 0.3])), vec![0, 0]);
        assert_eq!(apply(&rule(0.0), &mu(&[0.01, 0.3])), vec![1, 1]);
    }

    #[test]
    fn fit_matches_every_distinct_cut() {
        use crate::numerics::RngStream;
        use rand::Rng;
        let mut rng = RngStream::new(5);
        let samples: Vec<(f64, u8)> = (0..1000)
            .map(|_| {
                let label = u8::from(rng.random_bool(0.3));
                let p: f64 = if label == 1 { rng.random_range(0.3..1.0) } else { rng.random_range(0.0..0.7) };
                ((p * 100.0).round() / 100.0, label)
            })
            .collect();
        for alpha in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let r = fit_threshold(&samples, alpha).unwrap();
            // Flagging exactly the nodes with p >= c, for every observed c, plus flagging none.
            let mut oracle = objective(&samples, alpha, 1.0);
            for &(c, _) in &samples {
                let fp = samples.iter().filter(|s| s.1 == 0 && s.0 >= c).count() as f64;
                let fnr = samples.iter().filter(|s| s.1 == 1 && s.0 < c).count() as f64;
                let neg = samples.iter().filter(|s| s.1 == 0).count() as f64;
                let pos = neg.mul_add(-1.0, samples.len() as f64);
                oracle = oracle.min(alpha * fp / neg + (1.0 - alpha) * fnr / pos);
            }
            assert!((r.training_objective - oracle).abs() < 1e-12, "alpha {alpha}");
        }
    }

    proptest! {
        #[test]
        fn raising_threshold_never_removes_more(
            mu in proptest::collection::vec(0.0f64..=1.0, 1..40),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let mu = Vector::from_vec(mu);
            let removed = |t: f64| apply(&rule(t), &mu).iter().map(|&x| x as usize).sum::<usize>();
            prop_assert!(removed(hi) <= removed(lo));
        }
    }
}
