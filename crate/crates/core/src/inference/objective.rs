use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::temporal::{day_difference, TimePoint};

/// Weights of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights<S: Scalar = f64> {
    pub lambda_gran: S,
    pub lambda_cons: S,
    /// Normalising horizon for day distances.
    pub horizon_days: S,
}

impl<S: Scalar> Default for ObjectiveWeights<S> {
    fn default() -> Self {
        Self {
            lambda_gran: S::half(),
            lambda_cons: S::half(),
            horizon_days: S::of(365.0),
        }
    }
}

/// `1 - s_self`.
pub fn consistency_penalty<S: Scalar>(s_self: S) -> S {
    S::one() - s_self.clamp_unit()
}

/// Absolute difference of granularity depths.
pub fn granularity_penalty<S: Scalar>(predicted: &TimePoint, truth: &TimePoint) -> S {
    let a = predicted.depth() as i64;
    let b = truth.depth() as i64;
    S::of((a - b).abs() as f64)
}

/// Day distance between resolved points, normalised by the horizon and capped at one.
pub fn time_distance<S: Scalar>(predicted: &TimePoint, truth: &TimePoint, horizon_days: S) -> S {
    let d = S::of(day_difference(predicted, truth).abs()) / horizon_days;
    d.min(S::one())
}

/// `D_time + lambda_gran * L_gran + lambda_cons * L_cons`.
pub fn temporal_objective<S: Scalar>(d_time: S, l_gran: S, l_cons: S, lambda_gran: S, lambda_cons: S) -> S {
    d_time + lambda_gran * l_gran + lambda_cons * l_cons
}

/// The objective of a predicted expiry against a reference one.
pub fn objective_against<S: Scalar>(
    predicted: &TimePoint,
    reference: &TimePoint,
    s_self: S,
    weights: &ObjectiveWeights<S>,
) -> S {
    temporal_objective(
        time_distance(predicted, reference, weights.horizon_days),
        granularity_penalty(predicted, reference),
        consistency_penalty(s_self),
        weights.lambda_gran,
        weights.lambda_cons,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: &str) -> TimePoint {
        s.parse().unwrap()
    }

    #[test]
    fn penalties() {
        assert_eq!(consistency_penalty(1.0f64), 0.0);
        assert_eq!(consistency_penalty(0.0f64), 1.0);
        assert_eq!(granularity_penalty::<f64>(&tp("2025-06"), &tp("2025-06-15")), 1.0);
        assert_eq!(granularity_penalty::<f64>(&tp("2025"), &tp("2025-06-15")), 2.0);
    }

    #[test]
    fn distance_is_capped() {
        assert_eq!(time_distance(&tp("2020-01-01"), &tp("2025-01-01"), 365.0f64), 1.0);
        let d: f64 = time_distance(&tp("2025-01-01"), &tp("2025-01-31"), 365.0);
        assert!((d - 30.0 / 365.0).abs() < 1e-12);
    }

    #[test]
    fn objective_examples() {
        assert_eq!(temporal_objective(0.0f64, 0.0, 0.0, 0.5, 0.5), 0.0);
        assert!((temporal_objective(0.2f64, 1.0, 0.3, 0.5, 0.5) - 0.85).abs() < 1e-12);
        assert_eq!(temporal_objective(1.0f64, 0.0, 0.0, 0.5, 0.5), 1.0);
        let d: f64 = time_distance(&tp("2025-01-01"), &tp("2025-03-15"), 365.0);
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn objective_combines_terms() {
        let w = ObjectiveWeights::<f64>::default();
        let got = objective_against(&tp("2025-06"), &tp("2025-06-15"), 0.5, &w);
        let expected = 0.5 / 365.0 + 0.5 * 1.0 + 0.5 * 0.5;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}
