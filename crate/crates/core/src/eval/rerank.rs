use serde::{Deserialize, Serialize};

use crate::signal::FeatureVector;

/// Linear reranker weights added on top of the relevance grade. Their sum
/// stays below one grade step, so relevance always dominates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RerankWeights {
    pub fresh: f64,
    pub cross_rel: f64,
    pub cross_auth: f64,
}

impl Default for RerankWeights {
    fn default() -> Self {
        Self {
            fresh: 0.5,
            cross_rel: 0.2,
            cross_auth: 0.2,
        }
    }
}

impl RerankWeights {
    pub fn validate(&self) -> Result<(), String> {
        let parts = [self.fresh, self.cross_rel, self.cross_auth];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err("rerank weights must be finite and non-negative".into());
        }
        if self.fresh <= 0.0 {
            return Err("fresh weight must be positive".into());
        }
        if parts.iter().sum::<f64>() >= 1.0 {
            return Err("rerank weights must sum below one grade step".into());
        }
        Ok(())
    }

    pub fn score(&self, grade: u8, features: &FeatureVector) -> f64 {
        f64::from(grade)
            + self.fresh * f64::from(features.f_exp)
            + self.cross_rel * features.cross_rel
            + self.cross_auth * features.cross_auth
    }
}

/// Indices of `items` ordered by descending score; ties keep input order.
pub fn rerank(items: &[(u8, FeatureVector)], weights: &RerankWeights) -> Vec<usize> {
    let scores: Vec<f64> = items.iter().map(|(g, f)| weights.score(*g, f)).collect();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(f_exp: u8, s_rel: f64, auth: f64) -> FeatureVector {
        let f = f64::from(f_exp);
        FeatureVector {
            f_exp,
            s_rel_doc: s_rel,
            authority: auth,
            cross_rel: f * s_rel,
            cross_auth: f * auth,
            age_days: 0.0,
        }
    }

    #[test]
    fn contracts() {
        let w = RerankWeights::default();
        assert!(w.validate().is_ok());
        assert_eq!(rerank(&[(2, fv(0, 1.0, 1.0)), (2, fv(1, 0.0, 0.0))], &w), vec![1, 0]);
        let zero = [(1, fv(0, 0.9, 0.9)), (3, fv(0, 0.1, 0.1)), (1, fv(0, 0.5, 0.5))];
        assert_eq!(rerank(&zero, &w), vec![1, 0, 2]);
        let mixed = [(1, fv(1, 1.0, 1.0)), (4, fv(0, 0.0, 0.0))];
        assert_eq!(rerank(&mixed, &w), vec![1, 0]);
    }
}
