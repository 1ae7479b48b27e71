//! Scoring of recovered attributes: AUC against the hidden ground truth,
//! per-node expected accuracy, and correlation of accuracy with node
//! centrality.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::NodeMetrics;
use crate::privacy::RRMechanism;

/// Area under the ROC curve of `scores` against binary `labels`: the
/// probability that a uniformly random positive outranks a uniformly
/// random negative, with ties counting one half.
///
/// Computed through the rank-sum identity with midranks for ties, which
/// equals the pairwise definition exactly.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    for &s in scores {
        if s.is_nan() {
            return Err(Error::NonFinite("AUC score input".into()));
        }
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Midrank assignment over tie groups, ranks starting at 1.
    let mut rank_sum_positive = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_positive += midrank;
            }
        }
        i = j;
    }

    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_positive - p * (p + 1.0) / 2.0) / (p * n))
}

/// Per-node probability of a correct guess when the attribute is drawn
/// with probability `x_hat_v`: x_hat on true nodes, 1 - x_hat elsewhere.
pub fn expected_accuracy(x_hat: &[f64], x: &[bool]) -> Vec<f64> {
    x_hat
        .iter()
        .zip(x)
        .map(|(&p, &truth)| if truth { p } else { 1.0 - p })
        .collect()
}

/// Pearson correlation with a two-sided t-test p-value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson correlation of two equal-length samples; requires at least 3
/// points and nonzero variance on both sides.
pub fn correlate(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "correlating {} against {} values",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "correlation needs at least 3 points, got {n}"
        )));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let r = (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0);

    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::InvalidParameter(format!("t-distribution: {e}")))?;
        2.0 * dist.cdf(-t.abs())
    };
    Ok(Correlation { r, p_value, n })
}

/// Summary of one attack run against the ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub auc: f64,
    pub upper_bound: f64,
    pub beats_bound: bool,
    pub per_node_expected_accuracy: Vec<f64>,
    pub correlations: BTreeMap<String, Correlation>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("report serialization: {e}")))
    }
}

/// Score one run: AUC of the scores, the DP ceiling for the mechanism,
/// per-node expected accuracy, and its correlation with node centrality.
pub fn evaluate(
    x_hat: &[f64],
    x: &[bool],
    mechanism: &RRMechanism,
    node_metrics: &[NodeMetrics],
) -> Result<EvaluationReport> {
    if node_metrics.len() != x_hat.len() {
        return Err(Error::InvalidParameter(format!(
            "node metrics length {} does not match score length {}",
            node_metrics.len(),
            x_hat.len()
        )));
    }
    let auc_value = auc(x_hat, x)?;
    let upper_bound = crate::privacy::auc_upper_bound(mechanism.epsilon(), 0.0);
    let acc = expected_accuracy(x_hat, x);
    let mut correlations = BTreeMap::new();
    let attributes: [(&str, fn(&NodeMetrics) -> f64); 3] = [
        ("weighted_in_degree", |m| m.weighted_in_degree),
        ("weighted_out_degree", |m| m.weighted_out_degree),
        ("pagerank", |m| m.pagerank),
    ];
    for (name, project) in attributes {
        let attribute: Vec<f64> = node_metrics.iter().map(project).collect();
        // A constant attribute carries no ranking signal; normalized graphs
        // give every non-source a weighted in-degree of exactly 1, so that
        // column is skipped rather than failing the whole report.
        match correlate(&acc, &attribute) {
            Ok(c) => {
                correlations.insert(name.to_string(), c);
            }
            Err(Error::ZeroVariance) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(EvaluationReport {
        auc: auc_value,
        upper_bound,
        beats_bound: auc_value > upper_bound,
        per_node_expected_accuracy: acc,
        correlations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    /// Pairwise AUC definition, kept independent of the rank-sum path.
    fn auc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn inverted_ranking_scores_zero() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.0);
    }

    #[test]
    fn constant_scores_give_half() {
        let scores = [0.4; 6];
        let labels = [true, false, true, false, false, true];
        assert!((auc(&scores, &labels).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_labels_rejected() {
        assert!(matches!(
            auc(&[0.1, 0.2], &[true, true]),
            Err(Error::DegenerateLabels)
        ));
        assert!(matches!(
            auc(&[0.1, 0.2], &[false, false]),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn mixed_ties_match_pair_enumeration() {
        let scores = [0.5, 0.5, 0.5, 0.2, 0.8, 0.2];
        let labels = [true, false, true, false, true, true];
        let fast = auc(&scores, &labels).unwrap();
        let slow = auc_by_pairs(&scores, &labels);
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn expected_accuracy_reference_values() {
        let acc = expected_accuracy(&[0.9, 0.3], &[true, false]);
        assert!((acc[0] - 0.9).abs() < 1e-15);
        assert!((acc[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn perfect_positive_correlation() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        let c = correlate(&a, &b).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert!(c.p_value < 1e-9);
    }

    #[test]
    fn independent_noise_is_insignificant() {
        let mut rng = rng_from_seed(5);
        let a: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let c = correlate(&a, &b).unwrap();
        assert!(c.r.abs() < 0.2);
        assert!(c.p_value > 0.01);
    }

    #[test]
    fn anticorrelation_detected() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| -(i as f64) + 0.1).collect();
        let c = correlate(&a, &b).unwrap();
        assert!(c.r < -0.99);
        assert!(c.p_value < 1e-9);
    }

    #[test]
    fn known_p_value_checkpoint() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        let c = correlate(&a, &b).unwrap();
        // Pearson r of this permutation pattern is exactly 0.8.
        assert!((c.r - 0.8).abs() < 1e-12);
        // With 2 degrees of freedom the t CDF has the closed form
        // 1/2 + t / (2 sqrt(2 + t^2)), and t/sqrt(2 + t^2) telescopes
        // back to r, so the two-sided p-value is exactly 1 - r = 0.2.
        assert!((c.p_value - 0.2).abs() < 1e-9, "p = {}", c.p_value);
    }

    #[test]
    fn zero_variance_rejected() {
        assert!(matches!(
            correlate(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn evaluate_flags_bound_beating() {
        let scores = [0.9, 0.8, 0.1, 0.2];
        let labels = [true, true, false, false];
        let metrics: Vec<NodeMetrics> = (0..4)
            .map(|i| NodeMetrics {
                weighted_in_degree: i as f64,
                weighted_out_degree: 3.0 - i as f64,
                pagerank: 0.1 + 0.05 * i as f64,
            })
            .collect();
        // Beta = 0.5 means epsilon ~ 1.099 and a 0.75 ceiling; a perfect
        // ranking beats it.
        let mechanism = RRMechanism::new(0.5).unwrap();
        let report = evaluate(&scores, &labels, &mechanism, &metrics).unwrap();
        assert_eq!(report.auc, 1.0);
        assert!((report.upper_bound - 0.75).abs() < 1e-12);
        assert!(report.beats_bound);
        assert_eq!(report.per_node_expected_accuracy.len(), 4);
        assert!((report.per_node_expected_accuracy[2] - 0.9).abs() < 1e-12);
        assert_eq!(report.correlations.len(), 3);
        // Scores fall as weighted in-degree rises, so accuracy on the two
        // true nodes (high scores) and two false nodes (low scores) is
        // anti-correlated with in-degree here.
        assert!(report.correlations["weighted_in_degree"].r < 0.0);
        assert!(report.to_json().unwrap().contains("\"pagerank\""));
    }

    #[test]
    fn evaluate_skips_constant_attributes() {
        let scores = [0.9, 0.8, 0.1, 0.2];
        let labels = [true, true, false, false];
        // Normalized graphs pin every weighted in-degree to 1; such columns
        // must drop out instead of failing the report.
        let metrics: Vec<NodeMetrics> = (0..4)
            .map(|i| NodeMetrics {
                weighted_in_degree: 1.0,
                weighted_out_degree: i as f64,
                pagerank: 0.25,
            })
            .collect();
        let mechanism = RRMechanism::new(0.5).unwrap();
        let report = evaluate(&scores, &labels, &mechanism, &metrics).unwrap();
        assert!(!report.correlations.contains_key("weighted_in_degree"));
        assert!(!report.correlations.contains_key("pagerank"));
        assert!(report.correlations.contains_key("weighted_out_degree"));
    }

    proptest! {
        #[test]
        fn prop_auc_matches_pair_definition(seed in 0u64..500, n in 2usize..40) {
            let mut rng = rng_from_seed(seed);
            // Coarse grid scores force plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 5.0).floor() / 5.0).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos > 0 && pos < n);
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_by_pairs(&scores, &labels);
            prop_assert!((fast - slow).abs() < 1e-12);
        }

        #[test]
        fn prop_auc_complement_symmetry(seed in 0u64..200, n in 2usize..30) {
            // Negating scores flips the AUC around one half.
            let mut rng = rng_from_seed(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
            let pos = labels.iter().filter(|&&l| l).count();
            prop_assume!(pos > 0 && pos < n);
            let forward = auc(&scores, &labels).unwrap();
            let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
            let backward = auc(&negated, &labels).unwrap();
            prop_assert!((forward + backward - 1.0).abs() < 1e-12);
        }

        #[test]
        fn prop_correlation_symmetric_and_bounded(seed in 0u64..200) {
            let mut rng = rng_from_seed(seed);
            let n = 20;
            let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let ab = correlate(&a, &b).unwrap();
            let ba = correlate(&b, &a).unwrap();
            prop_assert!((ab.r - ba.r).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab.r));
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }
}
