//! Randomized response over a binary attribute and the quantities an
//! adversary can still extract from the perturbed reports: per-node
//! posterior scores, a population-rate estimate with a concentration
//! radius, and the differential-privacy AUC ceiling any attack must obey.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Binary randomized response with retention parameter `beta` in [0, 1):
/// report the true value with probability `beta`, otherwise report a fair
/// coin. Satisfies epsilon-DP with `epsilon = ln((1 + beta) / (1 - beta))`
/// and `delta = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RRMechanism {
    beta: f64,
}

impl RRMechanism {
    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "retention beta {beta} outside [0, 1)"
            )));
        }
        Ok(Self { beta })
    }

    pub fn beta(self) -> f64 {
        self.beta
    }

    /// Pr[z = 1 | x = 1] = Pr[z = 0 | x = 0].
    pub fn p_keep(self) -> f64 {
        (1.0 + self.beta) / 2.0
    }

    /// Pr[z = 1 | x = 0] = Pr[z = 0 | x = 1].
    pub fn p_flip(self) -> f64 {
        (1.0 - self.beta) / 2.0
    }

    /// Report-vs-truth contrast `p(z=1|x=1) - p(z=1|x=0)`, the scale
    /// factor of the population estimator.
    pub fn contrast(self) -> f64 {
        self.beta
    }

    pub fn epsilon(self) -> f64 {
        ((1.0 + self.beta) / (1.0 - self.beta)).ln()
    }

    /// Perturb one value: keep it with probability beta, otherwise draw a
    /// fair coin.
    pub fn perturb_one<R: Rng>(self, x: bool, rng: &mut R) -> bool {
        if rng.random::<f64>() < self.beta {
            x
        } else {
            rng.random::<f64>() < 0.5
        }
    }

    /// Perturb a full attribute vector, one node at a time in order.
    pub fn perturb<R: Rng>(self, x: &[bool], rng: &mut R) -> PerturbedReports {
        let z = x.iter().map(|&xv| self.perturb_one(xv, rng)).collect();
        PerturbedReports { z, mechanism: self }
    }
}

/// The privacy budget spent by a retention parameter.
pub fn epsilon_of_beta(beta: f64) -> Result<f64> {
    Ok(RRMechanism::new(beta)?.epsilon())
}

/// Upper bound on the AUC of any attribute-inference adversary against an
/// (epsilon, delta)-DP mechanism: `1 - (1 - delta) / (e^epsilon + 1)`.
pub fn auc_upper_bound(epsilon: f64, delta: f64) -> f64 {
    1.0 - (1.0 - delta) / (epsilon.exp() + 1.0)
}

/// Published reports along with the mechanism that produced them.
#[derive(Debug, Clone)]
pub struct PerturbedReports {
    pub z: Vec<bool>,
    pub mechanism: RRMechanism,
}

impl PerturbedReports {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Fraction of reports equal to 1.
    pub fn report_rate(&self) -> f64 {
        self.z.iter().filter(|&&z| z).count() as f64 / self.z.len() as f64
    }

    /// Write `node_id,z` rows (with header).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("node_id,z\n");
        for (v, &zv) in self.z.iter().enumerate() {
            out.push_str(&format!("{},{}\n", v, zv as u8));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Read reports written by [`PerturbedReports::write_csv`]; the caller
    /// supplies the mechanism, which the file does not record.
    pub fn read_csv(path: &Path, mechanism: RRMechanism) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut z = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if lineno == 1 {
                continue;
            }
            let mut fields = line.split(',');
            let id: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(path, lineno, "bad node id"))?;
            let bit: u8 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .filter(|b| *b <= 1)
                .ok_or_else(|| Error::parse(path, lineno, "report must be 0 or 1"))?;
            if id != z.len() {
                return Err(Error::parse(path, lineno, "node ids must be dense and ordered"));
            }
            z.push(bit == 1);
        }
        if z.is_empty() {
            return Err(Error::parse(path, 1, "no report rows"));
        }
        Ok(PerturbedReports { z, mechanism })
    }
}

/// Per-node posterior probability of x = 1 given each report, under a
/// shared prior `Pr[x = 1] = prior`.
pub fn bayesian_scores(reports: &PerturbedReports, prior: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&prior) {
        return Err(Error::InvalidParameter(format!(
            "prior {prior} outside [0, 1]"
        )));
    }
    let m = reports.mechanism;
    let scores = reports
        .z
        .iter()
        .map(|&z| {
            let like_1 = if z { m.p_keep() } else { m.p_flip() };
            let like_0 = if z { m.p_flip() } else { m.p_keep() };
            let num = like_1 * prior;
            let den = num + like_0 * (1.0 - prior);
            if den == 0.0 {
                // Degenerate prior with zero likelihood mass: fall back to
                // the prior itself.
                prior
            } else {
                num / den
            }
        })
        .collect();
    Ok(scores)
}

/// Population-rate estimate recovered from perturbed reports.
#[derive(Debug, Clone, Copy)]
pub struct PopulationEstimate {
    /// Observed fraction of 1-reports.
    pub p_tilde_z: f64,
    /// Unbiased estimate of the true rate, clamped to [0, 1].
    pub p_tilde_x: f64,
    /// The estimate before clamping.
    pub p_tilde_x_raw: f64,
    /// Concentration radius: with probability at least 1 - 2/n the true
    /// rate lies within this distance of the raw estimate.
    pub radius: f64,
}

/// Invert the report rate through the mechanism and attach a Chernoff
/// concentration radius `sqrt(ln n / (2 n c^2))` with `c` the mechanism
/// contrast.
pub fn estimate_population(reports: &PerturbedReports) -> Result<PopulationEstimate> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("no reports to estimate from".into()));
    }
    let c = reports.mechanism.contrast();
    if c == 0.0 {
        return Err(Error::InvalidParameter(
            "mechanism with zero contrast carries no population signal".into(),
        ));
    }
    let n = reports.len() as f64;
    let p_tilde_z = reports.report_rate();
    let raw = (p_tilde_z - reports.mechanism.p_flip()) / c;
    Ok(PopulationEstimate {
        p_tilde_z,
        p_tilde_x: raw.clamp(0.0, 1.0),
        p_tilde_x_raw: raw,
        radius: (n.ln() / (2.0 * n * c * c)).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn epsilon_reference_values() {
        // ln((1 + beta) / (1 - beta)) at the five standard operating
        // points, to three decimals.
        let cases = [
            (0.1, 0.201),
            (0.3, 0.619),
            (0.5, 1.099),
            (0.7, 1.735),
            (0.9, 2.944),
        ];
        for (beta, eps) in cases {
            let got = epsilon_of_beta(beta).unwrap();
            assert!(
                ((got * 1000.0).round() / 1000.0 - eps).abs() < 1e-12,
                "beta {beta}: {got}"
            );
        }
    }

    #[test]
    fn beta_one_is_rejected() {
        assert!(RRMechanism::new(1.0).is_err());
        assert!(RRMechanism::new(-0.1).is_err());
        assert!(RRMechanism::new(0.0).is_ok());
    }

    #[test]
    fn bound_matches_posterior_mean_accuracy() {
        // For randomized response (delta = 0) the DP ceiling equals
        // (1 + beta) / 2, the probability the report agrees with the
        // truth.
        for beta in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let m = RRMechanism::new(beta).unwrap();
            let bound = auc_upper_bound(m.epsilon(), 0.0);
            assert!((bound - (1.0 + beta) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_with_delta_shrinks_the_gap() {
        let eps = 1.0;
        assert!(auc_upper_bound(eps, 0.2) > auc_upper_bound(eps, 0.0));
        assert!((auc_upper_bound(eps, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perturb_frequencies_match_design() {
        let m = RRMechanism::new(0.5).unwrap();
        let mut rng = rng_from_seed(6);
        let trials = 200_000;
        let mut kept = 0;
        for _ in 0..trials {
            if m.perturb_one(true, &mut rng) {
                kept += 1;
            }
        }
        let freq = kept as f64 / trials as f64;
        assert!((freq - 0.75).abs() < 0.005, "Pr[z=1|x=1] = {freq}");

        let mut flipped = 0;
        for _ in 0..trials {
            if m.perturb_one(false, &mut rng) {
                flipped += 1;
            }
        }
        let freq = flipped as f64 / trials as f64;
        assert!((freq - 0.25).abs() < 0.005, "Pr[z=1|x=0] = {freq}");
    }

    #[test]
    fn bayesian_scores_order_by_report() {
        let m = RRMechanism::new(0.5).unwrap();
        let reports = PerturbedReports {
            z: vec![true, false],
            mechanism: m,
        };
        let s = bayesian_scores(&reports, 0.5).unwrap();
        // Posterior for z=1 under a flat prior is p_keep.
        assert!((s[0] - 0.75).abs() < 1e-12);
        assert!((s[1] - 0.25).abs() < 1e-12);
        assert!(s[0] > s[1]);
    }

    #[test]
    fn bayesian_scores_degenerate_priors() {
        let m = RRMechanism::new(0.5).unwrap();
        let reports = PerturbedReports {
            z: vec![true, false],
            mechanism: m,
        };
        for s in bayesian_scores(&reports, 0.0).unwrap() {
            assert_eq!(s, 0.0);
        }
        for s in bayesian_scores(&reports, 1.0).unwrap() {
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn population_estimate_recovers_rate() {
        let m = RRMechanism::new(0.5).unwrap();
        let mut rng = rng_from_seed(13);
        let n = 20_000;
        let x: Vec<bool> = (0..n).map(|i| i % 5 < 2).collect(); // rate 0.4
        let reports = m.perturb(&x, &mut rng);
        let est = estimate_population(&reports).unwrap();
        assert!((est.p_tilde_x - 0.4).abs() < 0.02, "estimate {}", est.p_tilde_x);
        assert!(est.radius < 0.05);
    }

    #[test]
    fn population_estimate_radius_formula() {
        let m = RRMechanism::new(0.5).unwrap();
        let reports = PerturbedReports {
            z: vec![true; 500],
            mechanism: m,
        };
        let est = estimate_population(&reports).unwrap();
        let expected = (500f64.ln() / (2.0 * 500.0 * 0.25)).sqrt();
        assert!((est.radius - expected).abs() < 1e-15);
        // All-ones reports push the raw estimate above 1; the clamp holds.
        assert!(est.p_tilde_x_raw > 1.0);
        assert_eq!(est.p_tilde_x, 1.0);
    }

    #[test]
    fn report_csv_round_trip() {
        let mechanism = RRMechanism::new(0.5).unwrap();
        let reports = PerturbedReports {
            z: vec![true, false, false, true, true],
            mechanism,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reports.csv");
        reports.write_csv(&path).unwrap();
        let back = PerturbedReports::read_csv(&path, mechanism).unwrap();
        assert_eq!(back.z, reports.z);
        assert_eq!(back.mechanism.beta(), 0.5);
    }

    proptest! {
        #[test]
        fn prop_epsilon_monotone_in_beta(a in 0.0f64..0.98, step in 0.001f64..0.02) {
            let b = a + step;
            prop_assume!(b < 1.0);
            prop_assert!(epsilon_of_beta(a).unwrap() < epsilon_of_beta(b).unwrap());
        }

        #[test]
        fn prop_bound_stays_in_half_open_interval(beta in 0.0f64..0.999) {
            let eps = epsilon_of_beta(beta).unwrap();
            let bound = auc_upper_bound(eps, 0.0);
            prop_assert!(bound >= 0.5 && bound < 1.0);
        }

        #[test]
        fn prop_posterior_between_prior_extremes(beta in 0.01f64..0.99, prior in 0.01f64..0.99) {
            let m = RRMechanism::new(beta).unwrap();
            let reports = PerturbedReports { z: vec![true, false], mechanism: m };
            let s = bayesian_scores(&reports, prior).unwrap();
            for v in s {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn prop_estimator_unbiased_inversion(beta in 0.05f64..0.95, rate_num in 0usize..=10) {
            // Feed the exact expected report rate through the inverter;
            // it must return the original rate.
            let m = RRMechanism::new(beta).unwrap();
            let rate = rate_num as f64 / 10.0;
            let p_z = rate * m.p_keep() + (1.0 - rate) * m.p_flip();
            let raw = (p_z - m.p_flip()) / m.contrast();
            prop_assert!((raw - rate).abs() < 1e-9);
        }
    }
}
