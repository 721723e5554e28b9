//! Discrepancy features, the real-vs-synthetic discriminator, the density
//! ratio it implies and the adaptive rejection sampler built on top.
//!
//! A discriminator at its optimum outputs `D = p_d / (p_d + p_g)`, so
//! `r = D / (1 - D) = p_d / p_g`. Accepting a synthetic candidate with
//! probability `r / M` turns draws from `p_g` into draws from `p_d`
//! wherever `p_g > 0`.

mod classifier;
mod discriminator;
mod features;
mod sampler;

pub use classifier::{BinaryClassifier, ClassifierConfig, Normalizer};
pub use discriminator::{
    ConstantRatio, Discriminator, DiscriminatorConfig, FeatureMode, OracleRatio, RatioEstimator,
    DISCRIMINATOR_FORMAT,
};
pub use features::{compute_features, compute_features_many, features_from_posteriors, FeatureVector, CTC_MAX};
pub use sampler::{
    density_ratio, estimate_initial_m, sample_until, CuratedSample, Decision, DecisionRecord, RejectionSampler,
    RunReport, SamplerConfig, DEFAULT_CLAMP_EPS, DEFAULT_PILOT,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::{Error, Result};
    use crate::gapgen::{GapSpec, Sample, World, WorldSpec};

    /// Returns a preset D per sample id.
    struct ById(Vec<f64>);

    impl RatioEstimator for ById {
        fn d_values(&self, batch: &[Sample]) -> Result<Vec<f64>> {
            Ok(batch.iter().map(|s| self.0[s.id as usize % self.0.len()]).collect())
        }
    }

    fn d_for_ratio(r: f64) -> f64 {
        r / (1.0 + r)
    }

    fn stream(n: usize) -> Vec<Sample> {
        World::from_spec(&WorldSpec::single_style(3, 2)).unwrap().sample(n, 1)
    }

    #[test]
    fn density_ratio_examples() {
        assert_eq!(density_ratio(0.5, 1e-6), 1.0);
        assert!((density_ratio(0.8, 1e-6) - 4.0).abs() < 1e-12);
        let r = density_ratio(1.0, 1e-6);
        assert!(r.is_finite() && (r - (1.0 - 1e-6) / 1e-6).abs() < 1e-3);
        assert!(density_ratio(0.0, 1e-6) > 0.0);
    }

    #[test]
    fn initial_m_is_pilot_max() {
        let pilot = stream(400);
        assert_eq!(estimate_initial_m(&ConstantRatio(0.5), &pilot, 1e-6).unwrap(), 1.0);
        let est = ById(vec![d_for_ratio(0.2), d_for_ratio(3.0), d_for_ratio(1.1)]);
        let m = estimate_initial_m(&est, &pilot[..3], 1e-6).unwrap();
        assert!((m - 3.0).abs() < 1e-12);
        let est = ById((0..400).map(|i| d_for_ratio(((i * 37) % 101) as f64 / 10.0)).collect());
        assert!(estimate_initial_m(&est, &pilot, 1e-6).unwrap() >= estimate_initial_m(&est, &pilot[..200], 1e-6).unwrap());
        assert!(estimate_initial_m(&est, &[], 1e-6).is_err());
    }

    #[test]
    fn update_then_accept() {
        let mut s = RejectionSampler::new(3.0, 10, 0, SamplerConfig::default()).unwrap();
        let rec = s.decide(d_for_ratio(3.0)).unwrap();
        assert_eq!((rec.probability, rec.decision), (1.0, Decision::Accept));
        let rec = s.decide(d_for_ratio(9.0)).unwrap();
        assert!((s.m() - 9.0).abs() < 1e-12);
        assert_eq!((rec.probability, rec.decision), (1.0, Decision::Accept));
        let rec = s.decide(0.0).unwrap();
        assert!(rec.probability < 1e-6);
        assert_eq!(rec.decision, Decision::Reject);
        assert!(s.m_trace().windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn constant_discriminator_accepts_everything() {
        let mut src = stream(1000).into_iter();
        let mut s = RejectionSampler::new(1.0, 100, 0, SamplerConfig::default()).unwrap();
        let (out, report) = sample_until(&mut s, &ConstantRatio(0.5), &mut src, 100).unwrap();
        assert_eq!(out.len(), 100);
        assert_eq!(report.acceptance_rate, 1.0);
        assert!(out.iter().enumerate().all(|(i, c)| c.sample.id == i as u64));

        let mut s = RejectionSampler::new(1.0, 0, 0, SamplerConfig::default()).unwrap();
        let (out, report) = sample_until(&mut s, &ConstantRatio(0.5), &mut src, 0).unwrap();
        assert!(out.is_empty());
        assert_eq!(report.n_seen, 0);
    }

    #[test]
    fn floor_aborts_with_diagnostic() {
        let mut d = vec![1e-6; 50_000];
        d[0] = 1.0 - 1e-6;
        let mut src = stream(50_000).into_iter();
        let mut s = RejectionSampler::new(1.0, 100, 0, SamplerConfig::default()).unwrap();
        match sample_until(&mut s, &ById(d), &mut src, 100) {
            Err(Error::AcceptanceFloor { n_seen, n_accepted, .. }) => {
                assert_eq!(n_seen, 20_000);
                assert_eq!(n_accepted, 1);
            }
            other => panic!("expected floor abort, got {other:?}"),
        }
    }

    #[test]
    fn dry_source_is_an_error() {
        let mut src = stream(10).into_iter();
        let mut s = RejectionSampler::new(1.0, 20, 0, SamplerConfig::default()).unwrap();
        assert!(sample_until(&mut s, &ConstantRatio(0.5), &mut src, 20).is_err());
    }

    #[test]
    fn oracle_acceptance_rate_matches_mean_ratio_over_m() {
        // E_g[r] = 1 when no style is dropped, so the rate should be ~1/M
        let base = WorldSpec::default_sequence();
        let gap = GapSpec::identity(base.clone()).with_reweight(vec![2.0, 1.0, 0.5]);
        let est = OracleRatio {
            real: World::from_spec(&base).unwrap(),
            synth: World::from_gap(&gap).unwrap(),
        };
        let synth = World::from_gap(&gap).unwrap();
        let pilot = synth.sample(2000, 77);
        let m0 = estimate_initial_m(&est, &pilot, 1e-6).unwrap();
        let mut s = RejectionSampler::new(m0, 3000, 5, SamplerConfig::default()).unwrap();
        let mut src = synth.stream(6).map(|x| x);
        let (_, rep) = sample_until(&mut s, &est, &mut src, 3000).unwrap();
        let expected = 1.0 / rep.final_m;
        assert!((rep.acceptance_rate - expected).abs() / expected < 0.2, "{rep:?}");
    }

    #[test]
    fn oracle_d_handles_disjoint_support() {
        let base = WorldSpec::single_style(3, 2);
        let gap = GapSpec::identity(base.clone()).with_artifacts(0.3, 12.0);
        let est = OracleRatio {
            real: World::from_spec(&base).unwrap(),
            synth: World::from_gap(&gap).unwrap(),
        };
        let samples = World::from_gap(&gap).unwrap().sample(300, 3);
        let d = est.d_values(&samples).unwrap();
        assert!(d.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(d.iter().any(|&v| v < 1e-6));
    }

    #[test]
    fn normalizer_masks_and_handles_constant_columns() {
        let rows = vec![vec![1.0, 5.0, 2.0], vec![3.0, 5.0, 4.0]];
        let n = Normalizer::fit(&rows, vec![true, true, false]);
        assert_eq!(n.apply(&[1.0, 5.0, 9.0]), vec![-1.0, 0.0, 0.0]);
        assert!(!n.is_degenerate());
        assert!(Normalizer::fit(&rows, vec![false, true, false]).is_degenerate());
    }

    #[test]
    fn degenerate_features_give_constant_half() {
        let rows = vec![vec![1.0, 1.0]; 10];
        let c = BinaryClassifier::fit(&rows, &rows, vec![true, true], &ClassifierConfig::default(), 0).unwrap();
        assert!(c.net.is_none());
        assert_eq!(c.probs(&rows).unwrap(), vec![0.5; 10]);
    }

    #[test]
    fn classifier_learns_a_shifted_gaussian_posterior() {
        use rand_distr::{Distribution, Normal};
        let mut rng = crate::seed::rng(8);
        let n = Normal::new(0.0, 1.0).unwrap();
        let pos: Vec<Vec<f64>> = (0..2000).map(|_| vec![n.sample(&mut rng) + 1.0]).collect();
        let neg: Vec<Vec<f64>> = (0..2000).map(|_| vec![n.sample(&mut rng) - 1.0]).collect();
        let cfg = ClassifierConfig {
            epochs: 30,
            ..Default::default()
        };
        let c = BinaryClassifier::fit(&pos, &neg, vec![true], &cfg, 1).unwrap();
        // posterior is sigmoid(2x) for unit-variance means at +-1
        let xs: Vec<Vec<f64>> = (-10..=10).map(|i| vec![i as f64 / 5.0]).collect();
        let p = c.probs(&xs).unwrap();
        for (x, p) in xs.iter().zip(p) {
            let truth = crate::linalg::sigmoid(2.0 * x[0]);
            assert!((p - truth).abs() < 0.05, "x={} p={p} truth={truth}", x[0]);
        }
        let l = &c.epoch_losses;
        assert!(l.last().unwrap() < l.first().unwrap());
    }
}
