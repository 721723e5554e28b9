//! Real and synthetic worlds with a controllable gap and exact densities.
//!
//! A [`WorldSpec`] is a Gaussian mixture over speaking styles: each style
//! places every token's frames around its own mean. A [`GapSpec`] distorts
//! that world the way a synthesizer would: artifact styles outside the real
//! support, re-weighted styles, missing styles, corrupted labels and shifted
//! means. [`World`] compiles either into something that can be sampled and
//! whose density can be evaluated exactly.

mod dataset;
mod presets;
mod spec;
mod world;

pub use dataset::{read_jsonl, write_jsonl, write_jsonl_string, Dataset, Origin, Sample};
pub use spec::{
    ArtifactStyle, GapSpec, StyleComponent, TokenAlphabet, TokenPrior, WorldSpec, BLANK_SYMBOL,
    SCHEMA,
};
pub use world::{OwnedStream, SampleStream, World};

use crate::error::{Error, Result};

/// Anything with an exact joint log density.
pub trait JointDensity {
    fn compile(&self) -> Result<World>;
}

impl JointDensity for WorldSpec {
    fn compile(&self) -> Result<World> {
        World::from_spec(self)
    }
}

impl JointDensity for GapSpec {
    fn compile(&self) -> Result<World> {
        World::from_gap(self)
    }
}

/// `n` i.i.d. real samples; deterministic in `seed`.
pub fn sample_real(spec: &WorldSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Contract("sample_real needs n >= 1".into()));
    }
    Ok(Dataset::new(World::from_spec(spec)?.sample(n, seed)))
}

/// `n` i.i.d. samples from the distorted generator; deterministic in `seed`.
pub fn sample_synth(gap: &GapSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Contract("sample_synth needs n >= 1".into()));
    }
    Ok(Dataset::new(World::from_gap(gap)?.sample(n, seed)))
}

pub fn log_density(spec: &impl JointDensity, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    spec.compile()?.log_density(x, y)
}

/// Exact `p_d(x, y) / p_g(x, y)`.
pub fn oracle_ratio(base: &WorldSpec, gap: &GapSpec, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    ratio_of(&World::from_spec(base)?, &World::from_gap(gap)?, x, y)
}

/// [`oracle_ratio`] on precompiled worlds.
pub fn ratio_of(real: &World, synth: &World, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    let lg = synth.log_density(x, y)?;
    if lg == f64::NEG_INFINITY {
        return Err(Error::UndefinedRatio);
    }
    Ok((real.log_density(x, y)? - lg).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_style_world() -> WorldSpec {
        let mut w = WorldSpec::default_sequence();
        w.styles.truncate(2);
        w.styles[0].weight = 0.7;
        w.styles[1].weight = 0.3;
        w
    }

    #[test]
    fn single_style_samples_share_style() {
        let spec = WorldSpec::single_style(4, 3);
        let d = sample_real(&spec, 3, 7).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|s| s.style_id == 0 && s.origin == Origin::Real));
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = WorldSpec::default_sequence();
        let a = sample_real(&spec, 50, 7).unwrap();
        let b = sample_real(&spec, 50, 7).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let c = sample_real(&spec, 50, 8).unwrap();
        assert_ne!(a.to_jsonl(), c.to_jsonl());
    }

    #[test]
    fn samples_respect_shape_invariants() {
        let spec = WorldSpec::default_sequence();
        for s in sample_real(&spec, 500, 1).unwrap().iter() {
            assert_eq!(s.features.len(), 3 * s.tokens.len());
            assert!((1..=4).contains(&s.tokens.len()));
            assert!(s.tokens.iter().all(|&t| t < 4));
            assert!(s.features.iter().all(|f| f.len() == 2));
        }
    }

    #[test]
    fn per_token_frame_means_match_spec() {
        let spec = WorldSpec::single_style(4, 3);
        let n = 10_000;
        let data = sample_real(&spec, n, 11).unwrap();
        let std = spec.noise_sigma;
        for tok in 0..4 {
            let frames: Vec<&Vec<f64>> = data
                .iter()
                .filter(|s| s.tokens[0] == tok)
                .flat_map(|s| s.features.iter())
                .collect();
            let m = frames.len() as f64;
            for k in 0..2 {
                let mean = frames.iter().map(|f| f[k]).sum::<f64>() / m;
                let target = spec.styles[0].frame_mean[tok][k];
                assert!(
                    (mean - target).abs() < 3.0 * std / m.sqrt(),
                    "token {tok} dim {k}: {mean} vs {target}"
                );
            }
        }
    }

    #[test]
    fn identity_gap_matches_base_exactly() {
        let base = WorldSpec::default_sequence();
        let gap = GapSpec::identity(base.clone());
        let real = World::from_spec(&base).unwrap();
        let synth = World::from_gap(&gap).unwrap();
        for s in real.sample(200, 3) {
            let a = real.log_density(&s.features, &s.tokens).unwrap();
            let b = synth.log_density(&s.features, &s.tokens).unwrap();
            assert_eq!(a, b);
            assert_eq!(ratio_of(&real, &synth, &s.features, &s.tokens).unwrap(), 1.0);
        }
        // identical sampling too, apart from the origin tag
        let a = sample_real(&base, 20, 5).unwrap();
        let b = sample_synth(&gap, 20, 5).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!((&x.features, &x.tokens, x.style_id), (&y.features, &y.tokens, y.style_id));
            assert_eq!(y.origin, Origin::Synthetic);
        }
    }

    #[test]
    fn dropped_style_never_emitted() {
        let gap = GapSpec::identity(WorldSpec::default_sequence()).with_dropped(vec![2]);
        let d = sample_synth(&gap, 2000, 9).unwrap();
        assert!(d.iter().all(|s| s.style_id != 2));
        assert!(World::from_gap(&gap).unwrap().style_weights().iter().all(|(id, _)| *id != 2));
    }

    #[test]
    fn artifact_fraction_concentrates() {
        let gap = GapSpec::identity(WorldSpec::default_sequence()).with_artifacts(0.2, 12.0);
        let art = gap.artifact.as_ref().unwrap().id;
        let d = sample_synth(&gap, 10_000, 4).unwrap();
        let frac = d.iter().filter(|s| s.style_id == art).count() as f64 / 1e4;
        assert!((frac - 0.2).abs() < 0.02, "artifact fraction {frac}");
    }

    #[test]
    fn single_style_density_closed_form() {
        let spec = WorldSpec::single_style(4, 2);
        let world = World::from_spec(&spec).unwrap();
        let x = vec![vec![0.3, -0.2], vec![1.9, 0.4]];
        let y = vec![0];
        let var = 0.25f64;
        let mu = &spec.styles[0].frame_mean[0];
        let mut expected = (0.25f64).ln();
        for f in &x {
            let sq: f64 = f.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum();
            expected += -(2.0 * std::f64::consts::PI * var).ln() - sq / (2.0 * var);
        }
        let got = world.log_density(&x, &y).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn two_style_density_matches_direct_sum() {
        let spec = two_style_world();
        let world = World::from_spec(&spec).unwrap();
        let x: Vec<Vec<f64>> = vec![
            vec![1.5, 0.2],
            vec![2.2, -0.3],
            vec![1.8, 0.1],
            vec![0.4, 2.1],
            vec![-0.1, 1.7],
            vec![0.3, 2.4],
        ];
        let y = vec![0, 1];
        // direct probability-space sum over styles
        let mut p = 0.0;
        for s in &spec.styles {
            let std = spec.noise_sigma * s.frame_cov_scale.sqrt();
            let mut lik = s.weight;
            for (t, f) in x.iter().enumerate() {
                let mu = &s.frame_mean[y[t / 3]];
                for k in 0..2 {
                    let z = (f[k] - mu[k]) / std;
                    lik *= (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
                }
            }
            p += lik;
        }
        p *= 0.25 * 0.25 * 0.25; // length 2 of 4, two tokens of 4
        let got = world.log_density(&x, &y).unwrap();
        assert!((got - p.ln()).abs() < 1e-10, "{got} vs {}", p.ln());
    }

    #[test]
    fn density_rejects_shape_mismatch_and_handles_support() {
        let world = World::from_spec(&WorldSpec::default_sequence()).unwrap();
        assert!(matches!(
            world.log_density(&[vec![0.0, 0.0]], &[0]),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            world.log_density(&vec![vec![0.0]; 3], &[0]),
            Err(Error::Contract(_))
        ));
        let x = vec![vec![0.0, 0.0]; 15];
        assert_eq!(world.log_density(&x, &[0; 5]).unwrap(), f64::NEG_INFINITY);
        let x = vec![vec![0.0, 0.0]; 3];
        assert_eq!(world.log_density(&x, &[7]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn artifact_points_have_tiny_ratio() {
        let base = WorldSpec::default_sequence();
        let gap = GapSpec::identity(base.clone()).with_artifacts(0.2, 12.0);
        let art = gap.artifact.as_ref().unwrap().id;
        let real = World::from_spec(&base).unwrap();
        let synth = World::from_gap(&gap).unwrap();
        for s in synth.sample(2000, 2).iter().filter(|s| s.style_id == art) {
            let r = ratio_of(&real, &synth, &s.features, &s.tokens).unwrap();
            assert!(r < 1e-3, "artifact ratio {r}");
        }
    }

    #[test]
    fn under_sampled_style_has_ratio_above_one() {
        let base = WorldSpec::default_sequence();
        let gap = GapSpec::identity(base.clone()).with_reweight(vec![1.0, 1.0, 0.2]);
        let real = World::from_spec(&base).unwrap();
        let synth = World::from_gap(&gap).unwrap();
        let pts: Vec<Sample> = real.sample(400, 6).into_iter().filter(|s| s.style_id == 2).collect();
        let above = pts
            .iter()
            .filter(|s| ratio_of(&real, &synth, &s.features, &s.tokens).unwrap() > 1.0)
            .count();
        assert!(above as f64 > 0.9 * pts.len() as f64);
    }

    #[test]
    fn ratio_undefined_where_generator_has_no_mass() {
        let base = WorldSpec::default_sequence();
        let mut gap = GapSpec::identity(base.clone());
        gap.base.token_prior.token_probs = vec![0.5, 0.5, 0.0, 0.0];
        let x = vec![vec![0.0, 0.0]; 3];
        assert!(matches!(
            oracle_ratio(&base, &gap, &x, &[3]),
            Err(Error::UndefinedRatio)
        ));
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        let mut w = WorldSpec::default_sequence();
        w.styles[0].weight = 0.9;
        assert!(matches!(sample_real(&w, 1, 0), Err(Error::Config(_))));
        let g = GapSpec::identity(WorldSpec::default_sequence()).with_dropped(vec![9]);
        assert!(matches!(sample_synth(&g, 1, 0), Err(Error::Config(_))));
        let g = GapSpec::identity(WorldSpec::default_sequence()).with_corruption(0.7);
        assert!(g.validate().is_err());
        let mut g = GapSpec::identity(WorldSpec::default_sequence());
        g.artifact_weight = 0.3;
        assert!(g.validate().is_err());
    }

    #[test]
    fn corruption_changes_labels_only() {
        // segment means identify the uncorrupted token (means are ~10 sigma/sqrt(F) apart)
        let base = WorldSpec::single_style(4, 3);
        let gap = GapSpec::identity(base.clone()).with_corruption(0.3);
        let world = World::from_gap(&gap).unwrap();
        let noisy = sample_synth(&gap, 5000, 1).unwrap();
        let mut changed = 0usize;
        for s in noisy.iter() {
            let m = s.mean_frame();
            let nearest = (0..4)
                .min_by(|&a, &b| {
                    let da: f64 = (0..2).map(|k| (m[k] - world.emission(0, a).unwrap().0[k]).powi(2)).sum();
                    let db: f64 = (0..2).map(|k| (m[k] - world.emission(0, b).unwrap().0[k]).powi(2)).sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            if nearest != s.tokens[0] {
                changed += 1;
            }
        }
        let rate = changed as f64 / 5000.0;
        assert!((rate - 0.3).abs() < 0.03, "corruption rate {rate}");
    }

    #[test]
    fn jsonl_round_trip() {
        let d = sample_real(&WorldSpec::default_sequence(), 20, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        d.write_jsonl(&p).unwrap();
        assert_eq!(Dataset::read_jsonl(&p).unwrap(), d);
        let first = d.to_jsonl().lines().next().unwrap().to_string();
        assert!(first.starts_with("{\"id\":0,\"features\":[["));
        assert!(first.contains("\"origin\":\"real\""));
    }

    #[test]
    fn spec_json_carries_schema() {
        let gap = GapSpec::sequence_experiment(WorldSpec::default_sequence());
        let json = serde_json::to_string(&gap).unwrap();
        assert!(json.contains("\"schema\":\"gapgen/1\""));
        let back: GapSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, gap);
    }
}
