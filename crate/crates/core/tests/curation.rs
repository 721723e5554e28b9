use std::collections::BTreeMap;
use std::sync::OnceLock;

use synthgap::gapgen::{GapSpec, OwnedStream, Sample, World, WorldSpec};
use synthgap::linalg::Matrix;
use synthgap::metrics::{roc_auc, total_variation, Scored};
use synthgap::ratio::{
    estimate_initial_m, features_from_posteriors, sample_until, Discriminator, DiscriminatorConfig, RatioEstimator,
    RejectionSampler, SamplerConfig,
};
use synthgap::recognizer::{FramePosteriors, ModelConfig, SequenceModel};
use synthgap::seed;
use synthgap::trainer::{train, MixPolicy, TrainConfig};

fn spec() -> WorldSpec {
    WorldSpec::default_keyword()
}

/// A recognizer trained on real data only, shared by every test here.
fn reference() -> &'static SequenceModel {
    static REF: OnceLock<SequenceModel> = OnceLock::new();
    REF.get_or_init(|| {
        let spec = spec();
        let real = World::from_spec(&spec).unwrap();
        let mut rng = seed::rng(7);
        let model = SequenceModel::new(spec.alphabet.clone(), spec.frame_dim, spec.frames_per_token, &ModelConfig::default(), &mut rng);
        let cfg = TrainConfig {
            epochs: 15,
            mix_policy: MixPolicy::RealOnly,
            seed: 8,
            ..TrainConfig::default()
        };
        train(model, &real.sample(500, 1), &[], &real.sample(200, 2), &cfg).unwrap().model
    })
}

/// Posteriors that put almost all mass on the right token in every frame.
fn peaked(model: &SequenceModel, tokens: &[usize]) -> FramePosteriors {
    let (f, c) = (model.frames_per_token, model.vocab() + 1);
    let t = tokens.len() * f;
    let mut logits = Matrix::filled(t, c, -8.0);
    for (i, &tok) in tokens.iter().enumerate() {
        for k in 0..f {
            logits.set(i * f + k, tok, 8.0);
        }
    }
    FramePosteriors::from_logits(&logits)
}

#[test]
fn features_of_a_perfect_and_a_confused_recognizer() {
    let model = reference();
    // repeated neighbours would merge under greedy decoding
    let s = World::from_spec(&spec())
        .unwrap()
        .sample(50, 3)
        .into_iter()
        .find(|s| s.tokens.windows(2).all(|w| w[0] != w[1]))
        .unwrap();
    let post = peaked(model, &s.tokens);
    let good = features_from_posteriors(model, &post, &s).unwrap();
    assert_eq!(good.wer, 0.0);
    assert_eq!(good.len_yhat, good.len_y);
    assert!(good.ce_loss < 1e-3 && good.ctc_loss < 1e-2, "{good:?}");

    let mut wrong = s.clone();
    wrong.tokens = s.tokens.iter().map(|t| (t + 1) % model.vocab()).collect();
    let bad = features_from_posteriors(model, &post, &wrong).unwrap();
    assert!(bad.ce_loss > good.ce_loss + 5.0, "{bad:?}");
    assert!(bad.ctc_loss > good.ctc_loss + 5.0);
    assert_eq!(bad.wer, 1.0);
}

#[test]
fn identical_worlds_give_a_half_discriminator() {
    let real = World::from_spec(&spec()).unwrap();
    let disc = Discriminator::train(reference().clone(), &real.sample(600, 10), &real.sample(600, 11), &DiscriminatorConfig::default(), 12)
        .unwrap();
    let d = disc.d_values(&real.sample(500, 13)).unwrap();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    assert!((mean - 0.5).abs() < 0.05, "mean D {mean}");
}

#[test]
fn all_blank_posteriors_are_all_deletions() {
    let model = reference();
    let s = World::from_spec(&spec()).unwrap().sample(1, 4).remove(0);
    let mut logits = Matrix::filled(s.num_frames(), model.vocab() + 1, -8.0);
    (0..s.num_frames()).for_each(|t| logits.set(t, model.blank(), 8.0));
    let f = features_from_posteriors(model, &FramePosteriors::from_logits(&logits), &s).unwrap();
    assert_eq!((f.wer, f.len_yhat), (1.0, 0.0));
}

#[test]
fn artifacts_are_separable_and_loss_decreases() {
    let spec = spec();
    let real = World::from_spec(&spec).unwrap();
    let synth = World::from_gap(&GapSpec::identity(spec.clone()).with_artifacts(0.5, 12.0)).unwrap();
    let artifact = synth_artifact_id(&spec);
    let artifacts_only = |n: usize, seed: u64| -> Vec<Sample> {
        synth.sample(3 * n, seed).into_iter().filter(|s| s.style_id == artifact).take(n).collect()
    };
    let disc = Discriminator::train(reference().clone(), &real.sample(300, 20), &artifacts_only(300, 21), &DiscriminatorConfig::default(), 22)
        .unwrap();
    let scored: Vec<Scored> = disc
        .d_values(&real.sample(300, 23))
        .unwrap()
        .into_iter()
        .map(|score| Scored { score, positive: true })
        .chain(disc.d_values(&artifacts_only(300, 24)).unwrap().into_iter().map(|score| Scored { score, positive: false }))
        .collect();
    let auc = roc_auc(&scored).unwrap();
    assert!(auc > 0.95, "AUC {auc}");
    let losses = &disc.classifier.epoch_losses;
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-3), "{losses:?}");
    assert!(losses.last().unwrap() < &losses[0]);
}

fn synth_artifact_id(spec: &WorldSpec) -> u32 {
    GapSpec::identity(spec.clone()).with_artifacts(0.5, 12.0).artifact.unwrap().id
}

fn curate(est: &impl RatioEstimator, synth: &World, n: u64, seed: u64) -> (Vec<Sample>, f64) {
    let cfg = SamplerConfig::default();
    let m0 = estimate_initial_m(est, &synth.sample(cfg.pilot_size, seed + 1), cfg.clamp_eps).unwrap();
    let mut sampler = RejectionSampler::new(m0, n, seed, cfg).unwrap();
    let (out, report) = sample_until(&mut sampler, est, &mut OwnedStream::new(synth.clone(), seed + 2), n).unwrap();
    (out.into_iter().map(|c| c.sample).collect(), report.acceptance_rate)
}

fn style_shares(data: &[Sample], ids: &[u32]) -> Vec<f64> {
    let mut h: BTreeMap<u32, f64> = ids.iter().map(|&i| (i, 0.0)).collect();
    for s in data {
        *h.entry(s.style_id).or_default() += 1.0;
    }
    h.values().map(|c| c / data.len() as f64).collect()
}

#[test]
fn identity_gap_curation_keeps_most_and_preserves_styles() {
    let spec = spec();
    let real = World::from_spec(&spec).unwrap();
    let disc = Discriminator::train(reference().clone(), &real.sample(600, 30), &real.sample(600, 31), &DiscriminatorConfig::default(), 32)
        .unwrap();
    let (kept, rate) = curate(&disc, &real, 2000, 33);
    assert!(rate > 0.5, "acceptance rate {rate}");
    let ids = spec.style_ids();
    let want: Vec<f64> = real.style_weights().into_iter().map(|(_, w)| w).collect();
    let tv = total_variation(&style_shares(&kept, &ids), &want);
    assert!(tv < 0.05, "style TV {tv}");
}

#[test]
fn heavy_artifacts_are_filtered_out() {
    let spec = spec();
    let gap = GapSpec::identity(spec.clone()).with_artifacts(0.5, 12.0);
    let artifact = gap.artifact.as_ref().unwrap().id;
    let real = World::from_spec(&spec).unwrap();
    let synth = World::from_gap(&gap).unwrap();
    let disc = Discriminator::train(reference().clone(), &real.sample(300, 40), &synth.sample(300, 41), &DiscriminatorConfig::default(), 42)
        .unwrap();
    let share = |d: &[Sample]| d.iter().filter(|s| s.style_id == artifact).count() as f64 / d.len() as f64;
    let pool = share(&synth.sample(2000, 43));
    let (kept, _) = curate(&disc, &synth, 500, 44);
    assert!(share(&kept) < pool / 5.0, "artifact share {} vs pool {pool}", share(&kept));
}
