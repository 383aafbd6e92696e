use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ranksr_core::synthetic::dead_leaves;
use ranksr_core::{save_image, ColorSpace, Image};
use ranksr_metrics::{Polarity, Provenance, ScoreReport};
use ranksr_nn::check::{central_difference, relative_error, spread};
use ranksr_nn::{he_init, Module, Sequential, Tensor};
use ranksr_rankdata::{
    build_sr_rankset, BuildOptions, LabelStrategy, LevelScores, PatchSpec, RankDatasetManifest,
};
use ranksr_ranker::loss::{
    rank_batch_loss, rank_batch_step, regression_batch_loss, regression_batch_step,
};
use ranksr_ranker::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn swapping_the_pair_and_flipping_gamma_preserves_the_loss(
        s1 in -10.0f64..10.0,
        s2 in -10.0f64..10.0,
        up in any::<bool>(),
        eps in 0.01f64..2.0,
    ) {
        let g: i8 = if up { 1 } else { -1 };
        let l = margin_rank_loss(s1, s2, g, eps);
        prop_assert_eq!(l, margin_rank_loss(s2, s1, -g, eps));
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, (s1 - s2) * g as f64 <= -eps);
    }
}

fn toy_ranker() -> Sequential<f64> {
    let mut net = Sequential::new();
    net.conv(3, 4, 3, 1, 1)
        .lrelu(0.2)
        .conv(4, 6, 4, 2, 1)
        .lrelu(0.2)
        .gap()
        .linear(6, 1);
    he_init(&mut net, 0.2, 1.0, &mut ChaCha8Rng::seed_from_u64(21));
    net
}

fn params(net: &Sequential<f64>) -> Vec<f64> {
    let mut v = Vec::new();
    net.visit("", &mut |_, p| v.extend(&p.value));
    v
}

fn set_params(net: &mut Sequential<f64>, v: &[f64]) {
    let mut at = 0;
    net.visit_mut("", &mut |_, p| {
        let n = p.len();
        p.value.copy_from_slice(&v[at..at + n]);
        at += n;
    });
}

fn grads(net: &Sequential<f64>) -> Vec<f64> {
    let mut v = Vec::new();
    net.visit("", &mut |_, p| v.extend(&p.grad));
    v
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Tensor<f64> {
    Tensor::from_vec(
        n,
        3,
        8,
        8,
        (0..n * 192).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
}

#[test]
fn margin_loss_parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (a, b) = (random_batch(&mut rng, 6), random_batch(&mut rng, 6));
    let gammas = [1i8, -1, 1, 1, -1, -1];
    let mut net = toy_ranker();
    let s = net.infer(Tensor::stack(&[&a, &b])).data;
    // scale the margin so that half the pairs are active, none at the kink
    let mut d: Vec<f64> = (0..6)
        .map(|i| (s[i] - s[6 + i]) * gammas[i] as f64)
        .collect();
    d.sort_by(f64::total_cmp);
    let eps = -0.5 * (d[2] + d[3]);
    let active = (0..6)
        .filter(|&i| (s[i] - s[6 + i]) * gammas[i] as f64 + eps > 0.0)
        .count();
    assert!((1..6).contains(&active), "{active} active pairs");
    for i in 0..6 {
        assert!(
            ((s[i] - s[6 + i]) * gammas[i] as f64 + eps).abs() > 1e-3,
            "pair {i} at the kink"
        );
    }

    net.zero_grad();
    rank_batch_step(&mut net, &a, &b, &gammas, eps, true);
    let analytic = grads(&net);
    let mut theta = params(&net);
    let idx = spread(theta.len(), 80);
    let mut probe = net.clone();
    let fd = central_difference(&mut theta, &idx, 1e-6, |v| {
        set_params(&mut probe, v);
        rank_batch_loss(&mut probe, &a, &b, &gammas, eps, true)
    });
    let picked: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
    let err = relative_error(&picked, &fd);
    assert!(err <= 1e-4, "relative error {err}");
    assert!(picked.iter().any(|g| g.abs() > 1e-6));
}

#[test]
fn regression_loss_parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_batch(&mut rng, 5);
    let targets = [0.3, -1.0, 2.0, 0.0, 1.5];
    let mut net = toy_ranker();
    net.zero_grad();
    regression_batch_step(&mut net, &x, &targets, true);
    let analytic = grads(&net);
    let mut theta = params(&net);
    let idx = spread(theta.len(), 80);
    let mut probe = net.clone();
    let fd = central_difference(&mut theta, &idx, 1e-6, |v| {
        set_params(&mut probe, v);
        regression_batch_loss(&mut probe, &x, &targets, true)
    });
    let picked: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
    assert!(relative_error(&picked, &fd) <= 1e-4);
}

fn write_level(dir: &Path, images: impl Iterator<Item = (String, Image)>) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    for (id, img) in images {
        save_image(&img, dir.join(format!("{id}.png"))).unwrap();
    }
    dir.to_path_buf()
}

fn report(id: &str, entries: Vec<(String, f64)>) -> ScoreReport {
    ScoreReport::new(id, Polarity::LowerBetter, Provenance::Ingested, entries).unwrap()
}

/// Two levels of constant images; "dark" ranks better than "bright".
fn constant_rankset(root: &Path) -> RankDatasetManifest {
    let ids: Vec<String> = (0..8).map(|i| format!("r{i}")).collect();
    let level = |name: &str, base: f32| {
        let imgs = ids.iter().enumerate().map(move |(i, id)| {
            (
                id.clone(),
                Image::constant(16, 16, ColorSpace::Rgb, base + 0.02 * i as f32).unwrap(),
            )
        });
        (name.to_string(), write_level(&root.join(name), imgs))
    };
    let levels = vec![level("dark", 0.15), level("bright", 0.65)];
    let scores = LevelScores::Reports(vec![
        report("toy", ids.iter().map(|i| (i.clone(), 1.0)).collect()),
        report("toy", ids.iter().map(|i| (i.clone(), 2.0)).collect()),
    ]);
    let opts = BuildOptions {
        dataset_id: "constant".into(),
        patch: PatchSpec {
            size: 16,
            stride: 16,
        },
        val_fraction: 0.25,
        seed: 1,
    };
    build_sr_rankset(&levels, scores, LabelStrategy::MetricRank, &opts).unwrap()
}

fn small_cfg(iters: u64, seed: u64) -> RankerTrainConfig {
    RankerTrainConfig {
        total_iters: iters,
        batch: 8,
        eval_every: 50,
        log_every: 10,
        seed,
        lr: 1e-3,
        ..Default::default()
    }
}

#[test]
fn separable_constant_classes_reach_zero_loss_within_1k_iterations() {
    let tmp = tempfile::tempdir().unwrap();
    let m = constant_rankset(tmp.path());
    let out = train_ranker(
        &m,
        &small_cfg(1000, 2),
        RankerConfig::new(Arch::Vgg8, 2),
        None,
    )
    .unwrap();
    let first_zero = out.log.iter().find(|r| r.loss == 0.0).map(|r| r.iter);
    assert!(
        first_zero.is_some_and(|i| i <= 1000),
        "losses {:?}",
        out.log.iter().map(|r| r.loss).collect::<Vec<_>>()
    );
    let val = m.patches(ranksr_rankdata::Split::Val);
    let labels: Vec<f64> = val.iter().map(|p| p.label as f64).collect();
    let perfect: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| l * 100.0 + i as f64)
        .collect();
    assert_eq!(
        out.best_srocc,
        ranksr_metrics::srocc(&labels, &perfect).unwrap()
    );
    let sep = separation_from_scores(vec![
        (
            "dark".into(),
            vec![out
                .best
                .score(&Image::constant(16, 16, ColorSpace::Rgb, 0.2).unwrap())
                .unwrap()],
        ),
        (
            "bright".into(),
            vec![out
                .best
                .score(&Image::constant(16, 16, ColorSpace::Rgb, 0.7).unwrap())
                .unwrap()],
        ),
    ])
    .unwrap();
    assert_eq!(sep.order(), vec!["dark", "bright"]);
}

#[test]
fn identical_seeds_give_identical_loss_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let m = constant_rankset(tmp.path());
    let run = |seed| {
        train_ranker(
            &m,
            &small_cfg(120, seed),
            RankerConfig::new(Arch::Vgg8, 2),
            None,
        )
        .unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.log, b.log);
    assert_eq!(a.best.digest(), b.best.digest());
    assert_ne!(a.log, c.log);
    let dir = tempfile::tempdir().unwrap();
    write_log(&dir.path().join("a.jsonl"), &a.log).unwrap();
    write_log(&dir.path().join("b.jsonl"), &b.log).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a.jsonl")).unwrap(),
        std::fs::read(dir.path().join("b.jsonl")).unwrap()
    );
}

#[test]
fn random_init_scores_are_uncorrelated_with_content_independent_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let ids: Vec<String> = (0..64).map(|i| format!("r{i:02}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut levels = Vec::new();
    let mut reports = Vec::new();
    for l in 0..3 {
        let name = format!("level{l}");
        let imgs = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), dead_leaves(16, 16, 1000 * l + i as u64)));
        levels.push((name.clone(), write_level(&tmp.path().join(&name), imgs)));
        reports.push(report(
            "random",
            ids.iter()
                .map(|i| (i.clone(), rng.random_range(0.0..1.0)))
                .collect(),
        ));
    }
    let opts = BuildOptions {
        dataset_id: "null".into(),
        patch: PatchSpec {
            size: 16,
            stride: 16,
        },
        val_fraction: 0.5,
        seed: 3,
    };
    let m = build_sr_rankset(
        &levels,
        LevelScores::Reports(reports),
        LabelStrategy::MetricRank,
        &opts,
    )
    .unwrap();
    let rhos: Vec<f64> = (0..12)
        .map(|seed| {
            eval_srocc(
                &RankerModel::new(RankerConfig::new(Arch::Vgg8, 4), seed),
                &m,
            )
            .unwrap()
        })
        .collect();
    let within = rhos.iter().filter(|r| r.abs() <= 0.2).count();
    assert!(within >= 10, "srocc over seeds {rhos:?}");
}
