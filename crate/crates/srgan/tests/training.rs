use ranksr_core::synthetic::DeadLeaves;
use ranksr_core::{bicubic_resize, psnr, Image, PsnrMode};
use ranksr_nn::{digest, Module};
use ranksr_ranker::{Arch, RankerConfig, RankerModel};
use ranksr_srgan::{
    adversarial_losses, bicubic_upscale, infer_sr, load_generator, perceptual_loss,
    pretrain_srresnet, rank_content_loss, read_train_log, save_generator, train_ranksrgan,
    Discriminator, DiscriminatorConfig, ExtractorConfig, FeatureExtractor, GanTrainConfig,
    GanTrainer, Generator, GeneratorConfig, LossWeights, Monotone, PairedSet, PretrainConfig,
    TileConfig,
};

fn leaves(n: usize, side: usize, seed: u64) -> Vec<Image> {
    let dl = DeadLeaves {
        max_radius: 16.0,
        ..DeadLeaves::default()
    };
    (0..n)
        .map(|i| dl.render(side, side, seed + i as u64))
        .collect()
}

fn paired(n: usize, side: usize, seed: u64) -> PairedSet {
    PairedSet::from_hr(
        (0..n).map(|i| format!("img{i}")).collect(),
        leaves(n, side, seed),
    )
    .unwrap()
}

fn small_cfg(total: u64) -> GanTrainConfig {
    GanTrainConfig {
        hr_patch: 32,
        lr_patch: 8,
        batch: 2,
        total_iters: total,
        milestones: vec![6, 12],
        val_every: 0,
        log_every: 3,
        generator: GeneratorConfig::new(2, 8),
        discriminator: DiscriminatorConfig::new(4),
        extractor: ExtractorConfig {
            width_divisor: 16,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn ranker() -> RankerModel {
    RankerModel::new(RankerConfig::new(Arch::Vgg8, 2), 1)
}

fn trainable(m: &dyn Module<f32>) -> Vec<f32> {
    let mut v = Vec::new();
    m.visit("", &mut |_, p| {
        if !p.buffer {
            v.extend(&p.value)
        }
    });
    v
}

#[test]
fn tiled_inference_matches_untiled() {
    let g = Generator::<f32>::new(GeneratorConfig::new(4, 8), 3);
    let hr = leaves(1, 296, 40).remove(0);
    let lr = bicubic_resize(&hr, 0.25).unwrap();
    let whole = infer_sr(&g, &lr, None).unwrap();
    for tc in [
        TileConfig {
            tile: 24,
            overlap: 8,
        },
        TileConfig {
            tile: 40,
            overlap: 16,
        },
        TileConfig::default(),
    ] {
        let tiled = infer_sr(&g, &lr, Some(tc)).unwrap();
        assert_eq!(tiled.shape(), (296, 296, 3));
        let diff = whole
            .data()
            .iter()
            .zip(tiled.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(diff <= 1e-5, "{tc:?}: {diff}");
    }
    assert_eq!(
        infer_sr(
            &g,
            &lr,
            Some(TileConfig {
                tile: 24,
                overlap: 8
            })
        )
        .unwrap(),
        infer_sr(
            &g,
            &lr,
            Some(TileConfig {
                tile: 24,
                overlap: 8
            })
        )
        .unwrap()
    );
    assert!(infer_sr(
        &g,
        &lr,
        Some(TileConfig {
            tile: 24,
            overlap: 6
        })
    )
    .is_err());
}

#[test]
fn training_is_reproducible_and_resumes_exactly() {
    let data = paired(4, 48, 0);
    let rankers = [ranker()];
    let cfg = small_cfg(14);
    let w = LossWeights::default();
    let a = train_ranksrgan(&cfg, &rankers, &w, &data, None, None, None).unwrap();
    let b = train_ranksrgan(&cfg, &rankers, &w, &data, None, None, None).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(digest(&a.generator), digest(&b.generator));
    assert!(a.log.iter().all(|r| r.l_p > 0.0
        && r.l_g > 0.0
        && r.l_r > 0.0
        && r.l_r < 1.0
        && r.l_m == 0.0));
    assert_eq!(a.log.last().unwrap().lr, 1e-4 * 0.25);

    let dir = tempfile::tempdir().unwrap();
    let mut first = GanTrainer::new(cfg.clone(), &rankers, w.clone(), None).unwrap();
    first.run(&data, None, 7, None).unwrap();
    first.save_state(&dir.path().join("s.safetensors")).unwrap();
    let mut resumed = GanTrainer::resume(&dir.path().join("s.safetensors"), &rankers).unwrap();
    assert_eq!(resumed.iteration, 7);
    resumed.run(&data, None, 14, Some(dir.path())).unwrap();
    assert_eq!(resumed.log, a.log);
    assert_eq!(digest(&resumed.generator), digest(&a.generator));
    assert_eq!(digest(&resumed.discriminator), digest(&a.discriminator));
    assert!(GanTrainer::resume(
        &dir.path().join("s.safetensors"),
        &[RankerModel::new(RankerConfig::new(Arch::Vgg8, 2), 2)]
    )
    .is_err());

    resumed.save_outputs(dir.path()).unwrap();
    assert_eq!(
        read_train_log(&dir.path().join("train_log.jsonl")).unwrap(),
        a.log
    );
    let (g, iter) = load_generator(&dir.path().join("generator.safetensors")).unwrap();
    assert_eq!((digest(&g), iter), (digest(&a.generator), 14));
}

#[test]
fn frozen_networks_stay_fixed_and_zero_lr_is_inert() {
    let data = paired(3, 48, 5);
    let rankers = [
        ranker(),
        RankerModel::new(RankerConfig::new(Arch::Vgg12, 2), 7),
    ];
    let before: Vec<String> = rankers.iter().map(|r| r.digest()).collect();
    let mut t = GanTrainer::new(small_cfg(10), &rankers, LossWeights::default(), None).unwrap();
    let frozen = t.frozen_digests();
    assert_eq!(frozen[1..], before[..]);
    t.run(&data, None, 10, None).unwrap();
    assert_eq!(t.frozen_digests(), frozen);

    let cfg = GanTrainConfig {
        lr: 0.0,
        ..small_cfg(1)
    };
    let mut t = GanTrainer::new(
        cfg,
        &rankers,
        LossWeights {
            mse: 1.0,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    let (g0, d0) = (digest(&t.generator), trainable(&t.discriminator));
    t.step(&data).unwrap();
    assert_eq!(digest(&t.generator), g0);
    assert_eq!(trainable(&t.discriminator), d0);
}

#[test]
fn config_validation() {
    let bad = [
        GanTrainConfig {
            hr_patch: 300,
            ..small_cfg(1)
        },
        GanTrainConfig {
            milestones: vec![5, 5],
            ..small_cfg(1)
        },
        GanTrainConfig {
            hr_patch: 16,
            lr_patch: 4,
            ..small_cfg(1)
        },
    ];
    for cfg in bad {
        assert!(GanTrainer::new(cfg, &[], LossWeights::default(), None).is_err());
    }
    assert_eq!(
        GanTrainConfig::default().hr_patch,
        4 * GanTrainConfig::default().lr_patch
    );
    let w = LossWeights {
        ranker_weights: vec![1.0, 1.0],
        ..Default::default()
    };
    assert!(GanTrainer::new(small_cfg(1), &[ranker()], w, None).is_err());
}

#[test]
fn image_level_losses() {
    let imgs = leaves(2, 64, 9);
    let ex = FeatureExtractor::<f32>::new(ExtractorConfig {
        width_divisor: 16,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(perceptual_loss(&ex, &imgs[0], &imgs[0]).unwrap(), 0.0);
    let ab = perceptual_loss(&ex, &imgs[0], &imgs[1]).unwrap();
    assert!(ab > 0.0);
    assert_eq!(ab, perceptual_loss(&ex, &imgs[1], &imgs[0]).unwrap());
    assert!(perceptual_loss(&ex, &imgs[0], &leaves(1, 32, 1)[0]).is_err());

    let d = Discriminator::<f32>::new(DiscriminatorConfig::new(4), 1);
    let (dl, gl) = adversarial_losses(&d, &imgs[0], &imgs[1]).unwrap();
    assert!(dl > 0.0 && gl > 0.0);

    let r = ranker();
    let s = r.score(&imgs[0]).unwrap();
    let one = rank_content_loss(
        std::slice::from_ref(&r),
        &[1.0],
        &imgs[0],
        Monotone::Sigmoid,
    )
    .unwrap();
    assert!(one > 0.0 && one < 1.0);
    let two = rank_content_loss(
        &[r.clone(), r.clone()],
        &[1.0, 1.0],
        &imgs[0],
        Monotone::Sigmoid,
    )
    .unwrap();
    assert_eq!(two, 2.0 * one);
    let half = rank_content_loss(
        &[r.clone(), r.clone()],
        &[0.5, 0.5],
        &imgs[0],
        Monotone::Sigmoid,
    )
    .unwrap();
    assert_eq!(half, one);
    assert_eq!(
        rank_content_loss(
            std::slice::from_ref(&r),
            &[0.3],
            &imgs[0],
            Monotone::Identity
        )
        .unwrap(),
        0.3 * s
    );
    assert!(rank_content_loss(&[r], &[1.0], &leaves(1, 4, 0)[0], Monotone::Sigmoid).is_err());
}

#[test]
fn pretraining_beats_bicubic_on_held_out_images() {
    let train = paired(12, 96, 100);
    let val = paired(4, 96, 500);
    let cfg = PretrainConfig {
        hr_patch: 64,
        lr_patch: 16,
        batch: 4,
        total_iters: 600,
        milestones: vec![400],
        val_every: 0,
        log_every: 100,
        generator: GeneratorConfig::new(4, 16),
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = pretrain_srresnet(&cfg, &train, None, Some(dir.path())).unwrap();
    let windows: Vec<f64> = out.log.iter().map(|r| r.l_m).collect();
    assert!(windows.last() < windows.first(), "{windows:?}");
    for (lr, hr) in val.lr.iter().zip(&val.hr) {
        let ours = psnr(
            &out.generator.super_resolve(lr).unwrap(),
            hr,
            PsnrMode::Luma,
        )
        .unwrap()
        .db()
        .unwrap();
        let base = psnr(&bicubic_upscale(lr).unwrap(), hr, PsnrMode::Luma)
            .unwrap()
            .db()
            .unwrap();
        assert!(ours > base, "{ours} vs bicubic {base}");
    }
    save_generator(&out.generator, 600, &dir.path().join("copy.safetensors")).unwrap();
    assert!(load_generator(&dir.path().join("generator.safetensors")).is_ok());
}
