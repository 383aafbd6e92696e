mod common;

use std::path::PathBuf;

use proptest::prelude::*;
use ranksr_experiments::pipeline::{artifact_dir, run_pipeline};
use ranksr_experiments::*;
use ranksr_metrics::{Polarity, Provenance, ScoreReport};
use ranksr_srgan::{save_generator, Generator, GeneratorConfig};

use common::{tiny_config, write_leaves};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn bounds_bracket_the_better_mean(table in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = table.into_iter().unzip();
        let ub = upper_bound_scores(&a, &b).unwrap();
        let best = ub.mean_a.min(ub.mean_b);
        prop_assert!(ub.ub_mr <= best + 1e-12);
        prop_assert!(best <= ub.ub_mc + 1e-12);
    }
}

#[test]
fn report_level_bound_checks_alignment() {
    let r = |e: &[(&str, f64)]| {
        ScoreReport::new(
            "niqe",
            Polarity::LowerBetter,
            Provenance::Internal,
            e.iter().map(|(i, s)| (i.to_string(), *s)).collect(),
        )
        .unwrap()
    };
    // mixed orders across images: the metric-rank bound is strictly better
    let ub = upper_bound(&r(&[("a", 2.6), ("b", 2.9)]), &r(&[("a", 2.8), ("b", 2.3)])).unwrap();
    assert!(ub.ub_mr < ub.ub_mc);
    assert_eq!(ub.better, Better::B);
    assert!(matches!(
        upper_bound(&r(&[("a", 1.0)]), &r(&[("b", 1.0)])),
        Err(ExpError::Misaligned(_))
    ));
}

#[test]
fn eval_suite_is_reproducible_and_needs_no_checkpoint_for_bicubic() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    write_leaves(&set, 3, 100, 40);
    let g = Generator::<f32>::new(GeneratorConfig::new(1, 4), 3);
    let ck = tmp.path().join("g.safetensors");
    save_generator(&g, 0, &ck).unwrap();
    let methods = vec![
        Method::Bicubic,
        Method::Checkpoint {
            name: "g1".into(),
            path: ck.clone(),
        },
        Method::Checkpoint {
            name: "g2".into(),
            path: ck.clone(),
        },
        Method::Checkpoint {
            name: "missing".into(),
            path: tmp.path().join("nope.safetensors"),
        },
    ];
    let sets = vec![("toy".to_string(), set.clone())];
    let opts = EvalOptions {
        metrics: vec!["niqe".into(), "psnr".into(), "pi".into()],
        ..EvalOptions::default()
    };
    let t1 = evaluate_suite(&methods, &sets, &opts, &tmp.path().join("e1")).unwrap();
    let t2 = evaluate_suite(&methods, &sets, &opts, &tmp.path().join("e2")).unwrap();

    let bic = t1.row("bicubic", "toy").unwrap();
    assert_eq!(bic.images, 3);
    for m in ["niqe", "psnr"] {
        let cell = &bic.cells[m];
        let report = ScoreReport::load(cell.report.as_ref().unwrap()).unwrap();
        assert_eq!(
            cell.value,
            report.mean(),
            "{m} cell is the mean of its report"
        );
    }
    assert!(bic.cells["pi"].value.is_none() && bic.cells["pi"].error.is_some());
    assert!(t1
        .rows
        .iter()
        .find(|r| r.method == "missing")
        .unwrap()
        .cells
        .values()
        .all(|c| c.error.is_some()));
    for m in ["niqe", "psnr"] {
        assert_eq!(t1.value("g1", "toy", m), t1.value("g2", "toy", m));
        assert!(t1.value("g1", "toy", m).is_some());
        for method in ["bicubic", "g1"] {
            assert_eq!(t1.value(method, "toy", m), t2.value(method, "toy", m));
        }
    }
    assert!(t1.render().contains("psnr(luma)"));
}

#[test]
fn pi_cells_follow_ingested_ma_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("set");
    write_leaves(&set, 2, 100, 7);
    let ma = tmp.path().join("ma");
    std::fs::create_dir_all(ma.join("bicubic")).unwrap();
    std::fs::write(ma.join("bicubic/toy.txt"), "img000\t4.0\nimg001\t6.0\n").unwrap();
    let opts = EvalOptions {
        metrics: vec!["niqe".into(), "pi".into()],
        ma_scores: Some(ma),
        ..EvalOptions::default()
    };
    let t = evaluate_suite(
        &[Method::Bicubic],
        &[("toy".into(), set)],
        &opts,
        &tmp.path().join("e"),
    )
    .unwrap();
    let niqe = ScoreReport::load(
        t.row("bicubic", "toy").unwrap().cells["niqe"]
            .report
            .as_ref()
            .unwrap(),
    )
    .unwrap();
    let expected =
        0.5 * ((10.0 - 4.0 + niqe.entries[0].1) + (10.0 - 6.0 + niqe.entries[1].1)) / 2.0;
    assert!((t.value("bicubic", "toy", "pi").unwrap() - expected).abs() < 1e-12);
}

#[test]
fn pipeline_reruns_are_no_ops_and_seed_changes_the_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_leaves(&data.join("train"), 4, 96, 1);
    write_leaves(&data.join("val"), 2, 96, 50);
    let runs = tmp.path().join("runs");
    let cfg = ExperimentConfig::from_toml(&tiny_config(&data, 1)).unwrap();

    let first = run_pipeline(&cfg, &runs).unwrap();
    assert_eq!(
        first.executed,
        vec!["pretrain", "rankdata", "ranker", "gan", "eval"]
    );
    assert_eq!(
        first.table.config_hash.as_deref(),
        Some(cfg.hash().as_str())
    );
    for m in ["bicubic", "srresnet", "ranksrgan"] {
        assert!(first.table.value(m, "val", "niqe").is_some(), "{m}");
    }
    for f in [
        "eval/plots/niqe.csv",
        "eval/plots/separation.csv",
        "ranker/best.safetensors",
        "gan/generator.safetensors",
    ] {
        assert!(first.dir.join(f).exists(), "{f}");
    }
    let stamp = std::fs::read_to_string(first.dir.join("gan/stage.json")).unwrap();
    assert!(stamp.contains(&cfg.hash()) && stamp.contains("\"seed\": 1"));

    let second = run_pipeline(&cfg, &runs).unwrap();
    assert!(second.executed.is_empty());
    assert_eq!(second.skipped.len(), 5);
    assert_eq!(second.table, first.table);

    std::fs::write(first.dir.join("eval/table.txt"), "tampered").unwrap();
    let third = run_pipeline(&cfg, &runs).unwrap();
    assert_eq!(third.executed, vec!["eval"]);

    let other = ExperimentConfig::from_toml(&tiny_config(&data, 2)).unwrap();
    assert_ne!(artifact_dir(&other, &runs), first.dir);
}

#[test]
fn failed_stage_reports_its_name_and_keeps_earlier_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_leaves(&data.join("train"), 4, 96, 1);
    write_leaves(&data.join("val"), 2, 96, 50);
    let text = tiny_config(&data, 3).replace("size = 32, stride = 32", "size = 4, stride = 4");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let err = run_pipeline(&cfg, &tmp.path().join("runs")).unwrap_err();
    assert!(
        matches!(&err, ExpError::Stage { stage, .. } if stage == "ranker"),
        "{err}"
    );
    let dir: PathBuf = artifact_dir(&cfg, &tmp.path().join("runs"));
    assert!(dir.join("pretrain/stage.json").exists() && dir.join("rankdata/stage.json").exists());
    assert!(!dir.join("ranker/stage.json").exists());
}

#[test]
fn shipped_desk_config_is_valid() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = ranksr_experiments::ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.gan.pretrain.generator, cfg.gan.train.generator);
    assert_eq!(cfg.rankdata.levels.len(), 3);
}
