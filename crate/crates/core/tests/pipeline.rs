use std::fs;
use std::path::Path;

use dualstream::attacks::{run_dual_stream, AttackConfig, EpsilonGrid, Stream};
use dualstream::harness::{
    cmd_attack, cmd_evaluate, cmd_select, cmd_synth, cmd_train, detector_seed, image_seed, list_pngs, load_corpus,
    run_all, CandidateMetadata, RunConfig, SelectionFile, Summary, TrainingSummary,
};
use dualstream::imgmath::{pixel_variance, Image};
use dualstream::models::{evaluate_accuracy, initialize, load_model, Label, SurrogateEnsemble};

fn small_config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(
        r#"
seed = 5
[synth]
n_real = 30
n_fake = 30
n_inputs = 5
size = 16
[train]
epochs = 4
[attack]
iterations = 4
"#,
    )
    .unwrap();
    cfg.resolve_paths(root);
    cfg.validate().unwrap();
    cfg
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn json<T: serde::de::DeserializeOwned>(p: impl AsRef<Path>) -> T {
    serde_json::from_slice(&read(p)).unwrap()
}

#[test]
fn training_is_deterministic_and_summary_recomputes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = small_config(d.path());
        cmd_synth(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
    }
    let cfg = small_config(a.path());
    for det in &cfg.detectors {
        let name = format!("{}.dscl", det.name);
        assert_eq!(read(a.path().join("models").join(&name)), read(b.path().join("models").join(&name)));
    }
    let summary: TrainingSummary = json(a.path().join("models/training_summary.json"));
    let (corpus, failures) = load_corpus(&cfg.paths.corpus).unwrap();
    assert!(failures.is_empty());
    for entry in &summary.detectors {
        let m = load_model(a.path().join(format!("models/{}.dscl", entry.name))).unwrap();
        let (acc, loss) = evaluate_accuracy(&m, &corpus).unwrap();
        assert_eq!(acc, entry.accuracy);
        assert_eq!(loss, entry.mean_loss);
        assert_eq!(entry.n_train, 60);
    }
}

#[test]
fn zero_epochs_saves_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.train.epochs = 0;
    cmd_synth(&cfg).unwrap();
    cmd_train(&cfg).unwrap();
    for det in &cfg.detectors {
        let saved = load_model(dir.path().join(format!("models/{}.dscl", det.name))).unwrap();
        let fresh = initialize(det.architecture(), detector_seed(cfg.seed, det.seed)).unwrap();
        assert_eq!(saved, fresh);
    }
}

#[test]
fn missing_or_single_class_corpus_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let err = cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.contains("synth"), "{err}");
    cmd_synth(&cfg).unwrap();
    fs::remove_dir_all(dir.path().join("corpus/fake")).unwrap();
    let err = cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.contains("both real/ and fake/"), "{err}");
}

#[test]
fn full_run_artifacts_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let summary = run_all(&cfg).unwrap();
    assert!(summary.failures.is_empty());
    let out = dir.path().join("out");

    // Candidates reload to within one quantization step of a fresh in-memory run.
    let surrogates: Vec<_> = cfg
        .surrogates
        .iter()
        .map(|n| load_model(dir.path().join(format!("models/{n}.dscl"))).unwrap())
        .collect();
    let ens = SurrogateEnsemble::new(surrogates).unwrap();
    let inputs = list_pngs(&cfg.paths.inputs).unwrap();
    assert_eq!(inputs.len(), 5);
    let grid = EpsilonGrid::default();
    for (i, (id, path)) in inputs.iter().enumerate() {
        let x = Image::load_png(path).unwrap();
        let attack = AttackConfig {
            seed: image_seed(cfg.seed, i),
            ..cfg.attack.clone()
        };
        let dual = run_dual_stream(&x, &ens, &attack, &cfg.preprocess).unwrap();
        for (c, tag) in [(&dual.mntd, "mntd"), (&dual.sg, "sg")] {
            let disk = Image::load_png(out.join(format!("candidates/{id}.{tag}.png"))).unwrap();
            assert!(disk.linf_distance(&c.image).unwrap() <= 1.0 / 255.0);
        }
        let meta: CandidateMetadata = json(out.join(format!("candidates/{id}.json")));
        assert_eq!(meta.epsilon(Stream::MntdPgd), Some(dual.mntd.epsilon_used));
        assert_eq!(meta.candidates[1].surrogate_fooled, dual.sg.surrogate_fooled);
        // Budget stays within the variance-scaled grid.
        let s = grid.scale_for_variance(pixel_variance(&x));
        let lo = grid.base[0] * s;
        let hi = grid.base.last().unwrap() * s;
        for c in &meta.candidates {
            assert!(c.epsilon >= lo - 1e-15 && c.epsilon <= hi + 1e-15, "{id}: {}", c.epsilon);
        }
    }

    // Selection: every final image is one of the two candidates, batch dominance holds.
    let sel: SelectionFile = json(out.join("selection.json"));
    assert_eq!(sel.images.len(), 5);
    for r in &sel.images {
        let tag = if r.chosen == Stream::MntdPgd { "mntd" } else { "sg" };
        assert_eq!(
            read(out.join(format!("final/{}.png", r.image_id))),
            read(out.join(format!("candidates/{}.{tag}.png", r.image_id)))
        );
        let best = r.mntd.score.max(r.sg.score);
        assert_eq!(if r.chosen == Stream::MntdPgd { r.mntd.score } else { r.sg.score }, best);
    }
    let totals: Vec<f64> = sel.scores.iter().map(|s| s.total).collect();
    assert!(totals[2] >= totals[0] && totals[2] >= totals[1]);

    // Report aggregates recompute exactly from the CSV rows.
    let summary: Summary = json(out.join("summary.json"));
    let csv = String::from_utf8(read(out.join("report.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "image_id,stream,epsilon,ssim,t1_fooled");
    let rows: Vec<(f64, bool)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 5);
            (f[3].parse().unwrap(), f[4] == "1")
        })
        .collect();
    let set = summary.set("selected").unwrap();
    let n = rows.len() as f64;
    let fooled = rows.iter().filter(|r| r.1).count() as f64;
    assert_eq!(set.misclassification_rate[0].rate, Some(100.0 * fooled / n));
    assert_eq!(set.avg_ssim, Some(rows.iter().map(|r| r.0).sum::<f64>() / n));
    let score: f64 = rows.iter().map(|r| if r.1 { r.0 } else { 0.0 }).sum();
    assert_eq!(set.score, score);
    assert_eq!(set.score, totals[2]);
    for s in &summary.sets {
        for r in &s.misclassification_rate {
            let v = r.rate.unwrap();
            assert!((0.0..=100.0).contains(&v));
        }
    }
    let labels: Vec<&str> = summary.sets.iter().map(|s| s.label.as_str()).collect();
    assert_eq!(labels, ["selected", "MNTD-PGD", "SG-PGD", "clean"]);
    let ablation = String::from_utf8(read(out.join("ablation.csv"))).unwrap();
    assert_eq!(ablation.matches(",MNTD-PGD,").count(), 5);
    assert_eq!(ablation.matches(",SG-PGD,").count(), 5);
    assert!(summary.config.get("paths").is_none());

    // The clean baseline is exactly what the target says about the raw inputs.
    let target = load_model(dir.path().join("models/t1.dscl")).unwrap();
    let real = inputs
        .iter()
        .filter(|(_, p)| target.predict(&Image::load_png(p).unwrap()).unwrap() == Label::Real)
        .count();
    let clean = summary.set("clean").unwrap();
    assert_eq!(clean.misclassification_rate[0].rate, Some(100.0 * real as f64 / 5.0));
}

#[test]
fn metadata_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = small_config(d.path());
        cmd_synth(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        cmd_attack(&cfg).unwrap();
    }
    for i in 0..5 {
        let f = format!("out/candidates/img_{i:04}.json");
        assert_eq!(read(a.path().join(&f)), read(b.path().join(&f)));
    }
}

#[test]
fn per_image_problems_do_not_stop_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_synth(&cfg).unwrap();
    cmd_train(&cfg).unwrap();
    fs::write(dir.path().join("inputs/img_0002.png"), b"not a png").unwrap();
    let s = cmd_attack(&cfg).unwrap();
    assert_eq!(s.processed, 4);
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.failures[0].image_id, "img_0002");
    assert_eq!(s.exit_code(), 2);

    fs::remove_file(dir.path().join("out/candidates/img_0003.sg.png")).unwrap();
    let s = cmd_select(&cfg).unwrap();
    let ids: Vec<&str> = s.failures.iter().map(|f| f.image_id.as_str()).collect();
    assert_eq!(ids, ["img_0002", "img_0003"]);
    assert!(s.failures[1].message.contains("missing candidate"));

    let s = cmd_evaluate(&cfg).unwrap();
    assert_eq!(s.processed, 3);
    let csv = String::from_utf8(read(dir.path().join("out/report.csv"))).unwrap();
    assert!(csv.contains("img_0003,error,,,\n"));
    let summary: Summary = json(dir.path().join("out/summary.json"));
    assert_eq!(summary.n_failed, 2);
    assert_eq!(summary.set("selected").unwrap().n_images, 3);
}

#[test]
fn empty_input_set_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.synth.n_inputs = 0;
    let s = run_all(&cfg).unwrap();
    assert_eq!(s.exit_code(), 0);
    let csv = String::from_utf8(read(dir.path().join("out/report.csv"))).unwrap();
    assert_eq!(csv, "image_id,stream,epsilon,ssim,t1_fooled\n");
    let summary: Summary = json(dir.path().join("out/summary.json"));
    assert_eq!(summary.n_images, 0);
    assert_eq!(summary.set("selected").unwrap().score, 0.0);
}

#[test]
fn missing_models_are_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_synth(&cfg).unwrap();
    let err = cmd_attack(&cfg).unwrap_err().to_string();
    assert!(err.contains("run `train` first"), "{err}");
}
