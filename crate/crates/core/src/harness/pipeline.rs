//! The five pipeline stages. Each reads its inputs from disk and writes its
//! outputs next to them, so stages can be rerun independently.
//!
//! Layout under the configured paths:
//!
//! ```text
//! corpus/real/*.png  corpus/fake/*.png     synth
//! inputs/*.png                              synth
//! models/<name>.dscl  models/training_summary.json   train
//! out/candidates/<id>.{mntd.png,sg.png,json}         attack
//! out/final/<id>.png  out/selection.json             select
//! out/report.csv  out/ablation.csv  out/summary.json evaluate
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{mix_seed, RunConfig};
use super::report::{build_report, ImageRecord};
use super::synth::{synthesize_corpus, synthesize_fakes};
use crate::attacks::{run_dual_stream, AttackConfig, Stream};
use crate::error::{Error, Result};
use crate::imgmath::Image;
use crate::models::{load_model, save_model, train_detector, Classifier, Label, LabeledImage, SurrogateEnsemble, TrainConfig};
use crate::selection::{score, select_images, CandidateEvaluation, ScoreReport};

const CORPUS_STREAM: u64 = 1;
const INPUT_STREAM: u64 = 2;
const ATTACK_STREAM: u64 = 3;
const TRAIN_STREAM: u64 = 4;

/// Training seed of a detector in a run.
pub fn detector_seed(run_seed: u64, detector: u64) -> u64 {
    mix_seed(mix_seed(run_seed, TRAIN_STREAM), detector)
}

/// Attack seed of the `index`-th input image (inputs sorted by file name).
pub fn image_seed(run_seed: u64, index: usize) -> u64 {
    mix_seed(mix_seed(run_seed, ATTACK_STREAM), index as u64)
}

/// One image that could not be processed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFailure {
    pub image_id: String,
    pub message: String,
}

/// What a stage did. Per-image failures do not abort the stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSummary {
    pub stage: &'static str,
    pub processed: usize,
    pub failures: Vec<ImageFailure>,
}

impl StageSummary {
    fn new(stage: &'static str, processed: usize, failures: Vec<ImageFailure>) -> Self {
        for f in &failures {
            warn!("{stage}: skipped {}: {}", f.image_id, f.message);
        }
        info!("{stage}: {processed} processed, {} failed", failures.len());
        Self {
            stage,
            processed,
            failures,
        }
    }

    /// 0 when every image succeeded, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_file(path)?)?)
}

fn require_dir(path: &Path, hint: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist; {hint}", path.display())))
    }
}

/// `(stem, path)` of every `.png` in `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !is_png || !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.push((stem.to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn model_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.paths.models.join(format!("{name}.dscl"))
}

fn load_named(cfg: &RunConfig, names: &[String]) -> Result<Vec<Classifier>> {
    names
        .iter()
        .map(|n| {
            let path = model_path(cfg, n);
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "model {n:?} not found at {}; run `train` first",
                    path.display()
                )));
            }
            load_model(&path)
        })
        .collect()
}

fn candidates_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output.join("candidates")
}

fn final_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output.join("final")
}

fn candidate_png(cfg: &RunConfig, id: &str, stream: Stream) -> PathBuf {
    let tag = match stream {
        Stream::MntdPgd => "mntd",
        Stream::SgPgd => "sg",
    };
    candidates_dir(cfg).join(format!("{id}.{tag}.png"))
}

fn candidate_meta(cfg: &RunConfig, id: &str) -> PathBuf {
    candidates_dir(cfg).join(format!("{id}.json"))
}

/// Writes the training corpus and the attack inputs.
pub fn cmd_synth(cfg: &RunConfig) -> Result<StageSummary> {
    let s = &cfg.synth;
    let corpus = synthesize_corpus(
        s.n_real,
        s.n_fake,
        s.size,
        s.artifact_amplitude,
        mix_seed(cfg.seed, CORPUS_STREAM),
    )?;
    let real_dir = cfg.paths.corpus.join("real");
    let fake_dir = cfg.paths.corpus.join("fake");
    create_dir(&real_dir)?;
    create_dir(&fake_dir)?;
    let (mut nr, mut nf) = (0usize, 0usize);
    for sample in &corpus {
        let path = match sample.label {
            Label::Real => {
                nr += 1;
                real_dir.join(format!("real_{:04}.png", nr - 1))
            }
            Label::Fake => {
                nf += 1;
                fake_dir.join(format!("fake_{:04}.png", nf - 1))
            }
        };
        sample.image.save_png(path)?;
    }
    create_dir(&cfg.paths.inputs)?;
    let inputs = synthesize_fakes(s.n_inputs, s.size, s.artifact_amplitude, mix_seed(cfg.seed, INPUT_STREAM))?;
    for (i, img) in inputs.iter().enumerate() {
        img.save_png(cfg.paths.inputs.join(format!("img_{i:04}.png")))?;
    }
    Ok(StageSummary::new("synth", corpus.len() + inputs.len(), Vec::new()))
}

/// Reads `real/*.png` and `fake/*.png`; unreadable files become failures.
pub fn load_corpus(dir: &Path) -> Result<(Vec<LabeledImage>, Vec<ImageFailure>)> {
    require_dir(dir, "run `synth` first or point paths.corpus at a corpus")?;
    let mut data = Vec::new();
    let mut failures = Vec::new();
    for (sub, label) in [("real", Label::Real), ("fake", Label::Fake)] {
        let d = dir.join(sub);
        if !d.is_dir() {
            continue;
        }
        for (id, path) in list_pngs(&d)? {
            match Image::load_png(&path) {
                Ok(image) => data.push(LabeledImage { image, label }),
                Err(e) => failures.push(ImageFailure {
                    image_id: format!("{sub}/{id}"),
                    message: e.to_string(),
                }),
            }
        }
    }
    let has = |l: Label| data.iter().any(|s| s.label == l);
    if !has(Label::Real) || !has(Label::Fake) {
        return Err(Error::Config(format!(
            "corpus at {} needs readable images in both real/ and fake/",
            dir.display()
        )));
    }
    Ok((data, failures))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedDetector {
    pub name: String,
    pub conv1: usize,
    pub conv2: usize,
    pub pool: usize,
    pub seed: u64,
    pub epochs: usize,
    pub n_train: usize,
    /// Accuracy on the training corpus.
    pub accuracy: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub seed: u64,
    pub detectors: Vec<TrainedDetector>,
}

/// Trains every configured detector on the corpus.
pub fn cmd_train(cfg: &RunConfig) -> Result<StageSummary> {
    let (data, failures) = load_corpus(&cfg.paths.corpus)?;
    create_dir(&cfg.paths.models)?;
    let trained = pool(cfg.workers)?.install(|| {
        cfg.detectors
            .par_iter()
            .map(|d| {
                let seed = detector_seed(cfg.seed, d.seed);
                let tc = TrainConfig { seed, ..cfg.train };
                let (model, report) = train_detector(&data, d.architecture(), &tc)?;
                Ok((d, model, report))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut detectors = Vec::new();
    for (d, model, report) in trained {
        save_model(&model, model_path(cfg, &d.name))?;
        info!("train: {} accuracy {:.4}", d.name, report.accuracy);
        detectors.push(TrainedDetector {
            name: d.name.clone(),
            conv1: d.conv1,
            conv2: d.conv2,
            pool: d.pool,
            seed: d.seed,
            epochs: report.epochs,
            n_train: data.len(),
            accuracy: report.accuracy,
            mean_loss: report.mean_loss,
        });
    }
    write_json(
        &cfg.paths.models.join("training_summary.json"),
        &TrainingSummary {
            seed: cfg.seed,
            detectors,
        },
    )?;
    Ok(StageSummary::new("train", data.len(), failures))
}

/// Metadata for one stream's candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub stream: Stream,
    pub epsilon: f64,
    /// SSIM of the unquantized candidate to the input.
    pub ssim: f64,
    /// In the order of `CandidateMetadata::surrogates`.
    pub surrogate_fooled: Vec<bool>,
}

/// Contents of `candidates/<id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMetadata {
    pub image_id: String,
    pub index: usize,
    pub surrogates: Vec<String>,
    /// Present when the budget came from the epsilon search.
    pub search_succeeded: Option<bool>,
    pub sg_surrogate: String,
    pub candidates: Vec<CandidateRecord>,
}

impl CandidateMetadata {
    pub fn epsilon(&self, stream: Stream) -> Option<f64> {
        self.candidates.iter().find(|c| c.stream == stream).map(|c| c.epsilon)
    }
}

fn run_one_attack(
    cfg: &RunConfig,
    ensemble: &SurrogateEnsemble,
    index: usize,
    id: &str,
    path: &Path,
) -> Result<()> {
    let x = Image::load_png(path)?;
    let attack = AttackConfig {
        seed: image_seed(cfg.seed, index),
        ..cfg.attack.clone()
    };
    let out = run_dual_stream(&x, ensemble, &attack, &cfg.preprocess)?;
    let mut candidates = Vec::new();
    for c in [&out.mntd, &out.sg] {
        c.image.save_png(candidate_png(cfg, id, c.stream))?;
        candidates.push(CandidateRecord {
            stream: c.stream,
            epsilon: c.epsilon_used,
            ssim: c.ssim_to_original,
            surrogate_fooled: c.surrogate_fooled.clone(),
        });
    }
    let meta = CandidateMetadata {
        image_id: id.to_string(),
        index,
        surrogates: cfg.surrogates.clone(),
        search_succeeded: out.search.as_ref().map(|s| s.succeeded),
        sg_surrogate: cfg.surrogates[out.sg_surrogate].clone(),
        candidates,
    };
    write_json(&candidate_meta(cfg, id), &meta)
}

/// Runs both attack streams on every input image.
pub fn cmd_attack(cfg: &RunConfig) -> Result<StageSummary> {
    let ensemble = SurrogateEnsemble::new(load_named(cfg, &cfg.surrogates)?)?;
    require_dir(&cfg.paths.inputs, "run `synth` first or point paths.inputs at images")?;
    let inputs = list_pngs(&cfg.paths.inputs)?;
    if inputs.is_empty() {
        warn!("attack: no input images in {}", cfg.paths.inputs.display());
    }
    create_dir(&candidates_dir(cfg))?;
    let results: Vec<Option<ImageFailure>> = pool(cfg.workers)?.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, (id, path))| {
                run_one_attack(cfg, &ensemble, i, id, path).err().map(|e| ImageFailure {
                    image_id: id.clone(),
                    message: e.to_string(),
                })
            })
            .collect()
    });
    let failures: Vec<_> = results.into_iter().flatten().collect();
    Ok(StageSummary::new("attack", inputs.len() - failures.len(), failures))
}

/// One image's evaluation in `selection.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamScore {
    pub ssim: f64,
    pub fooled: Vec<bool>,
    pub score: f64,
}

impl From<&CandidateEvaluation> for StreamScore {
    fn from(e: &CandidateEvaluation) -> Self {
        Self {
            ssim: e.ssim,
            fooled: e.fooled.clone(),
            score: e.score(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub image_id: String,
    pub chosen: Stream,
    pub mntd: StreamScore,
    pub sg: StreamScore,
}

/// Contents of `selection.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub targets: Vec<String>,
    pub images: Vec<SelectionRecord>,
    pub failures: Vec<ImageFailure>,
    /// Batch scores for MNTD-PGD, SG-PGD and the selected set, in that order.
    pub scores: Vec<ScoreReport>,
}

fn select_one(cfg: &RunConfig, targets: &[Classifier], id: &str, path: &Path) -> Result<(SelectionRecord, Vec<u8>)> {
    let original = Image::load_png(path)?;
    let mpath = candidate_png(cfg, id, Stream::MntdPgd);
    let spath = candidate_png(cfg, id, Stream::SgPgd);
    for p in [&mpath, &spath] {
        if !p.is_file() {
            return Err(Error::Config(format!("missing candidate {}", p.display())));
        }
    }
    let m = Image::load_png(&mpath)?;
    let s = Image::load_png(&spath)?;
    let sel = select_images(&m, &s, targets, &original)?;
    let bytes = read_file(match sel.chosen {
        Stream::MntdPgd => &mpath,
        Stream::SgPgd => &spath,
    })?;
    Ok((
        SelectionRecord {
            image_id: id.to_string(),
            chosen: sel.chosen,
            mntd: (&sel.mntd).into(),
            sg: (&sel.sg).into(),
        },
        bytes,
    ))
}

fn chosen_score(r: &SelectionRecord) -> &StreamScore {
    match r.chosen {
        Stream::MntdPgd => &r.mntd,
        Stream::SgPgd => &r.sg,
    }
}

fn as_evals(records: &[SelectionRecord], pick: impl Fn(&SelectionRecord) -> &StreamScore) -> Vec<CandidateEvaluation> {
    records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let s = pick(r);
            CandidateEvaluation {
                index,
                fooled: s.fooled.clone(),
                ssim: s.ssim,
            }
        })
        .collect()
}

/// Keeps the higher-scoring candidate per image against the target classifiers.
pub fn cmd_select(cfg: &RunConfig) -> Result<StageSummary> {
    let targets = load_named(cfg, &cfg.targets)?;
    require_dir(&cfg.paths.inputs, "run `synth` first or point paths.inputs at images")?;
    let inputs = list_pngs(&cfg.paths.inputs)?;
    if inputs.is_empty() {
        warn!("select: no input images in {}", cfg.paths.inputs.display());
    }
    let fdir = final_dir(cfg);
    create_dir(&fdir)?;
    let results: Vec<_> = pool(cfg.workers)?.install(|| {
        inputs
            .par_iter()
            .map(|(id, path)| (id, select_one(cfg, &targets, id, path)))
            .collect()
    });
    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok((rec, bytes)) => {
                write_file(&fdir.join(format!("{id}.png")), bytes)?;
                images.push(rec);
            }
            Err(e) => failures.push(ImageFailure {
                image_id: id.clone(),
                message: e.to_string(),
            }),
        }
    }
    let scores = vec![
        score(Stream::MntdPgd.as_str(), &as_evals(&images, |r| &r.mntd)),
        score(Stream::SgPgd.as_str(), &as_evals(&images, |r| &r.sg)),
        score("selected", &as_evals(&images, chosen_score)),
    ];
    write_json(
        &cfg.paths.output.join("selection.json"),
        &SelectionFile {
            targets: cfg.targets.clone(),
            images,
            failures: failures.clone(),
            scores,
        },
    )?;
    Ok(StageSummary::new("select", inputs.len() - failures.len(), failures))
}

fn evaluate_one(
    cfg: &RunConfig,
    targets: &[Classifier],
    selection: &SelectionFile,
    id: &str,
    path: &Path,
) -> Result<ImageRecord> {
    let rec = selection
        .images
        .iter()
        .find(|r| r.image_id == id)
        .ok_or_else(|| Error::Config(format!("{id} has no selection record")))?;
    let meta: CandidateMetadata = read_json(&candidate_meta(cfg, id))?;
    let original = Image::load_png(path)?;
    let fin = Image::load_png(final_dir(cfg).join(format!("{id}.png")))?;
    let eval = |img: &Image| -> Result<CandidateEvaluation> {
        let (fooled, ssim) = crate::selection::evaluate_one(img, &original, targets)?;
        Ok(CandidateEvaluation { index: 0, fooled, ssim })
    };
    let epsilon = |s: Stream| {
        meta.epsilon(s)
            .ok_or_else(|| Error::Config(format!("{id}: metadata lacks a {s} record")))
    };
    Ok(ImageRecord {
        image_id: id.to_string(),
        chosen: rec.chosen,
        chosen_epsilon: epsilon(rec.chosen)?,
        selected: eval(&fin)?,
        mntd: eval(&Image::load_png(candidate_png(cfg, id, Stream::MntdPgd))?)?,
        mntd_epsilon: epsilon(Stream::MntdPgd)?,
        sg: eval(&Image::load_png(candidate_png(cfg, id, Stream::SgPgd))?)?,
        sg_epsilon: epsilon(Stream::SgPgd)?,
        clean: eval(&original)?,
    })
}

/// Scores the final images, each stream on its own, and optionally the clean inputs.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<StageSummary> {
    let targets = load_named(cfg, &cfg.targets)?;
    let sel_path = cfg.paths.output.join("selection.json");
    if !sel_path.is_file() {
        return Err(Error::Config(format!("{} not found; run `select` first", sel_path.display())));
    }
    let selection: SelectionFile = read_json(&sel_path)?;
    require_dir(&cfg.paths.inputs, "run `synth` first or point paths.inputs at images")?;
    let inputs = list_pngs(&cfg.paths.inputs)?;
    if inputs.is_empty() {
        warn!("evaluate: no input images in {}", cfg.paths.inputs.display());
    }
    let results: Vec<_> = pool(cfg.workers)?.install(|| {
        inputs
            .par_iter()
            .map(|(id, path)| (id, evaluate_one(cfg, &targets, &selection, id, path)))
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(ImageFailure {
                image_id: id.clone(),
                message: e.to_string(),
            }),
        }
    }
    let report = build_report(cfg, &records, &failures);
    create_dir(&cfg.paths.output)?;
    write_file(&cfg.paths.output.join("report.csv"), report.csv())?;
    if cfg.report.ablation {
        write_file(&cfg.paths.output.join("ablation.csv"), report.ablation_csv())?;
    }
    write_json(&cfg.paths.output.join("summary.json"), &report.summary)?;
    Ok(StageSummary::new("evaluate", records.len(), failures))
}

/// synth, train, attack, select and evaluate in order. Failures are merged.
pub fn run_all(cfg: &RunConfig) -> Result<StageSummary> {
    let mut failures = Vec::new();
    let mut processed = 0;
    for stage in [cmd_synth, cmd_train, cmd_attack, cmd_select, cmd_evaluate] {
        let s = stage(cfg)?;
        processed = s.processed;
        failures.extend(s.failures);
    }
    Ok(StageSummary {
        stage: "all",
        processed,
        failures,
    })
}
