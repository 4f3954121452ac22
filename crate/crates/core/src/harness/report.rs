//! Experiment report: per-image rows plus aggregates computed from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::pipeline::ImageFailure;
use crate::attacks::Stream;
use crate::selection::{average_ssim, average_ssim_successful, misclassification_rate, score, CandidateEvaluation};

/// Everything measured for one input image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub chosen: Stream,
    pub chosen_epsilon: f64,
    pub selected: CandidateEvaluation,
    pub mntd: CandidateEvaluation,
    pub mntd_epsilon: f64,
    pub sg: CandidateEvaluation,
    pub sg_epsilon: f64,
    pub clean: CandidateEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRate {
    pub target: String,
    /// Percentage in [0, 100]; absent for an empty set.
    pub rate: Option<f64>,
}

/// Aggregates for one evaluated image set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub label: String,
    pub n_images: usize,
    pub misclassification_rate: Vec<TargetRate>,
    pub avg_ssim: Option<f64>,
    /// Over images that fooled every target.
    pub avg_ssim_successful: Option<f64>,
    pub n_successful: usize,
    pub score: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub targets: Vec<String>,
    pub n_images: usize,
    pub n_failed: usize,
    /// `selected`, then `MNTD-PGD` and `SG-PGD` alone, then `clean` if enabled.
    pub sets: Vec<SetSummary>,
    pub failures: Vec<ImageFailure>,
    pub config: serde_json::Value,
}

impl Summary {
    pub fn set(&self, label: &str) -> Option<&SetSummary> {
        self.sets.iter().find(|s| s.label == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub targets: Vec<String>,
    pub records: Vec<ImageRecord>,
    pub failures: Vec<ImageFailure>,
    pub summary: Summary,
}

pub fn summarize(label: &str, targets: &[String], evals: &[CandidateEvaluation]) -> SetSummary {
    let misclassification_rate = targets
        .iter()
        .enumerate()
        .map(|(t, name)| TargetRate {
            target: name.clone(),
            rate: misclassification_rate(evals, t).ok(),
        })
        .collect();
    SetSummary {
        label: label.to_string(),
        n_images: evals.len(),
        misclassification_rate,
        avg_ssim: average_ssim(evals).ok(),
        avg_ssim_successful: average_ssim_successful(evals),
        n_successful: evals.iter().filter(|e| e.fooled_all()).count(),
        score: score(label, evals).total,
    }
}

pub fn build_report(cfg: &RunConfig, records: &[ImageRecord], failures: &[ImageFailure]) -> ExperimentReport {
    let targets = cfg.targets.clone();
    let collect = |f: fn(&ImageRecord) -> &CandidateEvaluation| -> Vec<CandidateEvaluation> {
        records.iter().map(|r| f(r).clone()).collect()
    };
    let mut sets = vec![
        summarize("selected", &targets, &collect(|r| &r.selected)),
        summarize(Stream::MntdPgd.as_str(), &targets, &collect(|r| &r.mntd)),
        summarize(Stream::SgPgd.as_str(), &targets, &collect(|r| &r.sg)),
    ];
    if cfg.report.clean_baseline {
        sets.push(summarize("clean", &targets, &collect(|r| &r.clean)));
    }
    let summary = Summary {
        seed: cfg.seed,
        targets: targets.clone(),
        n_images: records.len(),
        n_failed: failures.len(),
        sets,
        failures: failures.to_vec(),
        config: cfg.echo(),
    };
    ExperimentReport {
        targets,
        records: records.to_vec(),
        failures: failures.to_vec(),
        summary,
    }
}

impl ExperimentReport {
    fn header(&self) -> String {
        let mut h = String::from("image_id,stream,epsilon,ssim");
        for t in &self.targets {
            let _ = write!(h, ",{t}_fooled");
        }
        h.push('\n');
        h
    }

    fn row(&self, out: &mut String, id: &str, stream: &str, epsilon: f64, e: &CandidateEvaluation) {
        let _ = write!(out, "{id},{stream},{epsilon},{}", e.ssim);
        for &b in &e.fooled {
            let _ = write!(out, ",{}", u8::from(b));
        }
        out.push('\n');
    }

    fn failure_rows(&self, out: &mut String) {
        for f in &self.failures {
            let _ = write!(out, "{},error,,", f.image_id);
            for _ in &self.targets {
                out.push(',');
            }
            out.push('\n');
        }
    }

    /// One row per image for the selected set; failed images get an `error` row.
    pub fn csv(&self) -> String {
        let mut out = self.header();
        for r in &self.records {
            self.row(&mut out, &r.image_id, r.chosen.as_str(), r.chosen_epsilon, &r.selected);
        }
        self.failure_rows(&mut out);
        out
    }

    /// Each stream's own candidate per image, plus clean rows when enabled.
    pub fn ablation_csv(&self) -> String {
        let mut out = self.header();
        for r in &self.records {
            self.row(&mut out, &r.image_id, Stream::MntdPgd.as_str(), r.mntd_epsilon, &r.mntd);
            self.row(&mut out, &r.image_id, Stream::SgPgd.as_str(), r.sg_epsilon, &r.sg);
        }
        if self.summary.set("clean").is_some() {
            for r in &self.records {
                self.row(&mut out, &r.image_id, "clean", 0.0, &r.clean);
            }
        }
        self.failure_rows(&mut out);
        out
    }
}
