//! Stage-two selection: score candidates on held-out classifiers by SSIM-weighted
//! success and keep the better stream per image.

use serde::{Deserialize, Serialize};

use crate::attacks::{AdversarialCandidate, Stream};
use crate::error::{invalid, shape, Result};
use crate::imgmath::{ssim, Image, DEFAULT_WINDOW};
use crate::models::{Classifier, Label};

/// Outcome of showing one candidate image to every evaluation classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    /// Position of the candidate in the evaluated batch.
    pub index: usize,
    /// One bit per classifier: predicted Real.
    pub fooled: Vec<bool>,
    pub ssim: f64,
}

impl CandidateEvaluation {
    /// Per-image score: SSIM times the number of fooled classifiers.
    pub fn score(&self) -> f64 {
        self.fooled.iter().filter(|&&b| b).map(|_| self.ssim).sum()
    }

    pub fn fooled_all(&self) -> bool {
        !self.fooled.is_empty() && self.fooled.iter().all(|&b| b)
    }
}

pub fn evaluate_one(candidate: &Image, original: &Image, classifiers: &[Classifier]) -> Result<(Vec<bool>, f64)> {
    let fooled = classifiers
        .iter()
        .map(|c| Ok(c.predict(candidate)? == Label::Real))
        .collect::<Result<Vec<_>>>()?;
    Ok((fooled, ssim(original, candidate, DEFAULT_WINDOW)?))
}

pub fn evaluate(
    candidates: &[Image],
    classifiers: &[Classifier],
    originals: &[Image],
) -> Result<Vec<CandidateEvaluation>> {
    if candidates.len() != originals.len() {
        return Err(shape(format!(
            "{} candidates for {} originals",
            candidates.len(),
            originals.len()
        )));
    }
    candidates
        .iter()
        .zip(originals)
        .enumerate()
        .map(|(index, (c, o))| {
            let (fooled, ssim) = evaluate_one(c, o, classifiers)?;
            Ok(CandidateEvaluation { index, fooled, ssim })
        })
        .collect()
}

/// Batch score with its per-image, per-classifier breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub label: String,
    pub total: f64,
    /// `contributions[image][classifier] = ssim * fooled`.
    pub contributions: Vec<Vec<f64>>,
    pub n_images: usize,
}

pub fn score(label: impl Into<String>, evals: &[CandidateEvaluation]) -> ScoreReport {
    let contributions: Vec<Vec<f64>> = evals
        .iter()
        .map(|e| {
            e.fooled
                .iter()
                .map(|&b| if b { e.ssim } else { 0.0 })
                .collect()
        })
        .collect();
    let total = contributions.iter().flatten().sum();
    ScoreReport {
        label: label.into(),
        total,
        contributions,
        n_images: evals.len(),
    }
}

/// Result of comparing the two streams on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chosen: Stream,
    pub mntd: CandidateEvaluation,
    pub sg: CandidateEvaluation,
}

impl Selection {
    pub fn chosen_eval(&self) -> &CandidateEvaluation {
        match self.chosen {
            Stream::MntdPgd => &self.mntd,
            Stream::SgPgd => &self.sg,
        }
    }

    pub fn selected_score(&self) -> f64 {
        self.chosen_eval().score()
    }
}

/// Argmax over the two per-image scores; ties go to higher SSIM, then MNTD-PGD.
pub fn select_images(
    mntd: &Image,
    sg: &Image,
    classifiers: &[Classifier],
    original: &Image,
) -> Result<Selection> {
    let (fm, sm) = evaluate_one(mntd, original, classifiers)?;
    let (fs, ss) = evaluate_one(sg, original, classifiers)?;
    let mntd = CandidateEvaluation {
        index: 0,
        fooled: fm,
        ssim: sm,
    };
    let sg = CandidateEvaluation {
        index: 0,
        fooled: fs,
        ssim: ss,
    };
    let chosen = pick(&mntd, &sg);
    Ok(Selection { chosen, mntd, sg })
}

fn pick(mntd: &CandidateEvaluation, sg: &CandidateEvaluation) -> Stream {
    let (a, b) = (mntd.score(), sg.score());
    if b > a || (b == a && sg.ssim > mntd.ssim) {
        Stream::SgPgd
    } else {
        Stream::MntdPgd
    }
}

fn check_origin(c: &AdversarialCandidate, original: &Image) -> Result<()> {
    if !c.image.same_shape(original) {
        return Err(shape("candidate and original differ in shape"));
    }
    let drift = c
        .reconstruct_original()
        .iter()
        .zip(original.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift > 1e-9 {
        return Err(invalid(format!(
            "{} candidate was not derived from this original (max deviation {drift})",
            c.stream
        )));
    }
    Ok(())
}

/// Picks between in-memory candidates of the two streams for the same original.
pub fn select<'a>(
    cand_m: &'a AdversarialCandidate,
    cand_s: &'a AdversarialCandidate,
    classifiers: &[Classifier],
    original: &Image,
) -> Result<(&'a AdversarialCandidate, Selection)> {
    check_origin(cand_m, original)?;
    check_origin(cand_s, original)?;
    let sel = select_images(&cand_m.image, &cand_s.image, classifiers, original)?;
    let chosen = match sel.chosen {
        Stream::MntdPgd => cand_m,
        Stream::SgPgd => cand_s,
    };
    Ok((chosen, sel))
}

/// Percentage of evaluations in which classifier `classifier` was fooled.
pub fn misclassification_rate(evals: &[CandidateEvaluation], classifier: usize) -> Result<f64> {
    if evals.is_empty() {
        return Err(invalid("no evaluations"));
    }
    let mut fooled = 0usize;
    for e in evals {
        let bit = e
            .fooled
            .get(classifier)
            .ok_or_else(|| invalid(format!("classifier index {classifier} out of range")))?;
        fooled += usize::from(*bit);
    }
    Ok(100.0 * fooled as f64 / evals.len() as f64)
}

/// Mean SSIM over every evaluation, successful or not.
pub fn average_ssim(evals: &[CandidateEvaluation]) -> Result<f64> {
    if evals.is_empty() {
        return Err(invalid("no evaluations"));
    }
    Ok(evals.iter().map(|e| e.ssim).sum::<f64>() / evals.len() as f64)
}

/// Mean SSIM over evaluations that fooled every classifier; `None` if there are none.
pub fn average_ssim_successful(evals: &[CandidateEvaluation]) -> Option<f64> {
    let ok: Vec<f64> = evals.iter().filter(|e| e.fooled_all()).map(|e| e.ssim).collect();
    if ok.is_empty() {
        None
    } else {
        Some(ok.iter().sum::<f64>() / ok.len() as f64)
    }
}
