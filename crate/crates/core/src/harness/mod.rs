//! Configuration, synthetic data and the file-based experiment pipeline.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use config::{mix_seed, DetectorSpec, PathsConfig, ReportConfig, RunConfig};
pub use pipeline::{
    cmd_attack, cmd_evaluate, cmd_select, cmd_synth, cmd_train, detector_seed, image_seed, list_pngs, load_corpus, run_all, CandidateMetadata,
    CandidateRecord, ImageFailure, SelectionFile, SelectionRecord, StageSummary, StreamScore, TrainedDetector,
    TrainingSummary,
};
pub use report::{build_report, summarize, ExperimentReport, ImageRecord, SetSummary, Summary, TargetRate};
pub use synth::SynthConfig;
