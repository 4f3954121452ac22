//! Stage-one attack engine: MNTD-PGD over a weighted surrogate ensemble,
//! saliency-guided PGD, preprocessing and the epsilon search.

mod apw;
mod candidate;
mod config;
mod dual;
mod epsilon;
mod mntd;
mod preprocess;
mod sg;

pub use self::apw::apw_update;
pub use self::candidate::{AdversarialCandidate, Stream};
pub use self::config::{
    ApwSchedule, AttackConfig, EpsilonGrid, PreprocessConfig, PreprocessPlacement, SgSurrogate,
};
pub use self::dual::{run_dual_stream, DualStreamOutput};
pub use self::epsilon::{epsilon_search, EpsilonProbe, EpsilonSearchResult};
pub use self::mntd::{mntd_pgd_attack, mntd_pgd_attack_observed, mntd_step, MomentumState};
pub use self::preprocess::preprocess;
pub use self::sg::{masked_pgd, sg_pgd_attack, sg_pgd_attack_observed};
