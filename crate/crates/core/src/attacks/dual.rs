use super::apw::apw_update;
use super::candidate::AdversarialCandidate;
use super::config::{AttackConfig, PreprocessConfig, SgSurrogate};
use super::epsilon::{epsilon_search, EpsilonSearchResult};
use super::mntd::mntd_pgd_attack;
use super::sg::sg_pgd_attack;
use crate::error::{invalid, Result};
use crate::imgmath::Image;
use crate::models::SurrogateEnsemble;

/// Both stream candidates for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct DualStreamOutput {
    pub mntd: AdversarialCandidate,
    pub sg: AdversarialCandidate,
    /// Present when the budget came from the epsilon search.
    pub search: Option<EpsilonSearchResult>,
    /// Index of the surrogate SG-PGD attacked.
    pub sg_surrogate: usize,
}

/// Runs MNTD-PGD (searching the budget unless `cfg.epsilon` is set) and then
/// SG-PGD at the same budget.
pub fn run_dual_stream(
    x: &Image,
    ensemble: &SurrogateEnsemble,
    cfg: &AttackConfig,
    pre_cfg: &PreprocessConfig,
) -> Result<DualStreamOutput> {
    cfg.validate()?;
    pre_cfg.validate()?;
    let (mntd, search) = match cfg.epsilon {
        Some(eps) => (mntd_pgd_attack(x, ensemble, cfg, eps, pre_cfg)?, None),
        None => {
            let (res, cand) = epsilon_search(x, &cfg.epsilon_grid, |eps| {
                let c = mntd_pgd_attack(x, ensemble, cfg, eps, pre_cfg)?;
                Ok((c.all_surrogates_fooled(), c))
            })?;
            (cand, Some(res))
        }
    };
    let sg_index = match cfg.sg_surrogate {
        SgSurrogate::Index(i) if i < ensemble.len() => i,
        SgSurrogate::Index(i) => {
            return Err(invalid(format!(
                "SG-PGD surrogate index {i} out of range for {} surrogates",
                ensemble.len()
            )))
        }
        SgSurrogate::ApwHeaviest => heaviest(&apw_update(ensemble, &mntd.image, cfg.apw_temperature)?),
    };
    let mut sg = sg_pgd_attack(x, &ensemble.members()[sg_index], cfg, mntd.epsilon_used)?;
    sg.surrogate_fooled = ensemble.fooled_bits(&sg.image)?;
    Ok(DualStreamOutput {
        mntd,
        sg,
        search,
        sg_surrogate: sg_index,
    })
}

/// First index of the maximum weight.
fn heaviest(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > weights[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::test_support::{random_image, random_model};
    use crate::attacks::Stream;
    use crate::models::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Image, SurrogateEnsemble) {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ens = SurrogateEnsemble::new(vec![
            random_model(&mut rng, Architecture::default()),
            random_model(&mut rng, Architecture { conv1: 6, conv2: 4, pool: 2 }),
        ])
        .unwrap();
        (random_image(&mut rng, 16, 16), ens)
    }

    fn quick() -> AttackConfig {
        AttackConfig {
            iterations: 3,
            seed: 4,
            ..AttackConfig::default()
        }
    }

    #[test]
    fn tags_budgets_and_determinism() {
        let (x, ens) = setup();
        let cfg = quick();
        let a = run_dual_stream(&x, &ens, &cfg, &PreprocessConfig::default()).unwrap();
        let b = run_dual_stream(&x, &ens, &cfg, &PreprocessConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mntd.stream, Stream::MntdPgd);
        assert_eq!(a.sg.stream, Stream::SgPgd);
        for c in [&a.mntd, &a.sg] {
            assert!(c.delta.max_abs() <= c.epsilon_used + 1e-12);
            assert_eq!(c.surrogate_fooled.len(), 2);
        }
        let search = a.search.unwrap();
        assert_eq!(search.epsilon, a.mntd.epsilon_used);
        let scaled_max = cfg.epsilon_grid.base.last().unwrap() * search.grid_scale;
        assert!(a.mntd.epsilon_used <= scaled_max + 1e-15);
    }

    #[test]
    fn fixed_epsilon_skips_search() {
        let (x, ens) = setup();
        let cfg = AttackConfig {
            epsilon: Some(0.02),
            sg_surrogate: SgSurrogate::Index(1),
            ..quick()
        };
        let out = run_dual_stream(&x, &ens, &cfg, &PreprocessConfig::default()).unwrap();
        assert!(out.search.is_none());
        assert_eq!(out.sg_surrogate, 1);
        assert_eq!(out.mntd.epsilon_used, 0.02);
        assert_eq!(out.sg.epsilon_used, 0.02);
        let bad = AttackConfig {
            sg_surrogate: SgSurrogate::Index(5),
            ..cfg
        };
        assert!(run_dual_stream(&x, &ens, &bad, &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn heaviest_prefers_first_on_ties() {
        assert_eq!(heaviest(&[0.25, 0.5, 0.25]), 1);
        assert_eq!(heaviest(&[0.5, 0.5]), 0);
    }
}
