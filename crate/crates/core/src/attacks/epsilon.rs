//! Minimal-budget search: ascending coarse grid, then bisection between the
//! last failing and first succeeding budgets.

use serde::{Deserialize, Serialize};

use super::config::EpsilonGrid;
use crate::error::Result;
use crate::imgmath::{pixel_variance, Image};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonProbe {
    pub epsilon: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSearchResult {
    pub epsilon: f64,
    pub succeeded: bool,
    /// Every probe in evaluation order.
    pub trace: Vec<EpsilonProbe>,
    /// Variance multiplier applied to the base grid.
    pub grid_scale: f64,
}

/// Runs `probe(epsilon) -> (success, artifact)` over the variance-scaled grid.
///
/// Returns the smallest succeeding budget with its artifact, or the largest
/// grid budget and its artifact if nothing succeeds.
pub fn epsilon_search<T>(
    x: &Image,
    grid: &EpsilonGrid,
    mut probe: impl FnMut(f64) -> Result<(bool, T)>,
) -> Result<(EpsilonSearchResult, T)> {
    grid.validate()?;
    let scale = grid.scale_for_variance(pixel_variance(x));
    let mut trace = Vec::new();
    let mut last_fail: Option<f64> = None;
    let mut found: Option<(f64, T)> = None;
    let mut last_artifact = None;
    for &base in &grid.base {
        let eps = base * scale;
        let (ok, artifact) = probe(eps)?;
        trace.push(EpsilonProbe { epsilon: eps, success: ok });
        if ok {
            found = Some((eps, artifact));
            break;
        }
        last_fail = Some(eps);
        last_artifact = Some((eps, artifact));
    }
    let Some((mut hi, mut best)) = found else {
        let (eps, artifact) = last_artifact.expect("grid is non-empty");
        return Ok((
            EpsilonSearchResult {
                epsilon: eps,
                succeeded: false,
                trace,
                grid_scale: scale,
            },
            artifact,
        ));
    };
    if let Some(mut lo) = last_fail {
        for _ in 0..grid.bisection_steps {
            let mid = 0.5 * (lo + hi);
            let (ok, artifact) = probe(mid)?;
            trace.push(EpsilonProbe { epsilon: mid, success: ok });
            if ok {
                hi = mid;
                best = artifact;
            } else {
                lo = mid;
            }
        }
    }
    Ok((
        EpsilonSearchResult {
            epsilon: hi,
            succeeded: true,
            trace,
            grid_scale: scale,
        },
        best,
    ))
}
