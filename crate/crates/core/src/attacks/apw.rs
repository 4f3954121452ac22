use crate::error::{invalid, Result};
use crate::imgmath::Image;
use crate::models::{Label, SurrogateEnsemble};

/// Adaptive per-surrogate weights: `w_i ∝ exp(p_i(Fake) / temperature)`.
///
/// Surrogates that still confidently see `x_adv` as fake receive more weight.
pub fn apw_update(ensemble: &SurrogateEnsemble, x_adv: &Image, temperature: f64) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(invalid("empty ensemble"));
    }
    if !(temperature > 0.0) {
        return Err(invalid(format!("temperature must be positive, got {temperature}")));
    }
    let confidences = ensemble
        .members()
        .iter()
        .map(|m| Ok(m.probabilities(x_adv)?[Label::Fake.index()]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(softmax_weights(&confidences, temperature))
}

pub(crate) fn softmax_weights(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Architecture, Classifier, Params};

    /// A model whose logits are constant: only the dense bias is non-zero.
    fn biased(fake_logit: f64) -> Classifier {
        let arch = Architecture { conv1: 1, conv2: 1, pool: 1 };
        let mut p = Params::zeros(&arch);
        p.dense_b = vec![fake_logit, 0.0];
        Classifier::new(arch, p).unwrap()
    }

    #[test]
    fn equal_confidence_gives_uniform() {
        let e = SurrogateEnsemble::new(vec![biased(0.4), biased(0.4), biased(0.4)]).unwrap();
        let x = Image::filled(4, 4, 0.5).unwrap();
        let w = apw_update(&e, &x, 0.5).unwrap();
        for wi in w {
            assert!((wi - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn singleton_weight_is_one() {
        let e = SurrogateEnsemble::new(vec![biased(2.0)]).unwrap();
        let x = Image::filled(4, 4, 0.5).unwrap();
        assert_eq!(apw_update(&e, &x, 0.5).unwrap(), vec![1.0]);
    }

    #[test]
    fn direct_softmax_evaluation() {
        let w = softmax_weights(&[0.9, 0.1], 1.0);
        let z = 0.9f64.exp() + 0.1f64.exp();
        assert!((w[0] - 0.9f64.exp() / z).abs() < 1e-15);
        assert!((w[1] - 0.1f64.exp() / z).abs() < 1e-15);
        assert!(w[0] > w[1]);
    }

    #[test]
    fn permutation_equivariant_probability_vector() {
        // p(Fake) = sigmoid(fake_logit)
        let logits = [1.5, -0.3, 0.2, 3.0];
        let models: Vec<_> = logits.iter().map(|&l| biased(l)).collect();
        let x = Image::filled(4, 4, 0.5).unwrap();
        let w = apw_update(&SurrogateEnsemble::new(models.clone()).unwrap(), &x, 0.5).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<_> = perm.iter().map(|&i| models[i].clone()).collect();
        let wp = apw_update(&SurrogateEnsemble::new(permuted).unwrap(), &x, 0.5).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert!((wp[j] - w[i]).abs() < 1e-15);
        }
        // the most confident detector gets the largest weight
        assert!(w[3] > w[0] && w[0] > w[2] && w[2] > w[1]);
    }
}
