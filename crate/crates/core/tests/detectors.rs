use dualstream::harness::synth::{synthesize_corpus, synthesize_fakes};
use dualstream::harness::RunConfig;
use dualstream::models::{evaluate_accuracy, train_detector, Label, SurrogateEnsemble, TrainConfig};

// Default corpus and training settings should give detectors that actually
// detect; otherwise attack success rates mean nothing.
#[test]
fn default_detectors_generalize() {
    let cfg = RunConfig::default();
    let sc = cfg.synth;
    let corpus = synthesize_corpus(sc.n_real, sc.n_fake, sc.size, sc.artifact_amplitude, 501).unwrap();
    let held = synthesize_corpus(100, 100, sc.size, sc.artifact_amplitude, 502).unwrap();
    let fakes = synthesize_fakes(50, sc.size, sc.artifact_amplitude, 503).unwrap();
    let mut models = Vec::new();
    for d in &cfg.detectors {
        let tc = TrainConfig {
            seed: d.seed,
            ..TrainConfig::default()
        };
        let (m, report) = train_detector(&corpus, d.architecture(), &tc).unwrap();
        let (acc, _) = evaluate_accuracy(&m, &held).unwrap();
        let caught = fakes.iter().filter(|x| m.predict(x).unwrap() == Label::Fake).count();
        eprintln!("{}: held-out {acc}, clean fakes caught {caught}/{}", d.name, fakes.len());
        assert!(acc >= 0.97, "{}: held-out accuracy {acc}, train report {report:?}", d.name);
        assert!(caught * 100 >= fakes.len() * 95, "{}: caught {caught}", d.name);
        models.push(m);
    }
    // Before any attack, no clean fake gets past the whole pool.
    let ens = SurrogateEnsemble::new(models).unwrap();
    for x in &fakes {
        assert!(ens.fooled_bits(x).unwrap().iter().any(|b| !b));
    }
}
