use carimorph_core::losses::LossWeights;
use carimorph_core::toy::{evaluate_generator, train_toy_gan, ToyEvaluation, ToyScenario, ToyScenarioConfig, ToyTrainConfig};

// Thresholds fixed after a pilot run with these seeds.
const MIN_FULL_COSINE: f64 = 0.9;
const MIN_FULL_RATIO: f64 = 1.0;

fn run(scenario: &ToyScenario, weights: LossWeights) -> ToyEvaluation {
    let cfg = ToyTrainConfig {
        steps: 500,
        seed: 11,
        ..Default::default()
    };
    let out = train_toy_gan(&scenario.dataset, &scenario.model, &scenario.mean, &weights, &cfg).unwrap();
    assert_eq!(out.trace.len(), 500);
    evaluate_generator(&out.generator, &scenario.dataset, &scenario.model, &scenario.mean).unwrap()
}

#[test]
fn ablation_ordering() {
    let scenario = ToyScenario::generate(&ToyScenarioConfig::default()).unwrap();
    let full = run(&scenario, LossWeights::default());
    let adv = run(&scenario, LossWeights::adversarial_only());
    let no_cari = run(&scenario, LossWeights::new(2.0, 0.0).unwrap());
    let no_cha = run(&scenario, LossWeights::new(0.0, 20.0).unwrap());
    eprintln!("full {full:?}\nadv {adv:?}\nno_cari {no_cari:?}\nno_cha {no_cha:?}");
    assert!(full.mean_cosine > MIN_FULL_COSINE);
    assert!(full.mean_ratio > MIN_FULL_RATIO);
    assert!(full.mean_cosine > adv.mean_cosine);
    assert!(full.mean_ratio > no_cari.mean_ratio);
}
