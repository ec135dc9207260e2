//! Soft-label training against majority-vote training on a corpus where
//! annotators disagree at random around an item-level story probability.

use argus_core::corpus::Feature;
use argus_core::corpus::RatingDistribution;
use argus_core::metrics::brier;
use argus_core::scoring::{
    featurize, stratified_split, train_hard, train_soft, FeatureConfig, Hyper, TrainingExample,
};
use argus_core::synth::annotator_noise_items;

fn heldout_briers(seed: u64) -> (f64, f64) {
    let items = annotator_noise_items(1000, 5, seed);
    let labels: Vec<bool> = items.iter().map(|i| i.label).collect();
    let split = stratified_split(&labels, 0.8, seed).unwrap();
    let cfg = FeatureConfig::default();
    let feats: Vec<_> = items.iter().map(|i| featurize(&i.text, &cfg)).collect();
    let soft: Vec<TrainingExample> = split
        .train
        .iter()
        .map(|&i| TrainingExample {
            features: feats[i].clone(),
            target: items[i].target.clone(),
        })
        .collect();
    let hard: Vec<_> = split
        .train
        .iter()
        .map(|&i| (feats[i].clone(), items[i].label))
        .collect();
    let hyper = Hyper::default();
    let ms = train_soft(Feature::Story, &soft, &cfg, hyper, seed).unwrap();
    let mh = train_hard(Feature::Story, &hard, &cfg, hyper, seed).unwrap();
    let mean_brier = |m: &argus_core::scoring::SoftClassifier| {
        split
            .heldout
            .iter()
            .map(|&i| {
                let p: RatingDistribution = m.predict_features(&feats[i]);
                brier(&p, &items[i].target).unwrap()
            })
            .sum::<f64>()
            / split.heldout.len() as f64
    };
    (mean_brier(&ms), mean_brier(&mh))
}

#[test]
fn soft_labels_give_lower_brier() {
    let t = std::time::Instant::now();
    let mut wins = 0;
    for seed in 0..10 {
        let (s, h) = heldout_briers(seed);
        println!("seed {seed}: soft {s:.4} hard {h:.4}");
        if s <= h {
            wins += 1;
        }
    }
    println!("{wins}/10 in {:?}", t.elapsed());
    assert!(wins >= 8);
}
