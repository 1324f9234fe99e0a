//! Library-level checks that span several modules.

use eeg_roar::data::{generate_synthetic, SynthConfig};
use eeg_roar::model::{run_loto, ArchitectureConfig, LotoOptions, TrainConfig};
use eeg_roar::stats::anova_oneway;
use rand::seq::SliceRandom;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

#[test]
fn shuffled_labels_stay_near_chance() {
    let mut set = generate_synthetic(&SynthConfig::default(), 11).unwrap();
    let mut labels: Vec<usize> = set.trials.iter().map(|t| t.label).collect();
    labels.shuffle(&mut eeg_roar::seed::rng_for(11, &[1]));
    for (t, l) in set.trials.iter_mut().zip(labels) {
        t.label = l;
    }
    let cfg = TrainConfig::desk();
    let out = run_loto(&set.trials, 4, &ArchitectureConfig::desk(), &cfg, &LotoOptions { fold_limit: Some(16) }).unwrap();
    assert_eq!(out.folds.len(), 16);
    assert!(out.accuracy() <= 0.5, "accuracy {} on shuffled labels", out.accuracy());
}

#[test]
fn anova_p_matches_reference_f_distribution() {
    let groups = vec![
        vec![4.2, 5.1, 3.9, 4.8, 5.5, 4.4],
        vec![5.9, 6.3, 5.2, 6.8, 6.1],
        vec![3.1, 2.8, 4.0, 3.6, 3.3, 2.9, 3.8],
    ];
    let r = anova_oneway(&groups).unwrap();
    let (d1, d2) = r.df.unwrap();
    let reference = 1.0 - FisherSnedecor::new(d1, d2).unwrap().cdf(r.statistic);
    assert!((r.p_value - reference).abs() < 1e-10 * reference.max(1e-300) + 1e-15);
}
