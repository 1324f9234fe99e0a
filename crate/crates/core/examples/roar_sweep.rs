//! A small remove-and-retrain sweep for one method and two baselines.
//!
//! Each condition removes a fraction of pixels, retrains from scratch and
//! reports LOTO accuracy. Runs 8 folds per point to stay quick.

use eeg_roar::attribution::{AttributionConfig, Method};
use eeg_roar::data::{generate_synthetic, SynthConfig};
use eeg_roar::model::{ArchitectureConfig, LotoOptions, TrainConfig};
use eeg_roar::roar::{base_run, roar_curves, run_roar, Condition, RoarConfig, RoarSubject};

fn main() -> eeg_roar::Result<()> {
    let set = generate_synthetic(&SynthConfig::default(), 2)?;
    let arch = ArchitectureConfig::desk();
    let train = TrainConfig::desk();
    let loto = LotoOptions { fold_limit: Some(8) };
    let method = Method::SmoothGradSquared;

    let base = base_run(&set.trials, 4, &arch, &train, &[method], &AttributionConfig::default(), &loto)?;
    println!("base accuracy {:.3}", base.outcome.accuracy());

    let subject = RoarSubject {
        subject: "s01",
        trials: &set.trials,
        base: &base,
        ground_truth: set.ground_truth_mask.as_ref(),
    };
    let cfg = RoarConfig { removal_rates: vec![0.2, 0.5, 0.9], loto, seed: 2, ..RoarConfig::default() };
    let conditions = [Condition::Method(method), Condition::GroundTruth, Condition::Uniform];
    let points = run_roar(&subject, 4, &arch, &train, &conditions, &cfg)?;

    for curve in roar_curves(&points) {
        let line: Vec<String> = curve.points.iter().map(|p| format!("r={} {:.3}", p.r, p.mean)).collect();
        println!("{:>14}: {}", curve.condition.to_string(), line.join("  "));
    }
    Ok(())
}
