//! Leave-one-trial-out accuracy of the desk network on a synthetic set.
//!
//! `cargo run --release --example train_loto -- [folds]`, where `folds`
//! limits the number of held-out trials (all 48 by default).

use std::time::Instant;

use eeg_roar::data::{generate_synthetic, SynthConfig};
use eeg_roar::model::{run_loto, ArchitectureConfig, LotoOptions, TrainConfig};

fn main() -> eeg_roar::Result<()> {
    let fold_limit = std::env::args().nth(1).and_then(|s| s.parse().ok());
    let set = generate_synthetic(&SynthConfig::default(), 1)?;
    let arch = ArchitectureConfig::desk();
    let train = TrainConfig::desk();

    let start = Instant::now();
    let outcome = run_loto(&set.trials, set.class_count(), &arch, &train, &LotoOptions { fold_limit })?;
    let m = outcome.metrics()?;
    println!(
        "{} folds: accuracy {:.3} precision {:.3} recall {:.3} f1 {:.3} ({:.1}s)",
        outcome.folds.len(),
        m.accuracy,
        m.precision,
        m.recall,
        m.f1,
        start.elapsed().as_secs_f64()
    );
    for row in outcome.confusion.rows() {
        println!("  {row:?}");
    }
    Ok(())
}
