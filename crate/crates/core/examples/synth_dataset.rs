//! Generates a synthetic EEG set and writes it to a directory.
//!
//! `cargo run --example synth_dataset -- out/synth 7`

use std::path::PathBuf;

use eeg_roar::data::{generate_synthetic, save_trialset, SynthConfig};

fn main() -> eeg_roar::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "out/synth".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let cfg = SynthConfig::default();
    let set = generate_synthetic(&cfg, seed)?;
    for (label, n) in set.class_counts() {
        println!("{:>6}: {n} trials", set.class_names[label]);
    }
    if let Some(mask) = &set.ground_truth_mask {
        println!("planted pixels: {:.1}% of {}x{}", 100.0 * mask.mean(), cfg.channels, cfg.samples);
    }
    save_trialset(&set, &dir)?;
    println!("wrote {} trials to {}", set.len(), dir.display());
    Ok(())
}
