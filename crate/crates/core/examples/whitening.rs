//! Per-channel ZCA whitening; the whitened rows have identity covariance.

use eeg_roar::data::{fit_zca, generate_synthetic, sample_covariance, SynthConfig, WhiteningMode};

fn main() -> eeg_roar::Result<()> {
    let set = generate_synthetic(&SynthConfig::default(), 4)?;
    let zca = fit_zca(&set.trials, 0.0, WhiteningMode::PerChannel)?;
    let white = set.map_data(|t| zca.apply(&t.data))?;

    let rows: Vec<&[f64]> = white.trials.iter().flat_map(|t| t.data.data().chunks_exact(t.samples())).collect();
    let cov = sample_covariance(&rows)?;
    let n = cov.nrows();
    let off = (cov - nalgebra::DMatrix::<f64>::identity(n, n)).abs().max();
    println!("{} rows of {n} samples; max |cov - I| = {off:.2e}", rows.len());
    Ok(())
}
