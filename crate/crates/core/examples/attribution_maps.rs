//! Trains one network and explains a held-out trial with every method.
//!
//! Prints the share of absolute relevance each method puts on the planted
//! burst pixels, against the share those pixels have of the whole map.

use eeg_roar::attribution::{
    attribute, estimate_patterns, normalize_relevance, AttributionConfig, Method, PatternRegime,
};
use eeg_roar::data::{generate_synthetic, SynthConfig};
use eeg_roar::model::{build_network, predict, train, ArchitectureConfig, TrainConfig};
use eeg_roar::seed::rng_for;
use eeg_roar::tensor::Tensor;

fn main() -> eeg_roar::Result<()> {
    let set = generate_synthetic(&SynthConfig::default(), 3)?;
    let (held_out, rest) = set.trials.split_first().expect("non-empty set");
    let images: Vec<Tensor> = rest.iter().map(|t| t.image()).collect();
    let refs: Vec<&Tensor> = images.iter().collect();
    let labels: Vec<usize> = rest.iter().map(|t| t.label).collect();

    let net = build_network(&ArchitectureConfig::desk(), held_out.channels(), held_out.samples(), &mut rng_for(3, &[0]))?;
    let trained = train(net, &refs, &labels, &TrainConfig::desk())?;
    let net = trained.network;
    let patterns = estimate_patterns(&net, &refs, PatternRegime::Positive)?;

    let image = held_out.image();
    let (predicted, _) = predict(&net, &image)?;
    println!("held-out label {} predicted {predicted}", held_out.label);

    let mask = set.ground_truth_mask.as_ref().expect("synthetic mask");
    println!("planted share of pixels: {:.3}", mask.mean());
    for method in Method::ALL {
        let map = attribute(method, &net, Some(&patterns), &image, held_out.label, &AttributionConfig::default())?;
        let map = normalize_relevance(&map);
        let abs = map.data.map(f64::abs);
        let on_mask: f64 = abs.data().iter().zip(mask.data()).map(|(r, m)| r * m).sum();
        println!("{:>12}: share on planted pixels {:.3}", method.name(), on_mask / abs.sum().max(1e-300));
    }
    Ok(())
}
