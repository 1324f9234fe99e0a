//! Trial containers, synthetic generation, preprocessing and file I/O.

mod detrend;
mod io;
mod preprocess;
mod synth;
mod trial;
mod zca;

pub use detrend::linear_detrend;
pub use preprocess::{preprocess, preprocess_subject, PreprocessConfig};
pub use io::{load_trialset, read_matrix_csv, save_trialset, write_matrix_csv, MANIFEST_FILE, MASK_FILE, SIDECAR_FILE};
pub use synth::{generate_synthetic, ground_truth_mask, pink_noise, plan_loci, Locus, SynthConfig};
pub use trial::{EegTrial, TrialSet, DEFAULT_CLASS_NAMES, DEFAULT_SAMPLE_RATE};
pub use zca::{fit_zca, sample_covariance, WhiteningMode, WhiteningTransform, DEFAULT_EPSILON, JOINT_DIMENSION_CAP};
