//! Zero-phase (ZCA) whitening.
//!
//! The transform is `W = V (D + εI)^{-1/2} Vᵀ` where `V D Vᵀ` is the
//! eigendecomposition of the mean-centered sample covariance. `W` is
//! symmetric, so whitening does not rotate the feature space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::trial::EegTrial;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 0.01;
/// Largest vector dimension accepted for joint whitening.
pub const JOINT_DIMENSION_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhiteningMode {
    /// Every channel's time course is one observation; one transform of
    /// dimension `samples` is shared by all channels.
    PerChannel,
    /// Each flattened trial is one observation of dimension `channels * samples`.
    Joint,
}

#[derive(Clone, Debug)]
pub struct WhiteningTransform {
    pub mode: WhiteningMode,
    /// `V`: column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Tensor,
    /// Descending, clamped at zero.
    pub eigenvalues: Tensor,
    pub epsilon: f64,
    matrix: DMatrix<f64>,
}

fn observations(trials: &[EegTrial], mode: WhiteningMode) -> Result<(usize, Vec<&[f64]>)> {
    let first = trials
        .first()
        .ok_or_else(|| Error::Usage("whitening needs trials".into()))?;
    let (c, s) = (first.channels(), first.samples());
    if trials.iter().any(|t| t.channels() != c || t.samples() != s) {
        return Err(Error::Shape("trials differ in extents".into()));
    }
    Ok(match mode {
        WhiteningMode::PerChannel => (
            s,
            trials.iter().flat_map(|t| t.data.data().chunks_exact(s)).collect(),
        ),
        WhiteningMode::Joint => (c * s, trials.iter().map(|t| t.data.data()).collect()),
    })
}

/// Sample covariance (denominator `n - 1`) of equally long vectors.
pub fn sample_covariance(vectors: &[&[f64]]) -> Result<DMatrix<f64>> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::Usage("covariance needs at least 2 observations".into()));
    }
    let d = vectors[0].len();
    let mut mean = DVector::zeros(d);
    for v in vectors {
        mean += DVector::from_column_slice(v);
    }
    mean /= n as f64;
    let mut centered = DMatrix::zeros(d, n);
    for (j, v) in vectors.iter().enumerate() {
        for i in 0..d {
            centered[(i, j)] = v[i] - mean[i];
        }
    }
    Ok(&centered * centered.transpose() / (n - 1) as f64)
}

/// Fits a whitening transform on `trials` (at least 2).
pub fn fit_zca(trials: &[EegTrial], epsilon: f64, mode: WhiteningMode) -> Result<WhiteningTransform> {
    if trials.len() < 2 {
        return Err(Error::Usage("whitening needs at least 2 trials".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Usage(format!("epsilon {epsilon} must be non-negative")));
    }
    let (dim, obs) = observations(trials, mode)?;
    if mode == WhiteningMode::Joint && dim > JOINT_DIMENSION_CAP {
        return Err(Error::Usage(format!(
            "joint whitening of dimension {dim} exceeds cap {JOINT_DIMENSION_CAP}"
        )));
    }
    fit_vectors(&obs, epsilon, mode)
}

pub(crate) fn fit_vectors(obs: &[&[f64]], epsilon: f64, mode: WhiteningMode) -> Result<WhiteningTransform> {
    let cov = sample_covariance(obs)?;
    let dim = cov.nrows();
    if cov.iter().all(|&v| v == 0.0) {
        return Err(Error::Numeric("zero covariance".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut vectors = DMatrix::zeros(dim, dim);
    let mut values = Vec::with_capacity(dim);
    for (col, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        // deterministic sign: largest-magnitude component positive
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v = -v;
        }
        vectors.set_column(col, &v);
        values.push(eig.eigenvalues[src].max(0.0));
    }
    let scales = DVector::from_iterator(
        dim,
        values.iter().map(|&d| {
            let s = d + epsilon;
            if s > 0.0 {
                1.0 / s.sqrt()
            } else {
                0.0
            }
        }),
    );
    let matrix = &vectors * DMatrix::from_diagonal(&scales) * vectors.transpose();
    let eigenvectors = Tensor::new(&[dim, dim], vectors.transpose().as_slice().to_vec())?;
    Ok(WhiteningTransform {
        mode,
        eigenvectors,
        eigenvalues: Tensor::vector(values),
        epsilon,
        matrix,
    })
}

impl WhiteningTransform {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// The whitening matrix `V (D + εI)^{-1/2} Vᵀ`, row-major.
    pub fn matrix(&self) -> Tensor {
        Tensor::new(
            &[self.dimension(), self.dimension()],
            self.matrix.transpose().as_slice().to_vec(),
        )
        .expect("square")
    }

    fn apply_vector(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// Whitens one `[channels, samples]` trial image.
    pub fn apply(&self, data: &Tensor) -> Result<Tensor> {
        let d = self.dimension();
        let [_, samples] = *data.shape() else {
            return Err(Error::Shape(format!("expected [channels, samples], got {:?}", data.shape())));
        };
        let out = match self.mode {
            WhiteningMode::PerChannel => {
                if samples != d {
                    return Err(Error::Usage(format!(
                        "transform dimension {d} does not match {samples} samples"
                    )));
                }
                data.data()
                    .chunks_exact(d)
                    .flat_map(|row| self.apply_vector(row))
                    .collect()
            }
            WhiteningMode::Joint => {
                if data.len() != d {
                    return Err(Error::Usage(format!(
                        "transform dimension {d} does not match {} values",
                        data.len()
                    )));
                }
                self.apply_vector(data.data())
            }
        };
        Tensor::new(data.shape(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trials_from(rows: &[Vec<f64>], shape: (usize, usize)) -> Vec<EegTrial> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let data = Tensor::new(&[shape.0, shape.1], r.clone()).unwrap();
                EegTrial::new(data, 0, "s", format!("t{i}"), 500.0).unwrap()
            })
            .collect()
    }

    fn random_trials(n: usize, shape: (usize, usize), seed: u64) -> Vec<EegTrial> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix: Vec<f64> = (0..shape.1).map(|_| rng.random_range(0.2..3.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut prev = 0.0;
                (0..shape.0 * shape.1)
                    .map(|i| {
                        prev = 0.5 * prev + rng.random_range(-1.0..1.0) * mix[i % shape.1];
                        prev + 2.0
                    })
                    .collect()
            })
            .collect();
        trials_from(&rows, shape)
    }

    #[test]
    fn two_point_basis_is_diagonal() {
        let t = trials_from(&[vec![1.0, 0.0], vec![0.0, 1.0]], (1, 2));
        let w = fit_zca(&t, DEFAULT_EPSILON, WhiteningMode::Joint).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = &w.eigenvectors;
        let first = [v.get(&[0, 0]), v.get(&[1, 0])];
        let second = [v.get(&[0, 1]), v.get(&[1, 1])];
        assert!((first[0].abs() - h).abs() < 1e-12 && (first[0] + first[1]).abs() < 1e-12);
        assert!((second[0] - h).abs() < 1e-12 && (second[1] - h).abs() < 1e-12);
        assert!((w.eigenvalues.data()[0] - 1.0).abs() < 1e-12);
        assert!(w.eigenvalues.data()[1].abs() < 1e-12);
    }

    #[test]
    fn reconstruction_matches_covariance() {
        let t = random_trials(20, (1, 6), 1);
        let w = fit_zca(&t, 0.0, WhiteningMode::Joint).unwrap();
        let obs: Vec<&[f64]> = t.iter().map(|x| x.data.data()).collect();
        let cov = sample_covariance(&obs).unwrap();
        let d = 6;
        for i in 0..d {
            for j in 0..d {
                let r: f64 = (0..d)
                    .map(|k| w.eigenvectors.get(&[i, k]) * w.eigenvalues.data()[k] * w.eigenvectors.get(&[j, k]))
                    .sum();
                assert!((r - cov[(i, j)]).abs() < 1e-8);
            }
        }
        // orthonormal eigenvectors
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = (0..d).map(|k| w.eigenvectors.get(&[k, a]) * w.eigenvectors.get(&[k, b])).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let t = random_trials(50, (2, 8), 2);
        for mode in [WhiteningMode::Joint, WhiteningMode::PerChannel] {
            let w = fit_zca(&t, 0.0, mode).unwrap();
            let white: Vec<EegTrial> = t.iter().map(|x| x.with_data(w.apply(&x.data).unwrap()).unwrap()).collect();
            let (_, obs) = observations(&white, mode).unwrap();
            let cov = sample_covariance(&obs).unwrap();
            let dev = (&cov - DMatrix::identity(cov.nrows(), cov.nrows())).amax();
            assert!(dev < 1e-6, "{mode:?}: {dev}");
        }
    }

    #[test]
    fn transform_is_symmetric() {
        let t = random_trials(30, (1, 10), 3);
        let w = fit_zca(&t, DEFAULT_EPSILON, WhiteningMode::Joint).unwrap();
        let m = w.matrix();
        for i in 0..10 {
            for j in 0..10 {
                assert!((m.get(&[i, j]) - m.get(&[j, i])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn white_input_passes_through() {
        // standard basis vectors scaled so the covariance is exactly I
        let d = 4;
        let n = 2 * d;
        let scale = ((n - 1) as f64 / 2.0).sqrt();
        let rows: Vec<Vec<f64>> = (0..d)
            .flat_map(|i| {
                [1.0, -1.0].map(|s| (0..d).map(|j| if i == j { s * scale } else { 0.0 }).collect())
            })
            .collect();
        let t = trials_from(&rows, (1, d));
        let w = fit_zca(&t, 0.0, WhiteningMode::Joint).unwrap();
        let x = Tensor::new(&[1, d], vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        let y = w.apply(&x).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn large_epsilon_suppresses_output() {
        let t = random_trials(10, (1, 5), 4);
        let w = fit_zca(&t, 1e12, WhiteningMode::Joint).unwrap();
        assert!(w.apply(&t[0].data).unwrap().max_abs() < 1e-4);
    }

    #[test]
    fn errors() {
        let same = trials_from(&[vec![1.0, 2.0], vec![1.0, 2.0]], (1, 2));
        assert!(matches!(fit_zca(&same, 0.01, WhiteningMode::Joint), Err(Error::Numeric(_))));
        let t = random_trials(5, (1, 4), 5);
        assert!(fit_zca(&t[..1], 0.01, WhiteningMode::Joint).is_err());
        let w = fit_zca(&t, 0.01, WhiteningMode::Joint).unwrap();
        assert!(w.apply(&Tensor::zeros(&[1, 5])).is_err());
        let big = random_trials(3, (65, 64), 6);
        assert!(fit_zca(&big, 0.01, WhiteningMode::Joint).is_err());
    }
}
