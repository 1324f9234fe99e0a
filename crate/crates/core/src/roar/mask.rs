use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::attribution::RelevanceMap;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Feature-admission mask: 1 keeps a pixel, 0 removes it.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    pub data: Tensor,
    pub removal_rate: f64,
    pub source: String,
}

impl BinaryMask {
    pub fn removed(&self) -> usize {
        self.data.data().iter().filter(|&&v| v == 0.0).count()
    }

    pub fn removed_fraction(&self) -> f64 {
        self.removed() as f64 / self.data.len() as f64
    }

    fn from_removed(shape: &[usize], removed: impl IntoIterator<Item = usize>, r: f64, source: &str) -> Self {
        let mut data = Tensor::filled(shape, 1.0);
        for i in removed {
            data.data_mut()[i] = 0.0;
        }
        Self {
            data,
            removal_rate: r,
            source: source.to_string(),
        }
    }
}

fn check_rate(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Usage(format!("removal rate {r} outside [0, 1]")));
    }
    Ok(())
}

fn count_for(r: f64, n: usize) -> usize {
    ((r * n as f64).round() as usize).min(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskRule {
    /// Remove the `round(r * pixels)` most relevant pixels.
    Rank,
    /// Keep exactly the pixels whose relevance is `<= r`.
    Threshold,
}

/// Indices sorted by descending `score`, ties kept in index order.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

pub fn make_mask(relevance: &RelevanceMap, r: f64, rule: MaskRule) -> Result<BinaryMask> {
    check_rate(r)?;
    let shape = relevance.data.shape();
    let v = relevance.data.data();
    Ok(match rule {
        MaskRule::Rank => {
            let order = ranked(v);
            BinaryMask::from_removed(shape, order[..count_for(r, v.len())].iter().copied(), r, &relevance.method)
        }
        MaskRule::Threshold => {
            BinaryMask::from_removed(shape, (0..v.len()).filter(|&i| v[i] > r), r, &relevance.method)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fill {
    Zero,
    /// The trial's own per-channel mean.
    ChannelMean,
}

/// Masks a `[channels, samples]` trial; admitted pixels are copied as is.
pub fn apply_mask(data: &Tensor, mask: &BinaryMask, fill: Fill) -> Result<Tensor> {
    data.check_same_shape(&mask.data)?;
    if data.ndim() != 2 {
        return Err(Error::Shape(format!("trial must be 2-D, got {:?}", data.shape())));
    }
    let s = data.shape()[1];
    let mut out = data.clone();
    for (row, keep) in out.data_mut().chunks_exact_mut(s).zip(mask.data.data().chunks_exact(s)) {
        let value = match fill {
            Fill::Zero => 0.0,
            Fill::ChannelMean => row.iter().sum::<f64>() / s as f64,
        };
        for (x, &k) in row.iter_mut().zip(keep) {
            if k == 0.0 {
                *x = value;
            }
        }
    }
    Ok(out)
}

/// Exactly `round(r * pixels)` zeros at uniformly drawn positions.
pub fn uniform_random_mask(shape: &[usize], r: f64, rng: &mut impl Rng) -> Result<BinaryMask> {
    check_rate(r)?;
    let n: usize = shape.iter().product();
    let picked = index::sample(rng, n, count_for(r, n));
    Ok(BinaryMask::from_removed(shape, picked.into_iter(), r, "uniform"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceMode {
    Random,
    /// Rank slices by mean relevance, highest first.
    MethodSorted,
}

/// The reference slice of 47 samples on a 752-sample trial, scaled to `samples`.
pub fn default_slice_len(samples: usize) -> usize {
    ((47.0 * samples as f64 / 752.0).round() as usize).clamp(1, samples.max(1))
}

/// Tiles each channel into `slice_len`-sample slices (the last may be
/// shorter) and removes the top `round(r * slices)` whole.
pub fn slice_masks(
    shape: &[usize],
    slice_len: usize,
    mode: SliceMode,
    relevance: Option<&RelevanceMap>,
    r: f64,
    rng: &mut impl Rng,
) -> Result<BinaryMask> {
    check_rate(r)?;
    let [c, s] = *shape else {
        return Err(Error::Shape(format!("slice masks need [channels, samples], got {shape:?}")));
    };
    if slice_len == 0 || slice_len > s {
        return Err(Error::Usage(format!("slice length {slice_len} must be in 1..={s}")));
    }
    let per_channel = s.div_ceil(slice_len);
    let slices: Vec<(usize, std::ops::Range<usize>)> = (0..c)
        .flat_map(|ch| (0..per_channel).map(move |k| (ch, k * slice_len..((k + 1) * slice_len).min(s))))
        .collect();
    let order: Vec<usize> = match mode {
        SliceMode::Random => {
            let mut o: Vec<usize> = (0..slices.len()).collect();
            o.shuffle(rng);
            o
        }
        SliceMode::MethodSorted => {
            let map = relevance.ok_or_else(|| Error::Usage("method-sorted slices need a relevance map".into()))?;
            if map.data.shape() != shape {
                return Err(Error::Shape(format!(
                    "relevance {:?} does not match mask extents {shape:?}",
                    map.data.shape()
                )));
            }
            let v = map.data.data();
            let means: Vec<f64> = slices
                .iter()
                .map(|(ch, t)| v[ch * s + t.start..ch * s + t.end].iter().sum::<f64>() / t.len() as f64)
                .collect();
            ranked(&means)
        }
    };
    let k = count_for(r, slices.len());
    let removed = order[..k].iter().flat_map(|&i| {
        let (ch, t) = &slices[i];
        (t.start..t.end).map(move |j| ch * s + j)
    });
    let source = match (mode, relevance) {
        (SliceMode::Random, _) => "random_slices".to_string(),
        (SliceMode::MethodSorted, Some(m)) => format!("method_slices:{}", m.method),
        (SliceMode::MethodSorted, None) => unreachable!("checked above"),
    };
    Ok(BinaryMask::from_removed(shape, removed, r, &source))
}
