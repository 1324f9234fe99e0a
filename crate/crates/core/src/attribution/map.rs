use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::Path;

use crate::data::write_matrix_csv;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Relevance over a `[channels, samples]` input image.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceMap {
    pub data: Tensor,
    /// `None` for maps averaged across classes.
    pub target_class: Option<usize>,
    pub method: String,
    pub normalized: bool,
}

impl RelevanceMap {
    /// Wraps an input-shaped relevance tensor. `[1, c, s]` images become
    /// `[c, s]`; flat inputs become a single row.
    pub fn from_input(relevance: Tensor, target_class: usize, method: &str) -> Result<Self> {
        let shape = relevance.shape().to_vec();
        let data = match shape.as_slice() {
            [c, s] => relevance.reshape(&[*c, *s])?,
            [1, c, s] => relevance.reshape(&[*c, *s])?,
            _ => {
                let n = relevance.len();
                relevance.reshape(&[1, n])?
            }
        };
        Ok(Self {
            data,
            target_class: Some(target_class),
            method: method.to_string(),
            normalized: false,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn samples(&self) -> usize {
        self.data.shape()[1]
    }

    /// Relevance image with a binary map's 0/1 values, e.g. a planted mask.
    pub fn from_mask(mask: &Tensor, method: &str) -> Result<Self> {
        if mask.ndim() != 2 {
            return Err(Error::Shape(format!("mask must be 2-D, got {:?}", mask.shape())));
        }
        Ok(Self {
            data: mask.clone(),
            target_class: None,
            method: method.to_string(),
            normalized: true,
        })
    }
}

/// Divides by the largest absolute value; all-zero maps are left as is.
pub fn normalize_relevance(map: &RelevanceMap) -> RelevanceMap {
    let m = map.data.max_abs();
    let data = if m > 0.0 { map.data.map(|v| v / m) } else { map.data.clone() };
    RelevanceMap {
        data,
        normalized: true,
        ..map.clone()
    }
}

fn mean_of(maps: &[&RelevanceMap]) -> Result<Tensor> {
    let first = maps.first().ok_or_else(|| Error::Usage("cannot average an empty list of maps".into()))?;
    let mut acc = first.data.clone();
    for m in &maps[1..] {
        acc.add_scaled(&m.data, 1.0)?;
    }
    acc.scale(1.0 / maps.len() as f64);
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    /// One mean per target class, in class order.
    PerClass,
    /// Equal-weight mean of the per-class means.
    AcrossClasses,
}

/// Arithmetic means of congruent maps.
pub fn average_relevance(maps: &[RelevanceMap], grouping: Grouping) -> Result<Vec<RelevanceMap>> {
    if maps.is_empty() {
        return Err(Error::Usage("cannot average an empty list of maps".into()));
    }
    let mut by_class: BTreeMap<Option<usize>, Vec<&RelevanceMap>> = BTreeMap::new();
    for m in maps {
        by_class.entry(m.target_class).or_default().push(m);
    }
    let method = maps[0].method.clone();
    let per_class: Vec<RelevanceMap> = by_class
        .into_iter()
        .map(|(class, group)| {
            Ok(RelevanceMap {
                data: mean_of(&group)?,
                target_class: class,
                method: method.clone(),
                normalized: false,
            })
        })
        .collect::<Result<_>>()?;
    match grouping {
        Grouping::PerClass => Ok(per_class),
        Grouping::AcrossClasses => {
            let refs: Vec<&RelevanceMap> = per_class.iter().collect();
            Ok(vec![RelevanceMap {
                data: mean_of(&refs)?,
                target_class: None,
                method,
                normalized: false,
            }])
        }
    }
}

/// Five half-overlapping windows of a third of the trial each. At 752
/// samples this is [0,250), [125,375), [250,500), [375,625), [500,750).
pub fn default_windows(samples: usize) -> Vec<Range<usize>> {
    let width = (samples / 3).max(1);
    let step = (width / 2).max(1);
    (0..5)
        .map(|k| k * step..k * step + width)
        .filter(|w| w.end <= samples)
        .collect()
}

/// `[channels, windows]` matrix of per-channel window means.
pub fn window_aggregate(map: &RelevanceMap, windows: &[Range<usize>]) -> Result<Tensor> {
    let (c, s) = (map.channels(), map.samples());
    for w in windows {
        if w.is_empty() {
            return Err(Error::Usage(format!("empty window {w:?}")));
        }
        if w.end > s {
            return Err(Error::Usage(format!("window {w:?} exceeds {s} samples")));
        }
    }
    if windows.is_empty() {
        return Err(Error::Usage("no windows given".into()));
    }
    let mut out = Vec::with_capacity(c * windows.len());
    for row in map.data.data().chunks_exact(s) {
        for w in windows {
            out.push(row[w.clone()].iter().sum::<f64>() / w.len() as f64);
        }
    }
    Tensor::new(&[c, windows.len()], out)
}

/// Writes `<stem>.csv` (channels x samples) and `<stem>.meta`.
pub fn export_relevance_csv(map: &RelevanceMap, stem: &Path, seed: Option<u64>) -> Result<()> {
    write_matrix_csv(&stem.with_extension("csv"), &map.data)?;
    let class = map.target_class.map_or("all".to_string(), |c| c.to_string());
    let seed = seed.map_or("none".to_string(), |s| s.to_string());
    let meta = format!(
        "method={} class={} normalized={} seed={}\n",
        map.method, class, map.normalized, seed
    );
    let path = stem.with_extension("meta");
    fs::write(&path, meta).map_err(|e| Error::io(&path, e))
}

/// Binary PGM heatmap. Values map linearly from `[-m, m]` to `[0, 255]`
/// where `m` is the largest absolute value.
pub fn export_pgm(data: &Tensor, path: &Path) -> Result<()> {
    if data.ndim() != 2 {
        return Err(Error::Shape(format!("PGM export needs a 2-D map, got {:?}", data.shape())));
    }
    let (h, w) = (data.shape()[0], data.shape()[1]);
    let m = data.max_abs();
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(data.data().iter().map(|&v| {
        let u = if m > 0.0 { (v / m + 1.0) / 2.0 } else { 0.5 };
        (u * 255.0).round().clamp(0.0, 255.0) as u8
    }));
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(v: Vec<f64>, rows: usize, class: usize) -> RelevanceMap {
        let cols = v.len() / rows;
        RelevanceMap {
            data: Tensor::new(&[rows, cols], v).unwrap(),
            target_class: Some(class),
            method: "t".into(),
            normalized: false,
        }
    }

    #[test]
    fn normalization_cases() {
        let n = normalize_relevance(&map(vec![2.0, -4.0], 1, 0));
        assert_eq!(n.data.data(), &[0.5, -1.0]);
        assert!(n.normalized);
        let z = normalize_relevance(&map(vec![0.0, 0.0], 1, 0));
        assert_eq!(z.data.data(), &[0.0, 0.0]);
        assert_eq!(normalize_relevance(&n), n);
    }

    proptest! {
        #[test]
        fn normalization_keeps_signs_and_extrema(v in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
            let m = map(v.clone(), 1, 0);
            let n = normalize_relevance(&m);
            prop_assert_eq!(n.data.argmax(), m.data.argmax());
            let argmin = |t: &Tensor| t.map(|x| -x).argmax();
            prop_assert_eq!(argmin(&n.data), argmin(&m.data));
            for (a, b) in v.iter().zip(n.data.data()) {
                prop_assert_eq!(a.signum() * (*a != 0.0) as i32 as f64, b.signum() * (*b != 0.0) as i32 as f64);
                prop_assert!(b.abs() <= 1.0);
            }
            prop_assert_eq!(normalize_relevance(&n), n.clone());
        }
    }

    #[test]
    fn averaging_cases() {
        let a = map(vec![1.0, -2.0, 3.0, 0.5], 2, 0);
        assert_eq!(average_relevance(&[a.clone()], Grouping::PerClass).unwrap()[0].data, a.data);
        let neg = RelevanceMap {
            data: a.data.map(|v| -v),
            ..a.clone()
        };
        let avg = &average_relevance(&[a.clone(), neg], Grouping::PerClass).unwrap()[0];
        assert!(avg.data.data().iter().all(|&v| v == 0.0));
        assert!(average_relevance(&[], Grouping::PerClass).is_err());
    }

    #[test]
    fn across_class_mean_weights_classes_equally() {
        // class 0 has three maps, classes 1..3 one each
        let mut maps = Vec::new();
        let class_maps: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0],
            vec![3.0, 5.0],
            vec![-1.0, 0.25],
            vec![7.0, 1.0],
        ];
        for _ in 0..3 {
            maps.push(map(class_maps[0].clone(), 1, 0));
        }
        for k in 1..4 {
            maps.push(map(class_maps[k].clone(), 1, k));
        }
        let all = &average_relevance(&maps, Grouping::AcrossClasses).unwrap()[0];
        for j in 0..2 {
            let direct = (class_maps[0][j] + class_maps[1][j] + class_maps[2][j] + class_maps[3][j]) / 4.0;
            assert!((all.data.data()[j] - direct).abs() < 1e-12);
        }
        assert_eq!(all.target_class, None);
        assert_eq!(average_relevance(&maps, Grouping::PerClass).unwrap().len(), 4);
    }

    #[test]
    fn windows_match_reference_layout() {
        let w = default_windows(752);
        assert_eq!(w, vec![0..250, 125..375, 250..500, 375..625, 500..750]);
        assert_eq!(default_windows(128).len(), 5);
    }

    #[test]
    fn window_aggregate_identities() {
        let m = map(vec![0.3; 24], 2, 0);
        let agg = window_aggregate(&m, &default_windows(12)).unwrap();
        assert!(agg.data().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let v: Vec<f64> = (0..24).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let m = map(v, 2, 0);
        let parts = [0..5, 5..7, 7..12];
        let agg = window_aggregate(&m, &parts).unwrap();
        for c in 0..2 {
            let weighted: f64 = parts.iter().enumerate().map(|(k, p)| agg.get(&[c, k]) * p.len() as f64).sum::<f64>() / 12.0;
            let global = m.data.data()[c * 12..(c + 1) * 12].iter().sum::<f64>() / 12.0;
            assert!((weighted - global).abs() < 1e-12);
        }
        assert!(window_aggregate(&m, &[3..3]).is_err());
        assert!(window_aggregate(&m, &[3..13]).is_err());
    }

    #[test]
    fn exports_write_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = normalize_relevance(&map(vec![1.0, -2.0, 0.0, 0.5], 2, 3));
        export_relevance_csv(&m, &dir.path().join("lrp_b"), Some(4)).unwrap();
        let meta = fs::read_to_string(dir.path().join("lrp_b.meta")).unwrap();
        assert_eq!(meta, "method=t class=3 normalized=true seed=4\n");
        let back = crate::data::read_matrix_csv(&dir.path().join("lrp_b.csv")).unwrap();
        assert_eq!(back, m.data);
        export_pgm(&m.data, &dir.path().join("m.pgm")).unwrap();
        let bytes = fs::read(dir.path().join("m.pgm")).unwrap();
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&bytes[bytes.len() - 4..], &[191, 0, 128, 159]);
    }
}
