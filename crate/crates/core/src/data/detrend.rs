use std::ops::Range;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per channel, fits a least-squares line over `baseline` and subtracts
/// it across the whole trial. A one-sample span subtracts a constant.
pub fn linear_detrend(data: &Tensor, baseline: Range<usize>) -> Result<Tensor> {
    let [channels, samples] = *data.shape() else {
        return Err(Error::Shape(format!("detrend expects [channels, samples], got {:?}", data.shape())));
    };
    if baseline.is_empty() || baseline.end > samples {
        return Err(Error::Usage(format!(
            "baseline span {baseline:?} invalid for {samples} samples"
        )));
    }
    let n = baseline.len() as f64;
    let t_mean = baseline.clone().map(|t| t as f64).sum::<f64>() / n;
    let t_var: f64 = baseline.clone().map(|t| (t as f64 - t_mean).powi(2)).sum();
    let mut out = data.clone();
    for row in out.data_mut().chunks_exact_mut(samples).take(channels) {
        let y_mean = row[baseline.clone()].iter().sum::<f64>() / n;
        let slope = if t_var > 0.0 {
            baseline
                .clone()
                .map(|t| (t as f64 - t_mean) * (row[t] - y_mean))
                .sum::<f64>()
                / t_var
        } else {
            0.0
        };
        for (t, v) in row.iter_mut().enumerate() {
            *v -= y_mean + slope * (t as f64 - t_mean);
        }
    }
    Ok(out)
}
