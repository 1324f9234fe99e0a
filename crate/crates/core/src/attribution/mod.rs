//! Relevance maps over trial images and the methods that produce them.

mod gradient;
mod lrp;
mod map;
mod pattern;

use std::fmt;
use std::str::FromStr;

pub use gradient::{gradient_saliency, smooth_grad, SmoothGradConfig};
pub use lrp::{lrp, LrpConfig};
pub use map::{
    average_relevance, default_windows, export_pgm, export_relevance_csv, normalize_relevance, window_aggregate,
    Grouping, RelevanceMap,
};
pub use pattern::{estimate_patterns, pattern_attribution, patternnet, PatternRegime, PatternSet};

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Gradient,
    SmoothGrad,
    SmoothGradSquared,
    LrpB,
    PatternNet,
    PatternAttribution,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Gradient,
        Method::SmoothGrad,
        Method::SmoothGradSquared,
        Method::LrpB,
        Method::PatternNet,
        Method::PatternAttribution,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::SmoothGrad => "smoothgrad",
            Method::SmoothGradSquared => "smoothgrad2",
            Method::LrpB => "lrp_b",
            Method::PatternNet => "patternnet",
            Method::PatternAttribution => "patternattr",
        }
    }

    pub fn needs_patterns(self) -> bool {
        matches!(self, Method::PatternNet | Method::PatternAttribution)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown attribution method {s:?} (known: {})", names.join(", ")))
            })
    }
}

/// Settings shared by all methods for one attribution run.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionConfig {
    pub smooth_grad: SmoothGradConfig,
    pub lrp: LrpConfig,
    pub regime: PatternRegime,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            smooth_grad: SmoothGradConfig::default(),
            lrp: LrpConfig::default(),
            regime: PatternRegime::Positive,
        }
    }
}

/// Runs `method` for one input. Pattern methods need `patterns`.
pub fn attribute(
    method: Method,
    net: &Network,
    patterns: Option<&PatternSet>,
    image: &Tensor,
    target: usize,
    cfg: &AttributionConfig,
) -> Result<RelevanceMap> {
    let need = || patterns.ok_or_else(|| Error::Usage(format!("{method} needs estimated patterns")));
    match method {
        Method::Gradient => gradient_saliency(net, image, target),
        Method::SmoothGrad => smooth_grad(net, image, target, &SmoothGradConfig { squared: false, ..cfg.smooth_grad.clone() }),
        Method::SmoothGradSquared => {
            smooth_grad(net, image, target, &SmoothGradConfig { squared: true, ..cfg.smooth_grad.clone() })
        }
        Method::LrpB => lrp(net, image, target, &cfg.lrp),
        Method::PatternNet => patternnet(net, need()?, image, target),
        Method::PatternAttribution => pattern_attribution(net, need()?, image, target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("gradcam".parse::<Method>().is_err());
    }
}
