//! Daily traffic forecasting for highway toll stations.
//!
//! The crate covers the whole pipeline: CSV ingestion into gap-aware daily
//! series ([`series`]), outlier smoothing ([`preprocess`]), calendar feature
//! matrices ([`features`]), from-scratch regressors ([`tree`], [`mlp`],
//! [`lstm`]), SMAPE-based evaluation ([`eval`]), SVG charts ([`plot`]) and a deterministic
//! synthetic data generator ([`synth`]). The `traffic-forecast` binary wraps
//! it as a batch CLI ([`cli`]).

pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod hexfloat;
pub mod lstm;
pub mod mlp;
pub mod plot;
pub mod model;
pub mod preprocess;
pub mod series;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use series::{DailySeries, SplitSpec, TrafficRecord, VehicleClass};

#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/series.md")]
    pub mod series {}
    #[doc = include_str!("../../../book/src/cleaning.md")]
    pub mod cleaning {}
    #[doc = include_str!("../../../book/src/features.md")]
    pub mod features {}
    #[doc = include_str!("../../../book/src/trees.md")]
    pub mod trees {}
    #[doc = include_str!("../../../book/src/neural.md")]
    pub mod neural {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    pub mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    pub mod reproducibility {}
}
