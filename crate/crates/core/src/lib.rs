//! Full-reference image similarity metrics with explicit normalization,
//! data-range, binning and masking semantics, plus seeded distortions, a
//! proxy segmentation task, synthetic phantoms and an audit harness that
//! reproduces common metric-evaluation pitfalls.

pub mod cli;
pub mod distort;
pub mod downstream;
pub mod error;
pub mod harness;
pub mod image;
pub mod io;
pub mod metrics;
pub mod normalize;

pub use error::{Error, Result};
pub use image::{bounding_box, Dims, Image, IntensityStats, Mask, Rect};
pub use metrics::{MetricScore, MetricSpec};
pub use normalize::{DataRangePolicy, NormMethod, Preprocess};
