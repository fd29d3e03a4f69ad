//! Metric vocabulary, normalization ranges and roofline geometry.
//!
//! Every other module speaks in terms of the twelve [`Metric`]s defined here.
//! Raw values live in a [`CounterVector`] (physical units); the model-facing
//! representation is [`NormalizedCounters`], serialized as `d.ddd` strings.

mod counters;
mod geometry;
mod metric;
mod ranges;

pub use counters::{
    denormalize, format_unit, normalize, quantize, CounterBlock, CounterVector, NormalizedCounters,
    CEILING_CLAMP_TOLERANCE, QUANTUM_HALF,
};
pub use geometry::{arithmetic_intensity, attainable_performance, load_peaks, MachinePeaks, RooflinePoint};
pub use metric::{MemoryLevel, Metric, Unit, ARCHITECTURE_KEY, COMPILER_FLAGS_KEY};
pub use ranges::{MetricRange, NormRanges, RANGES_FILE_VERSION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RooflineError {
    #[error("{metric} = {value} is outside its range [{floor}, {ceiling}]")]
    OutOfRange { metric: Metric, value: f64, floor: f64, ceiling: f64 },
    #[error("no normalization range configured for {0}")]
    MissingRange(Metric),
    #[error("metric {0} is missing")]
    MissingMetric(Metric),
    #[error("invalid range for {metric}: floor {floor}, ceiling {ceiling}")]
    InvalidRange { metric: Metric, floor: f64, ceiling: f64 },
    #[error("{metric} = {value} is not a valid physical value")]
    InvalidValue { metric: Metric, value: f64 },
    #[error("normalized {metric} = {value} is outside [0, 1]")]
    NormalizedOutOfRange { metric: Metric, value: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("configuration: {0}")]
    Config(String),
}
