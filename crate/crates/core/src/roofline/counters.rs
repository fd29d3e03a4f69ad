use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Metric, NormRanges, RooflineError, ARCHITECTURE_KEY, COMPILER_FLAGS_KEY};

/// Relative overshoot above a ceiling (as a fraction of the range span) that
/// is clamped rather than rejected.
pub const CEILING_CLAMP_TOLERANCE: f64 = 0.001;

/// Largest change a value may undergo from 3-decimal quantization.
pub const QUANTUM_HALF: f64 = 0.0005;

/// Raw metrics in physical units. Absent metrics are simply not in the map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CounterVector(BTreeMap<Metric, f64>);

impl CounterVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a value, enforcing finiteness, non-negativity and the 100 %
    /// bound for hit rates.
    pub fn set(&mut self, metric: Metric, value: f64) -> Result<(), RooflineError> {
        if !value.is_finite() || value < 0.0 {
            return Err(RooflineError::InvalidValue { metric, value });
        }
        if matches!(metric, Metric::L1HitRate | Metric::L2HitRate) && value > 100.0 * (1.0 + CEILING_CLAMP_TOLERANCE) {
            return Err(RooflineError::InvalidValue { metric, value });
        }
        self.0.insert(metric, value);
        Ok(())
    }

    pub fn with(mut self, metric: Metric, value: f64) -> Result<Self, RooflineError> {
        self.set(metric, value)?;
        Ok(self)
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.0.get(&metric).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, f64)> + '_ {
        self.0.iter().map(|(&m, &v)| (m, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.0.len() == Metric::ALL.len()
    }

    /// Applies the clamping policy against `ranges` and checks every value is
    /// inside its range.
    pub fn clamped(&self, ranges: &NormRanges) -> Result<CounterVector, RooflineError> {
        let mut out = CounterVector::new();
        for (metric, value) in self.iter() {
            out.0.insert(metric, clamp_to_range(metric, value, ranges)?);
        }
        Ok(out)
    }
}

impl FromIterator<(Metric, f64)> for CounterVector {
    /// Collects without validation; prefer [`CounterVector::set`] for
    /// untrusted input.
    fn from_iter<T: IntoIterator<Item = (Metric, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

fn clamp_to_range(metric: Metric, value: f64, ranges: &NormRanges) -> Result<f64, RooflineError> {
    let range = ranges.get(metric)?;
    if !value.is_finite() {
        return Err(RooflineError::InvalidValue { metric, value });
    }
    let slack = CEILING_CLAMP_TOLERANCE * range.span();
    if value < range.floor || value > range.ceiling + slack {
        return Err(RooflineError::OutOfRange { metric, value, floor: range.floor, ceiling: range.ceiling });
    }
    Ok(value.min(range.ceiling))
}

/// Metrics mapped onto the unit interval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizedCounters(BTreeMap<Metric, f64>);

impl NormalizedCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, metric: Metric, value: f64) -> Result<(), RooflineError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(RooflineError::NormalizedOutOfRange { metric, value });
        }
        self.0.insert(metric, value);
        Ok(())
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.0.get(&metric).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, f64)> + '_ {
        self.0.iter().map(|(&m, &v)| (m, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.0.len() == Metric::ALL.len()
    }

    /// Values snapped to the 3-decimal grid, i.e. what survives serialization.
    pub fn quantized(&self) -> NormalizedCounters {
        Self(self.0.iter().map(|(&m, &v)| (m, quantize(v))).collect())
    }

    /// String-valued JSON object in wire order, metrics only.
    pub fn to_json_map(&self) -> Map<String, Value> {
        self.0.iter().map(|(m, &v)| (m.key().to_string(), Value::String(format_unit(v)))).collect()
    }

    /// Parses a metrics-only object of 3-decimal strings.
    pub fn from_json_map(map: &Map<String, Value>) -> Result<Self, RooflineError> {
        let mut out = NormalizedCounters::new();
        for (key, value) in map {
            let metric =
                Metric::from_key(key).ok_or_else(|| RooflineError::Config(format!("unknown metric key `{key}`")))?;
            let text =
                value.as_str().ok_or_else(|| RooflineError::Config(format!("{key}: expected a string value")))?;
            let v: f64 =
                text.trim().parse().map_err(|_| RooflineError::Config(format!("{key}: `{text}` is not numeric")))?;
            out.set(metric, v)?;
        }
        Ok(out)
    }
}

impl FromIterator<(Metric, f64)> for NormalizedCounters {
    fn from_iter<T: IntoIterator<Item = (Metric, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Serialize for NormalizedCounters {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json_map().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NormalizedCounters {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = Map::<String, Value>::deserialize(deserializer)?;
        NormalizedCounters::from_json_map(&map).map_err(serde::de::Error::custom)
    }
}

/// Snaps to the nearest multiple of 0.001, ties to even.
pub fn quantize(value: f64) -> f64 {
    (value * 1000.0).round_ties_even() / 1000.0
}

/// Renders a unit-interval value as `d.ddd`, rounding half to even.
pub fn format_unit(value: f64) -> String {
    let thousandths = (value * 1000.0).round_ties_even().max(0.0) as u64;
    format!("{}.{:03}", thousandths / 1000, thousandths % 1000)
}

/// Maps each present raw metric onto `[0, 1]` against its range.
pub fn normalize(raw: &CounterVector, ranges: &NormRanges) -> Result<NormalizedCounters, RooflineError> {
    let mut out = NormalizedCounters::new();
    for (metric, value) in raw.iter() {
        let range = ranges.get(metric)?;
        let clamped = clamp_to_range(metric, value, ranges)?;
        let unit = ((clamped - range.floor) / range.span()).clamp(0.0, 1.0);
        out.0.insert(metric, unit);
    }
    Ok(out)
}

/// Inverse of [`normalize`], up to serialization quantization.
pub fn denormalize(norm: &NormalizedCounters, ranges: &NormRanges) -> Result<CounterVector, RooflineError> {
    let mut out = CounterVector::new();
    for (metric, value) in norm.iter() {
        if !(0.0..=1.0).contains(&value) {
            return Err(RooflineError::NormalizedOutOfRange { metric, value });
        }
        let range = ranges.get(metric)?;
        out.0.insert(metric, range.floor + value * range.span());
    }
    Ok(out)
}

/// A complete counter block: configuration echo plus normalized metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterBlock {
    pub compiler_flags: String,
    pub architecture: String,
    pub counters: NormalizedCounters,
}

impl CounterBlock {
    /// Renders the JSON text of the block: an opening brace, an empty line,
    /// then one `"key": "value"` pair per line in wire order, no indentation.
    pub fn to_json_text(&self) -> Result<String, RooflineError> {
        let mut lines = Vec::with_capacity(Metric::ALL.len() + 2);
        lines.push(format!("{}: {}", json_str(COMPILER_FLAGS_KEY), json_str(&self.compiler_flags)));
        lines.push(format!("{}: {}", json_str(ARCHITECTURE_KEY), json_str(&self.architecture)));
        for metric in Metric::ALL {
            let value = self.counters.get(metric).ok_or(RooflineError::MissingMetric(metric))?;
            lines.push(format!("{}: \"{}\"", json_str(metric.key()), format_unit(value)));
        }
        Ok(format!("{{\n\n{}\n}}", lines.join(",\n")))
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}
