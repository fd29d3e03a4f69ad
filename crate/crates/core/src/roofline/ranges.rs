use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Metric, RooflineError, Unit};

/// Current version of the range configuration file format.
pub const RANGES_FILE_VERSION: u32 = 1;

/// Floor and ceiling of one metric, in that metric's physical unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRange {
    pub floor: f64,
    pub ceiling: f64,
}

impl MetricRange {
    pub fn new(floor: f64, ceiling: f64) -> Self {
        Self { floor, ceiling }
    }

    pub fn span(&self) -> f64 {
        self.ceiling - self.floor
    }

    fn is_valid(&self) -> bool {
        self.floor.is_finite() && self.ceiling.is_finite() && self.floor >= 0.0 && self.ceiling > self.floor
    }
}

/// Per-metric normalization ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRanges {
    ranges: BTreeMap<Metric, MetricRange>,
}

impl Default for NormRanges {
    /// Hit rates 0-100 %, bandwidths 0-16384 GB/s, L1/HBM intensity 0-2048,
    /// L2 intensity 0-5120 FLOPs/Byte, throughputs 0-12288 GFLOP/s.
    fn default() -> Self {
        let ranges = Metric::ALL
            .iter()
            .map(|&m| {
                let ceiling = match m {
                    Metric::L1HitRate | Metric::L2HitRate => 100.0,
                    Metric::L1Bandwidth
                    | Metric::L2Bandwidth
                    | Metric::FabricReadBandwidth
                    | Metric::FabricWriteBandwidth => 16384.0,
                    Metric::L1ArithmeticIntensity | Metric::HbmArithmeticIntensity => 2048.0,
                    Metric::L2ArithmeticIntensity => 5120.0,
                    Metric::L1Gflops | Metric::L2Gflops | Metric::HbmGflops => 12288.0,
                };
                (m, MetricRange::new(0.0, ceiling))
            })
            .collect();
        Self { ranges }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RangesFile {
    version: u32,
    #[serde(rename = "metric")]
    metrics: Vec<RangeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RangeRecord {
    id: Metric,
    floor: f64,
    ceiling: f64,
    unit: Unit,
}

impl NormRanges {
    /// Builds a range table, rejecting any entry that violates `ceiling > floor >= 0`.
    pub fn from_map(ranges: BTreeMap<Metric, MetricRange>) -> Result<Self, RooflineError> {
        for (&metric, range) in &ranges {
            if !range.is_valid() {
                return Err(RooflineError::InvalidRange { metric, floor: range.floor, ceiling: range.ceiling });
            }
        }
        Ok(Self { ranges })
    }

    pub fn get(&self, metric: Metric) -> Result<MetricRange, RooflineError> {
        self.ranges.get(&metric).copied().ok_or(RooflineError::MissingRange(metric))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, MetricRange)> + '_ {
        self.ranges.iter().map(|(&m, &r)| (m, r))
    }

    /// Returns a copy with one metric's range replaced.
    pub fn with(mut self, metric: Metric, range: MetricRange) -> Result<Self, RooflineError> {
        self.ranges.insert(metric, range);
        Self::from_map(self.ranges)
    }

    /// Parses a TOML range file. Metrics absent from the file keep their
    /// default range; a unit that disagrees with the metric is rejected.
    pub fn from_toml_str(text: &str) -> Result<Self, RooflineError> {
        let file: RangesFile = toml::from_str(text).map_err(|e| RooflineError::Config(e.to_string()))?;
        if file.version != RANGES_FILE_VERSION {
            return Err(RooflineError::Config(format!(
                "unsupported range file version {} (expected {RANGES_FILE_VERSION})",
                file.version
            )));
        }
        let mut ranges = NormRanges::default().ranges;
        for rec in file.metrics {
            if rec.unit != rec.id.unit() {
                return Err(RooflineError::Config(format!(
                    "{}: unit `{}` does not match metric unit `{}`",
                    rec.id,
                    rec.unit,
                    rec.id.unit()
                )));
            }
            ranges.insert(rec.id, MetricRange::new(rec.floor, rec.ceiling));
        }
        Self::from_map(ranges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RooflineError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| RooflineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = RangesFile {
            version: RANGES_FILE_VERSION,
            metrics: self
                .ranges
                .iter()
                .map(|(&id, r)| RangeRecord { id, floor: r.floor, ceiling: r.ceiling, unit: id.unit() })
                .collect(),
        };
        toml::to_string(&file).expect("range table serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_metric() {
        let r = NormRanges::default();
        for m in Metric::ALL {
            let range = r.get(m).unwrap();
            assert_eq!(range.floor, 0.0);
        }
        assert_eq!(r.get(Metric::L2ArithmeticIntensity).unwrap().ceiling, 5120.0);
        assert_eq!(r.get(Metric::FabricReadBandwidth).unwrap().ceiling, 16384.0);
        assert_eq!(r.get(Metric::HbmGflops).unwrap().ceiling, 12288.0);
    }

    #[test]
    fn toml_round_trip() {
        let r = NormRanges::default();
        let text = r.to_toml_string();
        assert_eq!(NormRanges::from_toml_str(&text).unwrap(), r);
    }

    #[test]
    fn partial_override_keeps_defaults() {
        let text = r#"
version = 1
[[metric]]
id = "HBM_GFLOPS"
floor = 0.0
ceiling = 49152.0
unit = "GFLOP/s"
"#;
        let r = NormRanges::from_toml_str(text).unwrap();
        assert_eq!(r.get(Metric::HbmGflops).unwrap().ceiling, 49152.0);
        assert_eq!(r.get(Metric::L1Gflops).unwrap().ceiling, 12288.0);
    }

    #[test]
    fn rejects_inverted_range_and_bad_unit() {
        let inverted =
            "version = 1\n[[metric]]\nid = \"L1_Cache_Hit_Rate\"\nfloor = 10.0\nceiling = 5.0\nunit = \"%\"\n";
        assert!(matches!(
            NormRanges::from_toml_str(inverted),
            Err(RooflineError::InvalidRange { metric: Metric::L1HitRate, .. })
        ));
        let bad_unit =
            "version = 1\n[[metric]]\nid = \"L1_Cache_Hit_Rate\"\nfloor = 0.0\nceiling = 100.0\nunit = \"GB/s\"\n";
        assert!(matches!(NormRanges::from_toml_str(bad_unit), Err(RooflineError::Config(_))));
        let bad_version = "version = 7\nmetric = []\n";
        assert!(matches!(NormRanges::from_toml_str(bad_version), Err(RooflineError::Config(_))));
    }
}
