use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CounterVector, MemoryLevel, RooflineError};

/// A kernel's position on the roofline plot at one memory level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RooflinePoint {
    pub level: MemoryLevel,
    /// FLOPs/Byte
    pub ai: f64,
    /// GFLOP/s
    pub gflops: f64,
}

impl RooflinePoint {
    pub fn new(level: MemoryLevel, ai: f64, gflops: f64) -> Result<Self, RooflineError> {
        if !(ai.is_finite() && ai >= 0.0 && gflops.is_finite() && gflops >= 0.0) {
            return Err(RooflineError::Domain(format!(
                "roofline point ({ai}, {gflops}) at {level} must be finite and non-negative"
            )));
        }
        Ok(Self { level, ai, gflops })
    }

    /// One point per memory level whose intensity and throughput are both present.
    pub fn from_counters(counters: &CounterVector) -> Vec<RooflinePoint> {
        MemoryLevel::ALL
            .iter()
            .filter_map(|&level| {
                let ai = counters.get(level.intensity_metric())?;
                let gflops = counters.get(level.gflops_metric())?;
                RooflinePoint::new(level, ai, gflops).ok()
            })
            .collect()
    }
}

/// Peak compute and per-level bandwidth of one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachinePeaks {
    pub architecture: String,
    /// GFLOP/s
    pub peak_gflops: f64,
    /// GB/s per memory level
    pub bandwidth: BTreeMap<MemoryLevel, f64>,
}

impl MachinePeaks {
    pub fn new(
        architecture: impl Into<String>,
        peak_gflops: f64,
        bandwidth: impl IntoIterator<Item = (MemoryLevel, f64)>,
    ) -> Result<Self, RooflineError> {
        let peaks = Self { architecture: architecture.into(), peak_gflops, bandwidth: bandwidth.into_iter().collect() };
        peaks.validate()?;
        Ok(peaks)
    }

    pub fn validate(&self) -> Result<(), RooflineError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.peak_gflops) || !self.bandwidth.values().all(|&bw| positive(bw)) {
            return Err(RooflineError::Config(format!("{}: machine peaks must all be positive", self.architecture)));
        }
        Ok(())
    }

    pub fn bandwidth_at(&self, level: MemoryLevel) -> Result<f64, RooflineError> {
        self.bandwidth.get(&level).copied().ok_or_else(|| {
            RooflineError::Config(format!("{}: no bandwidth ceiling for level {level}", self.architecture))
        })
    }

    /// AI at which the bandwidth roof meets the compute roof.
    pub fn ridge_point(&self, level: MemoryLevel) -> Result<f64, RooflineError> {
        Ok(self.peak_gflops / self.bandwidth_at(level)?)
    }

    /// Illustrative per-die peaks for the two shipped architectures, chosen
    /// inside the default normalization ceilings.
    pub fn builtin(architecture: &str) -> Option<MachinePeaks> {
        let (compute, l1, l2, hbm) = match architecture {
            "gfx90a" => (12288.0, 8192.0, 4096.0, 1638.4),
            "gfx942" => (12288.0, 16384.0, 8192.0, 5324.8),
            _ => return None,
        };
        Some(MachinePeaks {
            architecture: architecture.to_string(),
            peak_gflops: compute,
            bandwidth: [(MemoryLevel::L1, l1), (MemoryLevel::L2, l2), (MemoryLevel::Hbm, hbm)].into_iter().collect(),
        })
    }

    /// Architectures with built-in peaks.
    pub fn builtin_architectures() -> &'static [&'static str] {
        &["gfx90a", "gfx942"]
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct PeaksFile {
    #[serde(rename = "machine")]
    machines: Vec<MachinePeaks>,
}

/// Loads `[[machine]]` records from a TOML file.
pub fn load_peaks(path: impl AsRef<Path>) -> Result<Vec<MachinePeaks>, RooflineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| RooflineError::Config(format!("{}: {e}", path.display())))?;
    let file: PeaksFile = toml::from_str(&text).map_err(|e| RooflineError::Config(e.to_string()))?;
    for m in &file.machines {
        m.validate()?;
    }
    Ok(file.machines)
}

/// FLOPs per byte moved.
pub fn arithmetic_intensity(flops: f64, bytes: f64) -> Result<f64, RooflineError> {
    if bytes.is_nan() || bytes <= 0.0 || !bytes.is_finite() {
        return Err(RooflineError::Domain(format!("arithmetic intensity needs bytes > 0, got {bytes}")));
    }
    if flops.is_nan() || flops < 0.0 || !flops.is_finite() {
        return Err(RooflineError::Domain(format!("arithmetic intensity needs flops >= 0, got {flops}")));
    }
    Ok(flops / bytes)
}

/// The roofline ceiling `min(peak compute, ai * bandwidth(level))`.
pub fn attainable_performance(peaks: &MachinePeaks, level: MemoryLevel, ai: f64) -> Result<f64, RooflineError> {
    if ai.is_nan() || ai < 0.0 {
        return Err(RooflineError::Domain(format!("arithmetic intensity must be >= 0, got {ai}")));
    }
    let bw = peaks.bandwidth_at(level)?;
    Ok(peaks.peak_gflops.min(ai * bw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn peaks() -> MachinePeaks {
        MachinePeaks::new("test", 12288.0, [(MemoryLevel::Hbm, 1638.4)]).unwrap()
    }

    #[test]
    fn intensity_examples() {
        assert_eq!(arithmetic_intensity(2.0, 16.0).unwrap(), 0.125);
        assert_eq!(arithmetic_intensity(0.0, 8.0).unwrap(), 0.0);
        assert_eq!(arithmetic_intensity(1024.0, 4.0).unwrap(), 256.0);
        assert!(matches!(arithmetic_intensity(1.0, 0.0), Err(RooflineError::Domain(_))));
    }

    #[test]
    fn attainable_examples() {
        let p = peaks();
        assert_eq!(attainable_performance(&p, MemoryLevel::Hbm, 0.0).unwrap(), 0.0);
        assert_eq!(attainable_performance(&p, MemoryLevel::Hbm, 1.0e6).unwrap(), 12288.0);
        assert!((attainable_performance(&p, MemoryLevel::Hbm, 0.125).unwrap() - 204.8).abs() < 1e-9);
        assert!(matches!(attainable_performance(&p, MemoryLevel::L1, 1.0), Err(RooflineError::Config(_))));
    }

    #[test]
    fn non_positive_peaks_rejected() {
        assert!(MachinePeaks::new("x", 0.0, [(MemoryLevel::Hbm, 1.0)]).is_err());
        assert!(MachinePeaks::new("x", 1.0, [(MemoryLevel::Hbm, -1.0)]).is_err());
    }

    #[test]
    fn builtins_are_valid() {
        for arch in MachinePeaks::builtin_architectures() {
            let p = MachinePeaks::builtin(arch).unwrap();
            p.validate().unwrap();
            for level in MemoryLevel::ALL {
                assert!(p.ridge_point(level).unwrap() > 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn attainable_is_monotone_and_bounded(a in 0.0f64..1e5, b in 0.0f64..1e5) {
            let p = peaks();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let f_lo = attainable_performance(&p, MemoryLevel::Hbm, lo).unwrap();
            let f_hi = attainable_performance(&p, MemoryLevel::Hbm, hi).unwrap();
            prop_assert!(f_lo <= f_hi);
            prop_assert!(f_hi <= p.peak_gflops);
        }
    }
}
