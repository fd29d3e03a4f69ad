use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Wire key for the compiler-flags configuration tag.
pub const COMPILER_FLAGS_KEY: &str = "compiler_flags";
/// Wire key for the architecture configuration tag.
pub const ARCHITECTURE_KEY: &str = "architecture";

/// The twelve numeric performance metrics.
///
/// Declaration order is the serialization order of the counter block, so
/// `Ord` and [`Metric::ALL`] both follow the wire layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "L1_Cache_Arithmetic_Intensity")]
    L1ArithmeticIntensity,
    #[serde(rename = "L2_Cache_Arithmetic_Intensity")]
    L2ArithmeticIntensity,
    #[serde(rename = "HBM_Arithmetic_Intensity")]
    HbmArithmeticIntensity,
    #[serde(rename = "L1_Cache_GFLOPS")]
    L1Gflops,
    #[serde(rename = "L2_Cache_GFLOPS")]
    L2Gflops,
    #[serde(rename = "HBM_GFLOPS")]
    HbmGflops,
    #[serde(rename = "L1_Cache_Bandwidth")]
    L1Bandwidth,
    #[serde(rename = "L2_Cache_Bandwidth")]
    L2Bandwidth,
    #[serde(rename = "L2_Fabric_Write_BW")]
    FabricWriteBandwidth,
    #[serde(rename = "L2_Fabric_Read_BW")]
    FabricReadBandwidth,
    #[serde(rename = "L1_Cache_Hit_Rate")]
    L1HitRate,
    #[serde(rename = "L2_Cache_Hit_Rate")]
    L2HitRate,
}

/// Physical unit family of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "%")]
    Percent,
    #[serde(rename = "GB/s")]
    GigabytesPerSecond,
    #[serde(rename = "FLOPs/Byte")]
    FlopsPerByte,
    #[serde(rename = "GFLOP/s")]
    GflopsPerSecond,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Percent => "%",
            Unit::GigabytesPerSecond => "GB/s",
            Unit::FlopsPerByte => "FLOPs/Byte",
            Unit::GflopsPerSecond => "GFLOP/s",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Memory hierarchy level of a roofline point or bandwidth ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MemoryLevel {
    L1,
    L2,
    #[serde(rename = "HBM")]
    Hbm,
}

impl MemoryLevel {
    pub const ALL: [MemoryLevel; 3] = [MemoryLevel::L1, MemoryLevel::L2, MemoryLevel::Hbm];

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryLevel::L1 => "L1",
            MemoryLevel::L2 => "L2",
            MemoryLevel::Hbm => "HBM",
        }
    }

    pub fn intensity_metric(self) -> Metric {
        match self {
            MemoryLevel::L1 => Metric::L1ArithmeticIntensity,
            MemoryLevel::L2 => Metric::L2ArithmeticIntensity,
            MemoryLevel::Hbm => Metric::HbmArithmeticIntensity,
        }
    }

    pub fn gflops_metric(self) -> Metric {
        match self {
            MemoryLevel::L1 => Metric::L1Gflops,
            MemoryLevel::L2 => Metric::L2Gflops,
            MemoryLevel::Hbm => Metric::HbmGflops,
        }
    }
}

impl fmt::Display for MemoryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(MemoryLevel::L1),
            "L2" => Ok(MemoryLevel::L2),
            "HBM" => Ok(MemoryLevel::Hbm),
            _ => Err(format!("unknown memory level `{s}`")),
        }
    }
}

impl Metric {
    /// All numeric metrics in wire order.
    pub const ALL: [Metric; 12] = [
        Metric::L1ArithmeticIntensity,
        Metric::L2ArithmeticIntensity,
        Metric::HbmArithmeticIntensity,
        Metric::L1Gflops,
        Metric::L2Gflops,
        Metric::HbmGflops,
        Metric::L1Bandwidth,
        Metric::L2Bandwidth,
        Metric::FabricWriteBandwidth,
        Metric::FabricReadBandwidth,
        Metric::L1HitRate,
        Metric::L2HitRate,
    ];

    /// The JSON key used on the wire.
    pub fn key(self) -> &'static str {
        match self {
            Metric::L1ArithmeticIntensity => "L1_Cache_Arithmetic_Intensity",
            Metric::L2ArithmeticIntensity => "L2_Cache_Arithmetic_Intensity",
            Metric::HbmArithmeticIntensity => "HBM_Arithmetic_Intensity",
            Metric::L1Gflops => "L1_Cache_GFLOPS",
            Metric::L2Gflops => "L2_Cache_GFLOPS",
            Metric::HbmGflops => "HBM_GFLOPS",
            Metric::L1Bandwidth => "L1_Cache_Bandwidth",
            Metric::L2Bandwidth => "L2_Cache_Bandwidth",
            Metric::FabricWriteBandwidth => "L2_Fabric_Write_BW",
            Metric::FabricReadBandwidth => "L2_Fabric_Read_BW",
            Metric::L1HitRate => "L1_Cache_Hit_Rate",
            Metric::L2HitRate => "L2_Cache_Hit_Rate",
        }
    }

    /// Human label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Metric::L1ArithmeticIntensity => "L1 Arithmetic Intensity",
            Metric::L2ArithmeticIntensity => "L2 Arithmetic Intensity",
            Metric::HbmArithmeticIntensity => "HBM Arithmetic Intensity",
            Metric::L1Gflops => "L1 GFLOP/s",
            Metric::L2Gflops => "L2 GFLOP/s",
            Metric::HbmGflops => "HBM GFLOP/s",
            Metric::L1Bandwidth => "L1 Cache Bandwidth",
            Metric::L2Bandwidth => "L2 Cache Bandwidth",
            Metric::FabricWriteBandwidth => "HBM Write Bandwidth",
            Metric::FabricReadBandwidth => "HBM Read Bandwidth",
            Metric::L1HitRate => "L1 Cache Hit Rate",
            Metric::L2HitRate => "L2 Cache Hit Rate",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            Metric::L1ArithmeticIntensity | Metric::L2ArithmeticIntensity | Metric::HbmArithmeticIntensity => {
                Unit::FlopsPerByte
            }
            Metric::L1Gflops | Metric::L2Gflops | Metric::HbmGflops => Unit::GflopsPerSecond,
            Metric::L1Bandwidth | Metric::L2Bandwidth | Metric::FabricWriteBandwidth | Metric::FabricReadBandwidth => {
                Unit::GigabytesPerSecond
            }
            Metric::L1HitRate | Metric::L2HitRate => Unit::Percent,
        }
    }

    pub fn from_key(key: &str) -> Option<Metric> {
        Metric::ALL.iter().copied().find(|m| m.key() == key)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::from_key(s).ok_or_else(|| format!("unknown metric `{s}`"))
    }
}
