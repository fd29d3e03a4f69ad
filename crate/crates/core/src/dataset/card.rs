use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::TrainingSample;
use crate::eval::{histogram, Bins, Histogram};
use crate::predict::{extract_json, ExtractMode};
use crate::roofline::Metric;

/// Summary statistics of a written dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCard {
    pub total: usize,
    pub fingerprints: usize,
    pub per_split: BTreeMap<String, usize>,
    pub per_origin: BTreeMap<String, usize>,
    pub per_architecture: BTreeMap<String, usize>,
    pub per_flags: BTreeMap<String, usize>,
    /// Ten-bin histograms of the normalized values, keyed by metric.
    pub metric_histograms: BTreeMap<String, Histogram>,
}

impl DatasetCard {
    pub fn from_samples(samples: &[TrainingSample]) -> Self {
        let mut card = DatasetCard {
            total: samples.len(),
            fingerprints: 0,
            per_split: BTreeMap::new(),
            per_origin: BTreeMap::new(),
            per_architecture: BTreeMap::new(),
            per_flags: BTreeMap::new(),
            metric_histograms: BTreeMap::new(),
        };
        let mut fps = std::collections::BTreeSet::new();
        let mut values: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
        for s in samples {
            fps.insert(s.meta.fingerprint.as_str());
            let split = s.meta.split.map_or("unassigned", |s| s.as_str());
            *card.per_split.entry(split.into()).or_default() += 1;
            *card.per_origin.entry(s.meta.origin.as_str().into()).or_default() += 1;
            *card.per_architecture.entry(s.meta.config.architecture.clone()).or_default() += 1;
            let flags = s.meta.config.flags_string();
            *card.per_flags.entry(if flags.is_empty() { "(none)".into() } else { flags }).or_default() += 1;
            if let Ok(e) = extract_json(&s.assistant, ExtractMode::Strict) {
                for (m, v) in e.counters.iter() {
                    values.entry(m).or_default().push(v);
                }
            }
        }
        card.fingerprints = fps.len();
        let edges: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for (m, vs) in values {
            if let Ok(h) = histogram(&vs, &Bins::Edges(edges.clone())) {
                card.metric_histograms.insert(m.key().to_string(), h);
            }
        }
        card
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Dataset card\n\n");
        let _ = writeln!(s, "- samples: {}\n- distinct kernels (fingerprints): {}\n", self.total, self.fingerprints);
        for (title, map) in [
            ("Split", &self.per_split),
            ("Origin", &self.per_origin),
            ("Architecture", &self.per_architecture),
            ("Compiler flags", &self.per_flags),
        ] {
            let _ = writeln!(s, "| {title} | Samples |\n|---|---:|");
            for (k, v) in map {
                let _ = writeln!(s, "| {k} | {v} |");
            }
            s.push('\n');
        }
        if !self.metric_histograms.is_empty() {
            s.push_str("## Normalized value distribution\n\n| Metric |");
            for i in 0..10 {
                let _ = write!(s, " {:.1}-{:.1} |", i as f64 / 10.0, (i + 1) as f64 / 10.0);
            }
            s.push_str("\n|---|");
            s.push_str(&"---:|".repeat(10));
            s.push('\n');
            for m in Metric::ALL {
                if let Some(h) = self.metric_histograms.get(m.key()) {
                    let _ = write!(s, "| {} |", m.key());
                    for c in &h.counts {
                        let _ = write!(s, " {c} |");
                    }
                    s.push('\n');
                }
            }
        }
        s
    }
}
