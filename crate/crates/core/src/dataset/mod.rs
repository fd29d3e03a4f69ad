//! Chat-format training records, leak-free splits and dataset files.

mod card;
mod export;
mod io;
mod split;

pub use card::DatasetCard;
pub use export::{export_line, ChatTemplate};
pub use io::{read_dataset, read_jsonl, write_dataset, write_jsonl, SPLIT_FILES};
pub use split::{assign_splits, Split, SplitManifest, SplitParams};

use serde::{Deserialize, Serialize};

use crate::ingest::{BuildConfig, LabeledSample, Origin};
use crate::predict::{extract_json, ExtractMode};
use crate::prompt::{parse_user_turn, render_assistant_turn, render_user_turn, PREDICT_SYSTEM_PROMPT};
use crate::roofline::{
    normalize, CounterBlock, Metric, NormRanges, RooflineError, ARCHITECTURE_KEY, COMPILER_FLAGS_KEY,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub fingerprint: String,
    pub config: BuildConfig,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// One conversation: system, user and assistant turns plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub system: String,
    pub user: String,
    pub assistant: String,
    pub meta: SampleMeta,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Range(#[from] RooflineError),
    #[error("sample has no fingerprint")]
    MissingFingerprint,
    #[error("no split assigned to fingerprint {0}")]
    Unassigned(String),
    #[error("cannot reserve {wanted} test fingerprints out of {available}")]
    TestReservation { wanted: usize, available: usize },
    #[error("invalid split parameters: {0}")]
    Params(String),
    #[error("malformed sample: {0}")]
    Malformed(String),
    #[error("i/o on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

/// Renders a labelled sample into its conversation.
pub fn render_sample(sample: &LabeledSample, ranges: &NormRanges) -> Result<TrainingSample, DatasetError> {
    let flags = sample.config.flags_string();
    let arch = &sample.config.architecture;
    let block = CounterBlock {
        compiler_flags: flags.clone(),
        architecture: arch.clone(),
        counters: normalize(&sample.counters, ranges)?,
    };
    let json = block.to_json_text()?;
    Ok(TrainingSample {
        system: PREDICT_SYSTEM_PROMPT.to_string(),
        user: render_user_turn(arch, &flags, &sample.source),
        assistant: render_assistant_turn(arch, &flags, &json),
        meta: SampleMeta {
            fingerprint: sample.fingerprint.clone(),
            config: sample.config.clone(),
            origin: sample.origin,
            split: None,
        },
    })
}

impl TrainingSample {
    /// Source text recovered from the user turn.
    pub fn source(&self) -> Option<String> {
        parse_user_turn(&self.user).map(|(_, _, s)| s)
    }

    /// Checks the record invariants: one JSON fence, the fourteen keys in
    /// wire order with string values, and a configuration echo equal to the
    /// user turn.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Malformed(m));
        let extracted =
            extract_json(&self.assistant, ExtractMode::Strict).map_err(|e| DatasetError::Malformed(e.to_string()))?;
        let Some((arch, flags, _)) = parse_user_turn(&self.user) else {
            return bad("user turn does not follow the prompt template".into());
        };
        if extracted.architecture.as_deref() != Some(arch.as_str())
            || extracted.compiler_flags.as_deref() != Some(flags.as_str())
        {
            return bad("configuration echo differs from the user turn".into());
        }
        let fence = self.assistant.find("```json").expect("extracted implies a fence") + "```json".len();
        let body = &self.assistant[fence..];
        let body = &body[..body.find("```").unwrap_or(body.len())];
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(body).map_err(|e| DatasetError::Malformed(e.to_string()))?;
        let keys: Vec<&str> = map.keys().map(String::as_str).collect();
        let want: Vec<&str> =
            [COMPILER_FLAGS_KEY, ARCHITECTURE_KEY].into_iter().chain(Metric::ALL.iter().map(|m| m.key())).collect();
        if keys != want {
            return bad(format!("keys out of order: {keys:?}"));
        }
        if !map.values().all(serde_json::Value::is_string) {
            return bad("non-string value in block".into());
        }
        Ok(())
    }
}
