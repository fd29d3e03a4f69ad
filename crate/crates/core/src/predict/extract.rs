//! Strict recovery of the counter block from model output.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::roofline::{Metric, NormalizedCounters, ARCHITECTURE_KEY, COMPILER_FLAGS_KEY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExtractMode {
    /// Exact key set, string values.
    #[default]
    Strict,
    /// Extra keys ignored, config echo optional, bare numbers accepted.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractErrorKind {
    NoBlock,
    Ambiguous,
    InvalidJson,
    MissingKeys,
    ExtraKeys,
    NonNumeric,
    OutOfRange,
}

impl ExtractErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractErrorKind::NoBlock => "no_block",
            ExtractErrorKind::Ambiguous => "ambiguous",
            ExtractErrorKind::InvalidJson => "invalid_json",
            ExtractErrorKind::MissingKeys => "missing_keys",
            ExtractErrorKind::ExtraKeys => "extra_keys",
            ExtractErrorKind::NonNumeric => "non_numeric",
            ExtractErrorKind::OutOfRange => "out_of_range",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{}: {detail}", kind.as_str())]
pub struct ExtractError {
    pub kind: ExtractErrorKind,
    pub detail: String,
    /// The complete model output.
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub counters: NormalizedCounters,
    pub compiler_flags: Option<String>,
    pub architecture: Option<String>,
}

/// Finds the counter block in `text`: the single ```` ```json ```` fence, or
/// without any such fence the first balanced top-level JSON object.
pub fn extract_json(text: &str, mode: ExtractMode) -> Result<Extracted, ExtractError> {
    let err = |kind, detail: String| ExtractError { kind, detail, raw: text.to_string() };
    let body = locate_block(text).map_err(|(k, d)| err(k, d))?;
    let map: Map<String, Value> = match serde_json::from_str(body) {
        Ok(Value::Object(m)) => m,
        Ok(_) => return Err(err(ExtractErrorKind::InvalidJson, "block is not a JSON object".into())),
        Err(e) => return Err(err(ExtractErrorKind::InvalidJson, e.to_string())),
    };

    let missing: Vec<&str> = Metric::ALL
        .iter()
        .map(|m| m.key())
        .chain(
            match mode {
                ExtractMode::Strict => [COMPILER_FLAGS_KEY, ARCHITECTURE_KEY].as_slice(),
                ExtractMode::Lenient => [].as_slice(),
            }
            .iter()
            .copied(),
        )
        .filter(|k| !map.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(err(ExtractErrorKind::MissingKeys, missing.join(", ")));
    }
    if mode == ExtractMode::Strict {
        let extra: Vec<&str> = map
            .keys()
            .map(String::as_str)
            .filter(|k| Metric::from_key(k).is_none() && *k != COMPILER_FLAGS_KEY && *k != ARCHITECTURE_KEY)
            .collect();
        if !extra.is_empty() {
            return Err(err(ExtractErrorKind::ExtraKeys, extra.join(", ")));
        }
    }

    let mut counters = NormalizedCounters::new();
    for metric in Metric::ALL {
        let value = &map[metric.key()];
        let parsed = match (value, mode) {
            (Value::String(s), _) => s.trim().parse::<f64>().ok(),
            (Value::Number(n), ExtractMode::Lenient) => n.as_f64(),
            _ => None,
        };
        let v = parsed
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(ExtractErrorKind::NonNumeric, format!("{}: {value}", metric.key())))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(err(ExtractErrorKind::OutOfRange, format!("{} = {v} is outside [0, 1]", metric.key())));
        }
        counters.set(metric, v).expect("checked range");
    }

    let echo = |key: &str| -> Result<Option<String>, ExtractError> {
        match map.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(err(ExtractErrorKind::InvalidJson, format!("{key} must be a string, got {other}"))),
        }
    };
    Ok(Extracted { counters, compiler_flags: echo(COMPILER_FLAGS_KEY)?, architecture: echo(ARCHITECTURE_KEY)? })
}

fn locate_block(text: &str) -> Result<&str, (ExtractErrorKind, String)> {
    let lower = text.to_ascii_lowercase();
    let opens: Vec<usize> = lower.match_indices("```json").map(|(i, _)| i).collect();
    match opens.len() {
        0 => balanced_object(text).ok_or((ExtractErrorKind::NoBlock, "no ```json block or JSON object found".into())),
        1 => {
            let after = &text[opens[0] + "```json".len()..];
            let end = after.find("```").unwrap_or(after.len());
            Ok(after[..end].trim())
        }
        n => Err((ExtractErrorKind::Ambiguous, format!("{n} ```json blocks"))),
    }
}

/// First `{ ... }` span whose braces balance, ignoring braces in strings.
fn balanced_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::render_assistant_turn;
    use crate::roofline::{format_unit, CounterBlock};
    use proptest::prelude::*;

    pub(crate) const FIG3_BLOCK: &str = "{\n\n\"compiler_flags\": \"--std=c++17 -O3 -ffast-math\",\n\"architecture\": \"gfx90a\",\n\"L1_Cache_Arithmetic_Intensity\": \"0.002\",\n\"L2_Cache_Arithmetic_Intensity\": \"0.002\",\n\"HBM_Arithmetic_Intensity\": \"0.004\",\n\"L1_Cache_GFLOPS\": \"0.459\",\n\"L2_Cache_GFLOPS\": \"0.459\",\n\"HBM_GFLOPS\": \"0.459\",\n\"L1_Cache_Bandwidth\": \"0.089\",\n\"L2_Cache_Bandwidth\": \"0.070\",\n\"L2_Fabric_Write_BW\": \"0.022\",\n\"L2_Fabric_Read_BW\": \"0.022\",\n\"L1_Cache_Hit_Rate\": \"0.500\",\n\"L2_Cache_Hit_Rate\": \"0.370\"\n}";

    fn fig3_text() -> String {
        render_assistant_turn("gfx90a", "--std=c++17 -O3 -ffast-math", FIG3_BLOCK)
    }

    #[test]
    fn recovers_the_reference_block() {
        let e = extract_json(&fig3_text(), ExtractMode::Strict).unwrap();
        assert_eq!(e.architecture.as_deref(), Some("gfx90a"));
        assert_eq!(e.compiler_flags.as_deref(), Some("--std=c++17 -O3 -ffast-math"));
        assert_eq!(e.counters.get(Metric::L2HitRate), Some(0.37));
        assert_eq!(e.counters.get(Metric::L1Bandwidth), Some(0.089));
        assert!(e.counters.is_complete());
    }

    #[test]
    fn each_failure_has_its_own_kind() {
        let kind = |t: &str| extract_json(t, ExtractMode::Strict).unwrap_err().kind;
        assert_eq!(kind("I cannot answer that."), ExtractErrorKind::NoBlock);
        assert_eq!(kind(&format!("{}\n{}", fig3_text(), fig3_text())), ExtractErrorKind::Ambiguous);
        assert_eq!(kind("```json\n{\"a\": }\n```"), ExtractErrorKind::InvalidJson);
        assert_eq!(
            kind(&fig3_text().replace("\"L1_Cache_Hit_Rate\": \"0.500\",\n", "")),
            ExtractErrorKind::MissingKeys
        );
        assert_eq!(kind(&fig3_text().replace("{\n\n", "{\n\"notes\": \"x\",\n")), ExtractErrorKind::ExtraKeys);
        assert_eq!(kind(&fig3_text().replace("\"0.370\"", "\"high\"")), ExtractErrorKind::NonNumeric);
        assert_eq!(kind(&fig3_text().replace("\"0.370\"", "0.370")), ExtractErrorKind::NonNumeric);

        let e = extract_json(&fig3_text().replace("\"0.500\"", "\"1.250\""), ExtractMode::Strict).unwrap_err();
        assert_eq!(e.kind, ExtractErrorKind::OutOfRange);
        assert!(e.detail.contains("L1_Cache_Hit_Rate"));
        assert_eq!(e.raw, fig3_text().replace("\"0.500\"", "\"1.250\""));
    }

    #[test]
    fn unfenced_object_is_found() {
        let text = format!("Sure! {} Hope that helps {{}}", FIG3_BLOCK.replace("\"gfx90a\"", "\"gfx{90}a\""));
        let e = extract_json(&text, ExtractMode::Strict).unwrap();
        assert_eq!(e.architecture.as_deref(), Some("gfx{90}a"));
    }

    #[test]
    fn lenient_mode_tolerates_extras_and_numbers() {
        let text = fig3_text().replace("\"0.370\"", "0.370").replace("{\n\n", "{\n\"notes\": \"x\",\n");
        let e = extract_json(&text, ExtractMode::Lenient).unwrap();
        assert_eq!(e.counters.get(Metric::L2HitRate), Some(0.37));
        let no_echo = fig3_text().replace("\"architecture\": \"gfx90a\",\n", "");
        assert_eq!(extract_json(&no_echo, ExtractMode::Lenient).unwrap().architecture, None);
        assert_eq!(extract_json(&no_echo, ExtractMode::Strict).unwrap_err().kind, ExtractErrorKind::MissingKeys);
    }

    proptest! {
        #[test]
        fn extract_inverts_render(values in proptest::collection::vec(0u32..=1000, 12)) {
            let counters: NormalizedCounters =
                Metric::ALL.iter().zip(&values).map(|(&m, &v)| (m, v as f64 / 1000.0)).collect();
            let block = CounterBlock { compiler_flags: "-O3".into(), architecture: "gfx942".into(), counters: counters.clone() };
            let text = render_assistant_turn("gfx942", "-O3", &block.to_json_text().unwrap());
            let e = extract_json(&text, ExtractMode::Strict).unwrap();
            for m in Metric::ALL {
                prop_assert_eq!(format_unit(e.counters.get(m).unwrap()), format_unit(counters.get(m).unwrap()));
                prop_assert_eq!(e.counters.get(m), counters.get(m));
            }
        }
    }
}
