//! Harvesting model-written kernels and filtering the ones that do not build.

mod compile;
mod harvest;

pub use compile::{compile_filter, CompileReport};
pub use harvest::{harvest, read_corpus, HarvestError, HarvestLog, HarvestSummary};

use serde::{Deserialize, Serialize};

use crate::prompt::HARVEST_SYSTEM_PROMPT;

/// One request for a model-written kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptJob {
    /// e.g. `reduction`, `scan`, `GEMM`
    pub problem: String,
    /// e.g. `simple`, `highly-optimized`, `that uses shared memory`
    #[serde(default)]
    pub variant: String,
    pub temperature: f64,
    pub model: String,
    #[serde(default)]
    pub tag: String,
}

impl PromptJob {
    /// Cartesian product in problem-major, then variant, then temperature order.
    pub fn grid(problems: &[String], variants: &[String], temperatures: &[f64], model: &str) -> Vec<PromptJob> {
        let mut jobs = Vec::new();
        for (p, problem) in problems.iter().enumerate() {
            for (v, variant) in variants.iter().enumerate() {
                for (t, &temperature) in temperatures.iter().enumerate() {
                    jobs.push(PromptJob {
                        problem: problem.clone(),
                        variant: variant.clone(),
                        temperature,
                        model: model.to_string(),
                        tag: format!("p{p}-v{v}-t{t}"),
                    });
                }
            }
        }
        jobs
    }
}

/// Variants that read as a trailing clause rather than an adjective.
const CLAUSE_STARTS: &[&str] = &["that ", "which ", "with ", "using ", "for ", "in "];

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// `(system, user)` texts for a harvest job.
pub fn build_prompt(job: &PromptJob) -> (String, String) {
    let variant = job.variant.trim();
    let problem = job.problem.trim();
    let user = if variant.is_empty() {
        format!("Generate {} {problem} kernel", article(problem))
    } else if CLAUSE_STARTS.iter().any(|c| variant.starts_with(c)) {
        format!("Generate {} {problem} kernel {variant}", article(problem))
    } else {
        format!("Generate {} {variant} {problem} kernel", article(variant))
    };
    (HARVEST_SYSTEM_PROMPT.to_string(), user)
}

/// Removes a surrounding markdown fence (```` ```cpp ... ``` ````) if the
/// model emitted one anyway.
pub fn strip_fences(text: &str) -> String {
    let trimmed = text.trim();
    let Some(open) = trimmed.find("```") else {
        return text.to_string();
    };
    let after = &trimmed[open + 3..];
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    let body = match body.rfind("```") {
        Some(close) => &body[..close],
        None => body,
    };
    body.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompileStatus {
    Unknown,
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestedKernel {
    pub id: String,
    pub source: String,
    /// Completion text exactly as received.
    pub raw_response: String,
    pub job: PromptJob,
    /// Unix seconds at completion.
    pub timestamp: u64,
    pub retries: u32,
    pub compile_status: CompileStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_log: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(problem: &str, variant: &str) -> PromptJob {
        PromptJob {
            problem: problem.into(),
            variant: variant.into(),
            temperature: 0.2,
            model: "m".into(),
            tag: "t".into(),
        }
    }

    #[test]
    fn prompts_compose_problem_and_variant() {
        let (system, user) = build_prompt(&job("reduction", "simple"));
        assert!(system.starts_with("You are a skilled GPU programmer."));
        assert_eq!(user, "Generate a simple reduction kernel");
        assert_eq!(
            build_prompt(&job("reduction", "that uses shared memory")).1,
            "Generate a reduction kernel that uses shared memory"
        );
        assert_eq!(
            build_prompt(&job("reduction", "highly-optimized")).1,
            "Generate a highly-optimized reduction kernel"
        );
        assert_eq!(build_prompt(&job("scan", "")).1, "Generate a scan kernel");
        assert_eq!(build_prompt(&job("GEMM", "optimized")).1, "Generate an optimized GEMM kernel");
    }

    #[test]
    fn fences_are_stripped() {
        let fenced = "```cpp\n#include <hip/hip_runtime.h>\nint main() {}\n```\n";
        assert_eq!(strip_fences(fenced), "#include <hip/hip_runtime.h>\nint main() {}\n");
        let bare = "int main() {}\n";
        assert_eq!(strip_fences(bare), bare);
        assert_eq!(strip_fences("Here:\n```\nx\n```"), "x\n");
    }

    #[test]
    fn grid_is_problem_major() {
        let jobs = PromptJob::grid(&["a".into(), "b".into()], &["simple".into()], &[0.2, 1.0], "m");
        let order: Vec<_> = jobs.iter().map(|j| (j.problem.as_str(), j.temperature)).collect();
        assert_eq!(order, [("a", 0.2), ("a", 1.0), ("b", 0.2), ("b", 1.0)]);
    }
}
