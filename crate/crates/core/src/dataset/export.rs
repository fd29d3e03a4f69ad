use serde::{Deserialize, Serialize};
use serde_json::json;

use super::TrainingSample;

/// Model-specific framing applied at export time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ChatTemplate {
    /// Llama 3 header/eot tokens, one `{"text": ...}` per line.
    Llama3,
    /// `<|im_start|>` framing, one `{"text": ...}` per line.
    Chatml,
    /// `{"messages": [{role, content}, ...]}` per line.
    Messages,
}

/// One JSONL line for `sample` under `template`.
pub fn export_line(sample: &TrainingSample, template: ChatTemplate) -> String {
    let value = match template {
        ChatTemplate::Llama3 => json!({ "text": format!(
            "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n\n{}<|eot_id|><|start_header_id|>user<|end_header_id|>\n\n{}<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n\n{}<|eot_id|>",
            sample.system, sample.user, sample.assistant
        )}),
        ChatTemplate::Chatml => json!({ "text": format!(
            "<|im_start|>system\n{}<|im_end|>\n<|im_start|>user\n{}<|im_end|>\n<|im_start|>assistant\n{}<|im_end|>\n",
            sample.system, sample.user, sample.assistant
        )}),
        ChatTemplate::Messages => json!({ "messages": [
            { "role": "system", "content": sample.system },
            { "role": "user", "content": sample.user },
            { "role": "assistant", "content": sample.assistant },
        ]}),
    };
    value.to_string()
}
