//! Prompt texts for the training records and for serving.
//!
//! The dataset builder and the remote backend both call [`render_user_turn`],
//! so the model sees identical prompts at training and serving time.

/// System turn of every training and prediction conversation.
pub const PREDICT_SYSTEM_PROMPT: &str =
    "You are an expert GPU programmer and profiler. Given a code, you will predict its performance counters.";

/// System turn used when asking a chat model to write a kernel.
pub const HARVEST_SYSTEM_PROMPT: &str = "You are a skilled GPU programmer. Your response will be a GPU kernel with the proper includes and main file. The file should compile and run and use double or float data types and large problem sizes. Your response should not contain any special markdown formatting like ```cpp or comments.";

const USER_HEAD: &str = "For the GPU architecture ";
const USER_MID: &str = " and the compiler flags ";
const USER_TAIL: &str = ", what are the bandwidth, arithmetic intensity, hit rates, flops of the following code? Output the answer in JSON format.\n\n";

pub fn render_user_turn(architecture: &str, compiler_flags: &str, source: &str) -> String {
    format!("{USER_HEAD}{architecture}{USER_MID}{compiler_flags}{USER_TAIL}{source}")
}

/// The assistant turn around a rendered counter block.
pub fn render_assistant_turn(architecture: &str, compiler_flags: &str, json_block: &str) -> String {
    format!(
        "Here are the performance counters for the {architecture} GPU architecture and the {compiler_flags} compiler flags combination in JSON format: \n\n```json\n{json_block}\n```"
    )
}

/// Inverse of [`render_user_turn`]: `(architecture, compiler_flags, source)`.
///
/// Architecture names never contain spaces, so the first occurrence of the
/// middle marker ends it; flags run to the tail marker.
pub fn parse_user_turn(user: &str) -> Option<(String, String, String)> {
    let rest = user.strip_prefix(USER_HEAD)?;
    let (arch, rest) = rest.split_once(USER_MID)?;
    let (flags, source) = rest.split_once(USER_TAIL)?;
    Some((arch.to_string(), flags.to_string(), source.to_string()))
}
