use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use futures::stream::{self, StreamExt};

use super::{build_prompt, strip_fences, CompileStatus, HarvestedKernel, PromptJob};
use crate::chat::{ChatClient, ChatError, ChatMessage};

/// Highest temperature accepted by common chat endpoints.
pub const MAX_TEMPERATURE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("job {} ({} / {:?}, t={}): {error}", job.tag, job.problem, job.variant, job.temperature)]
pub struct HarvestError {
    pub job: PromptJob,
    pub error: ChatError,
}

/// Append-only JSONL store of harvested kernels; each record is flushed as
/// soon as it arrives.
pub struct HarvestLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl HarvestLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, out: BufWriter::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, k: &HarvestedKernel) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, k)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

/// Reads a corpus JSONL file.
pub fn read_corpus(path: impl AsRef<Path>) -> anyhow::Result<Vec<HarvestedKernel>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct HarvestSummary {
    pub kernels: Vec<HarvestedKernel>,
    pub errors: Vec<HarvestError>,
    /// Set when an auth failure stopped the run early.
    pub aborted: bool,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs every job against the endpoint with at most `concurrency` requests
/// in flight. Kernels are appended to `log` as they complete, so an abort
/// keeps everything received so far.
pub async fn harvest(
    jobs: &[PromptJob],
    client: &ChatClient,
    concurrency: usize,
    mut log: Option<&mut HarvestLog>,
) -> std::io::Result<HarvestSummary> {
    let mut summary = HarvestSummary::default();
    let mut results = stream::iter(jobs.iter().enumerate())
        .map(|(index, job)| async move {
            if !(0.0..=MAX_TEMPERATURE).contains(&job.temperature) {
                let msg = format!("temperature {} outside [0, {MAX_TEMPERATURE}]", job.temperature);
                return (index, Err(ChatError::Status { status: 400, body: msg }));
            }
            let (system, user) = build_prompt(job);
            let messages = [ChatMessage::system(system), ChatMessage::user(user)];
            (index, client.complete(&messages, job.temperature).await)
        })
        .buffer_unordered(concurrency.max(1));

    while let Some((index, result)) = results.next().await {
        let job = &jobs[index];
        match result {
            Ok(completion) => {
                let source = strip_fences(&completion.content);
                if source.trim().is_empty() {
                    summary.errors.push(HarvestError {
                        job: job.clone(),
                        error: ChatError::Malformed("empty completion".into()),
                    });
                    continue;
                }
                if completion.retries > 0 {
                    tracing::info!(job = %job.tag, retries = completion.retries, "completed after retries");
                }
                let kernel = HarvestedKernel {
                    id: format!("{}-{index:06}", if job.tag.is_empty() { "job" } else { &job.tag }),
                    source,
                    raw_response: completion.content,
                    job: job.clone(),
                    timestamp: now(),
                    retries: completion.retries,
                    compile_status: CompileStatus::Unknown,
                    failure_log: None,
                };
                if let Some(log) = log.as_deref_mut() {
                    log.append(&kernel)?;
                }
                summary.kernels.push(kernel);
            }
            Err(error) => {
                let fatal = matches!(error, ChatError::Auth { .. });
                summary.errors.push(HarvestError { job: job.clone(), error });
                if fatal {
                    summary.aborted = true;
                    break;
                }
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::mock::{serve, Reply};
    use crate::chat::EndpointConfig;

    fn job(tag: &str) -> PromptJob {
        PromptJob {
            problem: "reduction".into(),
            variant: "simple".into(),
            temperature: 0.7,
            model: "m".into(),
            tag: tag.into(),
        }
    }

    fn client(url: String) -> ChatClient {
        ChatClient::new(EndpointConfig { backoff_ms: 2, ..EndpointConfig::new(url, "m") }).unwrap()
    }

    #[tokio::test]
    async fn single_job_yields_unknown_status_kernel() {
        let (url, script) = serve(vec![], Reply::Ok("```cpp\nint main() {}\n```".into())).await;
        let dir = tempfile::tempdir().unwrap();
        let mut log = HarvestLog::open(dir.path().join("corpus.jsonl")).unwrap();
        let s = harvest(&[job("a")], &client(url), 4, Some(&mut log)).await.unwrap();
        assert_eq!(s.kernels.len(), 1);
        let k = &s.kernels[0];
        assert_eq!(k.compile_status, CompileStatus::Unknown);
        assert_eq!(k.source, "int main() {}\n");
        assert!(k.raw_response.starts_with("```cpp"));
        let stored = read_corpus(log.path()).unwrap();
        assert_eq!(stored, s.kernels);
        let body = &script.bodies.lock()[0];
        assert_eq!(body["messages"][1]["content"], "Generate a simple reduction kernel");
    }

    #[tokio::test]
    async fn rate_limited_job_is_retried() {
        let reply = Reply::Ok("int main() {}".into());
        let (url, _) = serve(vec![Reply::Status(429), Reply::Status(429), Reply::Status(429)], reply).await;
        let s = harvest(&[job("a")], &client(url), 1, None).await.unwrap();
        assert_eq!(s.kernels.len(), 1);
        assert_eq!(s.kernels[0].retries, 3);
    }

    #[tokio::test]
    async fn auth_failure_aborts_but_keeps_completed_records() {
        let (url, _) = serve(vec![Reply::Ok("int main() {}".into()), Reply::Status(401)], Reply::Ok("x".into())).await;
        let dir = tempfile::tempdir().unwrap();
        let mut log = HarvestLog::open(dir.path().join("c.jsonl")).unwrap();
        let jobs: Vec<_> = (0..5).map(|i| job(&format!("j{i}"))).collect();
        let s = harvest(&jobs, &client(url), 1, Some(&mut log)).await.unwrap();
        assert!(s.aborted);
        assert_eq!(s.kernels.len(), 1);
        assert_eq!(s.errors[0].error, ChatError::Auth { status: 401 });
        assert_eq!(s.errors[0].job.tag, "j1");
        assert_eq!(read_corpus(log.path()).unwrap().len(), 1);
    }

    #[tokio::test]
    async fn out_of_range_temperature_is_rejected_per_job() {
        let (url, script) = serve(vec![], Reply::Ok("int main() {}".into())).await;
        let mut hot = job("hot");
        hot.temperature = 3.0;
        let s = harvest(&[hot, job("ok")], &client(url), 2, None).await.unwrap();
        assert_eq!(s.kernels.len(), 1);
        assert_eq!(s.errors.len(), 1);
        assert_eq!(script.hits.load(std::sync::atomic::Ordering::SeqCst), 1);
    }
}
