use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;
use serde::Serialize;

use super::{CompileStatus, HarvestedKernel};

/// Outcome of a compile-filter pass. Only compile failures are detected;
/// kernels that would fail under a profiler are not.
#[derive(Debug, Default, Serialize)]
pub struct CompileReport {
    pub kept: Vec<HarvestedKernel>,
    pub excluded: Vec<HarvestedKernel>,
    /// Kernels left `unknown` because no compiler was available.
    pub unchecked: Vec<HarvestedKernel>,
    /// Why the filter did not run, if it did not.
    pub skipped: Option<String>,
}

impl CompileReport {
    /// Excluded share of the kernels that were actually checked.
    pub fn exclusion_rate(&self) -> Option<f64> {
        let checked = self.kept.len() + self.excluded.len();
        (checked > 0).then(|| self.excluded.len() as f64 / checked as f64)
    }

    pub fn summary(&self) -> String {
        match (&self.skipped, self.exclusion_rate()) {
            (Some(why), _) => format!("filter skipped: {why}; {} kernels left unknown", self.unchecked.len()),
            (None, Some(rate)) => format!(
                "{} kept, {} excluded ({:.1}% of checked; compile failures only)",
                self.kept.len(),
                self.excluded.len(),
                rate * 100.0
            ),
            (None, None) => "no kernels to check".into(),
        }
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn program_available(template: &str) -> bool {
    let Some(program) = template.split_whitespace().next() else {
        return false;
    };
    if program.contains('/') {
        return Path::new(program).is_file();
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|dir| dir.join(program).is_file()))
        .unwrap_or(false)
}

fn compile_one(k: &HarvestedKernel, template: &str) -> std::io::Result<(bool, String)> {
    let dir = tempfile::tempdir()?;
    let src: PathBuf = dir.path().join("kernel.hip");
    std::fs::write(&src, &k.source)?;
    let out = dir.path().join("kernel.out");
    let cmd = template
        .replace("{src}", &shell_quote(&src))
        .replace("{out}", &shell_quote(&out))
        .replace("{dir}", &shell_quote(dir.path()));
    let output = Command::new("sh").arg("-c").arg(&cmd).current_dir(dir.path()).output()?;
    let mut log = String::from_utf8_lossy(&output.stderr).into_owned();
    log.push_str(&String::from_utf8_lossy(&output.stdout));
    Ok((output.status.success(), log))
}

/// Whether the compile succeeded, plus its diagnostics.
type CompileOutcome = std::io::Result<(bool, String)>;

/// Compiles each `unknown` kernel with `template` (placeholders `{src}`,
/// `{out}`, `{dir}`) in its own temporary directory, running up to
/// `parallelism` compilers at once. Kernels already marked ok or failed
/// are routed by their status without recompiling.
pub fn compile_filter(kernels: Vec<HarvestedKernel>, template: &str, parallelism: usize) -> CompileReport {
    let mut report = CompileReport::default();
    let mut pending = Vec::new();
    for k in kernels {
        match k.compile_status {
            CompileStatus::Ok => report.kept.push(k),
            CompileStatus::Failed => report.excluded.push(k),
            CompileStatus::Unknown => pending.push(k),
        }
    }
    if pending.is_empty() {
        return report;
    }
    if !program_available(template) {
        let program = template.split_whitespace().next().unwrap_or("");
        report.skipped = Some(format!("compiler `{program}` not found"));
        report.unchecked = pending;
        return report;
    }

    let results: Mutex<Vec<Option<CompileOutcome>>> = Mutex::new((0..pending.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, pending.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(k) = pending.get(i) else { break };
                let r = compile_one(k, template);
                results.lock()[i] = Some(r);
            });
        }
    });

    for (mut k, r) in pending.into_iter().zip(results.into_inner()) {
        match r.expect("every kernel visited") {
            Ok((true, _)) => {
                k.compile_status = CompileStatus::Ok;
                report.kept.push(k);
            }
            Ok((false, log)) => {
                k.compile_status = CompileStatus::Failed;
                k.failure_log = Some(log);
                report.excluded.push(k);
            }
            Err(e) => {
                k.failure_log = Some(format!("could not run compiler: {e}"));
                report.unchecked.push(k);
            }
        }
    }
    report
}
