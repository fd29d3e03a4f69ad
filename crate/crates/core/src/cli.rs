//! Command-line front end.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::chat::{ChatClient, EndpointConfig};
use crate::corpus::{compile_filter, harvest, read_corpus, CompileStatus, HarvestLog, HarvestedKernel, PromptJob};
use crate::dataset::{
    assign_splits, export_line, read_jsonl, render_sample, write_dataset, ChatTemplate, SplitParams, TrainingSample,
};
use crate::eval::{evaluate, write_report, EvalCase, EvalConfig, HttpPredictClient, LocalPredictClient, PredictClient};
use crate::ingest::{
    expand_configs, ingest, label_records, split_flags, BuildConfig, ColumnMap, KernelRef, LabeledSample, Origin,
    ProfileRecord,
};
use crate::roofline::{load_peaks, MachinePeaks, NormRanges};
use crate::server::{BackendConfig, ServerConfig};
use crate::synth::{
    fingerprint, generate, rename_source, validate_restricted, ComputeOp, Dtype, KernelGenSpec, MetadataStore,
    OracleModel, Sidecar,
};

#[derive(Debug, Parser)]
#[command(
    name = "counterlens",
    version,
    about = "GPU kernel performance-counter datasets, prediction serving and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic kernels with metadata sidecars.
    Generate(GenerateArgs),
    /// Alpha-rename the identifiers of one kernel source.
    Rename(RenameArgs),
    /// Ask a chat-completion endpoint for kernels.
    Harvest(HarvestArgs),
    /// Drop harvested kernels that do not compile.
    CompileFilter(CompileFilterArgs),
    /// Read profiler CSV/JSONL output into profile records.
    Ingest(IngestArgs),
    /// Write the kernel × flags × architecture build-job manifest.
    Expand(ExpandArgs),
    /// Join profile records with their sources.
    Label(LabelArgs),
    /// Label generated kernels with the analytic oracle.
    LabelOracle(LabelOracleArgs),
    /// Render labelled samples into split JSONL files.
    BuildDataset(BuildDatasetArgs),
    /// Apply a model chat template to dataset records.
    Export(ExportArgs),
    /// Score a backend on a test split.
    Eval(EvalArgs),
    /// Run the prediction server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML kernel spec; flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub inputs: Option<usize>,
    #[arg(long)]
    pub outputs: Option<usize>,
    #[arg(long)]
    pub loads: Option<usize>,
    #[arg(long)]
    pub stores: Option<usize>,
    #[arg(long)]
    pub compute: Option<usize>,
    #[arg(long)]
    pub elements: Option<u64>,
    #[arg(long, value_enum)]
    pub dtype: Option<Dtype>,
    #[arg(long)]
    pub block_size: Option<u32>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub ops: Option<Vec<ComputeOp>>,
    #[arg(long)]
    pub recency_p: Option<f64>,
    /// Seed of the first kernel; kernel i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// Renamed variants written per kernel.
    #[arg(long, default_value_t = 0)]
    pub renames: u64,
    /// Prefix each source with its metadata as a comment line.
    #[arg(long)]
    pub embed_metadata: bool,
    /// Compiler command template with `{src}`, `{out}` and `{dir}`.
    #[arg(long)]
    pub compile_check: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenameArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the identifier map as JSON.
    #[arg(long)]
    pub map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    /// One problem per line.
    #[arg(long)]
    pub problems: PathBuf,
    /// One variant per line; `-` for none.
    #[arg(long)]
    pub variants: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.7,1.0")]
    pub temps: Vec<f64>,
    #[arg(long, env = "COUNTERLENS_HARVEST_MODEL")]
    pub model: String,
    /// Chat-completion URL.
    #[arg(long, env = "COUNTERLENS_HARVEST_URL")]
    pub url: String,
    #[arg(long, env = "COUNTERLENS_HARVEST_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 60_000)]
    pub timeout_ms: u64,
    /// Appended to, never truncated.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub errors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompileFilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// e.g. `hipcc --offload-arch=gfx90a -c {src} -o {out}`
    #[arg(long)]
    pub compiler: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub excluded: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// TOML column map.
    #[arg(long)]
    pub columns: Option<PathBuf>,
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rejected: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    /// Directory of `.hip` sources.
    #[arg(long)]
    pub kernels: PathBuf,
    /// One flag set per occurrence, e.g. `--flags "-O3 -ffast-math"`.
    #[arg(long = "flags", allow_hyphen_values = true)]
    pub flag_sets: Vec<String>,
    #[arg(long = "arch", required = true)]
    pub architectures: Vec<String>,
    #[arg(long)]
    pub toolkit: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub sources: PathBuf,
    #[arg(long, default_value = "ai")]
    pub origin: Origin,
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub errors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelOracleArgs {
    /// Output directory of `generate`.
    #[arg(long)]
    pub kernels: PathBuf,
    #[arg(long = "arch", default_values_t = ["gfx90a".to_string(), "gfx942".to_string()])]
    pub architectures: Vec<String>,
    #[arg(long = "flags", allow_hyphen_values = true)]
    pub flag_sets: Vec<String>,
    #[arg(long)]
    pub peaks: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub efficiency: f64,
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Labelled-sample JSONL; repeatable.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4000)]
    pub test_count: usize,
    #[arg(long, default_value_t = 0.9)]
    pub train_ratio: f64,
    #[arg(long)]
    pub ranges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub template: ChatTemplate,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Test split JSONL.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Backend id; the registry default when absent.
    #[arg(long)]
    pub backend: Option<String>,
    /// Build backends in-process from this server config.
    #[arg(long, conflicts_with = "server")]
    pub config: Option<PathBuf>,
    /// Query a running server instead.
    #[arg(long)]
    pub server: Option<String>,
    /// Sidecar directory for the default in-process oracle.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub concurrency: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 120_000)]
    pub timeout_ms: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Entry in `index.jsonl` written by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedEntry {
    pub id: String,
    pub file: String,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_of: Option<String>,
    pub compile_status: CompileStatus,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Rename(a) => cmd_rename(a),
        Command::Harvest(a) => runtime()?.block_on(cmd_harvest(a)),
        Command::CompileFilter(a) => cmd_compile_filter(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Expand(a) => cmd_expand(a),
        Command::Label(a) => cmd_label(a),
        Command::LabelOracle(a) => cmd_label_oracle(a),
        Command::BuildDataset(a) => cmd_build_dataset(a),
        Command::Export(a) => cmd_export(a),
        Command::Eval(a) => runtime()?.block_on(cmd_eval(a)),
        Command::Serve(a) => runtime()?.block_on(cmd_serve(a)),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let refs: Vec<&T> = items.iter().collect();
    crate::dataset::write_jsonl(path, &refs).with_context(|| format!("writing {}", path.display()))
}

fn load_ranges(path: &Option<PathBuf>) -> Result<NormRanges> {
    Ok(match path {
        Some(p) => NormRanges::load(p).with_context(|| format!("reading ranges {}", p.display()))?,
        None => NormRanges::default(),
    })
}

fn read_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| if l == "-" { String::new() } else { l.to_string() })
        .collect())
}

fn hip_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "hip"))
        .collect();
    files.sort();
    Ok(files)
}

/// Spec from `--spec` (or the minimal one) with flag overrides applied.
pub fn resolve_spec(a: &GenerateArgs) -> Result<KernelGenSpec> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => KernelGenSpec::minimal(Dtype::Float64, 1 << 20, 0),
    };
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value.clone() {
                spec.$field = v;
            }
        };
    }
    set!(num_inputs, a.inputs);
    set!(num_outputs, a.outputs);
    set!(num_loads, a.loads);
    set!(num_stores, a.stores);
    set!(num_compute, a.compute);
    set!(element_count, a.elements);
    set!(dtype, a.dtype);
    set!(block_size, a.block_size);
    set!(ops, a.ops);
    set!(recency_p, a.recency_p);
    spec.validate()?;
    Ok(spec)
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let base = resolve_spec(&a)?;
    std::fs::create_dir_all(&a.out)?;
    let mut entries = Vec::new();
    let mut written = Vec::new();
    for i in 0..a.count {
        let seed = a.seed.wrapping_add(i);
        let kernel = generate(&KernelGenSpec { seed, ..base.clone() })?;
        let id = format!("k{seed:08}");
        let sidecar = Sidecar::from(&kernel);
        std::fs::write(a.out.join(format!("{id}.meta.json")), serde_json::to_string_pretty(&sidecar)?)?;
        let mut variants = vec![(id.clone(), kernel.clone(), None)];
        for j in 0..a.renames {
            let (renamed, _) = kernel.renamed(seed.wrapping_mul(1_000_003).wrapping_add(j + 1))?;
            variants.push((format!("{id}.r{j}"), renamed, Some(id.clone())));
        }
        for (vid, k, variant_of) in variants {
            let file = format!("{vid}.hip");
            let text = if a.embed_metadata { k.source_with_header() } else { k.source.clone() };
            std::fs::write(a.out.join(&file), &text)?;
            written.push(HarvestedKernel {
                id: vid.clone(),
                source: text,
                raw_response: String::new(),
                job: PromptJob {
                    problem: "synthetic".into(),
                    variant: String::new(),
                    temperature: 0.0,
                    model: "generator".into(),
                    tag: id.clone(),
                },
                timestamp: 0,
                retries: 0,
                compile_status: CompileStatus::Unknown,
                failure_log: None,
            });
            entries.push(GeneratedEntry {
                id: vid,
                file,
                fingerprint: k.fingerprint.clone(),
                variant_of,
                compile_status: CompileStatus::Unknown,
            });
        }
    }
    if let Some(template) = &a.compile_check {
        let report = compile_filter(written, template, a.jobs);
        for k in report.kept.iter().chain(&report.excluded).chain(&report.unchecked) {
            if let Some(e) = entries.iter_mut().find(|e| e.id == k.id) {
                e.compile_status = k.compile_status;
            }
            if let Some(log) = &k.failure_log {
                std::fs::write(a.out.join(format!("{}.compile.log", k.id)), log)?;
            }
        }
        eprintln!("compile check: {}", report.summary());
    }
    write_lines(&a.out.join("index.jsonl"), &entries)?;
    eprintln!("wrote {} sources for {} kernels to {}", entries.len(), a.count, a.out.display());
    Ok(())
}

fn cmd_rename(a: RenameArgs) -> Result<()> {
    let source = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let (renamed, map) = rename_source(&source, a.seed)?;
    match &a.out {
        Some(p) => std::fs::write(p, &renamed)?,
        None => print!("{renamed}"),
    }
    if let Some(p) = &a.map {
        std::fs::write(p, serde_json::to_string_pretty(&map)?)?;
    }
    Ok(())
}

async fn cmd_harvest(a: HarvestArgs) -> Result<()> {
    let problems = read_list(&a.problems)?;
    let mut variants = read_list(&a.variants)?;
    if variants.is_empty() {
        variants.push(String::new());
    }
    let jobs = PromptJob::grid(&problems, &variants, &a.temps, &a.model);
    let endpoint = EndpointConfig {
        api_key: a.api_key.clone(),
        timeout_ms: a.timeout_ms,
        ..EndpointConfig::new(&a.url, &a.model)
    };
    let client = ChatClient::new(endpoint)?;
    let mut log = HarvestLog::open(&a.out)?;
    eprintln!("harvesting {} jobs with concurrency {}", jobs.len(), a.concurrency);
    let summary = harvest(&jobs, &client, a.concurrency, Some(&mut log)).await?;
    if let Some(p) = &a.errors {
        let rows: Vec<serde_json::Value> = summary
            .errors
            .iter()
            .map(|e| serde_json::json!({ "job": e.job, "kind": e.error.kind(), "message": e.error.to_string() }))
            .collect();
        write_lines(p, &rows)?;
    }
    eprintln!("{} kernels, {} errors", summary.kernels.len(), summary.errors.len());
    if summary.aborted {
        bail!("aborted on authentication failure; {} kernels kept in {}", summary.kernels.len(), a.out.display());
    }
    Ok(())
}

fn cmd_compile_filter(a: CompileFilterArgs) -> Result<()> {
    let kernels = read_corpus(&a.input)?;
    let report = compile_filter(kernels, &a.compiler, a.jobs);
    let mut kept = report.kept.clone();
    kept.extend(report.unchecked.iter().cloned());
    write_lines(&a.out, &kept)?;
    if let Some(p) = &a.excluded {
        write_lines(p, &report.excluded)?;
    }
    eprintln!("{}", report.summary());
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let map = match &a.columns {
        Some(p) => ColumnMap::from_toml_str(&std::fs::read_to_string(p)?)?,
        None => ColumnMap::default(),
    };
    let result = ingest(&a.input, &map, &load_ranges(&a.ranges)?)?;
    write_lines(&a.out, &result.records)?;
    if let Some(p) = &a.rejected {
        write_lines(p, &result.rejected)?;
    }
    eprintln!("{} records, {} rejected rows", result.records.len(), result.rejected.len());
    Ok(())
}

fn cmd_expand(a: ExpandArgs) -> Result<()> {
    let mut kernels = Vec::new();
    for path in hip_files(&a.kernels)? {
        let source = std::fs::read_to_string(&path)?;
        let parsed = validate_restricted(&source);
        let fp = parsed.first_error().is_none().then(|| fingerprint(&parsed.kernels));
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let id = name.trim_end_matches(".hip").to_string();
        kernels.push(KernelRef { id, fingerprint: fp, source_path: Some(name) });
    }
    let flag_sets: Vec<Vec<String>> = a.flag_sets.iter().map(|f| split_flags(f)).collect();
    let jobs = expand_configs(&kernels, &flag_sets, &a.architectures, a.toolkit.as_deref())?;
    write_lines(&a.out, &jobs)?;
    eprintln!("{} kernels -> {} build jobs", kernels.len(), jobs.len());
    Ok(())
}

fn cmd_label(a: LabelArgs) -> Result<()> {
    let records: Vec<ProfileRecord> = read_jsonl(&a.records)?;
    let (samples, errors) = label_records(&records, &a.sources, a.origin, &load_ranges(&a.ranges)?);
    write_lines(&a.out, &samples)?;
    if let Some(p) = &a.errors {
        write_lines(p, &errors)?;
    }
    eprintln!("{} labelled samples, {} errors", samples.len(), errors.len());
    Ok(())
}

/// Oracle labels for every `.hip` file under `dir`, one per architecture and
/// flag set. Flags do not change the oracle's counters.
pub fn oracle_label_dir(
    dir: &Path,
    architectures: &[String],
    flag_sets: &[String],
    peaks: &[MachinePeaks],
    model: &OracleModel,
    ranges: &NormRanges,
) -> Result<Vec<LabeledSample>> {
    let store = MetadataStore::load_dir(dir)?;
    let flag_sets: Vec<String> = if flag_sets.is_empty() { vec![String::new()] } else { flag_sets.to_vec() };
    let mut out = Vec::new();
    for path in hip_files(dir)? {
        let source = std::fs::read_to_string(&path)?;
        let (fp, meta) = store.resolve(&source).with_context(|| path.display().to_string())?;
        for arch in architectures {
            let p = peaks
                .iter()
                .find(|p| &p.architecture == arch)
                .with_context(|| format!("no machine peaks for {arch}"))?;
            let counters = model.counters(&fp, &meta, p)?.clamped(ranges)?;
            for flags in &flag_sets {
                out.push(LabeledSample {
                    source: source.clone(),
                    config: BuildConfig::new(arch.clone(), flags),
                    counters: counters.clone(),
                    origin: Origin::Oracle,
                    fingerprint: fp.clone(),
                });
            }
        }
    }
    Ok(out)
}

fn cmd_label_oracle(a: LabelOracleArgs) -> Result<()> {
    let peaks = match &a.peaks {
        Some(p) => load_peaks(p)?,
        None => MachinePeaks::builtin_architectures().iter().filter_map(|x| MachinePeaks::builtin(x)).collect(),
    };
    let model = OracleModel { efficiency: a.efficiency, ..OracleModel::default() };
    let samples =
        oracle_label_dir(&a.kernels, &a.architectures, &a.flag_sets, &peaks, &model, &load_ranges(&a.ranges)?)?;
    write_lines(&a.out, &samples)?;
    eprintln!("{} oracle-labelled samples", samples.len());
    Ok(())
}

fn cmd_build_dataset(a: BuildDatasetArgs) -> Result<()> {
    let ranges = load_ranges(&a.ranges)?;
    let mut samples = Vec::new();
    for p in &a.inputs {
        let labeled: Vec<LabeledSample> = read_jsonl(p)?;
        for s in &labeled {
            samples.push(render_sample(s, &ranges)?);
        }
    }
    let params = SplitParams { train_ratio: a.train_ratio, test_count: a.test_count, seed: a.seed };
    let manifest = assign_splits(samples.iter().map(|s| s.meta.fingerprint.as_str()), &params)?;
    let card = write_dataset(&samples, &manifest, &a.out)?;
    eprintln!("{} samples over {} kernels: {:?}", card.total, card.fingerprints, card.per_split);
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let samples: Vec<TrainingSample> = read_jsonl(&a.input)?;
    let mut text = String::new();
    for s in &samples {
        text.push_str(&export_line(s, a.template));
        text.push('\n');
    }
    std::fs::write(&a.out, text)?;
    eprintln!("exported {} records", samples.len());
    Ok(())
}

async fn cmd_eval(a: EvalArgs) -> Result<()> {
    let samples: Vec<TrainingSample> = read_jsonl(&a.test)?;
    let cases = samples
        .iter()
        .enumerate()
        .map(|(i, s)| EvalCase::from_sample(format!("{}#{i}", s.meta.fingerprint), s))
        .collect::<Result<Vec<_>, _>>()?;
    let client: Box<dyn PredictClient> = match (&a.server, &a.config) {
        (Some(url), _) => {
            Box::new(HttpPredictClient::new(url, a.backend.clone(), Duration::from_millis(a.timeout_ms))?)
        }
        (None, cfg) => {
            let mut config = match cfg {
                Some(p) => ServerConfig::load(p)?,
                None => ServerConfig::default(),
            };
            if cfg.is_none() {
                config.backends = vec![BackendConfig::Oracle {
                    id: "oracle".into(),
                    metadata_dir: a.metadata.clone(),
                    peaks: None,
                    model: None,
                }];
            }
            config.timeout_ms = a.timeout_ms;
            config.apply_env(|k| std::env::var(k).ok())?;
            Box::new(LocalPredictClient { registry: Arc::new(config.registry()?), backend: a.backend.clone() })
        }
    };
    let config = EvalConfig { epsilon: a.epsilon, concurrency: a.concurrency, ..EvalConfig::default() };
    let report = evaluate(client.as_ref(), &cases, &config).await?;
    write_report(&report, &a.out)?;
    print!("{}", report.to_markdown());
    Ok(())
}

async fn cmd_serve(a: ServeArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => ServerConfig::load(p)?,
        None => ServerConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    crate::server::run(config).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_parses() {
        Cli::parse_from([
            "counterlens",
            "generate",
            "--count",
            "3",
            "--ops",
            "add,fma",
            "--dtype",
            "float32",
            "--out",
            "x",
        ]);
        Cli::parse_from([
            "counterlens",
            "expand",
            "--kernels",
            "k",
            "--flags",
            "-O3 -ffast-math",
            "--arch",
            "gfx90a",
            "--out",
            "j",
        ]);
        Cli::parse_from(["counterlens", "eval", "--backend", "oracle", "--test", "t.jsonl", "--out", "r"]);
        Cli::parse_from(["counterlens", "export", "--input", "a", "--template", "llama3", "--out", "b"]);
        assert!(Cli::try_parse_from([
            "counterlens",
            "eval",
            "--test",
            "t",
            "--out",
            "r",
            "--config",
            "c",
            "--server",
            "s"
        ])
        .is_err());
    }

    #[test]
    fn spec_overrides() {
        let Command::Generate(a) =
            Cli::parse_from(["counterlens", "generate", "--compute", "7", "--dtype", "float32", "--out", "x"]).command
        else {
            panic!()
        };
        let spec = resolve_spec(&a).unwrap();
        assert_eq!((spec.num_compute, spec.dtype, spec.num_loads), (7, Dtype::Float32, 1));
    }
}
