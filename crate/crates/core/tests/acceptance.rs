//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed; the
//! process exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use counterlens::dataset::{assign_splits, render_sample, write_dataset, SplitParams, TrainingSample, SPLIT_FILES};
use counterlens::eval::{evaluate, report_from_pairs, EvalCase, EvalConfig, HttpPredictClient, PredictionPair};
use counterlens::ingest::{
    expand_configs, label_generated, split_flags, BuildConfig, KernelRef, LabeledSample, Origin,
};
use counterlens::predict::{extract_json, ExtractMode, OracleBackend, PredictResponseBody, Registry, RegistryOptions};
use counterlens::prompt::render_assistant_turn;
use counterlens::roofline::{
    denormalize, normalize, CounterBlock, CounterVector, MachinePeaks, Metric, NormRanges, NormalizedCounters,
};
use counterlens::server::{router, spawn, AppState};
use counterlens::synth::{generate, ComputeOp, Dtype, GeneratedKernel, KernelGenSpec, MetadataStore, OracleModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

/// Normalization ceilings as published, independent of the library table.
fn published_ceiling(m: Metric) -> f64 {
    match m {
        Metric::L1HitRate | Metric::L2HitRate => 100.0,
        Metric::L1Bandwidth | Metric::L2Bandwidth | Metric::FabricWriteBandwidth | Metric::FabricReadBandwidth => {
            16384.0
        }
        Metric::L1ArithmeticIntensity | Metric::HbmArithmeticIntensity => 2048.0,
        Metric::L2ArithmeticIntensity => 5120.0,
        Metric::L1Gflops | Metric::L2Gflops | Metric::HbmGflops => 12288.0,
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normalization_round_trip() -> Outcome {
    let started = Instant::now();
    let ranges = NormRanges::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let raw: CounterVector =
            Metric::ALL.iter().map(|&m| (m, rng.random_range(0.0..=published_ceiling(m)))).collect();
        let block = CounterBlock {
            compiler_flags: "-O3".into(),
            architecture: "gfx942".into(),
            counters: normalize(&raw, &ranges).map_err(|e| e.to_string())?,
        };
        let text = render_assistant_turn("gfx942", "-O3", &block.to_json_text().map_err(|e| e.to_string())?);
        let back = denormalize(&extract_json(&text, ExtractMode::Strict).map_err(|e| e.to_string())?.counters, &ranges)
            .map_err(|e| e.to_string())?;
        for m in Metric::ALL {
            let bound = 0.0005 * published_ceiling(m);
            let err = (back.get(m).unwrap() - raw.get(m).unwrap()).abs();
            worst = worst.max(err / published_ceiling(m));
            ensure(err <= bound * (1.0 + 1e-9), || format!("vector {i}, {m}: error {err} exceeds {bound}"))?;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 vectors, worst error {worst:.6} of span, {elapsed:.0?}"))
}

fn reference_block() -> Outcome {
    let golden = include_str!("fixtures/reference_block.json");
    let values = [
        (Metric::L1ArithmeticIntensity, 0.002),
        (Metric::L2ArithmeticIntensity, 0.002),
        (Metric::HbmArithmeticIntensity, 0.004),
        (Metric::L1Gflops, 0.459),
        (Metric::L2Gflops, 0.459),
        (Metric::HbmGflops, 0.459),
        (Metric::L1Bandwidth, 0.089),
        (Metric::L2Bandwidth, 0.070),
        (Metric::FabricWriteBandwidth, 0.022),
        (Metric::FabricReadBandwidth, 0.022),
        (Metric::L1HitRate, 0.500),
        (Metric::L2HitRate, 0.370),
    ];
    let flags = "--std=c++17 -O3 -ffast-math";
    // physical values that normalize onto the published ones
    let physical: CounterVector = values.iter().map(|&(m, v)| (m, v * published_ceiling(m))).collect();
    let sample = LabeledSample {
        source: "__global__ void k() {}".into(),
        config: BuildConfig::new("gfx90a", flags),
        counters: physical,
        origin: Origin::Custom,
        fingerprint: "reference".into(),
    };
    let rendered = render_sample(&sample, &NormRanges::default()).map_err(|e| e.to_string())?;
    let expected_turn = render_assistant_turn("gfx90a", flags, golden);
    ensure(rendered.assistant == expected_turn, || format!("rendered block differs:\n{}", rendered.assistant))?;
    let direct: NormalizedCounters = values.iter().copied().collect();
    let block = CounterBlock { compiler_flags: flags.into(), architecture: "gfx90a".into(), counters: direct.clone() };
    ensure(block.to_json_text().map_err(|e| e.to_string())? == golden, || "direct rendering differs".into())?;
    let back = extract_json(&rendered.assistant, ExtractMode::Strict).map_err(|e| e.to_string())?;
    ensure(back.counters == direct, || format!("extracted {:?}", back.counters))?;
    ensure(back.architecture.as_deref() == Some("gfx90a") && back.compiler_flags.as_deref() == Some(flags), || {
        "config echo lost".into()
    })?;
    Ok(format!("{} bytes identical, 12 values recovered exactly", golden.len()))
}

/// Four spec families with per-kernel variation.
fn family_spec(family: usize, i: u64) -> KernelGenSpec {
    let seed = 10_000 * (family as u64 + 1) + i;
    let elements = [1u64 << 18, 1 << 20, 3 << 19, 1 << 22][(i % 4) as usize];
    let block = [64, 128, 256, 512, 1024][(i % 5) as usize];
    let base = KernelGenSpec::minimal(Dtype::Float64, elements, seed);
    match family {
        // streaming: few loads, little arithmetic
        0 => KernelGenSpec { num_inputs: 2, num_loads: 2, num_compute: 2, block_size: block, ..base },
        // compute-heavy: long fma chains in single precision
        1 => KernelGenSpec {
            dtype: Dtype::Float32,
            num_compute: 400 + 4 * i as usize,
            ops: vec![ComputeOp::Fma],
            block_size: block,
            ..base
        },
        // multi-output with reuse of loaded inputs
        2 => KernelGenSpec {
            num_inputs: 4,
            num_outputs: 3,
            num_loads: 6,
            num_stores: 3,
            num_compute: 12,
            block_size: block,
            ..base
        },
        // wide reads in single precision
        _ => KernelGenSpec {
            dtype: Dtype::Float32,
            num_inputs: 3,
            num_loads: 8,
            num_compute: 24,
            block_size: block,
            ..base
        },
    }
}

fn oracle_registry(store: MetadataStore, ranges: &NormRanges) -> Result<Registry, String> {
    let peaks = ["gfx90a", "gfx942"].iter().filter_map(|a| MachinePeaks::builtin(a));
    let oracle = OracleBackend::new("oracle", store, OracleModel::default(), peaks, ranges.clone());
    Registry::new(vec![Arc::new(oracle)], None, RegistryOptions { ranges: ranges.clone(), ..Default::default() })
        .map_err(|e| e.to_string())
}

async fn start_server(registry: Registry) -> Result<SocketAddr, String> {
    let app = router(AppState::new(Arc::new(registry), 1 << 20), &["*".to_string()]);
    let (addr, _handle) = spawn(app, "127.0.0.1:0".parse().unwrap()).await.map_err(|e| e.to_string())?;
    Ok(addr)
}

async fn oracle_end_to_end() -> Outcome {
    let started = Instant::now();
    let ranges = NormRanges::default();
    let model = OracleModel::default();
    let mut store = MetadataStore::new();
    let mut kernels: Vec<GeneratedKernel> = Vec::new();
    for family in 0..4 {
        for i in 0..50 {
            let k = generate(&family_spec(family, i)).map_err(|e| format!("family {family} kernel {i}: {e}"))?;
            store.insert_kernel(&k);
            kernels.push(k);
        }
    }
    let mut samples: Vec<TrainingSample> = Vec::new();
    for (n, k) in kernels.iter().enumerate() {
        // every other kernel is served under a renamed variant
        let source =
            if n % 2 == 0 { k.source.clone() } else { k.renamed(n as u64).map_err(|e| e.to_string())?.0.source };
        for arch in ["gfx90a", "gfx942"] {
            let peaks = MachinePeaks::builtin(arch).unwrap();
            let config = BuildConfig::new(arch, "-O3 -ffast-math");
            let labeled = label_generated(k, &source, &config, &model, &peaks, &ranges).map_err(|e| e.to_string())?;
            samples.push(render_sample(&labeled, &ranges).map_err(|e| e.to_string())?);
        }
    }
    let cases = samples
        .iter()
        .enumerate()
        .map(|(i, s)| EvalCase::from_sample(format!("case{i}"), s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;

    let addr = start_server(oracle_registry(store, &ranges)?).await?;
    let client =
        HttpPredictClient::new(format!("http://{addr}"), None, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    // pairs whose ground truth is below 0.05 are excluded from the count
    let config = EvalConfig { epsilon: 0.05, concurrency: 16, ..EvalConfig::default() };
    let report = evaluate(&client, &cases, &config).await.map_err(|e| e.to_string())?;

    ensure(report.failed_samples == 0, || {
        format!("{} failed predictions: {:?}", report.failed_samples, report.failure_kinds)
    })?;
    let mut counted = 0;
    let mut metrics_counted = 0;
    let mut uncounted = Vec::new();
    for row in &report.rows {
        counted += row.counted;
        if row.counted == 0 {
            uncounted.push(row.metric.key());
        } else {
            metrics_counted += 1;
            ensure(row.below[0] == row.counted, || {
                format!("{}: {} of {} below 2%", row.metric, row.below[0], row.counted)
            })?;
        }
    }
    ensure(metrics_counted >= 10, || format!("only {metrics_counted} metrics have ground truth >= 0.05"))?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} kernels, {} predictions over HTTP, {counted} pairs >= 0.05 across {metrics_counted} metrics all below 2% (none >= 0.05: {uncounted:?}), {elapsed:.1?}",
        kernels.len(),
        cases.len()
    ))
}

fn eval_recount() -> Outcome {
    let thresholds = [0.02, 0.04, 0.06, 0.08, 0.10];
    let epsilon = 0.001;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pairs = Vec::with_capacity(5000);
    for i in 0..5000 {
        let metric = Metric::ALL[i % 12];
        let truth = match rng.random_range(0..20) {
            0 => rng.random_range(0.0..0.001),
            1 => 0.5,
            _ => (rng.random_range(1..=1000) as f64) / 1000.0,
        };
        let predicted = match rng.random_range(0..20) {
            0 => None,
            // errors exactly on a threshold must not count as below it
            1 => Some(truth * (1.0 + thresholds[rng.random_range(0..5)])),
            _ => {
                let e: f64 = rng.random_range(-0.15..0.15);
                Some((truth * (1.0 + e)).max(0.0))
            }
        };
        pairs.push(PredictionPair { sample: format!("s{}", i / 12), metric, predicted, truth });
    }
    let config = EvalConfig { thresholds: thresholds.to_vec(), epsilon, concurrency: 1 };
    let report = report_from_pairs(&pairs, 5000 / 12 + 1, BTreeMap::new(), &config).map_err(|e| e.to_string())?;

    // single-pass brute force: (counted, excluded, failed, below[5]) per metric
    let mut tally: HashMap<Metric, (usize, usize, usize, [usize; 5])> = HashMap::new();
    for p in &pairs {
        let t = tally.entry(p.metric).or_default();
        match p.predicted {
            None => t.2 += 1,
            Some(_) if p.truth < epsilon => t.1 += 1,
            Some(v) => {
                t.0 += 1;
                let err = (v - p.truth).abs() / p.truth;
                for (k, &thr) in thresholds.iter().enumerate() {
                    if err < thr {
                        t.3[k] += 1;
                    }
                }
            }
        }
    }
    ensure(report.rows.len() == 12, || format!("{} rows", report.rows.len()))?;
    let mut cells = 0;
    for row in &report.rows {
        let (counted, excluded, failed, below) = tally[&row.metric];
        ensure((row.counted, row.excluded, row.failed) == (counted, excluded, failed), || {
            format!(
                "{}: counts {:?} vs recount {:?}",
                row.metric,
                (row.counted, row.excluded, row.failed),
                (counted, excluded, failed)
            )
        })?;
        ensure(row.below == below, || format!("{}: {:?} vs recount {:?}", row.metric, row.below, below))?;
        for (k, p) in row.proportions.iter().enumerate() {
            let expect = below[k] as f64 / counted as f64;
            ensure(*p == Some(expect), || format!("{} threshold {k}: {p:?} vs {expect}", row.metric))?;
            cells += 1;
        }
        let props: Vec<f64> = row.proportions.iter().flatten().copied().collect();
        ensure(props.windows(2).all(|w| w[0] <= w[1]), || format!("{}: not monotone {props:?}", row.metric))?;
    }
    Ok(format!("5000 pairs, {cells} cells match the recount, all rows monotone"))
}

/// Statement-level reading of a generated kernel, written independently of
/// the library parser.
struct Reparsed {
    /// per defined value: the values it reads
    defs: Vec<Vec<usize>>,
    /// per compute statement: (index of the defined value, operands)
    compute: Vec<(usize, Vec<usize>)>,
    store_reads: Vec<usize>,
    loads: u64,
    stores: u64,
    flops: u64,
    inputs_loaded: BTreeSet<String>,
    outputs_stored: BTreeSet<String>,
}

fn var_index(tok: &str) -> Option<usize> {
    tok.trim_end_matches(';').strip_prefix("var_")?.parse().ok()
}

fn reparse(source: &str) -> Result<Reparsed, String> {
    let body_start = source.find("__global__").ok_or("no kernel")?;
    let body_end = source[body_start..].find("\n}").ok_or("no kernel end")? + body_start;
    let mut r = Reparsed {
        defs: Vec::new(),
        compute: Vec::new(),
        store_reads: Vec::new(),
        loads: 0,
        stores: 0,
        flops: 0,
        inputs_loaded: BTreeSet::new(),
        outputs_stored: BTreeSet::new(),
    };
    for line in source[body_start..body_end].lines().map(str::trim) {
        if let Some(rest) = line.strip_prefix("auto var_") {
            let (idx, rhs) = rest.split_once(" = ").ok_or_else(|| format!("odd line {line}"))?;
            let idx: usize = idx.parse().map_err(|_| format!("odd index in {line}"))?;
            if idx != r.defs.len() {
                return Err(format!("definition {idx} out of order"));
            }
            let rhs = rhs.trim_end_matches(';');
            if let Some((array, _)) = rhs.split_once("[thread_id]") {
                r.loads += 1;
                r.inputs_loaded.insert(array.to_string());
                r.defs.push(Vec::new());
            } else {
                let toks: Vec<&str> = rhs.split_whitespace().collect();
                let operands: Vec<usize> = toks.iter().filter_map(|t| var_index(t)).collect();
                r.flops += toks.iter().filter(|t| matches!(**t, "+" | "-" | "*" | "/")).count() as u64;
                r.compute.push((idx, operands.clone()));
                r.defs.push(operands);
            }
        } else if let Some((lhs, rhs)) = line.split_once("[thread_id] = ") {
            r.stores += 1;
            r.outputs_stored.insert(lhs.to_string());
            let toks: Vec<&str> = rhs.split_whitespace().collect();
            r.flops += toks.iter().filter(|t| **t == "+").count() as u64;
            r.store_reads.extend(toks.iter().filter_map(|t| var_index(t)));
        }
    }
    Ok(r)
}

fn generator_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut recency: BTreeMap<usize, u64> = BTreeMap::new();
    let n = 10_000;
    for g in 0..n {
        let num_inputs = rng.random_range(1..=4);
        let num_outputs = rng.random_range(1..=3);
        let num_loads = rng.random_range(1..=8);
        let num_compute = rng.random_range(2..=24);
        let num_stores = rng.random_range(num_outputs..=4).min(num_loads + num_compute);
        let spec = KernelGenSpec {
            num_inputs,
            num_outputs,
            element_count: rng.random_range(1_000..5_000_000),
            dtype: if rng.random_bool(0.5) { Dtype::Float32 } else { Dtype::Float64 },
            num_loads,
            num_stores,
            num_compute,
            block_size: [64, 128, 256, 512, 1024][rng.random_range(0..5)],
            seed: rng.random(),
            ops: ComputeOp::ALL.to_vec(),
            recency_p: 0.5,
        };
        let a = generate(&spec).map_err(|e| format!("generation {g}: {e}"))?;
        let b = generate(&spec).map_err(|e| format!("generation {g}: {e}"))?;
        ensure(a.source == b.source && a.metadata == b.metadata, || format!("generation {g} not deterministic"))?;

        let r = reparse(&a.source).map_err(|e| format!("generation {g}: {e}"))?;
        let mut seen = vec![false; r.defs.len()];
        let mut stack = r.store_reads.clone();
        while let Some(v) = stack.pop() {
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(&r.defs[v]);
            }
        }
        ensure(seen.iter().all(|&s| s), || format!("generation {g}: unreachable values\n{}", a.source))?;

        let m = &a.metadata;
        let size = if spec.dtype == Dtype::Float32 { 4 } else { 8 };
        let agree = m.loads_per_thread == r.loads
            && m.stores_per_thread == r.stores
            && m.flops_per_thread == r.flops
            && m.bytes_loaded_per_thread == r.loads * size
            && m.bytes_stored_per_thread == r.stores * size
            && m.distinct_inputs_loaded == r.inputs_loaded.len() as u64
            && m.distinct_outputs_stored == r.outputs_stored.len() as u64
            && m.total_threads >= spec.element_count
            && m.grid_dim * m.block_dim as u64 == m.total_threads;
        ensure(agree, || format!("generation {g}: metadata {m:?} disagrees with source\n{}", a.source))?;

        for (idx, operands) in &r.compute {
            for &o in operands {
                *recency.entry(idx - 1 - o).or_default() += 1;
            }
        }
    }
    // counts must not increase with distance, allowing 3 sigma of noise
    let counts: Vec<u64> = (0..8).map(|k| recency.get(&k).copied().unwrap_or(0)).collect();
    for k in 1..counts.len() {
        let slack = 3.0 * (counts[k - 1] as f64).sqrt();
        ensure(counts[k] as f64 <= counts[k - 1] as f64 + slack, || {
            format!("recency histogram rises at {k}: {counts:?}")
        })?;
    }
    ensure(counts[0] > 2 * counts[2], || format!("recency histogram not skewed: {counts:?}"))?;
    Ok(format!("{n} generations deterministic, reachable and consistent; recency counts {:?}", &counts[..5]))
}

fn split_leakage() -> Outcome {
    let ranges = NormRanges::default();
    let counters: CounterVector = Metric::ALL.iter().map(|&m| (m, 0.25 * published_ceiling(m))).collect();
    let mut fingerprints = BTreeSet::new();
    let mut samples = Vec::new();
    let mut seed = 0u64;
    while fingerprints.len() < 1000 {
        seed += 1;
        let spec = KernelGenSpec {
            num_inputs: 2,
            num_loads: 3,
            num_compute: 8,
            num_stores: 2,
            num_outputs: 2,
            ..KernelGenSpec::minimal(Dtype::Float64, 1 << 20, seed)
        };
        let k = generate(&spec).map_err(|e| e.to_string())?;
        if !fingerprints.insert(k.fingerprint.clone()) {
            continue;
        }
        for arch in ["gfx90a", "gfx942"] {
            for flags in ["-O3", "-O3 -ffast-math", "-O3 -munsafe-fp-atomics"] {
                let s = LabeledSample {
                    source: k.source.clone(),
                    config: BuildConfig::new(arch, flags),
                    counters: counters.clone(),
                    origin: Origin::Synthetic,
                    fingerprint: k.fingerprint.clone(),
                };
                samples.push(render_sample(&s, &ranges).map_err(|e| e.to_string())?);
            }
        }
    }
    let params = SplitParams { train_ratio: 0.9, test_count: 100, seed: 7 };
    let manifest =
        assign_splits(samples.iter().map(|s| s.meta.fingerprint.as_str()), &params).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_dataset(&samples, &manifest, dir.path()).map_err(|e| e.to_string())?;

    // scan the written files
    let mut home: HashMap<String, BTreeSet<&str>> = HashMap::new();
    let mut rows = 0;
    for (_, name) in SPLIT_FILES {
        let text = std::fs::read_to_string(dir.path().join(name)).map_err(|e| e.to_string())?;
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let fp = v["meta"]["fingerprint"].as_str().ok_or("record without fingerprint")?.to_string();
            home.entry(fp).or_default().insert(name);
            rows += 1;
        }
    }
    ensure(rows == 6000, || format!("{rows} records written"))?;
    let leaked = home.values().filter(|s| s.len() > 1).count();
    ensure(leaked == 0, || format!("{leaked} fingerprints in more than one split"))?;
    let per = |name: &str| home.values().filter(|s| s.contains(name)).count();
    let (train, val, test) = (per("train.jsonl"), per("val.jsonl"), per("test.jsonl"));
    ensure(test == 100, || format!("{test} test fingerprints"))?;
    let target_train = 0.9 * (1000 - test) as f64;
    ensure((train as f64 - target_train).abs() <= 1.0 && train + val == 900, || format!("train {train}, val {val}"))?;
    Ok(format!("1000 fingerprints x 6 configs: train {train}, val {val}, test {test}, 0 leaked"))
}

fn config_expansion() -> Outcome {
    let kernels = [KernelRef { id: "k".into(), fingerprint: Some("fp".into()), source_path: None }];
    let flags: Vec<Vec<String>> =
        ["-O3", "-O3 -ffast-math", "-O3 -munsafe-fp-atomics"].iter().map(|f| split_flags(f)).collect();
    let archs = vec!["gfx90a".to_string(), "gfx942".to_string()];
    let jobs = expand_configs(&kernels, &flags, &archs, None).map_err(|e| e.to_string())?;
    let distinct: BTreeSet<_> = jobs.iter().map(|j| j.config.clone()).collect();
    ensure(jobs.len() == 6 && distinct.len() == 6, || format!("{} jobs, {} distinct", jobs.len(), distinct.len()))?;
    Ok("1 kernel x 3 flag sets x 2 architectures = 6 distinct jobs".into())
}

async fn server_burst() -> Outcome {
    let ranges = NormRanges::default();
    let mut store = MetadataStore::new();
    let mut sources = Vec::new();
    for i in 0..10 {
        let k = generate(&family_spec(i % 4, i as u64)).map_err(|e| e.to_string())?;
        store.insert_kernel(&k);
        sources.push(k.source);
    }
    let addr = start_server(oracle_registry(store, &ranges)?).await?;
    let http = reqwest::Client::new();
    let mut ids: Vec<u64> = (0..100).map(|i| 1_000 + 7 * i).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let tasks: Vec<_> = ids
        .iter()
        .enumerate()
        .map(|(n, &id)| {
            let http = http.clone();
            let body = serde_json::json!({
                "source": sources[n % sources.len()],
                "architecture": if n % 2 == 0 { "gfx90a" } else { "gfx942" },
                "compiler_flags": "-O3",
                "request_id": id,
            });
            tokio::spawn(async move {
                let resp = http
                    .post(format!("http://{addr}/v1/predict"))
                    .json(&body)
                    .send()
                    .await
                    .map_err(|e| e.to_string())?;
                let status = resp.status();
                let text = resp.text().await.map_err(|e| e.to_string())?;
                if !status.is_success() {
                    return Err(format!("HTTP {status}: {text}"));
                }
                let parsed: PredictResponseBody = serde_json::from_str(&text).map_err(|e| e.to_string())?;
                Ok::<_, String>((id, parsed))
            })
        })
        .collect();
    let mut echoed = 0;
    for t in tasks {
        let (sent, body) = t.await.map_err(|e| e.to_string())??;
        ensure(body.request_id == sent, || format!("sent {sent}, got {}", body.request_id))?;
        let physical = body.physical_counters()?;
        for (m, v) in body.normalized.iter() {
            let expect = v * published_ceiling(m);
            let got = physical.get(m).ok_or_else(|| format!("{m} missing from physical"))?;
            ensure((got - expect).abs() <= 1e-9 * expect.max(1.0), || {
                format!("request {sent} {m}: physical {got} vs {expect}")
            })?;
        }
        ensure(physical.len() == 12 && body.normalized.len() == 12, || format!("request {sent}: incomplete response"))?;
        echoed += 1;
    }
    ensure(echoed == 100, || format!("{echoed} responses"))?;
    Ok("100 concurrent requests, every request_id echoed, physical = denormalize(normalized)".into())
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let criteria: Vec<Criterion> = vec![
        ("normalization round-trip", Box::new(normalization_round_trip)),
        ("reference block golden", Box::new(reference_block)),
        ("oracle end-to-end", Box::new(|| rt.block_on(oracle_end_to_end()))),
        ("eval recount", Box::new(eval_recount)),
        ("generator properties", Box::new(generator_properties)),
        ("split leakage", Box::new(split_leakage)),
        ("config expansion count", Box::new(config_expansion)),
        ("server contract burst", Box::new(|| rt.block_on(server_burst()))),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    println!("acceptance: {} criteria, {failed} failed", 8);
    if failed > 0 {
        std::process::exit(1);
    }
}
