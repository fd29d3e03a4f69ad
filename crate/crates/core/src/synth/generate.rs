use std::collections::BTreeSet;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fingerprint::fingerprint;
use super::parse::validate_restricted;
use super::SynthError;

pub const BLOCK_SIZES: [u32; 5] = [64, 128, 256, 512, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float32,
    Float64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::Float32 => 4,
            Dtype::Float64 => 8,
        }
    }

    pub fn c_name(self) -> &'static str {
        match self {
            Dtype::Float32 => "float",
            Dtype::Float64 => "double",
        }
    }
}

/// Arithmetic statement shapes the generator can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ComputeOp {
    Add,
    Sub,
    Mul,
    Div,
    /// `a * b + c`
    Fma,
}

impl ComputeOp {
    pub const ALL: [ComputeOp; 5] = [ComputeOp::Add, ComputeOp::Sub, ComputeOp::Mul, ComputeOp::Div, ComputeOp::Fma];

    pub fn arity(self) -> usize {
        match self {
            ComputeOp::Fma => 3,
            _ => 2,
        }
    }

    pub fn flops(self) -> usize {
        match self {
            ComputeOp::Fma => 2,
            _ => 1,
        }
    }

    fn render(self, operands: &[String]) -> String {
        match self {
            ComputeOp::Add => format!("{} + {}", operands[0], operands[1]),
            ComputeOp::Sub => format!("{} - {}", operands[0], operands[1]),
            ComputeOp::Mul => format!("{} * {}", operands[0], operands[1]),
            ComputeOp::Div => format!("{} / {}", operands[0], operands[1]),
            ComputeOp::Fma => format!("{} * {} + {}", operands[0], operands[1], operands[2]),
        }
    }
}

fn default_ops() -> Vec<ComputeOp> {
    ComputeOp::ALL.to_vec()
}

fn default_recency() -> f64 {
    0.5
}

/// Numeric description of a kernel to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGenSpec {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub element_count: u64,
    pub dtype: Dtype,
    pub num_loads: usize,
    pub num_stores: usize,
    pub num_compute: usize,
    pub block_size: u32,
    pub seed: u64,
    /// Statement shapes to draw from, uniformly.
    #[serde(default = "default_ops")]
    pub ops: Vec<ComputeOp>,
    /// Success probability of the geometric operand-recency distribution.
    #[serde(default = "default_recency")]
    pub recency_p: f64,
}

impl KernelGenSpec {
    /// One input, one output, one load, one store, one compute statement.
    pub fn minimal(dtype: Dtype, element_count: u64, seed: u64) -> Self {
        Self {
            num_inputs: 1,
            num_outputs: 1,
            element_count,
            dtype,
            num_loads: 1,
            num_stores: 1,
            num_compute: 1,
            block_size: 256,
            seed,
            ops: default_ops(),
            recency_p: default_recency(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Spec(m));
        if self.num_inputs == 0 || self.num_outputs == 0 {
            return fail("kernels need at least one input and one output".into());
        }
        if self.num_loads == 0 {
            return fail("num_loads must be at least 1".into());
        }
        if self.num_stores == 0 {
            return fail("num_stores must be at least 1".into());
        }
        if self.element_count == 0 {
            return fail("element_count must be positive".into());
        }
        if !BLOCK_SIZES.contains(&self.block_size) {
            return fail(format!("block_size {} not in {BLOCK_SIZES:?}", self.block_size));
        }
        if self.num_compute > 0 && self.ops.is_empty() {
            return fail("no compute ops allowed".into());
        }
        if !(self.recency_p > 0.0 && self.recency_p <= 1.0) {
            return fail(format!("recency_p {} must be in (0, 1]", self.recency_p));
        }
        if self.num_stores > self.num_loads + self.num_compute {
            return fail(format!(
                "{} stores need as many distinct values but only {} are defined",
                self.num_stores,
                self.num_loads + self.num_compute
            ));
        }
        if self.num_stores < self.num_outputs {
            return fail(format!("{} outputs cannot all be written by {} stores", self.num_outputs, self.num_stores));
        }
        Ok(())
    }
}

/// Analytic facts about a generated kernel, derived from what was emitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelMetadata {
    pub flops_per_thread: u64,
    pub loads_per_thread: u64,
    pub stores_per_thread: u64,
    pub bytes_loaded_per_thread: u64,
    pub bytes_stored_per_thread: u64,
    pub distinct_inputs_loaded: u64,
    pub distinct_outputs_stored: u64,
    pub total_threads: u64,
    pub dtype: Dtype,
    pub grid_dim: u64,
    pub block_dim: u32,
    pub element_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedKernel {
    pub source: String,
    pub metadata: KernelMetadata,
    pub spec: KernelGenSpec,
    pub fingerprint: String,
}

impl GeneratedKernel {
    /// Alpha-renamed copy; metadata, spec and fingerprint are unchanged.
    pub fn renamed(&self, seed: u64) -> Result<(GeneratedKernel, super::RenameMap), SynthError> {
        let (source, map) = super::rename_source(&self.source, seed)?;
        Ok((GeneratedKernel { source, ..self.clone() }, map))
    }
}

/// Truncated geometric draw over `0..n` (0 = most recent), by rejection.
fn recency_index(rng: &mut ChaCha8Rng, n: usize, p: f64) -> usize {
    loop {
        let mut k = 0;
        while rng.random::<f64>() >= p {
            k += 1;
            if k >= n {
                break;
            }
        }
        if k < n {
            return k;
        }
    }
}

struct Value {
    name: String,
    /// indices of the values this one reads
    deps: Vec<usize>,
}

/// Generates a kernel deterministically from `spec`.
pub fn generate(spec: &KernelGenSpec) -> Result<GeneratedKernel, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ty = spec.dtype.c_name();
    let mut values: Vec<Value> = Vec::new();
    let mut body: Vec<String> = Vec::new();
    let mut flops = 0usize;
    let mut inputs_used = BTreeSet::new();

    for _ in 0..spec.num_loads {
        let input = rng.random_range(0..spec.num_inputs);
        inputs_used.insert(input);
        let name = format!("var_{}", values.len());
        body.push(format!(" auto {name} = input_{input}[thread_id];"));
        values.push(Value { name, deps: vec![] });
    }

    for _ in 0..spec.num_compute {
        let op = spec.ops[rng.random_range(0..spec.ops.len())];
        let n = values.len();
        let picks: Vec<usize> = (0..op.arity()).map(|_| n - 1 - recency_index(&mut rng, n, spec.recency_p)).collect();
        let operands: Vec<String> = picks.iter().map(|&i| values[i].name.clone()).collect();
        let name = format!("var_{n}");
        body.push(format!(" auto {name} = {};", op.render(&operands)));
        flops += op.flops();
        values.push(Value { name, deps: picks });
    }

    // distinct stored values: the newest first, the rest recency-skewed
    let n = values.len();
    let mut stored: Vec<usize> = vec![n - 1];
    while stored.len() < spec.num_stores {
        let cand = n - 1 - recency_index(&mut rng, n, spec.recency_p);
        if !stored.contains(&cand) {
            stored.push(cand);
        }
    }

    let mut live = vec![false; n];
    let mut stack = stored.clone();
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut live[v], true) {
            stack.extend(values[v].deps.iter().copied());
        }
    }
    // a dead value nobody reads ends a dead chain; folding those ends into
    // the last store makes every value reachable
    let mut read = vec![false; n];
    for v in &values {
        for &d in &v.deps {
            read[d] = true;
        }
    }
    let dead_ends: Vec<usize> = (0..n).filter(|&v| !live[v] && !read[v]).collect();

    let mut store_lines = Vec::with_capacity(stored.len());
    for (slot, &v) in stored.iter().enumerate() {
        let output = slot % spec.num_outputs;
        let mut expr = values[v].name.clone();
        if slot + 1 == stored.len() {
            for &d in &dead_ends {
                write!(expr, " + {}", values[d].name).unwrap();
                flops += 1;
            }
        }
        store_lines.push(format!(" output_{output}[thread_id] = {expr};"));
    }
    body.extend(store_lines);

    let grid = spec.element_count.div_ceil(spec.block_size as u64);
    let source = render_source(spec, ty, &body);

    let metadata = KernelMetadata {
        flops_per_thread: flops as u64,
        loads_per_thread: spec.num_loads as u64,
        stores_per_thread: spec.num_stores as u64,
        bytes_loaded_per_thread: (spec.num_loads * spec.dtype.size()) as u64,
        bytes_stored_per_thread: (spec.num_stores * spec.dtype.size()) as u64,
        distinct_inputs_loaded: inputs_used.len() as u64,
        distinct_outputs_stored: spec.num_outputs.min(spec.num_stores) as u64,
        total_threads: grid * spec.block_size as u64,
        dtype: spec.dtype,
        grid_dim: grid,
        block_dim: spec.block_size,
        element_count: spec.element_count,
    };

    let parsed = validate_restricted(&source);
    if let Some(d) = parsed.first_error() {
        return Err(SynthError::Internal(format!("generated source does not re-parse: {d}")));
    }
    Ok(GeneratedKernel { fingerprint: fingerprint(&parsed.kernels), source, metadata, spec: spec.clone() })
}

fn render_source(spec: &KernelGenSpec, ty: &str, body: &[String]) -> String {
    let params: Vec<String> = (0..spec.num_inputs)
        .map(|i| format!("{ty} *input_{i}"))
        .chain((0..spec.num_outputs).map(|o| format!("{ty} *output_{o}")))
        .collect();
    let buffers: Vec<String> = (0..spec.num_inputs)
        .map(|i| format!("input_{i}"))
        .chain((0..spec.num_outputs).map(|o| format!("output_{o}")))
        .collect();
    let n = spec.element_count;

    let mut s = String::new();
    s.push_str("#include <cstdint>\n#include <iostream>\n\n");
    s.push_str("#include <hip/hip_runtime.h>\n#include <hip/hip_runtime_api.h>\n#include <thrust/device_vector.h>\n\n");
    writeln!(s, "__global__ void generated_kernel({}) {{", params.join(", ")).unwrap();
    s.push_str(" auto thread_id = threadIdx.x + \n                   blockIdx.x * blockDim.x;\n");
    for line in body {
        s.push_str(line);
        s.push('\n');
    }
    s.push_str("}\n");
    s.push_str("int main(int, char **) {\n");
    for b in &buffers {
        writeln!(s, " thrust::device_vector<{ty}> {b}({n}, 1);").unwrap();
    }
    s.push_str(" \n");
    writeln!(s, " std::size_t block_size{{{}}};", spec.block_size).unwrap();
    writeln!(s, " std::size_t input_size{{{n}}};").unwrap();
    s.push_str(" std::size_t num_blocks{(input_size + block_size - 1) / block_size};\n");
    s.push_str("  \n");
    s.push_str(" generated_kernel<<<num_blocks, block_size>>>(\n");
    let args: Vec<String> = buffers.iter().map(|b| format!("{b}.data().get()")).collect();
    writeln!(s, "    {});", args.join(", ")).unwrap();
    s.push_str("    \n");
    s.push_str(" auto status = hipDeviceSynchronize();\n");
    s.push_str(" if (status != hipSuccess) {\n");
    s.push_str("  std::cout << \"kernel launch failed\\n\";\n");
    s.push_str(" }\n");
    s.push_str("}\n");
    s
}
