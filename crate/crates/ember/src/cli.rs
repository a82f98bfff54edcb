//! Command-line entry point: compile programs to the decoupled form, run
//! them on the instrumented VM, differential-verify whole configuration
//! matrices, and characterize traces. All outputs are JSON-friendly for
//! scripting; exit codes are 0 (ok), 1 (diagnostics), 2 (deadlock),
//! 3 (out-of-bounds).

use crate::decouple;
use crate::dlc::{self, DlcProgram};
use crate::mem::{self, MemImage};
use crate::passes::{self, PassConfig};
use crate::scf;
use crate::slc::{self, CacheLevel, LoadHint};
use crate::vm::{self, CacheModelConfig, Schedule, VmConfig};
use crate::workloads::{self, KernelDims, KernelKind, Locality};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ember", version, about = "Compiler and instrumented VM for embedding operations on decoupled access-execute machines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a source file down to the decoupled form.
    Compile(CompileArgs),
    /// Run a compiled program on the simulated machine.
    Run(RunArgs),
    /// Differential-verify a kernel over an optimization/width matrix.
    Verify(VerifyArgs),
    /// Reuse-distance CDF and LRU hit rates of a vector-id trace.
    Cdf(CdfArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Input file (structured source, or mid-level text with --from slc).
    input: PathBuf,
    /// Output path for the compiled program.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Optimization level: 1 adds vectorization, 2 bufferization,
    /// 3 queue alignment.
    #[arg(long, default_value_t = 0)]
    opt: u8,
    /// Vector width for vectorized levels.
    #[arg(long, default_value_t = 8)]
    vlen: u32,
    /// Convert pure-copy callbacks into direct store streams.
    #[arg(long)]
    store_streams: bool,
    /// Per-memref load hint, e.g. `vals=L2,nontemporal` (repeatable).
    #[arg(long = "hint", value_name = "MEM=LEVEL,TEMPORALITY")]
    hints: Vec<String>,
    /// Dump an intermediate stage to stdout: scf, slc, slcv, or dlc.
    #[arg(long, value_name = "STAGE")]
    dump_ir: Option<String>,
    /// Dump the loop classification as JSON to stdout.
    #[arg(long)]
    dump_classification: bool,
    /// Input language override (scf or slc); defaults to the file extension.
    #[arg(long)]
    from: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Compiled program.
    program: PathBuf,
    /// Memory image JSON binding every parameter.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the final contents of written memrefs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the instrumentation counters.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Control-queue capacity in tokens.
    #[arg(long, default_value_t = 64)]
    ctrl_cap: usize,
    /// Data-queue capacity in slots.
    #[arg(long, default_value_t = 512)]
    data_cap: usize,
    /// Enable the cache model: `L2_LINES,LLC_LINES[,LINE_ELEMS]`.
    #[arg(long)]
    cache: Option<String>,
    /// Seed for a randomized fair engine interleaving.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Source file to verify; omit when using --kernel.
    input: Option<PathBuf>,
    /// Built-in kernel name: sls, spmm, mp, kg, or spattn.
    #[arg(long)]
    kernel: Option<String>,
    /// Memory image for file inputs (generated for --kernel).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "0,1,2,3")]
    opts: String,
    #[arg(long, default_value = "1,2,4,8")]
    vlens: String,
    /// Seeded random inputs per cell (kernel mode).
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 4)]
    batches: u64,
    #[arg(long, default_value_t = 8)]
    lookups: u64,
    #[arg(long, default_value_t = 64)]
    rows: u64,
    #[arg(long, default_value_t = 16)]
    emb_len: u64,
    #[arg(long, default_value_t = 2)]
    bpq: u64,
    #[arg(long, default_value_t = 2)]
    k_block: u64,
    #[arg(long, default_value_t = 2)]
    q_block: u64,
    /// Input locality preset: L0, L1, L2, uniform, or zipf<S>.
    #[arg(long, default_value = "L0")]
    locality: String,
    #[arg(long)]
    store_streams: bool,
}

#[derive(Args)]
struct CdfArgs {
    /// Trace file with one vector id per line; omit when using --gen.
    input: Option<PathBuf>,
    /// Generate a synthetic trace: uniform, L0, L1, L2, or zipf<S>.
    #[arg(long)]
    gen: Option<String>,
    #[arg(long, default_value_t = 1024)]
    rows: u64,
    #[arg(long, default_value_t = 100_000)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// LRU capacities (in vectors) to report hit rates for.
    #[arg(long, default_value = "16,64,256")]
    capacities: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn diag(msg: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: msg.into(),
        }
    }
}

impl<E: std::fmt::Display> From<(i32, E)> for Failure {
    fn from((code, e): (i32, E)) -> Self {
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Compile(a) => cmd_compile(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Cdf(a) => cmd_cdf(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let color = std::env::var("EMBER_COLOR").map(|v| v == "1").unwrap_or(false);
            if color {
                eprintln!("\x1b[31merror\x1b[0m: {}", f.message);
            } else {
                eprintln!("error: {}", f.message);
            }
            f.code
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::diag(format!("cannot read {}: {e}", path.display())))
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| Failure::diag(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn parse_hints(specs: &[String]) -> Result<BTreeMap<String, LoadHint>, Failure> {
    let mut hints = BTreeMap::new();
    for spec in specs {
        let (mem, rest) = spec
            .split_once('=')
            .ok_or_else(|| Failure::diag(format!("hint `{spec}`: expected MEM=LEVEL,TEMPORALITY")))?;
        let (level, temporality) = rest
            .split_once(',')
            .ok_or_else(|| Failure::diag(format!("hint `{spec}`: expected MEM=LEVEL,TEMPORALITY")))?;
        let cache_level = match level {
            "L1" => CacheLevel::L1,
            "L2" => CacheLevel::L2,
            "LLC" => CacheLevel::Llc,
            other => return Err(Failure::diag(format!("unknown cache level `{other}`"))),
        };
        let temporal = match temporality {
            "temporal" => true,
            "nontemporal" => false,
            other => return Err(Failure::diag(format!("unknown temporality `{other}`"))),
        };
        hints.insert(
            mem.to_string(),
            LoadHint {
                cache_level,
                temporal,
            },
        );
    }
    Ok(hints)
}

fn pass_config(opt: u8, vlen: u32, store_streams: bool, hints: &[String]) -> Result<PassConfig, Failure> {
    if opt > 3 {
        return Err(Failure::diag(format!("optimization level {opt} out of range 0..=3")));
    }
    if vlen == 0 || !vlen.is_power_of_two() {
        return Err(Failure::diag(format!("vector width {vlen} must be a power of two")));
    }
    Ok(PassConfig {
        opt,
        vlen,
        store_streams,
        hints: parse_hints(hints)?,
    })
}

/// The full pipeline from structured source text to a verified program.
fn compile_pipeline(
    src: &str,
    from_slc: bool,
    cfg: &PassConfig,
) -> Result<(DlcProgram, slc::SlcFunction), Failure> {
    let optimized = if from_slc {
        let f = slc::parse_slc(src).map_err(|e| Failure::diag(format!("parse: {e}")))?;
        slc::verify_slc(&f).map_err(|e| Failure::diag(format!("verify-slc: {e}")))?;
        let (opted, _) = passes::run_passes(&f, cfg);
        opted
    } else {
        let f = scf::parse_scf(src).map_err(|e| Failure::diag(format!("parse: {e}")))?;
        scf::verify_scf(&f).map_err(|e| Failure::diag(format!("verify: {e}")))?;
        let lowered =
            decouple::lower_scf_to_slc(&f).map_err(|e| Failure::diag(format!("decouple: {e}")))?;
        let (opted, _) = passes::run_passes(&lowered, cfg);
        opted
    };
    slc::verify_slc(&optimized).map_err(|e| Failure::diag(format!("verify-slc: {e}")))?;
    let prog =
        dlc::lower_slc_to_dlc(&optimized).map_err(|e| Failure::diag(format!("lower: {e}")))?;
    dlc::verify_dlc(&prog).map_err(|e| Failure::diag(format!("verify-dlc: {e}")))?;
    Ok((prog, optimized))
}

fn cmd_compile(a: CompileArgs) -> Result<(), Failure> {
    let src = read(&a.input)?;
    let from_slc = match a.from.as_deref() {
        Some("slc") => true,
        Some("scf") => false,
        Some(other) => return Err(Failure::diag(format!("unknown input language `{other}`"))),
        None => a
            .input
            .extension()
            .map(|e| e == "slc")
            .unwrap_or(false),
    };
    let cfg = pass_config(a.opt, a.vlen, a.store_streams, &a.hints)?;

    if a.dump_classification {
        if from_slc {
            return Err(Failure::diag(
                "classification applies to structured sources only",
            ));
        }
        let f = scf::parse_scf(&src).map_err(|e| Failure::diag(format!("parse: {e}")))?;
        let class =
            decouple::classify_loops(&f).map_err(|e| Failure::diag(format!("decouple: {e}")))?;
        println!("{}", class.to_json());
    }

    if let Some(stage) = &a.dump_ir {
        match stage.as_str() {
            "scf" => {
                let f = scf::parse_scf(&src).map_err(|e| Failure::diag(format!("parse: {e}")))?;
                println!("{}", scf::print_scf(&f));
            }
            "slc" | "slcv" => {
                let (_, optimized) = compile_pipeline(&src, from_slc, &cfg)?;
                println!("{}", slc::print_slc(&optimized));
            }
            "dlc" => {
                let (prog, _) = compile_pipeline(&src, from_slc, &cfg)?;
                println!("{}", dlc::print_dlc(&prog));
            }
            other => return Err(Failure::diag(format!("unknown stage `{other}`"))),
        }
        if a.output.is_none() {
            return Ok(());
        }
    }

    let (prog, _) = compile_pipeline(&src, from_slc, &cfg)?;
    let text = dlc::print_dlc(&prog);
    match &a.output {
        Some(p) => std::fs::write(p, &text)
            .map_err(|e| Failure::diag(format!("cannot write {}: {e}", p.display())))?,
        None => {
            if a.dump_ir.is_none() && !a.dump_classification {
                println!("{text}");
            }
        }
    }
    Ok(())
}

fn parse_cache(spec: &str) -> Result<CacheModelConfig, Failure> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(Failure::diag(
            "cache spec is L2_LINES,LLC_LINES[,LINE_ELEMS]",
        ));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| Failure::diag(format!("invalid cache size `{s}`")))
    };
    Ok(CacheModelConfig {
        l2_lines: parse(parts[0])? as usize,
        llc_lines: parse(parts[1])? as usize,
        line_elems: if parts.len() == 3 { parse(parts[2])? } else { 16 },
    })
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let prog_text = read(&a.program)?;
    let prog = dlc::parse_dlc(&prog_text).map_err(|e| Failure::diag(format!("parse-dlc: {e}")))?;
    dlc::verify_dlc(&prog).map_err(|e| Failure::diag(format!("verify-dlc: {e}")))?;
    let data_text = read(&a.data)?;
    let elem_of = |name: &str| prog.elem_of(name);
    let inputs = mem::parse_mem_image(&data_text, &elem_of)
        .map_err(|e| Failure::diag(format!("data: {e}")))?;
    let cfg = VmConfig {
        ctrl_capacity: a.ctrl_cap,
        data_capacity: a.data_cap,
        schedule: match a.seed {
            Some(s) => Schedule::Seeded(s),
            None => Schedule::RoundRobin,
        },
        cache: a.cache.as_deref().map(parse_cache).transpose()?,
    };
    let result = vm::run(&prog, &inputs, &cfg).map_err(|e| {
        let code = match &e {
            vm::VmError::Deadlock { .. } => 2,
            vm::VmError::Oob { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    })?;
    let written = program_writes(&prog);
    let out_json = mem::mem_image_to_json(&result.mem, Some(&written));
    write_out(&a.out, &out_json)?;
    let stats_json = result.counters.to_json();
    match &a.stats {
        Some(p) => std::fs::write(p, &stats_json)
            .map_err(|e| Failure::diag(format!("cannot write {}: {e}", p.display())))?,
        None => println!("{stats_json}"),
    }
    Ok(())
}

fn program_writes(p: &DlcProgram) -> Vec<String> {
    use crate::cpu::CpuStmt;
    let mut set = std::collections::BTreeSet::new();
    fn stmts(body: &[CpuStmt], set: &mut std::collections::BTreeSet<String>) {
        for s in body {
            match s {
                CpuStmt::Store { mem, .. } | CpuStmt::VStore { mem, .. } => {
                    set.insert(mem.clone());
                }
                CpuStmt::For { body, .. } => stmts(body, set),
                _ => {}
            }
        }
    }
    for arm in &p.execute.arms {
        stmts(&arm.body, &mut set);
    }
    for m in &p.access.marshals {
        if let dlc::MarshalOp::Store { mem, .. } = m {
            set.insert(mem.clone());
        }
    }
    set.into_iter().collect()
}

fn parse_list(s: &str) -> Result<Vec<u64>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .map_err(|_| Failure::diag(format!("invalid list entry `{x}`")))
        })
        .collect()
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let opts = parse_list(&a.opts)?;
    let vlens = parse_list(&a.vlens)?;
    let locality = Locality::preset(&a.locality)
        .ok_or_else(|| Failure::diag(format!("unknown locality `{}`", a.locality)))?;

    enum Source {
        Kernel(KernelKind, KernelDims),
        File(scf::ScfFunction, MemImage),
    }
    let source = if let Some(kname) = &a.kernel {
        let kind = KernelKind::from_name(kname)
            .ok_or_else(|| Failure::diag(format!("unknown kernel `{kname}`")))?;
        let dims = KernelDims {
            batches: a.batches,
            lookups: a.lookups,
            rows: a.rows,
            emb_len: a.emb_len,
            uniform_segments: false,
            bpq: a.bpq,
            k_block: a.k_block,
            q_block: a.q_block,
        };
        workloads::build_kernel(kind, &dims).map_err(|e| Failure::diag(e.to_string()))?;
        Source::Kernel(kind, dims)
    } else {
        let path = a
            .input
            .as_ref()
            .ok_or_else(|| Failure::diag("pass a source file or --kernel"))?;
        let src = read(path)?;
        let f = scf::parse_scf(&src).map_err(|e| Failure::diag(format!("parse: {e}")))?;
        scf::verify_scf(&f).map_err(|e| Failure::diag(format!("verify: {e}")))?;
        let data_path = a
            .data
            .as_ref()
            .ok_or_else(|| Failure::diag("file inputs need --data"))?;
        let data = read(data_path)?;
        let elem_of = |name: &str| f.elem_of(name);
        let img = mem::parse_mem_image(&data, &elem_of)
            .map_err(|e| Failure::diag(format!("data: {e}")))?;
        Source::File(f, img)
    };

    let mut failures = 0usize;
    let mut cells = 0usize;
    println!(
        "{:<8} {:<4} {:<5} {:<5} {:<6} {:>12} {:>12}",
        "kernel", "opt", "vlen", "seed", "result", "ctrl_tokens", "data_elems"
    );
    for opt in &opts {
        for vlen in &vlens {
            let cfg = pass_config(*opt as u8, *vlen as u32, a.store_streams, &[])?;
            match &source {
                Source::Kernel(kind, dims) => {
                    let f = workloads::build_kernel(*kind, dims).unwrap();
                    let src = workloads::kernel_src(*kind);
                    let (prog, _) = compile_pipeline(src, false, &cfg)?;
                    for seed in 0..a.seeds {
                        cells += 1;
                        let inputs = workloads::gen_inputs(*kind, dims, locality, seed, false);
                        let (ok, counters) =
                            verify_cell(&f, &prog, &inputs, workloads::kernel_outputs(*kind))?;
                        report_cell(kind.name(), *opt, *vlen, seed, ok, &counters, &mut failures);
                    }
                }
                Source::File(f, img) => {
                    cells += 1;
                    let src = scf::print_scf(f);
                    let (prog, _) = compile_pipeline(&src, false, &cfg)?;
                    let writes = program_writes(&prog);
                    let outs: Vec<&str> = writes.iter().map(|s| s.as_str()).collect();
                    let (ok, counters) = verify_cell(f, &prog, img, &outs)?;
                    report_cell(&f.name, *opt, *vlen, 0, ok, &counters, &mut failures);
                }
            }
        }
    }
    println!("{cells} cells, {failures} failures");
    if failures > 0 {
        return Err(Failure::diag(format!("{failures} of {cells} cells diverged")));
    }
    Ok(())
}

fn report_cell(
    name: &str,
    opt: u64,
    vlen: u64,
    seed: u64,
    ok: bool,
    counters: &vm::Counters,
    failures: &mut usize,
) {
    println!(
        "{:<8} {:<4} {:<5} {:<5} {:<6} {:>12} {:>12}",
        name,
        opt,
        vlen,
        seed,
        if ok { "pass" } else { "FAIL" },
        counters.ctrl_tokens,
        counters.data_elements
    );
    if !ok {
        *failures += 1;
    }
}

fn verify_cell(
    f: &scf::ScfFunction,
    prog: &DlcProgram,
    inputs: &MemImage,
    outs: &[&str],
) -> Result<(bool, vm::Counters), Failure> {
    let want = scf::interpret_scf(f, inputs).map_err(|e| Failure::diag(e.to_string()))?;
    let got =
        vm::run(prog, inputs, &VmConfig::default()).map_err(|e| Failure::diag(e.to_string()))?;
    let ok = outs.iter().all(|o| {
        want.buffer(o)
            .zip(got.mem.buffer(o))
            .map(|(x, y)| x.bit_eq(y))
            .unwrap_or(false)
    });
    Ok((ok, got.counters))
}

fn cmd_cdf(a: CdfArgs) -> Result<(), Failure> {
    let trace: Vec<u64> = if let Some(gen) = &a.gen {
        let locality = Locality::preset(gen)
            .ok_or_else(|| Failure::diag(format!("unknown generator `{gen}`")))?;
        workloads::gen_indices(a.rows, a.count, locality, a.seed)
    } else {
        let path = a
            .input
            .as_ref()
            .ok_or_else(|| Failure::diag("pass a trace file or --gen"))?;
        let text = read(path)?;
        let mut ids = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            ids.push(line.parse::<u64>().map_err(|_| {
                Failure::diag(format!("trace line {} is not a vector id: `{line}`", k + 1))
            })?);
        }
        ids
    };
    if trace.is_empty() {
        return Err(Failure::diag("empty trace"));
    }
    let caps = parse_list(&a.capacities)?;
    let report = workloads::reuse_distance_cdf(&trace);
    let json = report.to_json(&caps, &trace);
    write_out(&a.output, &json)
}
