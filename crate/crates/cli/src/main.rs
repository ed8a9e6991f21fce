//! Command-line front end: instance generation, refutation pipelines, the
//! local refuter, dependency mining, pseudo-expectation tooling, certificate
//! verification, and benchmark sweeps.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use klin_core::algebra::GroupSpec;
use klin_core::deps::{find_dependency_exhaustive, find_dependency_kikuchi};
use klin_core::instance::{gen_random, gen_semirandom, KLinInstance, LhsSource, SparseVec};
use klin_core::kikuchi::build_even_field;
use klin_core::refute::{
    refute, verify_certificate, Certificate, Pipeline, RefuteOptions, TrailEntry,
};
use klin_core::simple::{simple_refute, SimpleVariant};
use klin_core::sos::{
    build_max_entropy, expansion_check, find_refutation_exhaustive, to_boolean_pe, verify_pe,
    PseudoExpectation,
};
use klin_core::{KlinError, DEFAULT_CAP_BRUTE};

#[derive(Parser)]
#[command(name = "klin", version, about = "Refutation certificates for semirandom k-LIN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random or semirandom instance.
    Gen(GenArgs),
    /// Run a refutation pipeline and emit a certificate.
    Refute(RefuteArgs),
    /// Run the brute-force local refuter.
    Simple(SimpleArgs),
    /// Search for short linear dependencies among the left-hand sides.
    Deps(DepsArgs),
    /// Pseudo-expectation tooling.
    Sos(SosArgs),
    /// Re-check a certificate or pseudo-expectation dump against its instance.
    Verify(VerifyArgs),
    /// Sweep instance densities and emit a CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Domain string: p=<prime> | gf p=<p> m=<deg> [poly=<digits>] | zm=<m1>,<m2>,...
    #[arg(long)]
    group: String,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Re-randomize the right-hand sides of this instance file (semirandom).
    #[arg(long)]
    semirandom_from: Option<PathBuf>,
    /// Adversarial lhs pattern, e.g. cluster:4 (supports inside the first 4
    /// coordinates), with fresh random right-hand sides.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RefuteArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Local-degree bound for odd-arity edge deletion (default 3^k·⌈ε^-2⌉).
    #[arg(long)]
    eta: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PipelineArg::Auto)]
    pipeline: PipelineArg,
    /// Opt in to the experimental odd-arity group pipeline.
    #[arg(long)]
    experimental_group_odd: bool,
    /// Write the certificate JSON here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Dump the even-field Kikuchi matrix in coordinate format.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Auto,
    EvenField,
    Group,
    Odd,
}

#[derive(Args)]
struct SimpleArgs {
    instance: PathBuf,
    #[arg(long)]
    l: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Random)]
    variant: VariantArg,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Random,
    Semirandom,
}

#[derive(Args)]
struct DepsArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = DepsMode::Exhaustive)]
    mode: DepsMode,
    #[arg(long, default_value_t = 4)]
    max_size: usize,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DepsMode {
    Exhaustive,
    Kikuchi,
}

#[derive(Args)]
struct SosArgs {
    #[command(subcommand)]
    command: SosCommand,
}

#[derive(Subcommand)]
enum SosCommand {
    /// Build the max-entropy pseudo-expectation and dump it.
    Build {
        instance: PathBuf,
        #[arg(long)]
        d: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify a pseudo-expectation dump against its instance.
    Verify { dump: PathBuf, instance: PathBuf },
    /// Reduce to indicator moments and check them at degree d.
    Boolean {
        dump: PathBuf,
        instance: PathBuf,
        #[arg(long)]
        d: usize,
    },
    /// Expansion predicate over the instance's left-hand sides.
    Expand {
        instance: PathBuf,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        beta: f64,
    },
    /// Exhaustive refutation search.
    Refutation {
        instance: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_size: usize,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Certificate JSON or pseudo-expectation dump.
    artifact: PathBuf,
    instance: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Domain string.
    #[arg(long)]
    group: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Density sweep start:stop:step (inclusive), e.g. m=5:100:5.
    #[arg(long)]
    sweep: String,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Use the clustered semirandom generator with this window instead of
    /// fully random supports.
    #[arg(long)]
    cluster: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Exit codes: 2 for resource caps, 3 for validation and verification
/// failures, 1 for anything else.
fn classify(err: &anyhow::Error) -> u8 {
    if let Some(k) = err.downcast_ref::<KlinError>() {
        match k {
            KlinError::ResourceCap(_) => 2,
            KlinError::InvalidSpec(_)
            | KlinError::InvalidParams(_)
            | KlinError::DomainMismatch(_)
            | KlinError::Parse { .. }
            | KlinError::VerifyMismatch(_)
            | KlinError::NoCertificate(_) => 3,
            KlinError::Io(_) => 1,
        }
    } else {
        1
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Refute(args) => cmd_refute(args),
        Command::Simple(args) => cmd_simple(args),
        Command::Deps(args) => cmd_deps(args),
        Command::Sos(args) => cmd_sos(args.command),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn load_instance(path: &PathBuf) -> anyhow::Result<KLinInstance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading instance {}", path.display()))?;
    Ok(KLinInstance::parse_text(&text)?)
}

fn emit(output: Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{content}"),
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let spec = GroupSpec::parse(&args.group)?;
    let inst = if let Some(path) = &args.semirandom_from {
        let base = load_instance(path)?;
        gen_semirandom(LhsSource::Instance(&base), &spec, args.seed)?
    } else if let Some(pattern) = &args.pattern {
        let window = pattern
            .strip_prefix("cluster:")
            .and_then(|w| w.parse::<usize>().ok())
            .ok_or_else(|| {
                KlinError::InvalidParams(format!("unknown pattern {pattern:?}; try cluster:<w>"))
            })?;
        gen_semirandom(
            LhsSource::Cluster { n: args.n, k: args.k, m: args.m, window },
            &spec,
            args.seed,
        )?
    } else {
        gen_random(&spec, args.n, args.k, args.m, args.seed)?
    };
    emit(args.output, &inst.serialize_text())
}

fn cmd_refute(args: RefuteArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    if let Some(path) = &args.dump_matrix {
        let mat = build_even_field(&inst, args.l)?;
        fs::write(path, mat.dump())?;
        eprintln!("wrote matrix dump {}", path.display());
    }
    let opts = RefuteOptions {
        l: args.l,
        eps: args.eps,
        eta: args.eta,
        seed: args.seed,
        pipeline: match args.pipeline {
            PipelineArg::Auto => Pipeline::Auto,
            PipelineArg::EvenField => Pipeline::EvenField,
            PipelineArg::Group => Pipeline::Group,
            PipelineArg::Odd => Pipeline::Odd,
        },
        allow_group_odd: args.experimental_group_odd,
    };
    let cert = refute(&inst, &opts)?;
    emit(args.output, &cert.to_json())
}

fn cmd_simple(args: SimpleArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    let variant = match args.variant {
        VariantArg::Random => SimpleVariant::Random,
        VariantArg::Semirandom => SimpleVariant::Semirandom,
    };
    let (cert, _) = simple_refute(&inst, args.l, variant, args.eps, 0, DEFAULT_CAP_BRUTE)?;
    emit(args.output, &cert.to_json())
}

fn cmd_deps(args: DepsArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    let vecs: Vec<SparseVec> = inst.equations.iter().map(|e| e.lhs.clone()).collect();
    let found = match args.mode {
        DepsMode::Exhaustive => {
            find_dependency_exhaustive(&inst.spec, &vecs, args.max_size, 1 << 26)?
        }
        DepsMode::Kikuchi => {
            let out = find_dependency_kikuchi(
                &inst.spec,
                &vecs,
                args.l,
                args.max_size,
                args.budget,
                args.seed,
            )?;
            if !out.complete {
                eprintln!("note: walk budget exhausted; the search was incomplete");
            }
            out.dependency
        }
    };
    match found {
        Some(dep) => {
            let terms: Vec<String> = dep
                .terms
                .iter()
                .map(|&(pos, a)| format!("{}:{}", pos, inst.spec.elem_string(a)))
                .collect();
            println!("dependency size={} {}", dep.len(), terms.join(" "));
        }
        None => println!("none"),
    }
    Ok(())
}

fn cmd_sos(command: SosCommand) -> anyhow::Result<()> {
    match command {
        SosCommand::Build { instance, d, output } => {
            let inst = load_instance(&instance)?;
            let pe = build_max_entropy(&inst, d)?;
            if !pe.is_complete() {
                bail!(KlinError::VerifyMismatch(format!(
                    "max-entropy construction is inconsistent: {:?}",
                    pe.status
                )));
            }
            emit(output, &pe.dump())
        }
        SosCommand::Verify { dump, instance } => {
            let inst = load_instance(&instance)?;
            let text = fs::read_to_string(&dump)?;
            let pe = PseudoExpectation::parse_dump(&text)?;
            let report = verify_pe(&pe, &inst, 0)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.ok() {
                bail!(KlinError::VerifyMismatch("pseudo-expectation checks failed".into()));
            }
            Ok(())
        }
        SosCommand::Boolean { dump, instance, d } => {
            let inst = load_instance(&instance)?;
            let text = fs::read_to_string(&dump)?;
            let pe = PseudoExpectation::parse_dump(&text)?;
            let report = to_boolean_pe(&pe, &inst, d)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.ok() {
                bail!(KlinError::VerifyMismatch("indicator moment checks failed".into()));
            }
            Ok(())
        }
        SosCommand::Expand { instance, l, beta } => {
            let inst = load_instance(&instance)?;
            let vecs: Vec<SparseVec> = inst.equations.iter().map(|e| e.lhs.clone()).collect();
            let (ok, witness) = expansion_check(&inst.spec, &vecs, l, beta, 1 << 26)?;
            if ok {
                println!("expands");
            } else {
                let (subset, coeffs) = witness.unwrap();
                let terms: Vec<String> = subset
                    .iter()
                    .zip(&coeffs)
                    .map(|(&pos, &a)| format!("{}:{}", pos, inst.spec.elem_string(a)))
                    .collect();
                println!("violation {}", terms.join(" "));
            }
            Ok(())
        }
        SosCommand::Refutation { instance, max_size } => {
            let inst = load_instance(&instance)?;
            match find_refutation_exhaustive(&inst, max_size, 1 << 26)? {
                Some(r) => {
                    let terms: Vec<String> = r
                        .terms
                        .iter()
                        .map(|&(pos, a)| format!("{}:{}", pos, inst.spec.elem_string(a)))
                        .collect();
                    println!("refutation size={} {}", r.terms.len(), terms.join(" "));
                }
                None => println!("none"),
            }
            Ok(())
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    let text = fs::read_to_string(&args.artifact)
        .with_context(|| format!("reading {}", args.artifact.display()))?;
    if text.trim_start().starts_with('{') {
        let cert = Certificate::from_json(&text)?;
        verify_certificate(&cert, &inst)?;
        println!("certificate ok: kind={} alg_val={}", cert.kind, cert.alg_val);
    } else if text.starts_with("pe v1") {
        let pe = PseudoExpectation::parse_dump(&text)?;
        let report = verify_pe(&pe, &inst, 0)?;
        if !report.ok() {
            bail!(KlinError::VerifyMismatch(format!(
                "pseudo-expectation checks failed: {report:?}"
            )));
        }
        println!("pseudo-expectation ok: {} entries", pe.entries.len());
    } else {
        bail!(KlinError::Parse {
            line: 1,
            reason: "artifact is neither a certificate json nor a pe dump".into()
        });
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    let spec = GroupSpec::parse(&args.group)?;
    let sweep = args
        .sweep
        .strip_prefix("m=")
        .ok_or_else(|| anyhow!("sweep must look like m=<start>:<stop>:<step>"))?;
    let parts: Vec<usize> = sweep
        .split(':')
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow!("sweep must look like m=<start>:<stop>:<step>"))?;
    let [start, stop, step] = parts[..] else {
        bail!("sweep must look like m=<start>:<stop>:<step>");
    };
    if step == 0 || start == 0 {
        bail!(KlinError::InvalidParams("sweep start and step must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut m = start;
    while m <= stop {
        for seed in 0..args.seeds {
            let inst = match args.cluster {
                Some(window) => gen_semirandom(
                    LhsSource::Cluster { n: args.n, k: args.k, m, window },
                    &spec,
                    seed,
                )?,
                None => gen_random(&spec, args.n, args.k, m, seed)?,
            };
            let t0 = Instant::now();
            let cert = refute(
                &inst,
                &RefuteOptions { l: args.l, eps: args.eps, seed, ..Default::default() },
            )?;
            let runtime_ms = t0.elapsed().as_millis();
            let (norm, avg_deg) = cert
                .trail
                .iter()
                .find_map(|e| match e {
                    TrailEntry::Spectral { norm, avg_degree, .. } => Some((*norm, *avg_degree)),
                    TrailEntry::Bipartite { norm, .. } => Some((*norm, 0.0)),
                    _ => None,
                })
                .unwrap_or((0.0, 0.0));
            rows.push((m, seed, cert.alg_val, norm, avg_deg, runtime_ms));
        }
        m += step;
    }
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut csv = String::from("m,seed,alg_val,norm,d,runtime_ms\n");
    for (m, seed, alg_val, norm, d, runtime_ms) in rows {
        csv.push_str(&format!("{m},{seed},{alg_val},{norm},{d},{runtime_ms}\n"));
    }
    emit(args.output, &csv)
}
