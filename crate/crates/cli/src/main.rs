use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vnlab_core::instances::{
    fingerprint, generate, parse_blocks, to_json_bytes, Instance, InstanceSpec, ModuleSource,
    DEFAULT_DIM_CAP,
};
use vnlab_core::pipeline::{Context, Registry, Report};
use vnlab_core::Tolerance;

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "vnlab", version, about = "Generate and verify finite-dimensional von Neumann module instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random instance file.
    Gen(GenArgs),
    /// Run the verification pipeline on instance files.
    Verify(VerifyArgs),
    /// List the registered checks in run order.
    ListChecks,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Gram,
    Gns,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Block structure of B, e.g. `2x1,1x2` for M_2 + M_1 (x) 1_2.
    #[arg(long)]
    blocks: String,
    /// Number of module generators (Gram source only).
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    functionals: usize,
    #[arg(long, value_enum, default_value_t = Source::Gram)]
    source: Source,
    /// Kraus rank of the random CP map (GNS source only).
    #[arg(long, default_value_t = 2)]
    cp_rank: usize,
    #[arg(long, default_value_t = DEFAULT_DIM_CAP)]
    dim_cap: usize,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Relative tolerance.
    #[arg(long, env = "VNLAB_TOL", default_value_t = 1e-9)]
    tol: f64,
    /// Random samples for the norm lower bound.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Sampling seed; defaults to the instance seed, or 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here (an array when several paths are given).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Run only these checks (comma separated).
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Print only failures and the verdict.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Verify(args) => verify(args),
        Command::ListChecks => {
            for c in Registry::standard().iter() {
                println!("{:<38} {}", c.name(), c.description());
            }
            ExitCode::SUCCESS
        }
    }
}

fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INPUT)
}

fn gen(args: GenArgs) -> ExitCode {
    let blocks = match parse_blocks(&args.blocks) {
        Ok(b) => b,
        Err(e) => return input_error(e),
    };
    let spec = InstanceSpec {
        seed: args.seed,
        blocks,
        k: args.k,
        functional_count: args.functionals,
        source: match args.source {
            Source::Gram => ModuleSource::Gram,
            Source::Gns => ModuleSource::Gns {
                cp_rank: args.cp_rank,
            },
        },
    };
    if let Err(e) = spec.validate(args.dim_cap) {
        return input_error(e);
    }
    let instance = match generate(&spec, Tolerance::default()) {
        Ok(i) => i,
        Err(e) => return input_error(e),
    };
    if let Err(e) = instance.save(&args.out) {
        return input_error(format!("{}: {e}", args.out.display()));
    }
    println!("wrote {} ({})", args.out.display(), fingerprint(&instance));
    ExitCode::SUCCESS
}

fn verify(args: VerifyArgs) -> ExitCode {
    let tol = match Tolerance::with_rel_eps(args.tol) {
        Ok(t) => t,
        Err(e) => return input_error(e),
    };
    let registry = Registry::standard();
    let mut reports = Vec::new();
    let mut input_failed = false;
    for path in &args.paths {
        let shown = path.display().to_string();
        let (instance, realized) = match Instance::load(path, tol) {
            Ok(x) => x,
            Err(e) => {
                eprintln!("error: {shown}: {e}");
                input_failed = true;
                continue;
            }
        };
        let seed = args.seed.or(instance.seed).unwrap_or(0);
        let mut ctx = Context::new(&realized, tol, args.samples, seed);
        ctx.expected_commutant_dim = instance.spec.as_ref().map(|s| s.commutant_dim());
        let records = match registry.run(&ctx, args.checks.as_deref()) {
            Ok(r) => r,
            Err(e) => return input_error(e),
        };
        let report = Report::new(shown.clone(), fingerprint(&instance), &ctx, records);
        for c in &report.checks {
            if args.quiet && c.passed {
                continue;
            }
            let value = c.residual.map_or("-".into(), |r| format!("{r:.3e}"));
            let bound = c.tolerance.map_or("-".into(), |t| format!("{t:.1e}"));
            let mark = if c.passed { "PASS" } else { "FAIL" };
            println!("{mark}  {:<40} {value:>10} <= {bound:<8} {}", c.check_name, c.detail);
        }
        let verdict = if report.verdict { "PASS" } else { "FAIL" };
        println!("{shown}: {verdict}");
        reports.push(report);
    }
    if let Some(out) = &args.report {
        let bytes = if args.paths.len() == 1 {
            match reports.first() {
                Some(r) => r.to_json_bytes(),
                None => return ExitCode::from(EXIT_INPUT),
            }
        } else {
            let mut b = to_json_bytes(&reports);
            b.push(b'\n');
            b
        };
        if let Err(e) = std::fs::write(out, bytes) {
            return input_error(format!("{}: {e}", out.display()));
        }
    }
    if input_failed {
        ExitCode::from(EXIT_INPUT)
    } else if reports.iter().all(|r| r.verdict) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
