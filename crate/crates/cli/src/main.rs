use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zkw_cli::{compare, exit_code, read_manifest, run, DeltaFlag, RunOptions};

#[derive(Parser)]
#[command(name = "zkw", about = "Zakharov-Kuznetsov numerics experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "ZKW_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    Solve(RunArgs),
    #[command(name = "norm-inflation-1")]
    NormInflation1(RunArgs),
    #[command(name = "norm-inflation-2")]
    NormInflation2(RunArgs),
    TrilinearSweep(RunArgs),
    WeightedTrilinear(RunArgs),
    Counting(RunArgs),
    Decompose(RunArgs),
    Thickened(RunArgs),
    Counterexample(RunArgs),
    /// Metric deltas between two manifests.
    Compare { a: PathBuf, b: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match cli.cmd {
        Cmd::Compare { a, b } => return compare_cmd(&a, &b),
        Cmd::Solve(a) => ("solve", a),
        Cmd::NormInflation1(a) => ("norm-inflation-1", a),
        Cmd::NormInflation2(a) => ("norm-inflation-2", a),
        Cmd::TrilinearSweep(a) => ("trilinear-sweep", a),
        Cmd::WeightedTrilinear(a) => ("weighted-trilinear", a),
        Cmd::Counting(a) => ("counting", a),
        Cmd::Decompose(a) => ("decompose", a),
        Cmd::Thickened(a) => ("thickened", a),
        Cmd::Counterexample(a) => ("counterexample", a),
    };
    let opts = RunOptions {
        out: args.out,
        seed: args.seed,
        jobs: args.jobs,
    };
    match run(name, &args.config, &opts) {
        Ok((manifest, outcome)) => {
            for (k, v) in &manifest.metrics {
                println!("{k} = {v:e}");
            }
            if outcome.skipped_fraction > 0.0 {
                println!("skipped fraction = {}", outcome.skipped_fraction);
            }
            ExitCode::from(exit_code(&outcome) as u8)
        }
        Err(e) => {
            eprintln!("zkw {name}: {e}");
            ExitCode::from(1)
        }
    }
}

fn compare_cmd(a: &std::path::Path, b: &std::path::Path) -> ExitCode {
    let report = match read_manifest(a).and_then(|x| read_manifest(b).and_then(|y| compare(&x, &y))) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("zkw compare: {e}");
            return ExitCode::from(1);
        }
    };
    println!("outputs identical: {}", report.outputs_identical);
    for d in &report.deltas {
        if d.flag != DeltaFlag::Equal {
            println!("{}: {:?} -> {:?} (delta {:e}, {:?})", d.metric, d.a, d.b, d.delta, d.flag);
        }
    }
    if report.is_empty() {
        println!("no differences");
    }
    ExitCode::SUCCESS
}
