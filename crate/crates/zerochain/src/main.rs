//! `harness` binary: verify | run | frontplot | bounds.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zerochain::harness::{cmd_bounds, cmd_frontplot, cmd_run, cmd_verify, ConfigPatch, RunConfig};

#[derive(Parser)]
#[command(
    name = "harness",
    about = "Chained hard-instance toolkit: verification suite, metered algorithm runs, \
             front traces, and threshold tables",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Flags {
    /// blocks per coupling period (>= 2; m1*m2 must be even)
    #[arg(long)]
    m1: Option<usize>,
    /// coupling periods (m = 3*m1*m2)
    #[arg(long)]
    m2: Option<usize>,
    /// coordinates per block (odd, >= 5)
    #[arg(long)]
    dbar: Option<usize>,
    /// target accuracy in (0,1)
    #[arg(long)]
    eps: Option<f64>,
    /// gradient Lipschitz modulus (> 0)
    #[arg(long)]
    lf: Option<f64>,
    /// l1 coupling weight; omit for the default rule
    #[arg(long)]
    beta: Option<f64>,
    /// penalty | alm | ladmm
    #[arg(long)]
    algo: Option<String>,
    /// oracle-call budget per run
    #[arg(long)]
    max_oracles: Option<usize>,
    /// output directory for artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file, layered between defaults and flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// seed for the randomized suites
    #[arg(long)]
    seed: Option<u64>,
}

impl Flags {
    fn resolve(&self) -> zerochain::Result<RunConfig> {
        let patch = ConfigPatch {
            eps: self.eps,
            lf: self.lf,
            m1: self.m1,
            m2: self.m2,
            dbar: self.dbar,
            beta: self.beta,
            algo: self.algo.clone(),
            max_oracles: self.max_oracles,
            seed: self.seed,
            out: self.out.clone(),
        };
        RunConfig::layered(self.config.as_deref(), &patch)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full acceptance suite; exit 0 only if every check passes
    Verify(Flags),
    /// Run one algorithm, writing trace, transcript, and summary artifacts
    Run(Flags),
    /// Export measured support fronts next to the theoretical staircase
    Frontplot(Flags),
    /// Print the threshold table, recomputed from first principles
    Bounds(Flags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (flags, f): (&Flags, fn(&RunConfig) -> zerochain::Result<i32>) = match &cli.cmd {
        Cmd::Verify(f) => (f, cmd_verify),
        Cmd::Run(f) => (f, cmd_run),
        Cmd::Frontplot(f) => (f, cmd_frontplot),
        Cmd::Bounds(f) => (f, cmd_bounds),
    };
    match flags.resolve().and_then(|cfg| f(&cfg)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
