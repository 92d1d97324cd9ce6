use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use risanm::experiments::{run_and_write, ExperimentSpec, Scheme};
use risanm::io::read_envelope;
use risanm::oracle::{oracle_solver_options, verify_fixture, SdpFixture, FIXTURE_KIND};
use risanm::sounding::training_overhead;

#[derive(Parser)]
#[command(name = "risanm", version, about = "RIS-aided mmWave channel estimation by atomic norm minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write one CSV per scheme.
    Run(RunArgs),
    /// Re-solve every case of an SDP fixture and compare with the stored optimum.
    Oracle {
        fixture: PathBuf,
        /// Print the per-case outcomes as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the training overhead N0*ceil(M0/n_rf) + T*L_br*ceil(L_rm/n_rf).
    Overhead(OverheadArgs),
}

#[derive(Args)]
struct RunArgs {
    spec: PathBuf,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the SNR grid; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Replaces the scheme list; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    config_id: Option<String>,
    #[arg(long)]
    coherence_time: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct OverheadArgs {
    #[arg(long, default_value_t = 10)]
    n0: usize,
    #[arg(long, default_value_t = 10)]
    m0: usize,
    #[arg(long = "t-blocks", default_value_t = 10)]
    t_blocks: usize,
    #[arg(long, default_value_t = 2)]
    l_br: usize,
    #[arg(long, default_value_t = 2)]
    l_rm: usize,
    #[arg(long, default_value_t = 8)]
    n_rf: usize,
}

fn apply_overrides(spec: &mut ExperimentSpec, args: &RunArgs) -> Result<()> {
    if let Some(n) = args.realizations {
        spec.realizations = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(grid) = &args.snr {
        spec.snr_grid_db = grid.clone();
    }
    if let Some(names) = &args.schemes {
        spec.schemes = names.iter().map(|s| Scheme::parse(s)).collect::<risanm::Result<_>>()?;
    }
    if let Some(out) = &args.output {
        spec.output = out.clone();
    }
    if let Some(id) = &args.config_id {
        spec.config_id = id.clone();
    }
    if let Some(tc) = args.coherence_time {
        spec.coherence_time = tc;
    }
    spec.validate()?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut spec = ExperimentSpec::load(&args.spec).with_context(|| format!("loading {}", args.spec.display()))?;
    apply_overrides(&mut spec, &args)?;
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    for path in run_and_write(&spec)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn oracle(fixture: PathBuf, json: bool) -> Result<bool> {
    let fx: SdpFixture = read_envelope(&fixture, FIXTURE_KIND).with_context(|| format!("loading {}", fixture.display()))?;
    let outcomes = verify_fixture(&fx, &oracle_solver_options())?;
    if json {
        println!("{}", serde_json::to_string_pretty(&outcomes)?);
    } else {
        for o in &outcomes {
            println!(
                "{} {:<24} ref={:.10e} got={:.10e} gap={:.2e} min_eig={:.2e} iters={}",
                if o.passed { "PASS" } else { "FAIL" },
                o.name,
                o.reference,
                o.achieved,
                o.relative_gap,
                o.min_eigenvalue,
                o.iterations
            );
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    eprintln!("{}/{} cases within tolerance {:e}", outcomes.len() - failed, outcomes.len(), fx.tolerance);
    Ok(failed == 0)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => run(args)?,
        Command::Oracle { fixture, json } => {
            if !oracle(fixture, json)? {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Overhead(a) => {
            if a.n_rf == 0 {
                bail!("n_rf must be positive");
            }
            println!("{}", training_overhead(a.n0, a.m0, a.t_blocks, a.l_br, a.l_rm, a.n_rf));
        }
    }
    Ok(ExitCode::SUCCESS)
}
