use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dsm_lab::error::Error;
use dsm_lab::harness::{fmt_g9, oracle_check, run_experiment, ExperimentConfig, ExperimentKind, StateSpec};
use dsm_lab::protocol::Protocol;
use dsm_lab::sampler::BudgetMode;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;

#[derive(Parser)]
#[command(name = "dsm-lab", version, about = "Direct state measurement simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write CSV results.
    Run(RunArgs),
    /// Check a JSON config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare closed-form probe blocks and exact inversion against the
    /// full joint-evolution oracle.
    OracleCheck {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    experiment: Option<ExperimentKind>,
    /// `ghz:4`, `w:4` or `dicke:4:1`
    #[arg(long)]
    state: Option<StateSpec>,
    /// Repeatable: `type1`, `type2:0.5pi`, `weak:0.1pi`
    #[arg(long = "protocol")]
    protocols: Vec<Protocol>,
    /// Copy budget(s); 0 runs on exact distributions.
    #[arg(long, value_delimiter = ',')]
    nc: Vec<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_parser = parse_budget)]
    budget_mode: Option<BudgetMode>,
    #[arg(long)]
    psd_projection: bool,
    #[arg(long)]
    noise_on_postselection: bool,
}

fn parse_budget(s: &str) -> Result<BudgetMode, String> {
    match s {
        "prepared-copies" => Ok(BudgetMode::PreparedCopies),
        "retained-copies" => Ok(BudgetMode::RetainedCopies),
        _ => Err(format!("expected prepared-copies or retained-copies, got `{s}`")),
    }
}

fn build_config(args: RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&args.config, args.experiment) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(kind)) => ExperimentConfig::new(kind, PathBuf::from("results").join(kind.name())),
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let (Some(_), Some(kind)) = (&args.config, args.experiment) {
        cfg.experiment = kind;
    }
    if let Some(s) = args.state {
        cfg.state_spec = s;
    }
    if !args.protocols.is_empty() {
        cfg.protocols = args.protocols;
    }
    if !args.nc.is_empty() {
        cfg.n_copies = args.nc.into();
    }
    if let Some(t) = args.trials {
        cfg.n_trials = t;
    }
    if !args.eta.is_empty() {
        cfg.eta = args.eta.into();
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if let Some(b) = args.budget_mode {
        cfg.budget_mode = b;
    }
    cfg.psd_projection |= args.psd_projection;
    cfg.noise_on_postselection |= args.noise_on_postselection;
    cfg.validate()?;
    Ok(cfg)
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    let (result, paths) = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    println!("protocol\tn_qubits\tn_copies\teta\tf_ave\tstd_f\tdelta_f\tcoverage_pct\texcluded");
    for s in &result.summaries {
        let (mean, std, bias) = s
            .stats
            .map(|st| (fmt_g9(st.mean_fidelity), fmt_g9(st.std_fidelity), fmt_g9(st.bias)))
            .unwrap_or_default();
        println!(
            "{}\t{}\t{}\t{}\t{mean}\t{std}\t{bias}\t{}\t{}",
            s.protocol,
            s.n_qubits,
            s.n_copies,
            fmt_g9(s.eta),
            s.coverage_pct.map(fmt_g9).unwrap_or_default(),
            s.excluded
        );
    }
    eprintln!(
        "{} trials ({} failed), {} threads; wrote {}",
        result.records.len(),
        result.failed_count(),
        result.threads,
        paths.trials.parent().unwrap_or(&paths.trials).display()
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                let cells = dsm_lab::harness::cells(&cfg).len();
                println!(
                    "ok: {} with {} cells x {} protocols x {} trials",
                    cfg.experiment,
                    cells,
                    cfg.protocols.len(),
                    cfg.n_trials
                );
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::OracleCheck { dims, states, seed } => {
            if dims.contains(&0) {
                eprintln!("error: dimensions must be ≥ 1");
                return ExitCode::from(EXIT_CONFIG);
            }
            match oracle_check(&dims, states, seed) {
                Ok(reports) => {
                    let mut ok = true;
                    println!("dim\tstates\tmax_block_dev\tmax_inversion_dev\tresult");
                    for r in &reports {
                        ok &= r.passed();
                        println!(
                            "{}\t{}\t{:.3e}\t{:.3e}\t{}",
                            r.dim,
                            r.states,
                            r.max_block_dev,
                            r.max_inversion_dev,
                            if r.passed() { "pass" } else { "FAIL" }
                        );
                    }
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_THRESHOLD)
                    }
                }
                Err(e) => exit_for(&e),
            }
        }
    }
}
