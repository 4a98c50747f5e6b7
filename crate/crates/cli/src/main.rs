use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fogfl_core::error::HarnessError;
use fogfl_core::harness::{self, brute_force_tiny, run_baseline, sca_options, OracleGrid, SweepKey, SweepSpec};
use fogfl_core::phymodel::Forwarding;
use fogfl_core::sca::{run, run_multistart, SolveReport, Termination};
use fogfl_core::scenario::{generate_scenario, parse_config, ExperimentConfig, Scheme};

#[derive(Parser)]
#[command(name = "fogfl", version, about = "Completion-time optimization for fog-RAN federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario and print the latency breakdown.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        seed: Option<u64>,
        /// For rate_split, also start from the edge-only and cloud-only solutions.
        #[arg(long)]
        multistart: bool,
        /// Under edge_only, send no quantized signal on the fronthaul.
        #[arg(long)]
        decoded_only: bool,
    },
    /// Sweep one parameter over several seeds and write one CSV row per run.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        key: SweepKey,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        warm_start: bool,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Use the full-size scenario (10 IDs).
        #[arg(long)]
        full: bool,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<Scheme>>,
        /// Run rate splitting from the default start only.
        #[arg(long)]
        no_multistart: bool,
        #[arg(long)]
        decoded_only: bool,
    },
    /// Compare the algorithm with an exhaustive grid search on a scalar scenario.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    Ok(parse_config(&std::fs::read_to_string(path)?)?)
}

fn forwarding(decoded_only: bool) -> Forwarding {
    if decoded_only {
        Forwarding::DecodedOnly
    } else {
        Forwarding::Quantized
    }
}

fn print_report(r: &SolveReport) {
    let l = &r.latency;
    println!("scheme      {}", r.scheme);
    println!("tau_total   {:.8e}", l.tau_total);
    println!("tau_c       {:.8e}", l.tau_c);
    println!("tau_w       {:.8e}", l.tau_w);
    println!("tau_f       {:.8e}", l.tau_f);
    println!("eta_l       {:.8e}", r.point.eta_l);
    println!("n_l         {:.8e}", l.n_l);
    println!("n_g         {:.8e}", l.n_g);
    println!("iterations  {}", r.iterations);
    println!("terminated  {:?}", r.terminated_by);
    println!("wall_time   {:.3}", r.wall_time);
}

fn cmd_run(
    config: PathBuf,
    scheme: Option<Scheme>,
    seed: Option<u64>,
    multistart: bool,
    decoded_only: bool,
) -> Result<bool, HarnessError> {
    let mut cfg = load(&config)?;
    if let Some(s) = scheme {
        cfg.scheme = s;
    }
    if let Some(s) = seed {
        cfg.system.seed = s;
    }
    let s = generate_scenario(&cfg.system, &cfg.fl)?;
    let mut opts = sca_options(&cfg, cfg.scheme);
    opts.subproblem.forwarding = forwarding(decoded_only);
    let report = match cfg.scheme {
        Scheme::RateSplit if multistart => {
            let e = run_baseline(&s, Scheme::EdgeOnly, &opts)?;
            let c = run_baseline(&s, Scheme::CloudOnly, &opts)?;
            let m = run_multistart(&s, &opts, Some(&e), Some(&c), None)?;
            for (label, tau) in &m.starts {
                match tau {
                    Some(t) => eprintln!("start {label:<8} tau_total {t:.8e}"),
                    None => eprintln!("start {label:<8} failed"),
                }
            }
            m.best
        }
        _ => run(&s, &opts)?,
    };
    print_report(&report);
    Ok(report.terminated_by == Termination::Threshold)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config: PathBuf,
    key: SweepKey,
    values: Vec<f64>,
    trials: usize,
    out: PathBuf,
    warm_start: bool,
    jobs: usize,
    full: bool,
    schemes: Option<Vec<Scheme>>,
    no_multistart: bool,
    decoded_only: bool,
) -> Result<bool, HarnessError> {
    let cfg = load(&config)?;
    let mut spec = SweepSpec::new(cfg, key, values, trials)?;
    if let Some(s) = schemes {
        spec.schemes = s;
    }
    spec.warm_start = warm_start;
    spec.jobs = jobs;
    spec.multistart = !no_multistart;
    spec.forwarding = forwarding(decoded_only);
    if full {
        spec = spec.full_scale();
    }
    spec.validate()?;
    let summary = harness::run_experiment(&spec, &out)?;
    eprintln!(
        "{} rows, {} not converged; summary in {}",
        summary.rows,
        summary.non_converged,
        harness::summary_path(&out).display()
    );
    Ok(summary.non_converged == 0)
}

fn cmd_oracle(config: PathBuf, out: PathBuf) -> Result<bool, HarnessError> {
    let cfg = load(&config)?;
    let s = generate_scenario(&cfg.system, &cfg.fl)?;
    let oracle = brute_force_tiny(&s, &OracleGrid::default())?;
    let opts = sca_options(&cfg, Scheme::RateSplit);
    let e = run_baseline(&s, Scheme::EdgeOnly, &opts)?;
    let c = run_baseline(&s, Scheme::CloudOnly, &opts)?;
    let sca = run_multistart(&s, &opts, Some(&e), Some(&c), None)?.best;
    let mut text = String::from("method,tau_total,tau_c,tau_w,tau_f,eta_l,d_e\n");
    let o = &oracle.latency;
    text.push_str(&format!(
        "oracle,{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
        o.tau_total, o.tau_c, o.tau_w, o.tau_f, oracle.eta_l, oracle.d_e
    ));
    let l = &sca.latency;
    text.push_str(&format!(
        "sca,{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
        l.tau_total, l.tau_c, l.tau_w, l.tau_f, sca.point.eta_l, sca.point.bits.edge[0]
    ));
    std::fs::write(&out, text)?;
    let rel = (l.tau_total - o.tau_total) / o.tau_total;
    println!("oracle {:.8e}  sca {:.8e}  relative difference {:+.3e}", o.tau_total, l.tau_total, rel);
    Ok(sca.terminated_by == Termination::Threshold)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            scheme,
            seed,
            multistart,
            decoded_only,
        } => cmd_run(config, scheme, seed, multistart, decoded_only),
        Command::Sweep {
            config,
            key,
            values,
            trials,
            out,
            warm_start,
            jobs,
            full,
            schemes,
            no_multistart,
            decoded_only,
        } => cmd_sweep(
            config,
            key,
            values,
            trials,
            out,
            warm_start,
            jobs,
            full,
            schemes,
            no_multistart,
            decoded_only,
        ),
        Command::Oracle { config, out } => cmd_oracle(config, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
