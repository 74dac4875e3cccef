use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use hysir_core::equilibria::{endemic_range, infection_free};
use hysir_core::lyapunov::no_cycle_condition;
use hysir_core::scenario::Scenario;
use hysir_core::simulate::{self, classify, AttractorClass, Classification, RunError, RunOutcome, Trajectory};
use hysir_core::sir::{r0, SirState};

mod io;

#[derive(Parser)]
#[command(name = "hysir", version, about = "SIR dynamics with hysteretic (Preisach) vaccination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory, events, final memory and attractor.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one scenario per parameter value and print a summary table as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of sigma, beta, v_nat, mu.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the infection-free point, S* and the range of endemic I*.
    Equilibria {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the sufficient condition for the absence of periodic orbits.
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-classify a trajectory CSV written by `simulate`.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

/// Failure with the exit status it maps to.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Usage(m) => {
                eprintln!("error: {m}");
                ExitCode::from(2)
            }
            Failure::Runtime(m) => {
                eprintln!("error: {m}");
                ExitCode::from(1)
            }
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Sweep { config, param, values, out } => cmd_sweep(&config, &param, &values, out.as_deref()),
        Command::Equilibria { config } => cmd_equilibria(&config),
        Command::Stability { config } => cmd_stability(&config),
        Command::Analyze { config, csv } => cmd_analyze(&config, &csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Scenario::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn execute(sc: &Scenario) -> Result<RunOutcome, RunError> {
    let state = sc.operator_state()?;
    simulate::run(&sc.params, &sc.density, sc.initial_state(), state, sc.run, sc.solver, &sc.classify)
}

#[derive(Serialize)]
struct AttractorFile<'a> {
    #[serde(flatten)]
    classification: &'a Classification,
    t_end: f64,
    doublings: u32,
}

fn write_trajectory(sc: &Scenario, dir: &Path, traj: &Trajectory) -> CmdResult {
    let runtime = |e: std::io::Error| Failure::Runtime(e.to_string());
    io::write_trajectory_csv(&dir.join(&sc.outputs.trajectory), &traj.samples).map_err(runtime)?;
    io::write_json(&dir.join(&sc.outputs.events), &traj.events).map_err(runtime)?;
    io::write_json(&dir.join(&sc.outputs.final_memory), &io::MemoryFile(&traj.final_state)).map_err(runtime)
}

fn cmd_simulate(config: &Path, out: &Path) -> CmdResult {
    let sc = load(config)?;
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
    match execute(&sc) {
        Ok(outcome) => {
            write_trajectory(&sc, out, &outcome.trajectory)?;
            let attractor = AttractorFile {
                classification: &outcome.classification,
                t_end: outcome.t_end,
                doublings: outcome.doublings,
            };
            io::write_json(&out.join(&sc.outputs.attractor), &attractor)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{}", outcome.classification.class.name());
            Ok(())
        }
        Err(RunError::Setup(e)) => Err(Failure::Usage(e.to_string())),
        Err(RunError::Failed(f)) => {
            write_trajectory(&sc, out, &f.partial)?;
            Err(Failure::Runtime(format!("{} (partial trajectory written)", f.kind)))
        }
    }
}

fn parse_values(values: &str) -> Result<Vec<f64>, Failure> {
    let list: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if list.is_empty() {
        return Err(Failure::Usage("--values needs at least one value".into()));
    }
    list.iter()
        .map(|s| s.parse::<f64>().map_err(|_| Failure::Usage(format!("not a number in --values: {s:?}"))))
        .collect()
}

fn sweep_threads() -> Result<Option<usize>, Failure> {
    match std::env::var("HYSIR_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!("HYSIR_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}

fn cmd_sweep(config: &Path, param: &str, values: &str, out: Option<&Path>) -> CmdResult {
    const PARAMS: [&str; 4] = ["sigma", "beta", "v_nat", "mu"];
    if !PARAMS.contains(&param) {
        return Err(Failure::Usage(format!("--param must be one of {}, got {param:?}", PARAMS.join(", "))));
    }
    let mut values = parse_values(values)?;
    values.sort_by(f64::total_cmp);
    let base = load(config)?;
    let scenarios = values
        .iter()
        .map(|&v| base.with_param(param, v).map_err(|e| Failure::Usage(format!("{param}={v}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep_threads()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Runtime(e.to_string()))?;
    use rayon::prelude::*;
    let outcomes: Vec<Result<RunOutcome, RunError>> = pool.install(|| scenarios.par_iter().map(execute).collect());

    let mut rows = Vec::with_capacity(values.len());
    for (&value, outcome) in values.iter().zip(outcomes) {
        match outcome {
            Ok(o) => rows.push(io::SweepRow::new(value, &o.classification.class)),
            Err(e) => return Err(Failure::Runtime(format!("{param}={value}: {e}"))),
        }
    }
    match out {
        Some(path) => io::write_sweep(std::fs::File::create(path).map_err(|e| Failure::Runtime(e.to_string()))?, &rows),
        None => io::write_sweep(std::io::stdout().lock(), &rows),
    }
    .map_err(|e| Failure::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct EquilibriaReport {
    #[serde(rename = "R0")]
    r0: f64,
    infection_free: SirState,
    #[serde(rename = "S_star")]
    s_star: f64,
    v_range: (f64, f64),
    #[serde(rename = "I_star_range")]
    i_star_range: (f64, f64),
}

fn cmd_equilibria(config: &Path) -> CmdResult {
    let sc = load(config)?;
    let p = &sc.params;
    let v_max = sc.density.total_mass();
    let report = EquilibriaReport {
        r0: r0(p),
        infection_free: infection_free(p),
        s_star: p.s_star(),
        v_range: (p.v_nat(), p.v_nat() + v_max),
        i_star_range: endemic_range(p, v_max),
    };
    print_json(&report)
}

fn cmd_stability(config: &Path) -> CmdResult {
    let sc = load(config)?;
    print_json(&no_cycle_condition(&sc.params, &sc.density))
}

fn cmd_analyze(config: &Path, csv: &Path) -> CmdResult {
    let sc = load(config)?;
    let samples = io::read_trajectory_csv(csv).map_err(|e| Failure::Usage(format!("{}: {e}", csv.display())))?;
    let traj = Trajectory::from_samples(samples, &sc.params).map_err(|e| Failure::Usage(e.to_string()))?;
    let t_end = traj.t_end();
    let start = sc.run.discard.unwrap_or(0.8 * t_end);
    let classification = classify(&traj, &sc.params, start, &sc.classify);
    print_json(&classification)?;
    if classification.class == AttractorClass::Undecided {
        eprintln!("note: undecided; a longer trajectory may be needed");
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(std::io::stdout().lock(), "{text}").map_err(|e| Failure::Runtime(e.to_string()))
}
