use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noether_cli::config::{parse_config, ModelConfig, RunConfig, Suite};
use noether_cli::registry::Model;
use noether_cli::report::{write_text, IoError};
use noether_cli::{run, run_suites, write_outputs, RunError, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_PASS};
use noether_core::integrate::integrate;
use noether_core::phasespace::make_state;
use noether_core::poisson::bracket_table;
use noether_core::IntegratorKind;
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "noether-lab", version, about = "Numerical checks of Noether charges and their algebra")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the suites listed in a configuration file.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Integrate a model and write the trajectory as CSV.
    Integrate {
        #[arg(long)]
        model: String,
        /// Model parameter `key=value`; vectors are comma separated (`F=0,0,2.3`).
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long, default_value = "verlet")]
        integrator: String,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        q0: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        p0: Vec<f64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the Poisson bracket table of named observables at one state.
    Table {
        #[arg(long)]
        model: String,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Comma separated observable names, e.g. `T0,gamma0,H`.
        #[arg(long, value_delimiter = ',')]
        obs: Vec<String>,
        /// Flattened state `q_0..q_{d-1},p_0..p_{d-1},t`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        state: Vec<f64>,
    },
    /// Run one quantum suite from a configuration file.
    Qcheck {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e.exit_code() {
            EXIT_IO => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn init_threads() {
    let n = std::env::var("NOETHER_LAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    // 0 lets rayon pick; a second initialisation is harmless to ignore
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

fn load_config(path: &PathBuf) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn model_from_args(name: &str, params: &[String]) -> Result<Model, Failure> {
    let mut map = Map::new();
    for kv in params {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Config(format!("expected KEY=VALUE, got `{kv}`")))?;
        let nums: Result<Vec<f64>, _> = v.split(',').map(|x| x.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|_| Failure::Config(format!("`{k}`: expected numbers, got `{v}`")))?;
        let value = if nums.len() == 1 {
            serde_json::Number::from_f64(nums[0]).map(Value::Number)
        } else {
            nums.iter().map(|x| serde_json::Number::from_f64(*x).map(Value::Number)).collect::<Option<Vec<_>>>().map(Value::Array)
        };
        let value = value.ok_or_else(|| Failure::Config(format!("`{k}`: non-finite value")))?;
        // integer-valued parameters (sites, dimension) must stay integers
        let value = match (&value, nums.len()) {
            (_, 1) if (k == "n" || k == "d") && nums[0].fract() == 0.0 && nums[0] >= 0.0 => Value::from(nums[0] as u64),
            _ => value,
        };
        map.insert(k.to_string(), value);
    }
    let cfg = ModelConfig::from_params(name, &map).map_err(|e| Failure::Config(e.to_string()))?;
    Model::build(&cfg).map_err(|e| Failure::Config(e.to_string()))
}

fn verify(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, only: Option<Suite>) -> Result<bool, Failure> {
    let mut cfg = load_config(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    let result = match only {
        Some(s) => run_suites(&cfg, &[s])?,
        None => run(&cfg)?,
    };
    write_outputs(&result, &cfg.output_dir)?;
    let s = result.report.summary;
    for r in result.report.records.iter().filter(|r| !r.passed) {
        eprintln!("FAIL {} residual={:.3e} tolerance={:.1e}", r.check_id, r.residual, r.tolerance);
    }
    println!("{} checks, {} passed, {} failed; report in {}", s.total, s.passed, s.failed, cfg.output_dir.display());
    Ok(result.report.all_passed())
}

fn dispatch(cmd: Cmd) -> Result<bool, Failure> {
    match cmd {
        Cmd::Verify { config, out, seed } => verify(config, out, seed, None),
        Cmd::Qcheck { suite, config, out } => {
            let s: Suite = suite.parse().map_err(|e: noether_cli::config::ConfigError| Failure::Config(e.to_string()))?;
            if !s.is_quantum() {
                return Err(Failure::Config(format!("`{s}` is not a quantum suite; use qfock or qwave")));
            }
            verify(config, out, None, Some(s))
        }
        Cmd::Integrate { model, params, integrator, h, n, q0, p0, out } => {
            let m = model_from_args(&model, &params)?;
            let kind: IntegratorKind = integrator.parse().map_err(|e: noether_core::Error| Failure::Config(e.to_string()))?;
            let s0 = make_state(q0, p0, 0.0).map_err(|e| Failure::Config(e.to_string()))?;
            let traj = integrate(kind, m.system(), &s0, h, n).map_err(|e| Failure::Config(e.to_string()))?;
            match out {
                Some(path) => write_text(&path, &traj.to_csv())?,
                None => print!("{}", traj.to_csv()),
            }
            Ok(true)
        }
        Cmd::Table { model, params, obs, state } => {
            let m = model_from_args(&model, &params)?;
            let d = m.dim();
            if state.len() != 2 * d + 1 {
                return Err(Failure::Config(format!("--state needs {} values (q, p, t) for d={d}", 2 * d + 1)));
            }
            let s = make_state(state[..d].to_vec(), state[d..2 * d].to_vec(), state[2 * d])
                .map_err(|e| Failure::Config(e.to_string()))?;
            let names = m.observable_names();
            let observables = obs
                .iter()
                .map(|n| {
                    m.observable(n).ok_or_else(|| {
                        let known: Vec<&str> = names.iter().map(String::as_str).collect();
                        let hint = noether_cli::config::suggest(n, &known).map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default();
                        Failure::Config(format!("unknown observable `{n}`{hint}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let table = bracket_table(&observables, &s).map_err(|e| Failure::Config(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&table).expect("table serializes"));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let code = match dispatch(cli.cmd) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Io(msg)) => {
            eprintln!("io error: {msg}");
            EXIT_IO
        }
    };
    ExitCode::from(code as u8)
}
