use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use asymcouple_core::error::Error;
use asymcouple_core::harness::{
    self, exit_code_for, presets, ExperimentConfig, EXIT_BLOWUP, EXIT_PASS, OUT_ENV,
};

#[derive(Debug, Parser)]
#[command(name = "asymcouple", version, about = "Asymptotic-coupling experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a pinned experiment and print PASS/FAIL per check.
    Reproduce {
        /// Preset id (see list-presets).
        experiment: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print the derived zeta cascade for the chain model.
    DumpCascade {
        /// Coupling strength a^2 (non-negative).
        #[arg(allow_hyphen_values = true)]
        a_squared: f64,
    },
    /// List the preset experiment ids.
    ListPresets,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Base seed; replaces the configured or pinned one.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. ASYMCOUPLE_OUT takes precedence when set.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0: one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn out_dir(&self, fallback: impl Into<PathBuf>) -> PathBuf {
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.out.clone().unwrap_or_else(|| fallback.into()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Run { config, common } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::parse(&text)
                .map_err(|e| Error::Config(format!("{}: {}", config.display(), strip(&e))))?;
            if let Some(s) = common.seed {
                cfg.simulation.seed = s;
            }
            if let Some(j) = common.jobs {
                cfg.simulation.jobs = j;
            }
            let out = common.out_dir(cfg.output.dir.clone());
            info!("running {} into {}", cfg.fingerprint(), out.display());
            let res = harness::run(&cfg, &out)?;
            for c in &res.report.checks {
                println!("{}", c.line());
            }
            if let Some(d) = &res.report.diagnostics {
                error!("blow-up: {}", d.message);
            }
            println!("fingerprint {} -> {}", res.report.fingerprint, out.display());
            Ok(res.exit_code())
        }
        Command::Reproduce { experiment, common } => {
            let out = common.out_dir("out");
            let o = presets::reproduce(&experiment, common.seed, &out, common.jobs.unwrap_or(0))?;
            if !o.text.is_empty() {
                print!("{}", o.text);
            }
            for c in &o.checks {
                println!("{}", c.line());
            }
            if o.blow_up {
                error!("{experiment}: a trajectory blew up; partial outputs in {}", out.display());
                return Ok(EXIT_BLOWUP);
            }
            Ok(o.exit_code())
        }
        Command::DumpCascade { a_squared } => {
            print!("{}", harness::dump_cascade(a_squared)?);
            Ok(EXIT_PASS)
        }
        Command::ListPresets => {
            print!("{}", presets::list_presets());
            Ok(EXIT_PASS)
        }
    }
}

// Keeps a single "config error:" prefix when the path is prepended.
fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
