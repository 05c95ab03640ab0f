use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dicke_sim_cli::commands::{self, configure_threads, read_config};
use dicke_sim_cli::{preset, CliError, ConfigError, ModelChoice, RunConfig};

/// Fluorescence of collectively emitting NV-center ensembles.
#[derive(Parser, Debug)]
#[command(name = "dicke-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the selected models and write CSV, report.json and optionally an SVG plot.
    Simulate(RunArgs),
    /// Print the t -> infinity limit of the normalized trace from both methods.
    Asymptote(RunArgs),
    /// Switch each of the nine terms of Model A to its Model B form in turn.
    Ablate(RunArgs),
    /// Check the Dicke-state identities by brute force in the full symmetric sector.
    OracleVerify {
        #[arg(long, default_value_t = 10)]
        max_n: u32,
    },
    /// List the built-in parameter sets, or print one as a config file.
    Presets {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Built-in parameter set: n2, n7 or n10 (default n7).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Flat `key = value` file listing every configuration key.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// a, b, both or custom:<nine a/b flags for terms A..I>.
    #[arg(long)]
    model: Option<String>,
    /// Number of emitters.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, value_name = "NS")]
    t_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    svg: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => read_config(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => preset("n7")?,
        };
        if let Some(m) = &self.model {
            cfg.model = m.parse::<ModelChoice>()?;
        }
        if let Some(n) = self.n {
            cfg.n_centers = n;
        }
        if let Some(t) = self.t_max {
            cfg.t_max_ns = t;
        }
        if let Some(s) = self.samples {
            cfg.samples = s;
        }
        if let Some(r) = self.rtol {
            cfg.rel_tol = r;
        }
        if let Some(a) = self.atol {
            cfg.abs_tol = a;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.svg |= self.svg;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let (written, summary) = commands::simulate_cmd(&cfg)?;
            print!("{summary}");
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Asymptote(args) => print!("{}", commands::asymptote_cmd(&args.resolve()?)?),
        Command::Ablate(args) => {
            let (_, path, table) = commands::ablate_cmd(&args.resolve()?)?;
            print!("{table}");
            println!("wrote {}", path.display());
        }
        Command::OracleVerify { max_n } => print!("{}", commands::oracle_cmd(max_n)?.1),
        Command::Presets { show } => print!("{}", commands::presets_cmd(show.as_deref())?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let threads = std::env::var("DICKE_SIM_THREADS").ok();
    if let Err(e) = configure_threads(threads.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
