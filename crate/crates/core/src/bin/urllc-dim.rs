use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use urllc_dim::config::{parse_config, parse_seed, Overrides, RunConfig};
use urllc_dim::engine::{run_campaign, CampaignOptions};
use urllc_dim::link::{ConnectivityMode, Regime};
use urllc_dim::output::{emit_results, Tables};
use urllc_dim::{validate, Error};

#[derive(Parser)]
#[command(name = "urllc-dim", version, about = "Dimension URLLC bandwidth in urban-macro networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep bands, densities, regimes and modes; write bandwidth_vs_density.csv.
    Dimension(RunArgs),
    /// Extract SINR and delay CDFs; write sinr_cdf.csv and delay_cdf.csv.
    Cdf(RunArgs),
    /// Run the built-in oracle and property checks.
    Validate {
        /// Smaller sample counts.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Carrier frequencies in Hz (700e6, 4e9, 30e9).
    #[arg(long = "band", value_delimiter = ',', num_args = 1..)]
    bands: Vec<f64>,
    /// BS densities per km².
    #[arg(long = "density", value_delimiter = ',', num_args = 1..)]
    densities: Vec<f64>,
    #[arg(long = "alpha", value_delimiter = ',', num_args = 1..)]
    alphas: Vec<f64>,
    /// noise | interference
    #[arg(long = "regime", value_delimiter = ',', num_args = 1..)]
    regimes: Vec<String>,
    /// single | multiconn | multiop | multiop-unclustered
    #[arg(long = "mode", value_delimiter = ',', num_args = 1..)]
    modes: Vec<String>,
    /// Experiments per cell.
    #[arg(long)]
    samples: Option<u64>,
    /// Master seed (decimal or 0x hex).
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Regenerate samples instead of holding them (dimension only).
    #[arg(long)]
    low_memory: bool,
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, Error> {
        let non_empty = |v: &Vec<f64>| (!v.is_empty()).then(|| v.clone());
        let regimes = self
            .regimes
            .iter()
            .map(|s| s.parse::<Regime>())
            .collect::<Result<Vec<_>, _>>()?;
        let modes = self
            .modes
            .iter()
            .map(|s| s.parse::<ConnectivityMode>())
            .collect::<Result<Vec<_>, _>>()?;
        let seed = match &self.seed {
            Some(s) => Some(parse_seed(s).map_err(|reason| Error::Config {
                field: "seed".into(),
                reason,
            })?),
            None => None,
        };
        Ok(Overrides {
            bands: non_empty(&self.bands),
            densities: non_empty(&self.densities),
            alphas: non_empty(&self.alphas),
            regimes: (!regimes.is_empty()).then_some(regimes),
            modes: (!modes.is_empty()).then_some(modes),
            samples: self.samples,
            seed,
        })
    }

    fn load(&self) -> Result<RunConfig, Error> {
        let config = parse_config(self.config.as_deref(), &self.overrides()?)?;
        for w in &config.warnings {
            warn!("{w}");
        }
        Ok(config)
    }
}

fn run(args: &RunArgs, command: &str, tables: Tables) -> Result<bool, Error> {
    let config = args.load()?;
    if tables.cdf && (config.campaign.regimes.len() != 1 || config.campaign.modes.len() != 1) {
        return Err(Error::Config {
            field: "regimes/modes".into(),
            reason: "cdf needs exactly one regime and one mode (use --regime and --mode)".into(),
        });
    }
    let options = CampaignOptions {
        workers: args.workers,
        cdf: tables.cdf.then(|| config.cdf.clone()),
        low_memory: args.low_memory,
    };
    info!(
        "{} cells x {} samples, seed {}",
        config.campaign.cells().len(),
        config.campaign.n_samples,
        config.campaign.master_seed
    );
    let output = run_campaign(&config.campaign, &options)?;
    for path in emit_results(&args.out, command, &config, &output, tables)? {
        info!("wrote {}", path.display());
    }
    if let Some(f) = &output.failure {
        error!("campaign stopped early: {}", f.message);
        return Ok(false);
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Dimension(args) => run(args, "dimension", Tables { bandwidth: true, cdf: false }),
        Command::Cdf(args) => run(args, "cdf", Tables { bandwidth: false, cdf: true }),
        Command::Validate { quick } => {
            let checks = validate::run_all(*quick);
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            error!("{e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
