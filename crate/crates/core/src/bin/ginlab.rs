use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ginlab::catalog;
use ginlab::experiment::config::{load_value, set_path};
use ginlab::experiment::verify::DEFAULT_HCIZ_SAMPLES;
use ginlab::experiment::{
    build_plot_bundle, model_report, run_campaign, run_verification, ExperimentConfig, VerifyOptions,
};
use ginlab::{Error, Result};

#[derive(Parser)]
#[command(name = "ginlab", version, about = "Deformed complex Ginibre ensembles: bulk analysis, sampling and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify z0 and report the bulk constants (and optionally the support boundary).
    Model(ConfigArgs),
    /// Sample the ensemble for every N and write comparison reports plus a manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Numerical checks of the variational lemmas and the HCIZ formula.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "hciz-samples", default_value_t = DEFAULT_HCIZ_SAMPLES)]
        hciz_samples: usize,
        /// Also write the report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long = "inject-t0-offset", hide = true, default_value_t = 0.0, allow_hyphen_values = true)]
        inject_t0_offset: f64,
    },
    /// Turn a finished run into plot-ready CSV files.
    Report {
        /// Path to manifest.json of a finished run.
        manifest: PathBuf,
        /// Output directory (default: plots/ next to the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config source plus overrides; flag names mirror JSON paths.
#[derive(Args)]
struct ConfigArgs {
    /// Experiment config JSON.
    #[arg(long, conflicts_with = "example")]
    config: Option<PathBuf>,
    /// Start from a shipped example spec instead (pure_ginibre, two_atom, three_atom).
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "master_seed")]
    master_seed: Option<u64>,
    #[arg(long = "z0.re", allow_hyphen_values = true)]
    z0_re: Option<f64>,
    #[arg(long = "z0.im", allow_hyphen_values = true)]
    z0_im: Option<f64>,
    #[arg(long = "N_list", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long = "window_rho")]
    window_rho: Option<f64>,
    #[arg(long = "pair_r_max")]
    pair_r_max: Option<f64>,
    #[arg(long = "pair_bins")]
    pair_bins: Option<usize>,
    #[arg(long = "output_dir")]
    output_dir: Option<String>,
    #[arg(long = "dump_spectra", num_args = 0..=1, default_missing_value = "true")]
    dump_spectra: Option<bool>,
    #[arg(long = "spec.tau")]
    spec_tau: Option<f64>,
    #[arg(long = "spec.R0")]
    spec_r0: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut value = match (&self.config, &self.example) {
            (Some(path), _) => load_value(path)?,
            (None, Some(name)) => {
                let example = catalog::by_name(name).ok_or_else(|| Error::Config(format!("unknown example `{name}`")))?;
                json!({
                    "spec": example.spec,
                    "z0": { "re": example.z0.re, "im": example.z0.im },
                    "N_list": [256, 512, 1024],
                    "trials": 40,
                    "master_seed": 0
                })
            }
            (None, None) => return Err(Error::Config("pass --config <file> or --example <name>".into())),
        };
        let overrides: [(&str, Option<Value>); 12] = [
            ("trials", self.trials.map(Value::from)),
            ("master_seed", self.master_seed.map(Value::from)),
            ("z0.re", self.z0_re.map(Value::from)),
            ("z0.im", self.z0_im.map(Value::from)),
            ("N_list", self.n_list.clone().map(Value::from)),
            ("window_rho", self.window_rho.map(Value::from)),
            ("pair_r_max", self.pair_r_max.map(Value::from)),
            ("pair_bins", self.pair_bins.map(Value::from)),
            ("output_dir", self.output_dir.clone().map(Value::from)),
            ("dump_spectra", self.dump_spectra.map(Value::from)),
            ("spec.tau", self.spec_tau.map(Value::from)),
            ("spec.R0", self.spec_r0.map(Value::from)),
        ];
        for (path, v) in overrides {
            if let Some(v) = v {
                set_path(&mut value, path, v)?;
            }
        }
        ExperimentConfig::from_value(value)
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Model(args) => {
            let config = args.resolve()?;
            let (report, path) = model_report(&config, &config.output_dir()?)?;
            print_json(&report)?;
            log::info!("model report written to {}", path.display());
        }
        Command::Run { config, jobs } => {
            let config = config.resolve()?;
            let out = config.output_dir()?;
            let (_, path) = with_jobs(jobs, || run_campaign(&config, &out))??;
            println!("{}", path.display());
        }
        Command::Verify { seed, hciz_samples, output, jobs, inject_t0_offset } => {
            let opts = VerifyOptions { seed, hciz_samples, t0_offset: inject_t0_offset };
            let report = with_jobs(jobs, || run_verification(&opts))?;
            print_json(&report)?;
            if let Some(path) = output {
                ginlab::experiment::write_json(&path, &report)?;
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if !report.all_passed {
                eprintln!("failing checks: {}", report.failing().join(", "));
                return Ok(ExitCode::from(4));
            }
        }
        Command::Report { manifest, out } => {
            let bundle = build_plot_bundle(&manifest, out.as_deref())?;
            print_json(&bundle)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
