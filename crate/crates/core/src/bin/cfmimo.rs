use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cfmimo::idd::DetectorKind;
use cfmimo::ldpc::{write_alist, LdpcCode, DEFAULT_CHECKS, DEFAULT_LENGTH, DEFAULT_SEED, DEFAULT_VAR_DEGREE};
use cfmimo::selection::ApMode;
use cfmimo::sim::{self, SimConfig};

#[derive(Parser)]
#[command(name = "cfmimo", version, about = "Cell-free massive MIMO uplink link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a single SNR point.
    Run {
        #[command(flatten)]
        io: RunIo,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Simulate the whole SNR grid.
    Sweep {
        #[command(flatten)]
        io: RunIo,
        /// Also write a gnuplot script for the CSV.
        #[arg(long)]
        plot_script: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the built-in property checks.
    Validate,
    /// Write a PEG-constructed parity-check matrix as alist.
    GenCode {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LENGTH)]
        length: usize,
        #[arg(long, default_value_t = DEFAULT_CHECKS)]
        checks: usize,
        #[arg(long, default_value_t = DEFAULT_VAR_DEGREE)]
        var_degree: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunIo {
    /// Flat key-value (TOML) configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Write geometry, beta, mask and estimate CSVs of the first trial here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

/// Command-line values replace the corresponding config keys.
#[derive(Args)]
struct Overrides {
    /// all, sel or both (comma separated)
    #[arg(long, value_delimiter = ',')]
    ap_mode: Option<Vec<ApMode>>,
    /// AP selection threshold in dB
    #[arg(long, allow_hyphen_values = true)]
    beta_th_db: Option<f64>,
    /// mmse, softic, list or genie (comma separated)
    #[arg(long, value_delimiter = ',')]
    detector: Option<Vec<DetectorKind>>,
    /// SAC distance threshold [default: 0.38]
    #[arg(long)]
    d_th: Option<f64>,
    /// Candidates per unreliable layer
    #[arg(long)]
    list_size: Option<usize>,
    /// Outer detection/decoding iterations
    #[arg(long)]
    idd_iters: Option<usize>,
    /// Decoder iterations per IDD iteration [default: 10]
    #[arg(long)]
    inner_iters: Option<usize>,
    /// Parity-check matrix in alist format.
    #[arg(long)]
    ldpc_file: Option<PathBuf>,
    /// Comma-separated SNR grid in dB
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// Channel realizations per SNR point
    #[arg(long)]
    trials: Option<u64>,
    /// Base seed
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn apply(self, cfg: &mut SimConfig) {
        if let Some(v) = self.ap_mode {
            cfg.ap_modes = v;
        }
        if let Some(v) = self.beta_th_db {
            cfg.beta_th_db = v;
        }
        if let Some(v) = self.detector {
            cfg.detectors = v;
        }
        if let Some(v) = self.d_th {
            cfg.d_th = v;
        }
        if let Some(v) = self.list_size {
            cfg.list_size = v;
        }
        if let Some(v) = self.idd_iters {
            cfg.idd_iters = v;
        }
        if let Some(v) = self.inner_iters {
            cfg.inner_iters = v;
        }
        if let Some(v) = self.ldpc_file {
            cfg.ldpc_file = Some(v);
        }
        if let Some(v) = self.snr_db {
            cfg.snr_db = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

fn load_config(path: Option<&Path>, overrides: Overrides) -> anyhow::Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => SimConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => SimConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &SimConfig, io: &RunIo) -> anyhow::Result<Vec<sim::BerRecord>> {
    let code = cfg.load_code().context("loading LDPC code")?;
    if let (Some(dir), Some(&snr)) = (&io.dump_dir, cfg.snr_db.first()) {
        let scn = sim::draw_scenario(cfg, snr, cfg.seed)?;
        sim::dump_scenario(cfg, &scn, dir).with_context(|| format!("writing debug CSVs to {}", dir.display()))?;
    }
    let records = sim::sweep_with_code(cfg, &code)?;
    sim::write_csv(&records, &io.out).with_context(|| format!("writing {}", io.out.display()))?;
    Ok(records)
}

fn real_main(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { io, overrides } => {
            let cfg = load_config(io.config.as_deref(), overrides)?;
            if cfg.snr_db.len() != 1 {
                bail!("run simulates one SNR point, the grid has {} (use --snr-db or sweep)", cfg.snr_db.len());
            }
            simulate(&cfg, &io)?;
        }
        Command::Sweep { io, plot_script, overrides } => {
            let cfg = load_config(io.config.as_deref(), overrides)?;
            let records = simulate(&cfg, &io)?;
            if let Some(p) = plot_script {
                let csv = io.out.to_string_lossy();
                sim::write_plot_script(&records, &csv, &p).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Validate => {
            let mut ok = true;
            for check in sim::validate::run_all() {
                println!("{} {:<20} {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
                ok &= check.passed;
            }
            return Ok(ok);
        }
        Command::GenCode { out, length, checks, var_degree, seed } => {
            let code = LdpcCode::build(length, checks, var_degree, seed)?;
            std::fs::write(&out, write_alist(&code)).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
