use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xsplit_cli::commands::{self, EVENTS_FILE, RUN_FILE};
use xsplit_cli::config::{RunConfig, REFERENCE_PROFILE};
use xsplit_cli::error::CliError;

/// Heralded hard-X-ray photons on a Bragg beam splitter: model curves,
/// Monte Carlo runs and coincidence analysis.
#[derive(Debug, Parser)]
#[command(name = "xsplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML). The reference profile is used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` of the configuration.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Model spectra, port ratios, Bragg-angle sweep and rocking-width gain.
    Model {
        #[command(flatten)]
        common: Common,
        /// Also write a gnuplot script for the model curves.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Normalised reflected rate against splitter Bragg angle.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// First Bragg angle, degrees.
        #[arg(long)]
        from: Option<f64>,
        /// Last Bragg angle, degrees.
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Monte Carlo run through the coincidence electronics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Simulated time in seconds, overriding the configuration.
        #[arg(long)]
        duration: Option<f64>,
        /// Also store every detector pulse.
        #[arg(long)]
        write_pulses: bool,
    },
    /// Spectra, α, σ curves and rates from a simulated run.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Event file. Defaults to the one in the output directory.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Run metadata file. Defaults to the one next to the event file.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Also write a gnuplot script for spectra and σ curves.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Print the reference configuration profile.
    Defaults,
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::reference(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Model { common, gnuplot } => {
            let (cfg, out) = load(&common)?;
            let r = commands::model(&cfg, &out, gnuplot)?;
            println!("r_ref = {:.4}", r.r_r);
            println!("r_trans = {:.4}", r.r_t);
            println!("width gain (x{}) = {:.2}", cfg.model.width_factor, r.width_gain);
            println!("wrote model tables to {}", out.display());
        }
        Command::Sweep {
            common,
            from,
            to,
            points,
        } => {
            let (cfg, out) = load(&common)?;
            let m = &cfg.model;
            let rows = commands::sweep(
                &cfg,
                &out,
                from.unwrap_or(m.sweep_from_deg),
                to.unwrap_or(m.sweep_to_deg),
                points.unwrap_or(m.sweep_points),
            )?;
            println!("{} sweep points written to {}", rows.len(), out.join("bragg_sweep.csv").display());
        }
        Command::Simulate {
            common,
            duration,
            write_pulses,
        } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(d) = duration {
                cfg.source.duration = d;
                cfg.validate()?;
            }
            let r = commands::simulate(&cfg, &out, write_pulses)?;
            println!("pair rate = {:.5} /s", r.pair_rate);
            println!(
                "triggers = {}, dropped = {}, events = {}, heralded = {}",
                r.triggers, r.dropped, r.events, r.heralded
            );
            println!("live time = {:.1} s", r.live_time);
            println!("wrote {}", out.join(EVENTS_FILE).display());
        }
        Command::Analyze {
            common,
            events,
            run,
            gnuplot,
        } => {
            let (cfg, out) = load(&common)?;
            let events = events.unwrap_or_else(|| out.join(EVENTS_FILE));
            let run = run.unwrap_or_else(|| events.with_file_name(RUN_FILE));
            let r = commands::analyze(&cfg, &events, &run, &out, gnuplot)?;
            println!("{}", commands::alpha_line("heralded", &r.heralded));
            println!("{}", commands::alpha_line("all", &r.all));
            println!("n_ref = {:.5} ± {:.5} /s", r.rates.n_r.value, r.rates.n_r.error);
            println!("n_trans = {:.5} ± {:.5} /s", r.rates.n_t.value, r.rates.n_t.error);
            let fmt = |f: Option<f64>| f.map_or("n/a".to_string(), |v| format!("{v:.3} keV"));
            println!("spectrum FWHM: ref {}, trans {}", fmt(r.fwhm_ref), fmt(r.fwhm_trans));
            println!("wrote analysis tables to {}", out.display());
        }
        Command::Defaults => print!("{REFERENCE_PROFILE}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xsplit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
