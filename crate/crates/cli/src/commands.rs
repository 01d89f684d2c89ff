//! The batch commands. Each writes versioned CSV tables into an output
//! directory and returns the headline numbers it produced.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use xsplit::daq::{energy_select, read_events, Daq, EventRecord, EventWriter};
use xsplit::montecarlo::{write_pulses, DetectorId, PairOptics, PulseRecord, Simulation, StreamSummary};
use xsplit::optics::AttenuationTable;
use xsplit::spdc::{
    biphoton_amplitude, bragg_angle_sweep, coincidence_rate, energy_marginal, JointAmplitude, Unfiltered,
};
use xsplit::splitter::{rocking_width_gain, OwnedReflectedPort, ReflectedPort, TransmittedPort};
use xsplit::stats::{
    alpha, alpha_table, count_histogram, count_table, rates_and_ratios, sigma_curve, sigma_table, spectra, CoincCounts,
    EnergyMode, Measured, Rates, SigmaPoint,
};
use xsplit::table::Table;

use crate::config::RunConfig;
use crate::error::CliError;

pub const EVENTS_FILE: &str = "events.csv";
pub const RUN_FILE: &str = "run.csv";

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_table(dir: &Path, name: &str, table: &Table) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    table.write(create(&path)?).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn read_table(path: &Path, kind: &str) -> Result<Table, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(Table::read(BufReader::new(file), kind)?)
}

fn key_values(kind: &str, rows: &[(&str, String)]) -> Table {
    let mut t = Table::new(kind, &["key", "value"]);
    for (k, v) in rows {
        t.push(vec![k.to_string(), v.clone()]);
    }
    t
}

/// Flight-path loss of a pair as a function of heralded energy.
fn pair_loss(cfg: &RunConfig) -> impl Fn(f64) -> f64 + Sync {
    let flight = cfg.attenuator();
    let pump = cfg.spdc.pump_energy;
    move |e: f64| flight.transmittance(e).unwrap_or(0.0) * flight.transmittance(pump - e).unwrap_or(0.0)
}

fn amplitude(cfg: &RunConfig) -> Result<JointAmplitude, CliError> {
    Ok(biphoton_amplitude(&cfg.spdc, &cfg.grid)?)
}

fn sweep_angles(from: f64, to: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect()
}

fn run_sweep(cfg: &RunConfig, amp: &JointAmplitude, angles: &[f64]) -> Result<Vec<(f64, f64)>, CliError> {
    let loss = pair_loss(cfg);
    let base = coincidence_rate(amp, &Unfiltered, &loss)?;
    let family = |deg: f64| cfg.splitter.at_bragg_angle(deg).map(OwnedReflectedPort);
    Ok(bragg_angle_sweep(amp, family, angles, &loss)?
        .into_iter()
        .map(|(deg, rate)| (deg, rate / base))
        .collect())
}

fn sweep_table(rows: &[(f64, f64)]) -> Table {
    let mut t = Table::new("bragg-sweep", &["bragg_angle_deg", "normalized_rate"]);
    for (deg, rate) in rows {
        t.push(vec![deg.to_string(), rate.to_string()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub r_r: f64,
    pub r_t: f64,
    pub width_gain: f64,
    pub sweep: Vec<(f64, f64)>,
}

/// Model curves: Bragg-angle sweep, port spectra, port ratios and the
/// rocking-width scaling factor.
pub fn model(cfg: &RunConfig, out: &Path, gnuplot: bool) -> Result<ModelReport, CliError> {
    prepare_dir(out)?;
    let amp = amplitude(cfg)?;
    let loss = pair_loss(cfg);
    let hopg = AttenuationTable::hopg();
    let reflected = ReflectedPort { spec: &cfg.splitter };
    let transmitted = TransmittedPort {
        spec: &cfg.splitter,
        material: &hopg,
    };

    let base = energy_marginal(&amp, &Unfiltered, &loss)?;
    let refl = energy_marginal(&amp, &reflected, &loss)?;
    let trans = energy_marginal(&amp, &transmitted, &loss)?;
    let step = cfg.grid.energy_step();
    let total: f64 = base.iter().map(|(_, d)| d).sum::<f64>() * step;
    let integral = |m: &[(f64, f64)]| m.iter().map(|(_, d)| d).sum::<f64>() * step / total;
    let (r_r, r_t) = (integral(&refl), integral(&trans));

    let mut spectra_t = Table::new(
        "model-spectra",
        &["energy_kev", "unfiltered_per_kev", "reflected_per_kev", "transmitted_per_kev"],
    );
    for ((b, r), t) in base.iter().zip(&refl).zip(&trans) {
        spectra_t.push(vec![
            b.0.to_string(),
            (b.1 / total).to_string(),
            (r.1 / total).to_string(),
            (t.1 / total).to_string(),
        ]);
    }
    write_table(out, "model_spectra.csv", &spectra_t)?;

    let m = &cfg.model;
    let sweep = run_sweep(cfg, &amp, &sweep_angles(m.sweep_from_deg, m.sweep_to_deg, m.sweep_points))?;
    write_table(out, "bragg_sweep.csv", &sweep_table(&sweep))?;

    let narrow = cfg.splitter.with_width(cfg.splitter.width_deg / m.width_factor);
    let width_gain = rocking_width_gain(&cfg.spdc, &cfg.grid, &narrow, m.width_factor, &loss)?;

    let summary = key_values(
        "model-summary",
        &[
            ("r_ref", r_r.to_string()),
            ("r_trans", r_t.to_string()),
            ("width_factor", m.width_factor.to_string()),
            ("width_gain", width_gain.to_string()),
            ("amplitude_scale", amp.scale().to_string()),
        ],
    );
    write_table(out, "model_summary.csv", &summary)?;
    if gnuplot {
        write_script(out, "model.gp", MODEL_SCRIPT)?;
    }
    Ok(ModelReport {
        r_r,
        r_t,
        width_gain,
        sweep,
    })
}

/// Bragg-angle sweep only.
pub fn sweep(cfg: &RunConfig, out: &Path, from: f64, to: f64, points: usize) -> Result<Vec<(f64, f64)>, CliError> {
    if !(from > 0.0 && to < 90.0 && from < to && points >= 2) {
        return Err(CliError::Config("sweep needs 0 < from < to < 90 and at least 2 points".into()));
    }
    prepare_dir(out)?;
    let amp = amplitude(cfg)?;
    let rows = run_sweep(cfg, &amp, &sweep_angles(from, to, points))?;
    write_table(out, "bragg_sweep.csv", &sweep_table(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub pair_rate: f64,
    pub pulses: StreamSummary,
    pub triggers: u64,
    pub dropped: u64,
    pub events: u64,
    pub heralded: u64,
    pub live_time: f64,
}

/// Monte Carlo run through the coincidence electronics. Writes the event
/// records, the run metadata and a pulse summary; `write_pulse_stream` also
/// stores every detector pulse.
pub fn simulate(cfg: &RunConfig, out: &Path, write_pulse_stream: bool) -> Result<SimulateReport, CliError> {
    prepare_dir(out)?;
    let amp = amplitude(cfg)?;
    let pair_rate = cfg.pair_rate(&amp)?;
    let source = cfg.source_config(pair_rate)?;
    let optics = PairOptics {
        splitter: cfg.splitter.clone(),
        splitter_material: AttenuationTable::hopg(),
        flight: cfg.attenuator(),
    };
    let sim = Simulation::new(amp, optics, cfg.detectors, source)?;

    let events_path = out.join(EVENTS_FILE);
    let mut writer = EventWriter::new(create(&events_path)?).map_err(|e| io_err(&events_path, e))?;
    let mut write_error = None;
    let mut heralded = 0u64;
    let mut pulses: Vec<PulseRecord> = Vec::new();
    let mut daq = Daq::new(cfg.daq, |e: EventRecord| {
        heralded += e.is_heralded() as u64;
        if write_error.is_none() {
            write_error = writer.write(&e).err();
        }
    })?;
    let mut daq_error = None;
    let summary = sim.run(|p| {
        if write_pulse_stream {
            pulses.push(*p);
        }
        if daq_error.is_none() {
            daq_error = daq.push(p).err();
        }
    })?;
    if let Some(e) = daq_error {
        return Err(e.into());
    }
    let daq_summary = daq.finish();
    if let Some(e) = write_error {
        return Err(io_err(&events_path, e));
    }
    writer.finish().map_err(|e| io_err(&events_path, e))?;

    if write_pulse_stream {
        let path = out.join("pulses.csv");
        write_pulses(create(&path)?, &pulses).map_err(|e| io_err(&path, e))?;
    }

    let live_time = if daq_summary.triggers == 0 {
        cfg.source.duration
    } else {
        cfg.source.duration * daq_summary.events as f64 / daq_summary.triggers as f64
    };
    let run = key_values(
        "run",
        &[
            ("seed", cfg.seed.to_string()),
            ("duration_s", cfg.source.duration.to_string()),
            ("live_time_s", live_time.to_string()),
            ("pair_rate", pair_rate.to_string()),
            ("pair_rate_calibrated", cfg.source.pair_rate.is_none().to_string()),
            ("triggers", daq_summary.triggers.to_string()),
            ("dropped_triggers", daq_summary.dropped.to_string()),
            ("events", daq_summary.events.to_string()),
            ("heralded_events", heralded.to_string()),
        ],
    );
    write_table(out, RUN_FILE, &run)?;

    let mut pulse_t = Table::new("pulse-summary", &["detector", "pulses", "logic_pulses", "pair_pulses"]);
    for d in DetectorId::ALL {
        let i = d.index();
        pulse_t.push(vec![
            d.to_string(),
            summary.pulses[i].to_string(),
            summary.logic_pulses[i].to_string(),
            summary.pair_pulses[i].to_string(),
        ]);
    }
    write_table(out, "pulse_summary.csv", &pulse_t)?;

    Ok(SimulateReport {
        pair_rate,
        pulses: summary,
        triggers: daq_summary.triggers,
        dropped: daq_summary.dropped,
        events: daq_summary.events,
        heralded,
        live_time,
    })
}

/// Live time recorded by [`simulate`].
pub fn read_live_time(path: &Path) -> Result<f64, CliError> {
    let t = read_table(path, "run")?;
    t.expect_columns(&["key", "value"])?;
    let row = t
        .rows
        .iter()
        .position(|r| r[0] == "live_time_s")
        .ok_or_else(|| CliError::Schema(format!("{}: no live_time_s entry", path.display())))?;
    Ok(t.get(row, 1)?)
}

pub fn load_events(path: &Path) -> Result<Vec<EventRecord>, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_events(BufReader::new(file))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeReport {
    pub heralded: CoincCounts,
    pub all: CoincCounts,
    pub rates: Rates,
    pub sigma: Vec<SigmaPoint>,
    pub fwhm_ref: Option<f64>,
    pub fwhm_trans: Option<f64>,
}

/// Analyse the events of a run. Energy flags are recomputed with the
/// configuration's DAQ settings.
pub fn analyze(cfg: &RunConfig, events_path: &Path, run_path: &Path, out: &Path, gnuplot: bool) -> Result<AnalyzeReport, CliError> {
    let mut events = load_events(events_path)?;
    let live_time = read_live_time(run_path)?;
    prepare_dir(out)?;
    energy_select(&mut events, &cfg.daq);
    let report = analyze_events(cfg, &events, live_time, out)?;
    if gnuplot {
        write_script(out, "analysis.gp", ANALYSIS_SCRIPT)?;
    }
    Ok(report)
}

/// Analysis of events already in memory.
pub fn analyze_events(cfg: &RunConfig, events: &[EventRecord], live_time: f64, out: &Path) -> Result<AnalyzeReport, CliError> {
    let a = &cfg.analysis;
    let mut fwhm = [None, None];
    for d in DetectorId::ALL {
        let h = spectra(events, d, a.spectrum_lo, a.spectrum_hi, a.bin_width)?;
        write_table(out, &format!("spectrum_{d}.csv"), &h.to_table())?;
        match d {
            DetectorId::Ref => fwhm[0] = h.fwhm(),
            DetectorId::Trans => fwhm[1] = h.fwhm(),
            DetectorId::Trig => {}
        }
    }

    let modes = [
        EnergyMode::SumWindow {
            pump_energy: cfg.daq.pump_energy,
            half_width: 0.5 * cfg.daq.sum_window,
        },
        EnergyMode::Open,
    ];
    let sigma = sigma_curve(events, &a.windows_ns, &modes);
    write_table(out, "sigma.csv", &sigma_table(&sigma))?;

    let heralded_events: Vec<&EventRecord> = events.iter().filter(|e| e.is_heralded()).collect();
    write_table(out, "counts_heralded.csv", &count_table(&count_histogram(heralded_events.iter().copied())))?;
    write_table(out, "counts_all.csv", &count_table(&count_histogram(events)))?;

    let heralded = CoincCounts::from_events(heralded_events.iter().copied());
    let all = CoincCounts::from_events(events);
    write_table(out, "alpha.csv", &alpha_table(&[("heralded", heralded), ("all", all)]))?;

    let baseline = Measured {
        value: cfg.source.heralded_rate,
        error: cfg.source.heralded_rate_error,
    };
    let rates = rates_and_ratios(heralded.n_trig_r, heralded.n_trig_t, live_time, baseline)?;
    let mut rt = Table::new("rates", &["quantity", "value", "error"]);
    for (name, m) in [("n_ref", rates.n_r), ("n_trans", rates.n_t), ("r_ref", rates.r_r), ("r_trans", rates.r_t)] {
        rt.push(vec![name.into(), m.value.to_string(), m.error.to_string()]);
    }
    write_table(out, "rates.csv", &rt)?;

    Ok(AnalyzeReport {
        heralded,
        all,
        rates,
        sigma,
        fwhm_ref: fwhm[0],
        fwhm_trans: fwhm[1],
    })
}

/// One-line α summary of a selection.
pub fn alpha_line(label: &str, c: &CoincCounts) -> String {
    match alpha(c) {
        xsplit::stats::Alpha::Measured { alpha, sigma } => format!("{label}: alpha = {alpha:.4} ± {sigma:.4}"),
        xsplit::stats::Alpha::Zero { upper } => format!("{label}: alpha = 0 (upper bound {upper:.4})"),
        xsplit::stats::Alpha::Undefined { .. } => format!("{label}: alpha undefined (no events at one output)"),
    }
}

fn write_script(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_err(&path, e))
}

const MODEL_SCRIPT: &str = "\
set datafile separator ','
set datafile commentschars '#'
set key autotitle columnhead
set terminal pngcairo size 900,600
set output 'bragg_sweep.png'
set xlabel 'Bragg angle (deg)'
set ylabel 'normalized heralded rate'
plot 'bragg_sweep.csv' using 1:2 with linespoints
set output 'model_spectra.png'
set xlabel 'heralded energy (keV)'
set ylabel 'rate density (1/keV)'
plot 'model_spectra.csv' using 1:3 with lines, '' using 1:4 with lines
";

const ANALYSIS_SCRIPT: &str = "\
set datafile separator ','
set datafile commentschars '#'
set terminal pngcairo size 900,600
set output 'spectra.png'
set xlabel 'energy (keV)'
set ylabel 'heralded counts'
plot 'spectrum_ref.csv' every ::1 using 2:4 with steps title 'reflected', \\
     'spectrum_trans.csv' every ::1 using 2:4 with steps title 'transmitted'
set output 'sigma.png'
set xlabel 'coincidence window (ns)'
set ylabel 'sigma'
plot for [d in 'trans ref'] for [m in 'sum1 open'] \\
     '< grep \"^'.d.','.m.',\" sigma.csv' using 3:4:5 with yerrorlines title d.' '.m
";
