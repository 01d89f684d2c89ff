//! Seeded generation of photon arrivals (down-converted pairs and stray
//! background) and their conversion into detector pulses.
//!
//! A run is cut into fixed-length time slices. Every slice draws from its own
//! ChaCha8 streams, seeded from `(seed, stream tag, slice index)`, so slices can
//! be generated in any order or in parallel and still concatenate into the
//! same pulse stream.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::optics::AttenuationTable;
use crate::spdc::JointAmplitude;
use crate::splitter::{routing, SplitterSpec};

/// Conversion between a Gaussian FWHM and its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

const NS_PER_S: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorId {
    Trig,
    Trans,
    Ref,
}

impl DetectorId {
    pub const ALL: [DetectorId; 3] = [DetectorId::Trig, DetectorId::Trans, DetectorId::Ref];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorId::Trig => "trig",
            DetectorId::Trans => "trans",
            DetectorId::Ref => "ref",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_output(self) -> bool {
        self != DetectorId::Trig
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "trig" => Ok(DetectorId::Trig),
            "trans" => Ok(DetectorId::Trans),
            "ref" => Ok(DetectorId::Ref),
            other => Err(format!("unknown detector `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Pair,
    Stray,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Pair => "pair",
            Origin::Stray => "stray",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pair" => Ok(Origin::Pair),
            "stray" => Ok(Origin::Stray),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

/// Stray-radiation energy distribution: a flat band plus an elastic line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StraySpectrum {
    /// keV
    pub flat_lo: f64,
    /// keV
    pub flat_hi: f64,
    /// Energy of the elastically scattered pump, keV.
    pub line_energy: f64,
    /// Fraction of stray photons in the elastic line.
    pub line_fraction: f64,
}

impl Default for StraySpectrum {
    fn default() -> Self {
        StraySpectrum {
            flat_lo: 7.0,
            flat_hi: 17.0,
            line_energy: 21.0,
            line_fraction: 0.995,
        }
    }
}

impl StraySpectrum {
    pub fn validate(&self) -> Result<()> {
        if !(self.flat_lo > 0.0 && self.flat_hi > self.flat_lo) {
            return Err(Error::invalid("stray_spectrum", "need 0 < flat_lo < flat_hi"));
        }
        if !(self.line_energy > 0.0) {
            return Err(Error::invalid("stray_spectrum.line_energy", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.line_fraction) {
            return Err(Error::invalid("stray_spectrum.line_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.line_fraction {
            self.line_energy
        } else {
            rng.random_range(self.flat_lo..self.flat_hi)
        }
    }
}

/// Stray photon rate at each detector, photons/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrayRates {
    pub trig: f64,
    pub trans: f64,
    #[serde(rename = "ref")]
    pub reference: f64,
}

impl StrayRates {
    pub fn none() -> Self {
        StrayRates {
            trig: 0.0,
            trans: 0.0,
            reference: 0.0,
        }
    }

    pub fn get(&self, id: DetectorId) -> f64 {
        match id {
            DetectorId::Trig => self.trig,
            DetectorId::Trans => self.trans,
            DetectorId::Ref => self.reference,
        }
    }
}

impl Default for StrayRates {
    fn default() -> Self {
        StrayRates {
            trig: 8000.0,
            trans: 4000.0,
            reference: 6000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Pairs/s leaving the down-conversion crystal.
    pub pair_rate: f64,
    pub stray_rate: StrayRates,
    #[serde(default)]
    pub stray_spectrum: StraySpectrum,
    /// Run duration, s.
    pub duration: f64,
    pub seed: u64,
    /// Length of one independently seeded time slice, s.
    #[serde(default = "default_slice")]
    pub slice: f64,
}

fn default_slice() -> f64 {
    10.0
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.pair_rate, self.stray_rate.trig, self.stray_rate.trans, self.stray_rate.reference];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("source", "rates must be finite and non-negative"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("source.duration", "must be positive"));
        }
        if !(self.slice > 0.0) {
            return Err(Error::invalid("source.slice", "must be positive"));
        }
        self.stray_spectrum.validate()
    }

    pub fn slice_count(&self) -> usize {
        (self.duration / self.slice).ceil().max(1.0) as usize
    }

    /// Time interval of slice `index`, ns.
    pub fn slice_bounds(&self, index: usize) -> (f64, f64) {
        let lo = index as f64 * self.slice;
        let hi = ((index + 1) as f64 * self.slice).min(self.duration);
        (lo * NS_PER_S, hi * NS_PER_S)
    }
}

/// Path from the crystal to each detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightPath {
    pub air_cm: f64,
    pub helium_cm: f64,
}

impl Default for FlightPath {
    fn default() -> Self {
        FlightPath {
            air_cm: 10.0,
            helium_cm: 90.0,
        }
    }
}

/// Flight path together with the attenuation tables it needs.
#[derive(Debug, Clone)]
pub struct Attenuator {
    pub path: FlightPath,
    pub air: AttenuationTable,
    pub helium: AttenuationTable,
}

impl Attenuator {
    pub fn new(path: FlightPath) -> Self {
        Attenuator {
            path,
            air: AttenuationTable::air(),
            helium: AttenuationTable::helium(),
        }
    }

    pub fn transmittance(&self, energy: f64) -> Result<f64> {
        Ok(self.air.transmittance(energy, self.path.air_cm)? * self.helium.transmittance(energy, self.path.helium_cm)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Energy resolution FWHM at `reference_energy`, eV. Scales with √E.
    pub resolution_fwhm_ev: f64,
    /// keV
    pub reference_energy: f64,
    /// ns
    pub analog_width: f64,
    /// ns
    pub logic_width: f64,
    /// Single-channel-analyser window for logic pulses, keV.
    pub sca_window: (f64, f64),
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            efficiency: 1.0,
            resolution_fwhm_ev: 300.0,
            reference_energy: 10.5,
            analog_width: 200.0,
            logic_width: 1000.0,
            sca_window: (5.0, 22.0),
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid("detector.efficiency", "must lie in [0, 1]"));
        }
        if !(self.resolution_fwhm_ev >= 0.0) || !(self.reference_energy > 0.0) {
            return Err(Error::invalid("detector.resolution", "need FWHM >= 0 and reference energy > 0"));
        }
        if !(self.analog_width > 0.0 && self.logic_width > 0.0) {
            return Err(Error::invalid("detector.pulse_width", "pulse widths must be positive"));
        }
        if !(self.sca_window.0 < self.sca_window.1) {
            return Err(Error::invalid("detector.sca_window", "need lo < hi"));
        }
        Ok(())
    }

    /// Standard deviation of the measured energy at `energy`, keV.
    pub fn sigma(&self, energy: f64) -> f64 {
        self.resolution_fwhm_ev * 1e-3 / FWHM_PER_SIGMA * (energy.max(0.0) / self.reference_energy).sqrt()
    }

    pub fn in_sca(&self, measured: f64) -> bool {
        measured >= self.sca_window.0 && measured <= self.sca_window.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSet {
    pub trig: DetectorSpec,
    pub trans: DetectorSpec,
    #[serde(rename = "ref")]
    pub reference: DetectorSpec,
}

impl Default for DetectorSet {
    fn default() -> Self {
        let d = DetectorSpec::default();
        DetectorSet {
            trig: d,
            trans: d,
            reference: d,
        }
    }
}

impl DetectorSet {
    pub fn uniform(spec: DetectorSpec) -> Self {
        DetectorSet {
            trig: spec,
            trans: spec,
            reference: spec,
        }
    }

    pub fn get(&self, id: DetectorId) -> &DetectorSpec {
        match id {
            DetectorId::Trig => &self.trig,
            DetectorId::Trans => &self.trans,
            DetectorId::Ref => &self.reference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        DetectorId::ALL.iter().try_for_each(|&id| self.get(id).validate())
    }
}

/// A photon arriving at a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    /// keV
    pub true_energy: f64,
    /// keV; equal to `true_energy` until detected.
    pub measured_energy: f64,
    /// ns since run start.
    pub time: f64,
    pub detector: DetectorId,
    pub origin: Origin,
    /// Shared by the two photons of one pair.
    pub pair: Option<u64>,
}

/// Analog pulse, plus a logic pulse when the energy falls in the SCA window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    /// Start of both pulses, ns.
    pub time: f64,
    pub detector: DetectorId,
    /// keV
    pub energy: f64,
    /// keV
    pub true_energy: f64,
    pub origin: Origin,
    pub pair: Option<u64>,
    /// ns
    pub analog_width: f64,
    /// ns; `None` when no logic pulse was generated.
    pub logic_width: Option<f64>,
}

impl PulseRecord {
    pub fn analog_peak(&self) -> f64 {
        self.time + 0.5 * self.analog_width
    }

    pub fn logic_end(&self) -> Option<f64> {
        self.logic_width.map(|w| self.time + w)
    }
}

/// Seed for one (stream, slice) substream.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(stream)) ^ index)
}

fn splitmix(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn slice_rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index as u64))
}

const STREAM_PAIRS: u64 = 1;
const STREAM_STRAY: u64 = 2;
const STREAM_DETECT: u64 = 8;

/// Poisson arrival times at `rate` (per second) inside `[lo, hi)` ns.
pub fn poisson_times<R: Rng + ?Sized>(rate: f64, (lo, hi): (f64, f64), rng: &mut R) -> Vec<f64> {
    let mut times = Vec::new();
    if rate <= 0.0 || hi <= lo {
        return times;
    }
    let gap = Exp::new(rate / NS_PER_S).expect("positive rate");
    let mut t = lo;
    loop {
        t += gap.sample(rng);
        if t >= hi {
            return times;
        }
        times.push(t);
    }
}

/// Inverse-CDF sampler over the cells of a joint amplitude.
#[derive(Debug, Clone)]
pub struct PairSampler {
    amp: JointAmplitude,
    cdf: Vec<f64>,
}

/// One sampled pair: heralded energy and direction offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    pub heralded_energy: f64,
    pub trigger_energy: f64,
    pub theta_x: f64,
    pub theta_y: f64,
}

impl PairSampler {
    pub fn new(amp: JointAmplitude) -> Self {
        let mut acc = 0.0;
        let cdf = amp
            .intensities()
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        PairSampler { amp, cdf }
    }

    pub fn amplitude(&self) -> &JointAmplitude {
        &self.amp
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PairSample {
        let total = *self.cdf.last().expect("non-empty grid");
        let u = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let grid = self.amp.grid();
        let cell = self.amp.cell(idx);
        let energy = cell.energy + (rng.random::<f64>() - 0.5) * grid.energy_step();
        let theta_y = cell.theta_y + (rng.random::<f64>() - 0.5) * grid.theta_y_step();
        PairSample {
            heralded_energy: energy,
            trigger_energy: self.amp.pump_energy() - energy,
            theta_x: self.amp.centroids()[idx],
            theta_y,
        }
    }
}

/// Everything needed to turn a sampled pair into photons at the detectors.
#[derive(Debug, Clone)]
pub struct PairOptics {
    pub splitter: SplitterSpec,
    pub splitter_material: AttenuationTable,
    pub flight: Attenuator,
}

impl PairOptics {
    /// Probability that the heralded photon reaches (Ref, Trans) given it
    /// survives the flight path.
    pub fn routing(&self, sample: &PairSample) -> Result<(f64, f64, f64)> {
        let delta = self.splitter.plane.deviation(sample.theta_x, sample.theta_y).to_degrees();
        routing(&self.splitter, sample.heralded_energy, delta, &self.splitter_material)
    }
}

/// Pairs created in `[lo, hi)` ns; each surviving photon becomes a
/// [`PhotonState`]. Pair ids are `id_base + n`.
pub fn generate_pairs<R: Rng + ?Sized>(
    sampler: &PairSampler,
    optics: &PairOptics,
    pair_rate: f64,
    bounds: (f64, f64),
    id_base: u64,
    rng: &mut R,
) -> Result<Vec<PhotonState>> {
    let times = poisson_times(pair_rate, bounds, rng);
    let mut out = Vec::with_capacity(2 * times.len());
    for (n, time) in times.into_iter().enumerate() {
        let pair = Some(id_base + n as u64);
        let sample = sampler.sample(rng);
        let photon = |energy, detector| PhotonState {
            true_energy: energy,
            measured_energy: energy,
            time,
            detector,
            origin: Origin::Pair,
            pair,
        };
        if rng.random::<f64>() < optics.flight.transmittance(sample.trigger_energy)? {
            out.push(photon(sample.trigger_energy, DetectorId::Trig));
        }
        if rng.random::<f64>() < optics.flight.transmittance(sample.heralded_energy)? {
            let (r2, t, _) = optics.routing(&sample)?;
            let u = rng.random::<f64>();
            if u < r2 {
                out.push(photon(sample.heralded_energy, DetectorId::Ref));
            } else if u < r2 + t {
                out.push(photon(sample.heralded_energy, DetectorId::Trans));
            }
        }
    }
    Ok(out)
}

/// Independent stray photons at every detector inside `[lo, hi)` ns.
pub fn generate_stray<R: Rng + ?Sized>(source: &SourceConfig, bounds: (f64, f64), rng: &mut R) -> Vec<PhotonState> {
    let mut out = Vec::new();
    for id in DetectorId::ALL {
        for time in poisson_times(source.stray_rate.get(id), bounds, rng) {
            let energy = source.stray_spectrum.sample(rng);
            out.push(PhotonState {
                true_energy: energy,
                measured_energy: energy,
                time,
                detector: id,
                origin: Origin::Stray,
                pair: None,
            });
        }
    }
    out
}

/// Sort photons by arrival time, ties broken by detector id. Stable.
pub fn sort_photons(photons: &mut [PhotonState]) {
    photons.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.detector.cmp(&b.detector)));
}

/// Detector response: efficiency thinning, Gaussian energy noise, pulses.
pub fn detect<R: Rng + ?Sized>(photons: &[PhotonState], detectors: &DetectorSet, rng: &mut R) -> Vec<PulseRecord> {
    let mut out = Vec::with_capacity(photons.len());
    for p in photons {
        let spec = detectors.get(p.detector);
        if spec.efficiency < 1.0 && rng.random::<f64>() >= spec.efficiency {
            continue;
        }
        let sigma = spec.sigma(p.true_energy);
        let energy = if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).expect("finite sigma");
            loop {
                let e = p.true_energy + noise.sample(rng);
                if e > 0.0 {
                    break e;
                }
            }
        } else {
            p.true_energy
        };
        out.push(PulseRecord {
            time: p.time,
            detector: p.detector,
            energy,
            true_energy: p.true_energy,
            origin: p.origin,
            pair: p.pair,
            analog_width: spec.analog_width,
            logic_width: spec.in_sca(energy).then_some(spec.logic_width),
        });
    }
    out
}

/// Counts of pulses produced by a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamSummary {
    /// Pulses per detector, indexed by [`DetectorId::index`].
    pub pulses: [u64; 3],
    pub logic_pulses: [u64; 3],
    pub pair_pulses: [u64; 3],
}

impl StreamSummary {
    pub fn record(&mut self, pulse: &PulseRecord) {
        let i = pulse.detector.index();
        self.pulses[i] += 1;
        if pulse.logic_width.is_some() {
            self.logic_pulses[i] += 1;
        }
        if pulse.origin == Origin::Pair {
            self.pair_pulses[i] += 1;
        }
    }
}

/// A complete, sharded pulse-stream generator.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub sampler: PairSampler,
    pub optics: PairOptics,
    pub detectors: DetectorSet,
    pub source: SourceConfig,
}

impl Simulation {
    pub fn new(amp: JointAmplitude, optics: PairOptics, detectors: DetectorSet, source: SourceConfig) -> Result<Self> {
        optics.splitter.validate()?;
        detectors.validate()?;
        source.validate()?;
        Ok(Simulation {
            sampler: PairSampler::new(amp),
            optics,
            detectors,
            source,
        })
    }

    pub fn slice_count(&self) -> usize {
        self.source.slice_count()
    }

    /// Time-sorted pulses of one slice.
    pub fn slice(&self, index: usize) -> Result<Vec<PulseRecord>> {
        let bounds = self.source.slice_bounds(index);
        let seed = self.source.seed;
        let id_base = (index as u64) << 32;
        let mut photons = generate_pairs(
            &self.sampler,
            &self.optics,
            self.source.pair_rate,
            bounds,
            id_base,
            &mut slice_rng(seed, STREAM_PAIRS, index),
        )?;
        photons.extend(generate_stray(&self.source, bounds, &mut slice_rng(seed, STREAM_STRAY, index)));
        sort_photons(&mut photons);
        Ok(detect(&photons, &self.detectors, &mut slice_rng(seed, STREAM_DETECT, index)))
    }

    /// Generate the whole run, slices in parallel batches, feeding every pulse
    /// to `sink` in time order.
    pub fn run(&self, mut sink: impl FnMut(&PulseRecord)) -> Result<StreamSummary> {
        let batch = rayon::current_num_threads().max(1) * 4;
        let count = self.slice_count();
        let mut summary = StreamSummary::default();
        let mut start = 0;
        while start < count {
            let end = (start + batch).min(count);
            let slices: Vec<Result<Vec<PulseRecord>>> = (start..end).into_par_iter().map(|i| self.slice(i)).collect();
            for slice in slices {
                for pulse in slice? {
                    summary.record(&pulse);
                    sink(&pulse);
                }
            }
            start = end;
        }
        Ok(summary)
    }

    /// The whole run collected in memory.
    pub fn pulses(&self) -> Result<Vec<PulseRecord>> {
        let mut out = Vec::new();
        self.run(|p| out.push(*p))?;
        Ok(out)
    }
}

/// Probability that a Gaussian measurement of `energy` lands in `[lo, hi]`.
fn window_probability(energy: f64, sigma: f64, (lo, hi): (f64, f64)) -> f64 {
    if sigma <= 0.0 {
        return if energy >= lo && energy <= hi { 1.0 } else { 0.0 };
    }
    let s = sigma * std::f64::consts::SQRT_2;
    0.5 * (erf((hi - energy) / s) - erf((lo - energy) / s))
}

/// Heralded coincidence rate per unit pair rate without a splitter: the
/// heralded photon is measured at the transmitted-port detector and must
/// pass the acceptance, SCA and sum windows.
pub fn heralding_efficiency(
    amp: &JointAmplitude,
    flight: &Attenuator,
    detectors: &DetectorSet,
    acceptance: (f64, f64),
    sum_half_width: f64,
) -> Result<f64> {
    let grid = amp.grid();
    let pump = amp.pump_energy();
    let plane = grid.theta_x_cells * grid.theta_y_cells;
    let (trig, her) = (&detectors.trig, &detectors.trans);
    let mut total = 0.0;
    for (i, row) in amp.intensities().chunks(plane).enumerate() {
        let e_h = grid.energy(i);
        let e_t = pump - e_h;
        let weight: f64 = row.iter().sum::<f64>() * grid.cell_volume();
        if weight == 0.0 {
            continue;
        }
        let (s_t, s_h) = (trig.sigma(e_t), her.sigma(e_h));
        let sum_sigma = s_t.hypot(s_h);
        let p_sum = if sum_sigma > 0.0 {
            erf(sum_half_width / (sum_sigma * std::f64::consts::SQRT_2))
        } else {
            1.0
        };
        let p_windows = window_probability(e_t, s_t, acceptance)
            * window_probability(e_h, s_h, acceptance)
            * window_probability(e_t, s_t, trig.sca_window)
            * window_probability(e_h, s_h, her.sca_window);
        total += weight * flight.transmittance(e_h)? * flight.transmittance(e_t)? * p_sum * p_windows;
    }
    Ok(total * trig.efficiency * her.efficiency)
}

/// Pair rate that yields `heralded_rate` heralded coincidences per second
/// without a splitter.
pub fn calibrate_pair_rate(
    amp: &JointAmplitude,
    flight: &Attenuator,
    detectors: &DetectorSet,
    acceptance: (f64, f64),
    sum_half_width: f64,
    heralded_rate: f64,
) -> Result<f64> {
    let eff = heralding_efficiency(amp, flight, detectors, acceptance, sum_half_width)?;
    if !(eff > 0.0) {
        return Err(Error::Domain("heralding efficiency is zero; cannot calibrate".into()));
    }
    Ok(heralded_rate / eff)
}

pub const PULSE_HEADER: &str = "# xsplit-pulses v1";
const PULSE_COLUMNS: &str = "time_ns,detector,energy_kev,true_energy_kev,origin,pair,analog_width_ns,logic_width_ns";

pub fn write_pulses<W: Write>(mut out: W, pulses: &[PulseRecord]) -> Result<()> {
    writeln!(out, "{PULSE_HEADER}")?;
    writeln!(out, "{PULSE_COLUMNS}")?;
    for p in pulses {
        let pair = p.pair.map(|v| v.to_string()).unwrap_or_default();
        let logic = p.logic_width.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.time, p.detector, p.energy, p.true_energy, p.origin, pair, p.analog_width, logic
        )?;
    }
    Ok(())
}

pub fn read_pulses<R: BufRead>(input: R) -> Result<Vec<PulseRecord>> {
    let mut lines = input.lines().enumerate();
    crate::io::expect_header(&mut lines, PULSE_HEADER, PULSE_COLUMNS)?;
    let mut out = Vec::new();
    for (n, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut f = crate::io::Fields::new(&line, n + 1);
        let pulse = PulseRecord {
            time: f.parse()?,
            detector: f.parse()?,
            energy: f.parse()?,
            true_energy: f.parse()?,
            origin: f.parse()?,
            pair: f.parse_opt()?,
            analog_width: f.parse()?,
            logic_width: f.parse_opt()?,
        };
        f.finish()?;
        out.push(pulse);
    }
    Ok(out)
}
