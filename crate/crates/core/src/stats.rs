//! Estimators: coincidence counts and the anticorrelation parameter α, the
//! degree of correlation σ, energy histograms, rates and ratios.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::daq::EventRecord;
use crate::error::{Error, Result};
use crate::montecarlo::DetectorId;
use crate::table::Table;

/// 84.13% one-sided Poisson upper limit for zero observed counts.
pub const ZERO_COUNT_UPPER: f64 = 1.841;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoincCounts {
    /// Events with Trig and at least one output.
    pub n_trig: u64,
    pub n_trig_t: u64,
    pub n_trig_r: u64,
    pub n_trig_t_r: u64,
}

impl CoincCounts {
    pub fn new(n_trig: u64, n_trig_t: u64, n_trig_r: u64, n_trig_t_r: u64) -> Self {
        CoincCounts {
            n_trig,
            n_trig_t,
            n_trig_r,
            n_trig_t_r,
        }
    }

    pub fn add_event(&mut self, event: &EventRecord) {
        if event.count(DetectorId::Trig) == 0 {
            return;
        }
        let t = event.count(DetectorId::Trans) > 0;
        let r = event.count(DetectorId::Ref) > 0;
        if t || r {
            self.n_trig += 1;
        }
        self.n_trig_t += t as u64;
        self.n_trig_r += r as u64;
        self.n_trig_t_r += (t && r) as u64;
    }

    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> Self {
        let mut c = CoincCounts::default();
        for e in events {
            c.add_event(e);
        }
        c
    }

    pub fn merge(self, other: Self) -> Self {
        CoincCounts {
            n_trig: self.n_trig + other.n_trig,
            n_trig_t: self.n_trig_t + other.n_trig_t,
            n_trig_r: self.n_trig_r + other.n_trig_r,
            n_trig_t_r: self.n_trig_t_r + other.n_trig_t_r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    /// α with its first-order Poisson error.
    Measured { alpha: f64, sigma: f64 },
    /// No triple coincidences: α = 0 with a one-sided upper bound.
    Zero { upper: f64 },
    /// N_Trig-T or N_Trig-R is zero.
    Undefined { n_trig_t_r: u64 },
}

impl Alpha {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Alpha::Measured { alpha, .. } => Some(alpha),
            Alpha::Zero { .. } => Some(0.0),
            Alpha::Undefined { .. } => None,
        }
    }

    pub fn error(&self) -> Option<f64> {
        match *self {
            Alpha::Measured { sigma, .. } => Some(sigma),
            Alpha::Zero { upper } => Some(upper),
            Alpha::Undefined { .. } => None,
        }
    }
}

/// α = N_Trig·N_Trig-T-R / (N_Trig-T·N_Trig-R), all four counts treated as
/// independent Poisson variables for the error.
pub fn alpha(c: &CoincCounts) -> Alpha {
    if c.n_trig_t == 0 || c.n_trig_r == 0 {
        return Alpha::Undefined {
            n_trig_t_r: c.n_trig_t_r,
        };
    }
    let (n, t, r, tr) = (c.n_trig as f64, c.n_trig_t as f64, c.n_trig_r as f64, c.n_trig_t_r as f64);
    if c.n_trig_t_r == 0 {
        return Alpha::Zero {
            upper: n * ZERO_COUNT_UPPER / (t * r),
        };
    }
    let a = n * tr / (t * r);
    let rel = (1.0 / n + 1.0 / t + 1.0 / r + 1.0 / tr).sqrt();
    Alpha::Measured { alpha: a, sigma: a * rel }
}

/// Text table: label, the four counts and α.
pub fn alpha_report(rows: &[(&str, CoincCounts)]) -> String {
    let mut out = String::from("selection\tN_Trig\tN_Trig-T\tN_Trig-R\tN_Trig-T-R\talpha\n");
    for (label, c) in rows {
        let a = match alpha(c) {
            Alpha::Measured { alpha, sigma } => format!("{alpha:.4} ± {sigma:.4}"),
            Alpha::Zero { upper } => format!("0 (< {upper:.4})"),
            Alpha::Undefined { n_trig_t_r } => format!("undefined (N_Trig-T-R = {n_trig_t_r})"),
        };
        let _ = writeln!(
            out,
            "{label}\t{}\t{}\t{}\t{}\t{a}",
            c.n_trig, c.n_trig_t, c.n_trig_r, c.n_trig_t_r
        );
    }
    out
}

const ALPHA_COLUMNS: [&str; 8] = [
    "selection",
    "n_trig",
    "n_trig_t",
    "n_trig_r",
    "n_trig_t_r",
    "kind",
    "alpha",
    "error",
];

/// CSV form of the α report. `kind` is `measured`, `zero` (error column holds
/// the upper bound) or `undefined` (value and error empty).
pub fn alpha_table(rows: &[(&str, CoincCounts)]) -> Table {
    let mut t = Table::new("alpha", &ALPHA_COLUMNS);
    for (label, c) in rows {
        let a = alpha(c);
        let kind = match a {
            Alpha::Measured { .. } => "measured",
            Alpha::Zero { .. } => "zero",
            Alpha::Undefined { .. } => "undefined",
        };
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        t.push(vec![
            label.to_string(),
            c.n_trig.to_string(),
            c.n_trig_t.to_string(),
            c.n_trig_r.to_string(),
            c.n_trig_t_r.to_string(),
            kind.into(),
            fmt(a.value()),
            fmt(a.error()),
        ]);
    }
    t
}

/// Selection labels and counts of an α table; α is recomputed from counts.
pub fn alpha_from_table(t: &Table) -> Result<Vec<(String, CoincCounts)>> {
    t.expect_columns(&ALPHA_COLUMNS)?;
    (0..t.rows.len())
        .map(|i| {
            Ok((
                t.rows[i][0].clone(),
                CoincCounts::new(t.get(i, 1)?, t.get(i, 2)?, t.get(i, 3)?, t.get(i, 4)?),
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Counted photons must sum to the pump energy within ± half_width keV.
    SumWindow { pump_energy: f64, half_width: f64 },
    /// No energy condition.
    Open,
}

impl EnergyMode {
    pub fn label(&self) -> String {
        match self {
            EnergyMode::SumWindow { half_width, .. } => format!("sum{}", 2.0 * half_width),
            EnergyMode::Open => "open".into(),
        }
    }
}

/// Exact streaming moments of d = N_t − N_h and s = N_t + N_h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SigmaAccumulator {
    pub n: u64,
    pub sum_d: i64,
    pub sum_d2: u64,
    pub sum_s: u64,
}

impl SigmaAccumulator {
    pub fn add(&mut self, n_t: u32, n_h: u32) {
        if n_t + n_h == 0 {
            return;
        }
        let d = i64::from(n_t) - i64::from(n_h);
        self.n += 1;
        self.sum_d += d;
        self.sum_d2 += (d * d) as u64;
        self.sum_s += u64::from(n_t + n_h);
    }

    pub fn merge(self, other: Self) -> Self {
        SigmaAccumulator {
            n: self.n + other.n,
            sum_d: self.sum_d + other.sum_d,
            sum_d2: self.sum_d2 + other.sum_d2,
            sum_s: self.sum_s + other.sum_s,
        }
    }

    fn without(self, other: Self) -> Self {
        SigmaAccumulator {
            n: self.n - other.n,
            sum_d: self.sum_d - other.sum_d,
            sum_d2: self.sum_d2 - other.sum_d2,
            sum_s: self.sum_s - other.sum_s,
        }
    }

    /// Var(d)/Mean(s), population moments.
    pub fn sigma(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::Domain(format!(
                "degree of correlation needs at least 2 events, have {}",
                self.n
            )));
        }
        let n = self.n as f64;
        // n·Σd² − (Σd)² is an exact integer.
        let numer = i128::from(self.n) * i128::from(self.sum_d2) - i128::from(self.sum_d) * i128::from(self.sum_d);
        let var = numer as f64 / (n * n);
        let mean = self.sum_s as f64 / n;
        Ok(var / mean)
    }
}

/// Counts (N_t, N_h) of one event for a coincidence window and energy mode.
///
/// An event takes part when the two logic pulses that opened its trigger are
/// separated by at most `window` ns; all of its registered Trig and `output`
/// photons are then counted. An event whose partner fell outside the software
/// window keeps a single photon and a large gap, so it only enters the widest
/// windows. Events with a photon at the other output belong to that output's
/// ensemble only. `None` when the event is outside the window, belongs to the
/// other output, or fails the energy condition.
pub fn event_counts(event: &EventRecord, window: f64, mode: &EnergyMode, output: DetectorId) -> Option<(u32, u32)> {
    if event.gap > window {
        return None;
    }
    let mut n_t = 0;
    let mut n_h = 0;
    let mut energy = 0.0;
    for p in &event.photons {
        if p.detector == DetectorId::Trig {
            n_t += 1;
        } else if p.detector == output {
            n_h += 1;
        } else {
            return None;
        }
        energy += p.energy;
    }
    match *mode {
        EnergyMode::SumWindow { pump_energy, half_width } if (energy - pump_energy).abs() > half_width => None,
        _ => Some((n_t, n_h)),
    }
}

pub fn sigma_accumulate<'a>(
    events: impl IntoIterator<Item = &'a EventRecord>,
    window: f64,
    mode: &EnergyMode,
    output: DetectorId,
) -> SigmaAccumulator {
    let mut acc = SigmaAccumulator::default();
    for e in events {
        if let Some((t, h)) = event_counts(e, window, mode, output) {
            acc.add(t, h);
        }
    }
    acc
}

/// σ with a delete-one-block jackknife error over `blocks` contiguous blocks
/// of the event list.
pub fn sigma_with_error(
    events: &[EventRecord],
    window: f64,
    mode: &EnergyMode,
    output: DetectorId,
    blocks: usize,
) -> Result<(f64, f64, u64)> {
    if blocks < 2 {
        return Err(Error::invalid("blocks", "need at least 2"));
    }
    let size = events.len().div_ceil(blocks).max(1);
    let parts: Vec<SigmaAccumulator> = events
        .chunks(size)
        .map(|c| sigma_accumulate(c, window, mode, output))
        .collect();
    let total = parts.iter().fold(SigmaAccumulator::default(), |a, &b| a.merge(b));
    let value = total.sigma()?;
    let loo: Vec<f64> = parts.iter().filter_map(|&p| total.without(p).sigma().ok()).collect();
    let b = loo.len() as f64;
    let error = if loo.len() < 2 {
        f64::NAN
    } else {
        let mean = loo.iter().sum::<f64>() / b;
        ((b - 1.0) / b * loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt()
    };
    Ok((value, error, total.n))
}

/// σ = Var(N_t − N_h)/Mean(N_t + N_h) over triggers with at least one counted photon.
pub fn sigma(events: &[EventRecord], window: f64, mode: &EnergyMode, output: DetectorId) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::invalid("window", "must be positive"));
    }
    sigma_accumulate(events, window, mode, output).sigma()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoint {
    /// Full time window, ns.
    pub window: f64,
    pub mode: String,
    pub detector: DetectorId,
    pub sigma: f64,
    /// Jackknife standard error.
    pub error: f64,
    pub samples: u64,
}

const SIGMA_BLOCKS: usize = 20;

/// σ for every (output, mode, window) combination; combinations with fewer
/// than two qualifying events are skipped.
pub fn sigma_curve(events: &[EventRecord], windows: &[f64], modes: &[EnergyMode]) -> Vec<SigmaPoint> {
    let mut out = Vec::new();
    for detector in [DetectorId::Trans, DetectorId::Ref] {
        for mode in modes {
            for &window in windows {
                if let Ok((sigma, error, samples)) = sigma_with_error(events, window, mode, detector, SIGMA_BLOCKS) {
                    out.push(SigmaPoint {
                        window,
                        mode: mode.label(),
                        detector,
                        sigma,
                        error,
                        samples,
                    });
                }
            }
        }
    }
    out
}

const SIGMA_COLUMNS: [&str; 6] = ["detector", "energy_mode", "window_ns", "sigma", "sigma_error", "events"];

pub fn sigma_table(points: &[SigmaPoint]) -> Table {
    let mut t = Table::new("sigma", &SIGMA_COLUMNS);
    for p in points {
        t.push(vec![
            p.detector.to_string(),
            p.mode.clone(),
            p.window.to_string(),
            p.sigma.to_string(),
            p.error.to_string(),
            p.samples.to_string(),
        ]);
    }
    t
}

pub fn sigma_from_table(t: &Table) -> Result<Vec<SigmaPoint>> {
    t.expect_columns(&SIGMA_COLUMNS)?;
    (0..t.rows.len())
        .map(|i| {
            Ok(SigmaPoint {
                detector: t.get(i, 0)?,
                mode: t.rows[i][1].clone(),
                window: t.get(i, 2)?,
                sigma: t.get(i, 3)?,
                error: t.get(i, 4)?,
                samples: t.get(i, 5)?,
            })
        })
        .collect()
}

/// Fixed-width histogram with left-closed bins and explicit under/overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !(hi > lo) {
            return Err(Error::invalid("histogram", "need width > 0 and hi > lo"));
        }
        let bins = ((hi - lo) / width - 1e-9).ceil().max(1.0) as usize;
        Ok(Histogram {
            lo,
            width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.counts.len() as f64
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.width
    }

    pub fn fill(&mut self, x: f64) {
        if x < self.lo {
            self.underflow += 1;
            return;
        }
        let bin = ((x - self.lo) / self.width).floor() as usize;
        match self.counts.get_mut(bin) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Full width at half maximum from the outermost half-maximum crossings,
    /// linearly interpolated between bin centres.
    pub fn fwhm(&self) -> Option<f64> {
        fwhm(&self.counts.iter().enumerate().map(|(i, &c)| (self.center(i), c as f64)).collect::<Vec<_>>())
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new("histogram", &HIST_COLUMNS);
        t.push(vec!["underflow".into(), f64::NEG_INFINITY.to_string(), self.lo.to_string(), self.underflow.to_string()]);
        for (i, c) in self.counts.iter().enumerate() {
            let lo = self.lo + i as f64 * self.width;
            t.push(vec![i.to_string(), lo.to_string(), (lo + self.width).to_string(), c.to_string()]);
        }
        t.push(vec!["overflow".into(), self.hi().to_string(), f64::INFINITY.to_string(), self.overflow.to_string()]);
        t
    }

    pub fn from_table(t: &Table) -> Result<Self> {
        t.expect_columns(&HIST_COLUMNS)?;
        let n = t.rows.len();
        if n < 3 || t.rows[0][0] != "underflow" || t.rows[n - 1][0] != "overflow" {
            return Err(Error::Parse {
                line: 3,
                msg: "histogram table needs underflow, bins and overflow rows".into(),
            });
        }
        let lo: f64 = t.get(1, 1)?;
        let hi: f64 = t.get(1, 2)?;
        Ok(Histogram {
            lo,
            width: hi - lo,
            counts: (1..n - 1).map(|i| t.get(i, 3)).collect::<Result<_>>()?,
            underflow: t.get(0, 3)?,
            overflow: t.get(n - 1, 3)?,
        })
    }
}

const HIST_COLUMNS: [&str; 4] = ["bin", "lo_kev", "hi_kev", "counts"];

/// Full width at half maximum of a sampled curve `(x, y)` with ascending x.
pub fn fwhm(curve: &[(f64, f64)]) -> Option<f64> {
    let max = curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return None;
    }
    let half = 0.5 * max;
    let first = curve.iter().position(|p| p.1 >= half)?;
    let last = curve.iter().rposition(|p| p.1 >= half)?;
    let cross = |a: (f64, f64), b: (f64, f64)| a.0 + (half - a.1) * (b.0 - a.0) / (b.1 - a.1);
    let left = if first == 0 { curve[0].0 } else { cross(curve[first - 1], curve[first]) };
    let right = if last + 1 == curve.len() {
        curve[last].0
    } else {
        cross(curve[last], curve[last + 1])
    };
    Some(right - left)
}

/// Energy histogram of photons at `detector` in heralded events.
pub fn spectra(events: &[EventRecord], detector: DetectorId, lo: f64, hi: f64, width: f64) -> Result<Histogram> {
    let mut h = Histogram::new(lo, hi, width)?;
    for e in events.iter().filter(|e| e.is_heralded()) {
        for p in e.photons_at(detector) {
            h.fill(p.energy);
        }
    }
    Ok(h)
}

/// A count with its Poisson error; zero counts carry a one-sided bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub n_r: Measured,
    pub n_t: Measured,
    pub r_r: Measured,
    pub r_t: Measured,
}

fn rate(count: u64, live_time: f64) -> Measured {
    let err = if count == 0 {
        ZERO_COUNT_UPPER
    } else {
        (count as f64).sqrt()
    };
    Measured {
        value: count as f64 / live_time,
        error: err / live_time,
    }
}

fn ratio(n: Measured, baseline: Measured) -> Measured {
    let value = n.value / baseline.value;
    let rel_b = baseline.error / baseline.value;
    let error = if n.value > 0.0 {
        value * ((n.error / n.value).powi(2) + rel_b * rel_b).sqrt()
    } else {
        n.error / baseline.value
    };
    Measured { value, error }
}

/// Heralded rates at the two outputs and their ratios to the baseline rate
/// measured without a splitter.
pub fn rates_and_ratios(count_r: u64, count_t: u64, live_time: f64, baseline: Measured) -> Result<Rates> {
    if !(live_time > 0.0) {
        return Err(Error::invalid("live_time", "must be positive"));
    }
    if !(baseline.value > 0.0) {
        return Err(Error::invalid("baseline", "must be positive"));
    }
    let n_r = rate(count_r, live_time);
    let n_t = rate(count_t, live_time);
    Ok(Rates {
        n_r,
        n_t,
        r_r: ratio(n_r, baseline),
        r_t: ratio(n_t, baseline),
    })
}

/// Events per (photons at Trans, photons at Ref), restricted to events with
/// at least one Trig photon.
pub fn count_histogram<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> BTreeMap<(usize, usize), u64> {
    let mut out = BTreeMap::new();
    for e in events {
        if e.count(DetectorId::Trig) == 0 {
            continue;
        }
        *out.entry((e.count(DetectorId::Trans), e.count(DetectorId::Ref))).or_insert(0) += 1;
    }
    out
}

const COUNT_COLUMNS: [&str; 3] = ["n_trans", "n_ref", "events"];

pub fn count_table(hist: &BTreeMap<(usize, usize), u64>) -> Table {
    let mut t = Table::new("counts", &COUNT_COLUMNS);
    for (&(a, b), &n) in hist {
        t.push(vec![a.to_string(), b.to_string(), n.to_string()]);
    }
    t
}

pub fn count_from_table(t: &Table) -> Result<BTreeMap<(usize, usize), u64>> {
    t.expect_columns(&COUNT_COLUMNS)?;
    (0..t.rows.len())
        .map(|i| Ok(((t.get(i, 0)?, t.get(i, 1)?), t.get(i, 2)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daq::{EventFlags, RegisteredPhoton};
    use crate::montecarlo::Origin;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn event(photons: &[(DetectorId, f64, f64)]) -> EventRecord {
        gapped(0.0, photons)
    }

    fn gapped(gap: f64, photons: &[(DetectorId, f64, f64)]) -> EventRecord {
        EventRecord {
            index: 0,
            trigger_time: 0.0,
            gap,
            photons: photons
                .iter()
                .map(|&(detector, energy, offset)| RegisteredPhoton {
                    detector,
                    energy,
                    offset,
                    origin: Origin::Pair,
                    pair: None,
                })
                .collect(),
            flags: EventFlags {
                acceptance: true,
                sum: true,
            },
        }
    }

    #[test]
    fn alpha_matches_hand_computation() {
        let a = alpha(&CoincCounts::new(2264, 897, 1356, 11));
        let Alpha::Measured { alpha, sigma } = a else { panic!("{a:?}") };
        assert_relative_eq!(alpha, 2264.0 * 11.0 / (897.0 * 1356.0), epsilon = 1e-15);
        let rel = (1.0 / 2264.0 + 1.0 / 897.0 + 1.0 / 1356.0 + 1.0 / 11.0f64).sqrt();
        assert_relative_eq!(sigma, alpha * rel, epsilon = 1e-15);
    }

    #[test]
    fn alpha_edge_cases() {
        assert!(matches!(alpha(&CoincCounts::new(10, 0, 5, 0)), Alpha::Undefined { n_trig_t_r: 0 }));
        let Alpha::Zero { upper } = alpha(&CoincCounts::new(100, 40, 60, 0)) else { panic!() };
        assert_relative_eq!(upper, 100.0 * 1.841 / 2400.0);
        assert_eq!(alpha(&CoincCounts::new(100, 40, 60, 0)).value(), Some(0.0));
    }

    #[test]
    fn counts_follow_trigger_definition() {
        let events = [
            event(&[(DetectorId::Trig, 10.0, 0.0), (DetectorId::Trans, 11.0, 0.0)]),
            event(&[(DetectorId::Trig, 10.0, 0.0), (DetectorId::Ref, 11.0, 0.0), (DetectorId::Trans, 9.0, 0.0)]),
            event(&[(DetectorId::Trig, 10.0, 0.0)]),
            event(&[(DetectorId::Ref, 10.0, 0.0)]),
        ];
        assert_eq!(CoincCounts::from_events(&events), CoincCounts::new(2, 2, 1, 1));
    }

    #[test]
    fn unit_pairs_have_zero_sigma() {
        let events: Vec<_> = (0..10).map(|_| event(&[(DetectorId::Trig, 10.0, 0.0), (DetectorId::Trans, 11.0, 0.0)])).collect();
        assert_eq!(sigma(&events, 1600.0, &EnergyMode::Open, DetectorId::Trans).unwrap(), 0.0);
    }

    #[test]
    fn bernoulli_half_gives_one_sixth() {
        let mut events = Vec::new();
        for i in 0..1000 {
            if i % 2 == 0 {
                events.push(event(&[(DetectorId::Trig, 10.0, 0.0), (DetectorId::Trans, 11.0, 0.0)]));
            } else {
                events.push(event(&[(DetectorId::Trig, 10.0, 0.0)]));
            }
        }
        assert_relative_eq!(
            sigma(&events, 1600.0, &EnergyMode::Open, DetectorId::Trans).unwrap(),
            1.0 / 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sum_window_uses_counted_photons() {
        let mode = EnergyMode::SumWindow {
            pump_energy: 21.0,
            half_width: 0.5,
        };
        let pair = event(&[(DetectorId::Trig, 10.4, 100.0), (DetectorId::Ref, 10.7, 100.0)]);
        assert_eq!(event_counts(&pair, 100.0, &mode, DetectorId::Ref), Some((1, 1)));
        assert_eq!(event_counts(&pair, 100.0, &EnergyMode::Open, DetectorId::Trans), None);
        // A lone photon near the pump energy passes on its own.
        let elastic = gapped(950.0, &[(DetectorId::Trig, 20.8, 100.0)]);
        assert_eq!(event_counts(&elastic, 1000.0, &mode, DetectorId::Ref), Some((1, 0)));
        assert_eq!(event_counts(&elastic, 900.0, &mode, DetectorId::Ref), None);
    }

    #[test]
    fn window_selects_on_trigger_gap() {
        let e = gapped(300.0, &[(DetectorId::Trig, 10.0, -200.0), (DetectorId::Trans, 11.0, 100.0)]);
        assert_eq!(event_counts(&e, 299.0, &EnergyMode::Open, DetectorId::Trans), None);
        assert_eq!(event_counts(&e, 300.0, &EnergyMode::Open, DetectorId::Trans), Some((1, 1)));
    }

    #[test]
    fn jackknife_error_is_zero_for_identical_blocks_and_positive_otherwise() {
        let unit: Vec<_> = (0..40).map(|_| event(&[(DetectorId::Trig, 10.0, 0.0), (DetectorId::Trans, 11.0, 0.0)])).collect();
        let (s, e, n) = sigma_with_error(&unit, 1000.0, &EnergyMode::Open, DetectorId::Trans, 4).unwrap();
        assert_eq!((s, e, n), (0.0, 0.0, 40));
        let mixed: Vec<_> = (0..400)
            .map(|i| {
                if i % 3 == 0 || i % 7 == 0 {
                    event(&[(DetectorId::Trig, 10.0, 0.0)])
                } else {
                    event(&[(DetectorId::Trig, 10.0, 0.0), (DetectorId::Trans, 11.0, 0.0)])
                }
            })
            .collect();
        let (s, e, _) = sigma_with_error(&mixed, 1000.0, &EnergyMode::Open, DetectorId::Trans, 10).unwrap();
        assert!(s > 0.0 && e > 0.0 && e < s);
    }

    #[test]
    fn sigma_needs_two_events() {
        let events = [event(&[(DetectorId::Trig, 10.0, 0.0)])];
        assert!(sigma(&events, 1600.0, &EnergyMode::Open, DetectorId::Trans).is_err());
    }

    #[test]
    fn histogram_bins_are_left_closed() {
        let mut h = Histogram::new(7.0, 17.0, 0.5).unwrap();
        assert_eq!(h.counts.len(), 20);
        h.fill(7.0);
        h.fill(7.5);
        h.fill(6.9);
        h.fill(17.0);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[1], 1);
        assert_eq!((h.underflow, h.overflow), (1, 1));
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn spectra_of_empty_and_single_energy_sets() {
        let h = spectra(&[], DetectorId::Ref, 7.0, 17.0, 0.5).unwrap();
        assert!(h.counts.iter().all(|&c| c == 0));
        let events: Vec<_> = (0..5).map(|_| event(&[(DetectorId::Trig, 10.5, 0.0), (DetectorId::Ref, 10.5, 0.0)])).collect();
        let h = spectra(&events, DetectorId::Ref, 7.0, 17.0, 0.5).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn fwhm_of_a_triangle() {
        let curve: Vec<_> = (0..=20).map(|i| (i as f64, 10.0 - (i as f64 - 10.0).abs())).collect();
        assert_relative_eq!(fwhm(&curve).unwrap(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_examples() {
        let baseline = Measured {
            value: 0.0583,
            error: 0.0,
        };
        let r = rates_and_ratios(818, 0, 88010.0, baseline).unwrap();
        assert!((r.n_r.value - 0.0093).abs() < 5e-5);
        assert_eq!(r.n_t.value, 0.0);
        assert!(r.n_t.error > 0.0);
        let same = rates_and_ratios(100, 100, 1.0, Measured { value: 100.0, error: 10.0 }).unwrap();
        assert_relative_eq!(same.r_r.value, 1.0);
        assert!(rates_and_ratios(1, 1, 0.0, baseline).is_err());
    }

    #[test]
    fn tables_round_trip() {
        let mut h = Histogram::new(7.0, 17.0, 0.5).unwrap();
        for x in [6.0, 7.2, 10.5, 10.6, 20.0] {
            h.fill(x);
        }
        let back = Histogram::from_table(&Table::read(h.to_table().to_bytes().as_slice(), "histogram").unwrap()).unwrap();
        assert_eq!(back, h);

        let points = vec![SigmaPoint {
            window: 800.0,
            mode: "sum1".into(),
            detector: DetectorId::Ref,
            sigma: 0.1 + 0.2,
            error: 0.01,
            samples: 17,
        }];
        let t = Table::read(sigma_table(&points).to_bytes().as_slice(), "sigma").unwrap();
        assert_eq!(sigma_from_table(&t).unwrap(), points);

        let rows = [
            ("sample", CoincCounts::new(2264, 897, 1356, 11)),
            ("none", CoincCounts::new(5, 2, 3, 0)),
            ("empty", CoincCounts::default()),
        ];
        let t = Table::read(alpha_table(&rows).to_bytes().as_slice(), "alpha").unwrap();
        let back = alpha_from_table(&t).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], ("sample".to_string(), rows[0].1));
        assert_eq!(t.rows[1][5], "zero");
        assert_eq!(t.rows[2][6], "");

        let mut counts = BTreeMap::new();
        counts.insert((1, 0), 5);
        counts.insert((1, 1), 2);
        let t = Table::read(count_table(&counts).to_bytes().as_slice(), "counts").unwrap();
        assert_eq!(count_from_table(&t).unwrap(), counts);
    }

    proptest! {
        #[test]
        fn alpha_is_scale_invariant(n in 1u64..10_000, t in 1u64..10_000, r in 1u64..10_000, tr in 1u64..100, k in 1u64..1000) {
            let a = alpha(&CoincCounts::new(n, t, r, tr)).value().unwrap();
            let b = alpha(&CoincCounts::new(k * n, k * t, k * r, k * tr)).value().unwrap();
            prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300) * 4.0);
        }

        #[test]
        fn sigma_accumulator_merge_is_exact(pairs in prop::collection::vec((0u32..4, 0u32..4), 2..200), split in 0usize..200) {
            let split = split.min(pairs.len());
            let mut whole = SigmaAccumulator::default();
            let mut left = SigmaAccumulator::default();
            let mut right = SigmaAccumulator::default();
            for (i, &(t, h)) in pairs.iter().enumerate() {
                whole.add(t, h);
                if i < split { left.add(t, h) } else { right.add(t, h) }
            }
            prop_assert_eq!(left.merge(right), whole);
            if let Ok(s) = whole.sigma() {
                prop_assert!(s >= 0.0);
            }
        }

        #[test]
        fn histogram_conserves_entries(xs in prop::collection::vec(0.0f64..30.0, 0..300)) {
            let mut h = Histogram::new(7.0, 17.0, 0.5).unwrap();
            for &x in &xs {
                h.fill(x);
            }
            prop_assert_eq!(h.total(), xs.len() as u64);
        }
    }
}
