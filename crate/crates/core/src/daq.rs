//! Coincidence electronics: logic-pulse overlap triggering, digitizer rate
//! limit, software time window and energy post-selection.
//!
//! The trigger condition is the AND of (any Trig logic pulse) and (any output
//! logic pulse). Logic pulses occupy half-open intervals `[start, start+w)`.
//! A trigger fires on each rising edge of that AND, except while a Trig pulse
//! that was active at the previous trigger is still active.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{DetectorId, Origin, PulseRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriplePolicy {
    /// An event with photons at both outputs passes the sum window if any
    /// Trig–output pairing does.
    #[default]
    EitherPairing,
    /// Every output photon needs a Trig partner inside the sum window.
    AllPairings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaqConfig {
    /// ns
    pub software_half_window: f64,
    /// Digitizer captures per second before triggers are dropped.
    pub max_event_rate: f64,
    /// Offline per-photon energy acceptance, keV.
    pub acceptance: (f64, f64),
    /// Full width of the energy-conservation window, keV.
    pub sum_window: f64,
    /// Centre of the energy-conservation window, keV.
    pub pump_energy: f64,
    #[serde(default)]
    pub triple_policy: TriplePolicy,
}

impl Default for DaqConfig {
    fn default() -> Self {
        DaqConfig {
            software_half_window: 800.0,
            max_event_rate: 200.0,
            acceptance: (7.0, 17.0),
            sum_window: 1.0,
            pump_energy: 21.0,
            triple_policy: TriplePolicy::EitherPairing,
        }
    }
}

impl DaqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.software_half_window > 0.0) {
            return Err(Error::invalid("daq.software_half_window", "must be positive"));
        }
        if !(self.max_event_rate > 0.0) {
            return Err(Error::invalid("daq.max_event_rate", "must be positive"));
        }
        if !(self.acceptance.0 < self.acceptance.1) {
            return Err(Error::invalid("daq.acceptance", "need lo < hi"));
        }
        if !(self.sum_window > 0.0) {
            return Err(Error::invalid("daq.sum_window", "must be positive"));
        }
        Ok(())
    }

    /// Unlimited digitizer rate, otherwise identical.
    pub fn unlimited(self) -> Self {
        DaqConfig {
            max_event_rate: f64::INFINITY,
            ..self
        }
    }
}

/// A photon registered by the software filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegisteredPhoton {
    pub detector: DetectorId,
    /// Measured energy, keV.
    pub energy: f64,
    /// Analog peak time minus trigger time, ns.
    pub offset: f64,
    pub origin: Origin,
    pub pair: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventFlags {
    /// Every registered photon lies inside the energy acceptance.
    pub acceptance: bool,
    /// A Trig–output pairing satisfies energy conservation.
    pub sum: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub index: u64,
    /// Overlap point, ns.
    pub trigger_time: f64,
    /// Separation of the two logic pulses that opened the overlap, ns.
    pub gap: f64,
    pub photons: Vec<RegisteredPhoton>,
    pub flags: EventFlags,
}

impl EventRecord {
    pub fn count(&self, detector: DetectorId) -> usize {
        self.photons.iter().filter(|p| p.detector == detector).count()
    }

    pub fn photons_at(&self, detector: DetectorId) -> impl Iterator<Item = &RegisteredPhoton> {
        self.photons.iter().filter(move |p| p.detector == detector)
    }

    /// Passes both the acceptance and the energy-conservation window.
    pub fn is_heralded(&self) -> bool {
        self.flags.acceptance && self.flags.sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Time(u64);

impl Time {
    /// Order-preserving map of a finite f64 onto u64.
    fn new(t: f64) -> Self {
        let bits = t.to_bits();
        Time(if bits >> 63 == 0 { bits | (1 << 63) } else { !bits })
    }
}

/// Streaming trigger logic.
#[derive(Debug, Clone)]
pub struct TriggerFinder {
    max_rate: f64,
    ends: BinaryHeap<Reverse<(Time, bool)>>,
    trig_active: usize,
    output_active: usize,
    latest_trig_end: f64,
    blocked_until: f64,
    last_start: [f64; 3],
    last_end: [f64; 3],
    /// Time of the latest accepted trigger and whether a Trig pulse opened it.
    last_accepted: Option<(f64, bool)>,
    recent: VecDeque<f64>,
    dropped: u64,
}

/// One rising edge of the overlap condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    /// Overlap point, ns.
    pub time: f64,
    /// Overlap point minus the start of the partner logic pulse that opened
    /// the overlap, ns.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriggerDecision {
    Accepted(Trigger),
    Dropped(Trigger),
    /// A partner pulse started at the same instant as the accepted trigger at
    /// this time, so that trigger's gap is 0.
    Coincident(f64),
}

impl TriggerFinder {
    pub fn new(cfg: &DaqConfig) -> Self {
        TriggerFinder {
            max_rate: cfg.max_event_rate,
            ends: BinaryHeap::new(),
            trig_active: 0,
            output_active: 0,
            latest_trig_end: f64::NEG_INFINITY,
            blocked_until: f64::NEG_INFINITY,
            last_start: [f64::NEG_INFINITY; 3],
            last_end: [f64::NEG_INFINITY; 3],
            last_accepted: None,
            recent: VecDeque::new(),
            dropped: 0,
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Feed the next pulse in time order.
    pub fn push(&mut self, pulse: &PulseRecord) -> Option<TriggerDecision> {
        let end = pulse.logic_end()?;
        let t = pulse.time;
        let now = Time::new(t);
        while let Some(&Reverse((e, is_trig))) = self.ends.peek() {
            if e > now {
                break;
            }
            self.ends.pop();
            if is_trig {
                self.trig_active -= 1;
            } else {
                self.output_active -= 1;
            }
        }
        let was_on = self.trig_active > 0 && self.output_active > 0;
        let is_trig = pulse.detector == DetectorId::Trig;
        // Pulses of one detector share a width, so the latest-started pulse
        // of a detector is active whenever any of its pulses is.
        let partner_start = if is_trig {
            [DetectorId::Trans, DetectorId::Ref]
                .iter()
                .filter(|d| self.last_end[d.index()] > t)
                .map(|d| self.last_start[d.index()])
                .fold(f64::NEG_INFINITY, f64::max)
        } else {
            self.last_start[DetectorId::Trig.index()]
        };
        self.last_start[pulse.detector.index()] = t;
        self.last_end[pulse.detector.index()] = end;
        if is_trig {
            self.trig_active += 1;
            self.latest_trig_end = self.latest_trig_end.max(end);
        } else {
            self.output_active += 1;
        }
        self.ends.push(Reverse((Time::new(end), is_trig)));
        let is_on = self.trig_active > 0 && self.output_active > 0;
        if let Some((t0, opened_by_trig)) = self.last_accepted {
            if t0 == t && opened_by_trig != is_trig {
                self.last_accepted = None;
                return Some(TriggerDecision::Coincident(t));
            }
        }
        if was_on || !is_on || t < self.blocked_until {
            return None;
        }
        self.blocked_until = self.latest_trig_end;
        let trigger = Trigger {
            time: t,
            gap: t - partner_start,
        };
        while self.recent.front().is_some_and(|&r| r <= t - 1e9) {
            self.recent.pop_front();
        }
        if self.recent.len() as f64 >= self.max_rate {
            self.dropped += 1;
            return Some(TriggerDecision::Dropped(trigger));
        }
        self.recent.push_back(t);
        self.last_accepted = Some((t, is_trig));
        Some(TriggerDecision::Accepted(trigger))
    }
}

/// Accepted trigger times and the number of triggers lost to the rate limit.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerScan {
    pub triggers: Vec<Trigger>,
    pub dropped: u64,
}

/// Overlap points of a time-sorted pulse stream.
pub fn find_triggers(pulses: &[PulseRecord], cfg: &DaqConfig) -> Result<TriggerScan> {
    check_sorted(pulses)?;
    let mut finder = TriggerFinder::new(cfg);
    let mut triggers: Vec<Trigger> = Vec::new();
    for p in pulses {
        match finder.push(p) {
            Some(TriggerDecision::Accepted(trigger)) => triggers.push(trigger),
            Some(TriggerDecision::Coincident(_)) => {
                if let Some(last) = triggers.last_mut() {
                    last.gap = 0.0;
                }
            }
            Some(TriggerDecision::Dropped(_)) | None => {}
        }
    }
    Ok(TriggerScan {
        triggers,
        dropped: finder.dropped(),
    })
}

fn check_sorted(pulses: &[PulseRecord]) -> Result<()> {
    match pulses.windows(2).position(|w| w[1].time < w[0].time) {
        Some(i) => Err(Error::invalid("pulses", format!("stream not time-sorted at index {}", i + 1))),
        None => Ok(()),
    }
}

/// Registered photons around one trigger: analog peaks within ± half-window.
pub fn software_filter(trigger: f64, pulses: &[PulseRecord], cfg: &DaqConfig) -> Vec<RegisteredPhoton> {
    pulses
        .iter()
        .filter(|p| (p.analog_peak() - trigger).abs() <= cfg.software_half_window)
        .map(|p| RegisteredPhoton {
            detector: p.detector,
            energy: p.energy,
            offset: p.analog_peak() - trigger,
            origin: p.origin,
            pair: p.pair,
        })
        .collect()
}

/// Energy flags of one event.
pub fn event_flags(photons: &[RegisteredPhoton], cfg: &DaqConfig) -> EventFlags {
    let (lo, hi) = cfg.acceptance;
    let acceptance = !photons.is_empty() && photons.iter().all(|p| p.energy >= lo && p.energy <= hi);
    let half = 0.5 * cfg.sum_window;
    let paired = |out: &RegisteredPhoton| {
        photons
            .iter()
            .filter(|t| t.detector == DetectorId::Trig)
            .any(|t| (t.energy + out.energy - cfg.pump_energy).abs() <= half)
    };
    let mut outputs = photons.iter().filter(|p| p.detector.is_output()).peekable();
    let sum = outputs.peek().is_some()
        && match cfg.triple_policy {
            TriplePolicy::EitherPairing => outputs.any(paired),
            TriplePolicy::AllPairings => outputs.all(paired),
        };
    EventFlags { acceptance, sum }
}

/// Event counts per selection level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Selection {
    pub all: usize,
    pub accepted: usize,
    pub heralded: usize,
}

/// Recompute the flags of every event under `cfg`.
pub fn energy_select(events: &mut [EventRecord], cfg: &DaqConfig) -> Selection {
    let mut sel = Selection::default();
    for event in events.iter_mut() {
        event.flags = event_flags(&event.photons, cfg);
        sel.all += 1;
        if event.flags.acceptance {
            sel.accepted += 1;
        }
        if event.is_heralded() {
            sel.heralded += 1;
        }
    }
    sel
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DaqSummary {
    pub triggers: u64,
    pub dropped: u64,
    pub events: u64,
}

/// Streaming DAQ: feed time-sorted pulses, receive finished events.
pub struct Daq<F: FnMut(EventRecord)> {
    cfg: DaqConfig,
    finder: TriggerFinder,
    buffer: VecDeque<PulseRecord>,
    pending: VecDeque<Trigger>,
    now: f64,
    summary: DaqSummary,
    sink: F,
}

impl<F: FnMut(EventRecord)> Daq<F> {
    pub fn new(cfg: DaqConfig, sink: F) -> Result<Self> {
        cfg.validate()?;
        Ok(Daq {
            finder: TriggerFinder::new(&cfg),
            cfg,
            buffer: VecDeque::new(),
            pending: VecDeque::new(),
            now: f64::NEG_INFINITY,
            summary: DaqSummary::default(),
            sink,
        })
    }

    pub fn push(&mut self, pulse: &PulseRecord) -> Result<()> {
        if pulse.time < self.now {
            return Err(Error::invalid(
                "pulses",
                format!("stream not time-sorted: {} after {}", pulse.time, self.now),
            ));
        }
        self.now = pulse.time;
        let hw = self.cfg.software_half_window;
        while self.pending.front().is_some_and(|tr| tr.time + hw < self.now) {
            let trigger = self.pending.pop_front().expect("non-empty");
            self.emit(trigger);
        }
        self.buffer.push_back(*pulse);
        match self.finder.push(pulse) {
            Some(TriggerDecision::Accepted(trigger)) => {
                self.summary.triggers += 1;
                self.pending.push_back(trigger);
            }
            Some(TriggerDecision::Dropped(_)) => {
                self.summary.triggers += 1;
                self.summary.dropped += 1;
            }
            Some(TriggerDecision::Coincident(_)) => {
                if let Some(last) = self.pending.back_mut() {
                    last.gap = 0.0;
                }
            }
            None => {}
        }
        let horizon = self.pending.front().map_or(self.now, |tr| tr.time).min(self.now) - hw;
        while self.buffer.front().is_some_and(|p| p.analog_peak() < horizon) {
            self.buffer.pop_front();
        }
        Ok(())
    }

    fn emit(&mut self, trigger: Trigger) {
        let hw = self.cfg.software_half_window;
        let t0 = trigger.time;
        let photons: Vec<RegisteredPhoton> = self
            .buffer
            .iter()
            .filter(|p| (p.analog_peak() - t0).abs() <= hw)
            .map(|p| RegisteredPhoton {
                detector: p.detector,
                energy: p.energy,
                offset: p.analog_peak() - t0,
                origin: p.origin,
                pair: p.pair,
            })
            .collect();
        let flags = event_flags(&photons, &self.cfg);
        let event = EventRecord {
            index: self.summary.events,
            trigger_time: t0,
            gap: trigger.gap,
            photons,
            flags,
        };
        self.summary.events += 1;
        (self.sink)(event);
    }

    /// Flush pending triggers at end of stream.
    pub fn finish(mut self) -> DaqSummary {
        while let Some(trigger) = self.pending.pop_front() {
            self.emit(trigger);
        }
        self.summary
    }
}

/// Run the DAQ over an in-memory pulse stream.
pub fn process(pulses: &[PulseRecord], cfg: &DaqConfig) -> Result<(Vec<EventRecord>, DaqSummary)> {
    let mut events = Vec::new();
    let mut daq = Daq::new(*cfg, |e| events.push(e))?;
    for p in pulses {
        daq.push(p)?;
    }
    let summary = daq.finish();
    Ok((events, summary))
}

pub const EVENT_HEADER: &str = "# xsplit-events v1";
const EVENT_COLUMNS: &str = "event,trigger_time_ns,gap_ns,acceptance,sum,detector,energy_kev,offset_ns,origin,pair";

/// One row per registered photon; an event without photons gets one row
/// with empty photon fields.
pub struct EventWriter<W: Write> {
    out: W,
}

impl<W: Write> EventWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{EVENT_HEADER}")?;
        writeln!(out, "{EVENT_COLUMNS}")?;
        Ok(EventWriter { out })
    }

    pub fn write(&mut self, e: &EventRecord) -> Result<()> {
        let head = format!(
            "{},{},{},{},{}",
            e.index, e.trigger_time, e.gap, e.flags.acceptance as u8, e.flags.sum as u8
        );
        if e.photons.is_empty() {
            writeln!(self.out, "{head},,,,,")?;
        }
        for p in &e.photons {
            let pair = p.pair.map(|v| v.to_string()).unwrap_or_default();
            writeln!(self.out, "{head},{},{},{},{},{pair}", p.detector, p.energy, p.offset, p.origin)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_events<W: Write>(out: W, events: &[EventRecord]) -> Result<()> {
    let mut w = EventWriter::new(out)?;
    for e in events {
        w.write(e)?;
    }
    w.finish().map(|_| ())
}

fn parse_flag(raw: u8, line: usize) -> Result<bool> {
    match raw {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::Parse {
            line,
            msg: format!("flag must be 0 or 1, got {other}"),
        }),
    }
}

pub fn read_events<R: BufRead>(input: R) -> Result<Vec<EventRecord>> {
    let mut lines = input.lines().enumerate();
    crate::io::expect_header(&mut lines, EVENT_HEADER, EVENT_COLUMNS)?;
    let mut events: Vec<EventRecord> = Vec::new();
    for (n, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let lineno = n + 1;
        let mut f = crate::io::Fields::new(&line, lineno);
        let index: u64 = f.parse()?;
        let trigger_time: f64 = f.parse()?;
        let gap: f64 = f.parse()?;
        let flags = EventFlags {
            acceptance: parse_flag(f.parse()?, lineno)?,
            sum: parse_flag(f.parse()?, lineno)?,
        };
        let detector: Option<DetectorId> = f.parse_opt()?;
        let energy: Option<f64> = f.parse_opt()?;
        let offset: Option<f64> = f.parse_opt()?;
        let origin: Option<Origin> = f.parse_opt()?;
        let pair: Option<u64> = f.parse_opt()?;
        f.finish()?;
        let is_new = events.last().is_none_or(|e| e.index != index);
        if is_new {
            events.push(EventRecord {
                index,
                trigger_time,
                gap,
                photons: Vec::new(),
                flags,
            });
        }
        let event = events.last_mut().expect("just pushed");
        match (detector, energy, offset, origin) {
            (Some(detector), Some(energy), Some(offset), Some(origin)) => event.photons.push(RegisteredPhoton {
                detector,
                energy,
                offset,
                origin,
                pair,
            }),
            (None, None, None, None) if is_new => {}
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "incomplete photon fields".into(),
                })
            }
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn pulse(time: f64, detector: DetectorId, energy: f64) -> PulseRecord {
        PulseRecord {
            time,
            detector,
            energy,
            true_energy: energy,
            origin: Origin::Stray,
            pair: None,
            analog_width: 200.0,
            logic_width: Some(1000.0),
        }
    }

    fn triggers(pulses: &[PulseRecord]) -> Vec<f64> {
        find_triggers(pulses, &DaqConfig::default()).unwrap().triggers.iter().map(|t| t.time).collect()
    }

    #[test]
    fn overlap_start_is_the_trigger() {
        let p = [pulse(0.0, DetectorId::Trig, 10.0), pulse(500.0, DetectorId::Trans, 10.0)];
        assert_eq!(triggers(&p), vec![500.0]);
        assert_eq!(find_triggers(&p, &DaqConfig::default()).unwrap().triggers[0].gap, 500.0);
    }

    #[test]
    fn trig_alone_does_not_trigger() {
        assert!(triggers(&[pulse(0.0, DetectorId::Trig, 10.0)]).is_empty());
        assert!(triggers(&[pulse(0.0, DetectorId::Trans, 10.0), pulse(1.0, DetectorId::Ref, 10.0)]).is_empty());
    }

    #[test]
    fn pulses_900_ns_apart_still_trigger() {
        let p = [pulse(0.0, DetectorId::Trig, 20.0), pulse(900.0, DetectorId::Ref, 10.0)];
        assert_eq!(triggers(&p), vec![900.0]);
    }

    #[test]
    fn partner_beyond_half_window_is_not_registered() {
        let p = [pulse(0.0, DetectorId::Trig, 20.0), pulse(950.0, DetectorId::Ref, 10.0)];
        assert_eq!(triggers(&p), vec![950.0]);
        let photons = software_filter(950.0, &p, &DaqConfig::default());
        assert_eq!(photons.len(), 1);
        assert_eq!(photons[0].detector, DetectorId::Ref);
    }

    #[test]
    fn touching_pulses_do_not_overlap() {
        let p = [pulse(0.0, DetectorId::Trig, 10.0), pulse(1000.0, DetectorId::Ref, 10.0)];
        assert!(triggers(&p).is_empty());
    }

    #[test]
    fn one_capture_per_trig_pulse() {
        let short = PulseRecord {
            logic_width: Some(200.0),
            ..pulse(100.0, DetectorId::Trans, 10.0)
        };
        let p = [pulse(0.0, DetectorId::Trig, 10.0), short, pulse(500.0, DetectorId::Ref, 10.0)];
        // The overlap ends at 300 and restarts at 500 inside the same Trig pulse.
        assert_eq!(triggers(&p), vec![100.0]);
    }

    #[test]
    fn a_new_trig_pulse_can_trigger_again() {
        let p = [
            pulse(0.0, DetectorId::Trig, 10.0),
            pulse(100.0, DetectorId::Trans, 10.0),
            pulse(200.0, DetectorId::Trig, 10.0),
            pulse(1150.0, DetectorId::Ref, 10.0),
        ];
        assert_eq!(triggers(&p), vec![100.0, 1150.0]);
    }

    #[test]
    fn rate_cap_drops_excess_triggers() {
        let cfg = DaqConfig {
            max_event_rate: 3.0,
            ..DaqConfig::default()
        };
        let mut p = Vec::new();
        for i in 0..5 {
            let t = i as f64 * 1e6;
            p.push(pulse(t, DetectorId::Trig, 10.0));
            p.push(pulse(t + 1.0, DetectorId::Ref, 10.0));
        }
        p.push(pulse(1.5e9, DetectorId::Trig, 10.0));
        p.push(pulse(1.5e9, DetectorId::Ref, 10.0));
        let scan = find_triggers(&p, &cfg).unwrap();
        assert_eq!(scan.triggers.len(), 4);
        assert_eq!(scan.dropped, 2);
    }

    #[test]
    fn software_window_registers_both_near_photons() {
        let p = [pulse(-200.0, DetectorId::Trig, 10.0), pulse(0.0, DetectorId::Trans, 10.0)];
        let photons = software_filter(100.0, &p, &DaqConfig::default());
        assert_eq!(photons.iter().map(|p| p.offset).collect::<Vec<_>>(), vec![-200.0, 0.0]);
    }

    #[test]
    fn sum_and_acceptance_examples() {
        let cfg = DaqConfig::default();
        let reg = |d, e| RegisteredPhoton {
            detector: d,
            energy: e,
            offset: 0.0,
            origin: Origin::Pair,
            pair: None,
        };
        let f = event_flags(&[reg(DetectorId::Trig, 10.4), reg(DetectorId::Ref, 10.7)], &cfg);
        assert!(f.acceptance && f.sum);
        let f = event_flags(&[reg(DetectorId::Trig, 10.0), reg(DetectorId::Trans, 10.4)], &cfg);
        assert!(f.acceptance && !f.sum);
        let f = event_flags(&[reg(DetectorId::Trig, 6.5), reg(DetectorId::Trans, 14.5)], &cfg);
        assert!(!f.acceptance && f.sum);
    }

    #[test]
    fn triple_policy_controls_mixed_events() {
        let reg = |d, e| RegisteredPhoton {
            detector: d,
            energy: e,
            offset: 0.0,
            origin: Origin::Pair,
            pair: None,
        };
        let photons = [reg(DetectorId::Trig, 10.5), reg(DetectorId::Trans, 10.5), reg(DetectorId::Ref, 8.0)];
        let either = DaqConfig::default();
        let all = DaqConfig {
            triple_policy: TriplePolicy::AllPairings,
            ..either
        };
        assert!(event_flags(&photons, &either).sum);
        assert!(!event_flags(&photons, &all).sum);
    }

    #[test]
    fn streaming_matches_batch_filter() {
        let p = [
            pulse(0.0, DetectorId::Trig, 10.5),
            pulse(0.0, DetectorId::Trans, 10.5),
            pulse(700.0, DetectorId::Ref, 9.0),
            pulse(5000.0, DetectorId::Trig, 11.0),
            pulse(5900.0, DetectorId::Ref, 10.0),
        ];
        let cfg = DaqConfig::default();
        let (events, summary) = process(&p, &cfg).unwrap();
        let scan = find_triggers(&p, &cfg).unwrap();
        assert_eq!(summary.events as usize, scan.triggers.len());
        for (e, t) in events.iter().zip(&scan.triggers) {
            assert_eq!(e.trigger_time, t.time);
            assert_eq!(e.gap, t.gap);
            assert_eq!(e.photons, software_filter(t.time, &p, &cfg));
        }
    }

    #[test]
    fn event_csv_round_trips() {
        let p = [
            pulse(0.0, DetectorId::Trig, 10.5),
            pulse(0.0, DetectorId::Trans, 0.1 + 0.2),
            pulse(5000.0, DetectorId::Trig, 11.0),
            pulse(5900.0, DetectorId::Ref, 10.0),
        ];
        let (mut events, _) = process(&p, &DaqConfig::default()).unwrap();
        events.push(EventRecord {
            index: 99,
            trigger_time: 1.0,
            gap: 0.5,
            photons: Vec::new(),
            flags: EventFlags::default(),
        });
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        assert_eq!(read_events(buf.as_slice()).unwrap(), events);
    }

    #[test]
    fn event_reader_rejects_other_formats() {
        let text = "# xsplit-pulses v1\n";
        assert!(matches!(read_events(text.as_bytes()), Err(Error::Format { .. })));
    }

    fn arb_stream() -> impl Strategy<Value = Vec<PulseRecord>> {
        prop::collection::vec((0u32..40, 0usize..3, 5.0f64..20.0), 0..40).prop_map(|raw| {
            let mut pulses: Vec<PulseRecord> = raw
                .into_iter()
                .map(|(slot, d, e)| pulse(slot as f64 * 100.0, DetectorId::ALL[d], e))
                .collect();
            pulses.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.detector.cmp(&b.detector)));
            pulses
        })
    }

    proptest! {
        #[test]
        fn registered_photons_stay_inside_window(p in arb_stream()) {
            let cfg = DaqConfig::default();
            let (events, _) = process(&p, &cfg).unwrap();
            for e in &events {
                prop_assert!(e.photons.iter().all(|ph| ph.offset.abs() <= cfg.software_half_window));
            }
        }

        #[test]
        fn triggers_ignore_order_of_equal_time_pulses(p in arb_stream()) {
            let cfg = DaqConfig::default();
            let mut shuffled = p.clone();
            // Reverse detector order inside each equal-time group.
            shuffled.sort_by(|a, b| a.time.total_cmp(&b.time).then(b.detector.cmp(&a.detector)));
            let a = find_triggers(&p, &cfg).unwrap();
            prop_assert_eq!(&a, &find_triggers(&shuffled, &cfg).unwrap());
            prop_assert_eq!(&a, &find_triggers(&p, &cfg).unwrap());
        }

        #[test]
        fn shrinking_window_never_adds_photons(p in arb_stream(), hw in 50.0f64..800.0) {
            let wide = DaqConfig::default();
            let narrow = DaqConfig { software_half_window: hw, ..wide };
            for t in find_triggers(&p, &wide).unwrap().triggers {
                prop_assert!(software_filter(t.time, &p, &narrow).len() <= software_filter(t.time, &p, &wide).len());
            }
        }

        #[test]
        fn heralded_within_accepted_within_all(p in arb_stream()) {
            let cfg = DaqConfig::default();
            let (mut events, _) = process(&p, &cfg).unwrap();
            let sel = energy_select(&mut events, &cfg);
            prop_assert!(sel.heralded <= sel.accepted && sel.accepted <= sel.all);
            prop_assert!(events.iter().all(|e| !e.is_heralded() || e.flags.acceptance));
        }
    }
}
