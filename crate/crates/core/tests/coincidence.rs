use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use xsplit::daq::{process, DaqConfig, EventFlags, EventRecord, RegisteredPhoton};
use xsplit::montecarlo::*;
use xsplit::optics::AttenuationTable;
use xsplit::spdc::{biphoton_amplitude, GridSpec, SpdcConfig};
use xsplit::splitter::SplitterSpec;
use xsplit::stats::{sigma, EnergyMode};

fn pair_only_simulation(duration: f64, seed: u64) -> Simulation {
    let grid = GridSpec {
        energy_cells: 81,
        theta_x_cells: 21,
        theta_y_cells: 11,
        ..GridSpec::default()
    };
    Simulation::new(
        biphoton_amplitude(&SpdcConfig::default(), &grid).unwrap(),
        PairOptics {
            splitter: SplitterSpec::default(),
            splitter_material: AttenuationTable::hopg(),
            flight: Attenuator::new(FlightPath::default()),
        },
        DetectorSet::default(),
        SourceConfig {
            pair_rate: 20.0,
            stray_rate: StrayRates::none(),
            stray_spectrum: StraySpectrum::default(),
            duration,
            seed,
            slice: 10.0,
        },
    )
    .unwrap()
}

#[test]
fn every_isolated_pair_with_two_logic_pulses_gives_one_event() {
    let pulses = pair_only_simulation(500.0, 8).pulses().unwrap();
    let cfg = DaqConfig::default().unlimited();
    assert!(cfg.software_half_window * 2.0 >= DetectorSpec::default().logic_width);
    let (events, summary) = process(&pulses, &cfg).unwrap();
    assert_eq!(summary.dropped, 0);

    let mut by_pair: BTreeMap<u64, Vec<&PulseRecord>> = BTreeMap::new();
    for p in &pulses {
        by_pair.entry(p.pair.unwrap()).or_default().push(p);
    }
    let mut checked = 0;
    for (id, photons) in &by_pair {
        let [a, b] = photons.as_slice() else { continue };
        if a.logic_width.is_none() || b.logic_width.is_none() {
            continue;
        }
        let t = a.time;
        let isolated = pulses
            .iter()
            .filter(|p| p.pair != Some(*id))
            .all(|p| (p.time - t).abs() > 3000.0);
        if !isolated {
            continue;
        }
        let containing: Vec<&EventRecord> = events
            .iter()
            .filter(|e| e.photons.iter().any(|ph| ph.pair == Some(*id)))
            .collect();
        assert_eq!(containing.len(), 1, "pair {id}");
        let e = containing[0];
        assert_eq!(e.photons.len(), 2);
        assert_eq!(e.gap, 0.0);
        checked += 1;
    }
    assert!(checked > 1000, "only {checked} isolated pairs");
}

fn event(gap: f64, counts: [(DetectorId, u32); 3]) -> EventRecord {
    let mut photons = Vec::new();
    for (detector, n) in counts {
        for _ in 0..n {
            photons.push(RegisteredPhoton {
                detector,
                energy: 10.0,
                offset: 0.0,
                origin: Origin::Stray,
                pair: None,
            });
        }
    }
    EventRecord {
        index: 0,
        trigger_time: 0.0,
        gap,
        photons,
        flags: EventFlags {
            acceptance: true,
            sum: false,
        },
    }
}

#[test]
fn independent_poisson_streams_give_sigma_near_one() {
    // Counts of two independent Poisson streams in consecutive long frames.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let poisson = Poisson::new(8.0).unwrap();
    let events: Vec<EventRecord> = (0..200_000)
        .map(|_| {
            let t = poisson.sample(&mut rng) as u32;
            let h = poisson.sample(&mut rng) as u32;
            event(0.0, [(DetectorId::Trig, t), (DetectorId::Trans, h), (DetectorId::Ref, 0)])
        })
        .collect();
    let s = sigma(&events, 1000.0, &EnergyMode::Open, DetectorId::Trans).unwrap();
    assert!((s - 1.0).abs() < 0.02, "sigma {s}");
}

#[test]
fn relabelling_outputs_swaps_the_two_curves() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let events: Vec<EventRecord> = (0..5000)
        .map(|_| {
            let n = |rng: &mut ChaCha8Rng| if rng.random::<f64>() < 0.2 { 2 } else { 1 };
            let (t, o) = (n(&mut rng), n(&mut rng));
            let out = if rng.random::<bool>() { DetectorId::Trans } else { DetectorId::Ref };
            let other = if out == DetectorId::Trans { DetectorId::Ref } else { DetectorId::Trans };
            event(rng.random_range(0.0..1000.0), [(DetectorId::Trig, t), (out, o), (other, 0)])
        })
        .collect();
    let swapped: Vec<EventRecord> = events
        .iter()
        .map(|e| {
            let mut e = e.clone();
            for p in &mut e.photons {
                p.detector = match p.detector {
                    DetectorId::Trans => DetectorId::Ref,
                    DetectorId::Ref => DetectorId::Trans,
                    d => d,
                };
            }
            e
        })
        .collect();
    for window in [200.0, 600.0, 1000.0] {
        let a = sigma(&events, window, &EnergyMode::Open, DetectorId::Trans).unwrap();
        let b = sigma(&swapped, window, &EnergyMode::Open, DetectorId::Ref).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn stray_free_heralded_events_never_fire_both_outputs() {
    let pulses = pair_only_simulation(200.0, 12).pulses().unwrap();
    let (events, _) = process(&pulses, &DaqConfig::default()).unwrap();
    let heralded: Vec<_> = events.iter().filter(|e| e.is_heralded()).collect();
    assert!(heralded.len() > 100);
    assert!(heralded
        .iter()
        .all(|e| e.count(DetectorId::Trans) == 0 || e.count(DetectorId::Ref) == 0));
}
