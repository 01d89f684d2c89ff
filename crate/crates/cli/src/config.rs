//! Run configuration: one TOML file holding every physical and numerical
//! parameter of a study. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xsplit::daq::DaqConfig;
use xsplit::montecarlo::{
    calibrate_pair_rate, Attenuator, DetectorSet, FlightPath, SourceConfig, StrayRates, StraySpectrum,
};
use xsplit::spdc::{GridSpec, JointAmplitude, SpdcConfig};
use xsplit::splitter::SplitterSpec;

use crate::error::CliError;

/// The shipped reference profile.
pub const REFERENCE_PROFILE: &str = include_str!("../reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed of every random stream. Required.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub spdc: SpdcConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub splitter: SplitterSpec,
    #[serde(default)]
    pub flight: FlightPath,
    #[serde(default)]
    pub detectors: DetectorSet,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub daq: DaqConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("xsplit-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Pairs/s leaving the crystal. When absent it is calibrated so that the
    /// no-splitter heralded rate equals `heralded_rate`.
    pub pair_rate: Option<f64>,
    /// Heralded coincidences/s measured without the splitter.
    pub heralded_rate: f64,
    pub heralded_rate_error: f64,
    pub stray_rate: StrayRates,
    pub stray_spectrum: StraySpectrum,
    /// Simulated time, s.
    pub duration: f64,
    /// Length of one independently seeded slice, s.
    pub slice: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            pair_rate: None,
            heralded_rate: 0.0583,
            heralded_rate_error: 0.0,
            stray_rate: StrayRates::default(),
            stray_spectrum: StraySpectrum::default(),
            duration: 3600.0,
            slice: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub sweep_from_deg: f64,
    pub sweep_to_deg: f64,
    pub sweep_points: usize,
    /// Rocking-width multiplier of the width-scaling study.
    pub width_factor: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            sweep_from_deg: 5.0,
            sweep_to_deg: 45.0,
            sweep_points: 81,
            width_factor: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Coincidence windows of the σ curves, ns.
    pub windows_ns: Vec<f64>,
    /// Spectrum histogram range and bin width, keV.
    pub spectrum_lo: f64,
    pub spectrum_hi: f64,
    pub bin_width: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            windows_ns: (1..=10).map(|i| 100.0 * i as f64).collect(),
            spectrum_lo: 7.0,
            spectrum_hi: 17.0,
            bin_width: 0.25,
        }
    }
}

impl RunConfig {
    pub fn reference() -> Self {
        Self::parse(REFERENCE_PROFILE).expect("shipped profile is valid")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.spdc.validate()?;
        self.grid.validate()?;
        self.splitter.validate()?;
        self.detectors.validate()?;
        self.daq.validate()?;
        let s = &self.source;
        if let Some(rate) = s.pair_rate {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(CliError::Config("source.pair_rate must be finite and non-negative".into()));
            }
        }
        if !(s.heralded_rate > 0.0 && s.heralded_rate_error >= 0.0) {
            return Err(CliError::Config("source.heralded_rate must be positive and its error non-negative".into()));
        }
        if !(self.flight.air_cm >= 0.0 && self.flight.helium_cm >= 0.0) {
            return Err(CliError::Config("flight path lengths must be non-negative".into()));
        }
        if self.daq.pump_energy != self.spdc.pump_energy {
            return Err(CliError::Config(format!(
                "daq.pump_energy ({}) must equal spdc.pump_energy ({})",
                self.daq.pump_energy, self.spdc.pump_energy
            )));
        }
        let m = &self.model;
        if !(m.sweep_from_deg > 0.0 && m.sweep_to_deg < 90.0 && m.sweep_from_deg < m.sweep_to_deg && m.sweep_points >= 2) {
            return Err(CliError::Config(
                "model sweep needs 0 < sweep_from_deg < sweep_to_deg < 90 and at least 2 points".into(),
            ));
        }
        if !(m.width_factor > 0.0) {
            return Err(CliError::Config("model.width_factor must be positive".into()));
        }
        let a = &self.analysis;
        if a.windows_ns.is_empty() || a.windows_ns.iter().any(|w| !(*w > 0.0)) {
            return Err(CliError::Config("analysis.windows_ns must be a non-empty list of positive windows".into()));
        }
        if !(a.spectrum_lo < a.spectrum_hi && a.bin_width > 0.0) {
            return Err(CliError::Config("analysis spectrum needs spectrum_lo < spectrum_hi and bin_width > 0".into()));
        }
        self.source_config(0.0)?.validate()?;
        Ok(())
    }

    pub fn attenuator(&self) -> Attenuator {
        Attenuator::new(self.flight)
    }

    /// Configured pair rate, or the rate calibrated on `amp`.
    pub fn pair_rate(&self, amp: &JointAmplitude) -> Result<f64, CliError> {
        match self.source.pair_rate {
            Some(rate) => Ok(rate),
            None => Ok(calibrate_pair_rate(
                amp,
                &self.attenuator(),
                &self.detectors,
                self.daq.acceptance,
                0.5 * self.daq.sum_window,
                self.source.heralded_rate,
            )?),
        }
    }

    pub fn source_config(&self, pair_rate: f64) -> Result<SourceConfig, CliError> {
        let s = &self.source;
        let cfg = SourceConfig {
            pair_rate,
            stray_rate: s.stray_rate,
            stray_spectrum: s.stray_spectrum,
            duration: s.duration,
            seed: self.seed,
            slice: s.slice,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_profile_matches_built_in_defaults() {
        let cfg = RunConfig::reference();
        assert_eq!(cfg.spdc, SpdcConfig::default());
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.splitter, SplitterSpec::default());
        assert_eq!(cfg.detectors, DetectorSet::default());
        assert_eq!(cfg.daq, DaqConfig::default());
        assert_eq!(cfg.flight, FlightPath::default());
        assert_eq!(cfg.source, SourceSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("seed = 1\n[splitter]\npeak_reflectivty = 0.4\n").unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("peak_reflectivty")), "{err}");
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(RunConfig::parse("[daq]\nsum_window = 2.0\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = RunConfig::parse("seed = 5\n[daq]\nsum_window = 2.0\n").unwrap();
        assert_eq!(cfg.daq.sum_window, 2.0);
        assert_eq!(cfg.daq.software_half_window, 800.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::reference();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn inconsistent_pump_energies_are_rejected() {
        assert!(RunConfig::parse("seed = 1\n[daq]\npump_energy = 20.0\n").is_err());
    }
}
