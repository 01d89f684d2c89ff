//! Mosaic-crystal Bragg beam splitter: Gaussian rocking-curve reflectance and
//! the complementary, absorption-reduced transmission.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{bragg_angle, AttenuationTable, LatticeSpec, PhotonEnergy};
use crate::spdc::{biphoton_amplitude, coincidence_flux, GridSpec, PairLoss, SpdcConfig, SpectralAngularFilter};

/// How a heralded photon's grid angle maps onto its deviation from the
/// splitter's set angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffractionPlane {
    /// Splitter scattering plane coincides with the SPDC scattering plane and
    /// a larger θx means a larger glancing angle on the splitter. The
    /// dispersion of the heralded beam then tracks the Bragg condition.
    #[default]
    Parallel,
    /// Same plane, opposite sense: a larger θx means a smaller glancing angle.
    AntiParallel,
    /// Splitter scattering plane contains the out-of-plane direction θy.
    Perpendicular,
}

impl DiffractionPlane {
    /// Deviation from the set angle, radians.
    #[inline]
    pub fn deviation(self, theta_x: f64, theta_y: f64) -> f64 {
        match self {
            DiffractionPlane::Parallel => theta_x,
            DiffractionPlane::AntiParallel => -theta_x,
            DiffractionPlane::Perpendicular => theta_y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitterSpec {
    pub lattice: LatticeSpec,
    /// Peak intensity reflectivity A.
    pub peak_reflectivity: f64,
    /// Gaussian width parameter b, degrees. FWHM of R² is 2√(ln 2)·b.
    pub width_deg: f64,
    pub thickness_mm: f64,
    /// Energy whose Bragg angle the crystal is set to, keV.
    pub nominal_energy: f64,
    /// Extra rotation of the crystal beyond the nominal Bragg angle, degrees.
    #[serde(default)]
    pub offset_deg: f64,
    #[serde(default)]
    pub plane: DiffractionPlane,
}

impl Default for SplitterSpec {
    fn default() -> Self {
        SplitterSpec {
            lattice: LatticeSpec::hopg_002(),
            peak_reflectivity: 0.5,
            width_deg: 0.48,
            thickness_mm: 0.7,
            nominal_energy: 10.5,
            offset_deg: 0.0,
            plane: DiffractionPlane::Parallel,
        }
    }
}

impl SplitterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_reflectivity > 0.0 && self.peak_reflectivity <= 1.0) {
            return Err(Error::invalid("peak_reflectivity", "must lie in (0, 1]"));
        }
        if !(self.width_deg > 0.0) {
            return Err(Error::invalid("width_deg", "must be positive"));
        }
        if !(self.thickness_mm > 0.0) {
            return Err(Error::invalid("thickness_mm", "must be positive"));
        }
        if !(self.lattice.d_spacing > 0.0) {
            return Err(Error::invalid("lattice.d_spacing", "must be positive"));
        }
        self.set_angle().map(|_| ())
    }

    /// Same splitter with the lattice spacing replaced so that the nominal
    /// energy reflects at `bragg_deg`.
    pub fn at_bragg_angle(&self, bragg_deg: f64) -> Result<Self> {
        let lattice = LatticeSpec::for_bragg_angle(
            format!("{} @ {bragg_deg} deg", self.lattice.name),
            PhotonEnergy::new(self.nominal_energy)?,
            bragg_deg.to_radians(),
        )?;
        Ok(SplitterSpec {
            lattice,
            ..self.clone()
        })
    }

    pub fn with_width(&self, width_deg: f64) -> Self {
        SplitterSpec {
            width_deg,
            ..self.clone()
        }
    }

    /// Bragg angle of the nominal energy, radians.
    pub fn nominal_bragg_angle(&self) -> Result<f64> {
        bragg_angle(PhotonEnergy::new(self.nominal_energy)?, &self.lattice)
    }

    /// Glancing angle of the crystal planes to the central beam, radians.
    pub fn set_angle(&self) -> Result<f64> {
        Ok(self.nominal_bragg_angle()? + self.offset_deg.to_radians())
    }

    /// FWHM of the intensity rocking curve R², degrees.
    pub fn fwhm_deg(&self) -> f64 {
        2.0 * std::f64::consts::LN_2.sqrt() * self.width_deg
    }
}

/// Amplitude reflectance √A·exp(−½((Δθ + θ_set − θ_B(E))/b)²) for a photon
/// arriving `delta_deg` away from the central beam direction.
pub fn reflectance(spec: &SplitterSpec, energy: f64, delta_deg: f64) -> Result<f64> {
    let theta_b = bragg_angle(PhotonEnergy::new(energy)?, &spec.lattice)?;
    let arg = (delta_deg + spec.set_angle()?.to_degrees() - theta_b.to_degrees()) / spec.width_deg;
    Ok(spec.peak_reflectivity.sqrt() * (-0.5 * arg * arg).exp())
}

/// Intensity transmission (1 − R²)·exp(−μ t / sin θ), θ the glancing angle.
pub fn transmission(spec: &SplitterSpec, energy: f64, delta_deg: f64, material: &AttenuationTable) -> Result<f64> {
    let incidence = spec.set_angle()? + delta_deg.to_radians();
    if !(incidence > 0.0) {
        return Err(Error::Domain(format!(
            "non-positive incidence angle {:.4} degrees on the splitter",
            incidence.to_degrees()
        )));
    }
    let r = reflectance(spec, energy, delta_deg)?;
    let path_cm = 0.1 * spec.thickness_mm / incidence.sin();
    Ok((1.0 - r * r) * material.transmittance(energy, path_cm)?)
}

/// Routing probabilities of a single photon: (reflected, transmitted, absorbed).
pub fn routing(spec: &SplitterSpec, energy: f64, delta_deg: f64, material: &AttenuationTable) -> Result<(f64, f64, f64)> {
    let r = reflectance(spec, energy, delta_deg)?;
    let t = transmission(spec, energy, delta_deg, material)?;
    let r2 = r * r;
    Ok((r2, t, (1.0 - r2 - t).max(0.0)))
}

fn check_bragg_domain(spec: &SplitterSpec, grid: &GridSpec) -> Result<()> {
    let lowest = PhotonEnergy::new(grid.energy_lo)?;
    if lowest.wavelength() > 2.0 * spec.lattice.d_spacing {
        return Err(Error::GridMismatch(format!(
            "{} cannot reflect {lowest}; grid starts below the Bragg cutoff",
            spec.lattice.name
        )));
    }
    let worst = spec.set_angle()? - 0.5 * grid.angle_span;
    if !(worst > 0.0) {
        return Err(Error::GridMismatch("grid angles reach non-positive incidence on the splitter".into()));
    }
    Ok(())
}

/// Amplitude filter of the reflected port.
#[derive(Debug, Clone)]
pub struct ReflectedPort<'a> {
    pub spec: &'a SplitterSpec,
}

impl SpectralAngularFilter for ReflectedPort<'_> {
    fn amplitude(&self, energy: f64, theta_x: f64, theta_y: f64) -> f64 {
        let delta = self.spec.plane.deviation(theta_x, theta_y).to_degrees();
        reflectance(self.spec, energy, delta).unwrap_or(0.0)
    }

    fn check_domain(&self, grid: &GridSpec) -> Result<()> {
        check_bragg_domain(self.spec, grid)
    }
}

/// Amplitude filter of the transmitted port (square root of the intensity transmission).
#[derive(Debug, Clone)]
pub struct TransmittedPort<'a> {
    pub spec: &'a SplitterSpec,
    pub material: &'a AttenuationTable,
}

impl SpectralAngularFilter for TransmittedPort<'_> {
    fn amplitude(&self, energy: f64, theta_x: f64, theta_y: f64) -> f64 {
        let delta = self.spec.plane.deviation(theta_x, theta_y).to_degrees();
        transmission(self.spec, energy, delta, self.material).map_or(0.0, f64::sqrt)
    }

    fn check_domain(&self, grid: &GridSpec) -> Result<()> {
        check_bragg_domain(self.spec, grid)?;
        let (lo, hi) = self.material.energy_range();
        if grid.energy_lo < lo || grid.energy_hi > hi {
            return Err(Error::GridMismatch(format!(
                "attenuation table for {} covers [{lo}, {hi}] keV, grid spans [{}, {}] keV",
                self.material.material, grid.energy_lo, grid.energy_hi
            )));
        }
        Ok(())
    }
}

/// Splitter-family owning variant of [`ReflectedPort`], used by Bragg-angle sweeps.
#[derive(Debug, Clone)]
pub struct OwnedReflectedPort(pub SplitterSpec);

impl SpectralAngularFilter for OwnedReflectedPort {
    fn amplitude(&self, energy: f64, theta_x: f64, theta_y: f64) -> f64 {
        ReflectedPort { spec: &self.0 }.amplitude(energy, theta_x, theta_y)
    }

    fn check_domain(&self, grid: &GridSpec) -> Result<()> {
        check_bragg_domain(&self.0, grid)
    }
}

/// Energy step used for narrowed rocking curves, keV.
const NARROW_ENERGY_STEP: f64 = 5e-4;

/// Factor by which the reflected coincidence flux grows when the rocking
/// width of `narrow` is multiplied by `factor` at fixed geometry.
///
/// The narrow splitter only reflects a band a few eV wide, so its flux is
/// integrated on a grid of the same angular window restricted to ±0.3 keV
/// around the nominal energy with 0.5 eV cells. The wide flux uses `grid`.
pub fn rocking_width_gain(
    config: &SpdcConfig,
    grid: &GridSpec,
    narrow: &SplitterSpec,
    factor: f64,
    loss: &dyn PairLoss,
) -> Result<f64> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid("factor", "must be positive and finite"));
    }
    let wide = narrow.with_width(narrow.width_deg * factor);
    let local = GridSpec {
        energy_lo: narrow.nominal_energy - 0.3,
        energy_hi: narrow.nominal_energy + 0.3,
        energy_cells: (0.6 / NARROW_ENERGY_STEP).round() as usize,
        ..*grid
    };
    let wide_flux = coincidence_flux(&biphoton_amplitude(config, grid)?, &ReflectedPort { spec: &wide }, loss)?;
    let narrow_flux = coincidence_flux(&biphoton_amplitude(config, &local)?, &ReflectedPort { spec: narrow }, loss)?;
    if !(narrow_flux > 0.0) {
        return Err(Error::Domain("narrow rocking curve reflects nothing inside the grid".into()));
    }
    Ok(wide_flux / narrow_flux)
}
