//! Units, Bragg geometry and x-ray attenuation shared by the physics modules.
//!
//! Energies are in keV, lengths in Å unless a name says otherwise, and angles
//! are radians everywhere except at explicit `_deg` helpers.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// hc in keV·Å.
pub const HC_KEV_ANGSTROM: f64 = 12.39842;

/// Cubic lattice constant of diamond, Å.
pub const DIAMOND_LATTICE_CONSTANT: f64 = 3.56712;

/// Interplanar spacing of the graphite (002) planes, Å.
pub const HOPG_002_SPACING: f64 = 3.354;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhotonEnergy(f64);

impl PhotonEnergy {
    pub fn new(kev: f64) -> Result<Self> {
        if kev.is_finite() && kev > 0.0 {
            Ok(PhotonEnergy(kev))
        } else {
            Err(Error::invalid("energy", format!("must be positive, got {kev}")))
        }
    }

    #[inline]
    pub fn kev(self) -> f64 {
        self.0
    }

    /// Vacuum wavelength in Å.
    #[inline]
    pub fn wavelength(self) -> f64 {
        HC_KEV_ANGSTROM / self.0
    }

    /// Vacuum wavenumber 2π/λ in 1/Å (refractive index taken as 1).
    #[inline]
    pub fn wavenumber(self) -> f64 {
        wavenumber(self.0)
    }
}

impl fmt::Display for PhotonEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} keV", self.0)
    }
}

/// Wavenumber in 1/Å for a photon energy in keV.
#[inline]
pub fn wavenumber(kev: f64) -> f64 {
    2.0 * PI * kev / HC_KEV_ANGSTROM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub name: String,
    /// Interplanar spacing d, Å.
    pub d_spacing: f64,
}

impl LatticeSpec {
    pub fn new(name: impl Into<String>, d_spacing: f64) -> Result<Self> {
        if !(d_spacing.is_finite() && d_spacing > 0.0) {
            return Err(Error::invalid("d_spacing", format!("must be positive, got {d_spacing}")));
        }
        Ok(LatticeSpec {
            name: name.into(),
            d_spacing,
        })
    }

    pub fn hopg_002() -> Self {
        LatticeSpec {
            name: "HOPG(002)".into(),
            d_spacing: HOPG_002_SPACING,
        }
    }

    /// Diamond (660): d = a / sqrt(6² + 6² + 0²).
    pub fn diamond_660() -> Self {
        LatticeSpec {
            name: "C(660)".into(),
            d_spacing: DIAMOND_LATTICE_CONSTANT / 72f64.sqrt(),
        }
    }

    /// Magnitude of the reciprocal lattice vector, 2π/d in 1/Å.
    pub fn reciprocal_vector(&self) -> f64 {
        2.0 * PI / self.d_spacing
    }

    /// The spacing whose Bragg angle at `energy` equals `angle` (radians).
    pub fn for_bragg_angle(name: impl Into<String>, energy: PhotonEnergy, angle: f64) -> Result<Self> {
        if !(angle > 0.0 && angle <= PI / 2.0) {
            return Err(Error::Domain(format!("Bragg angle {angle} rad outside (0, pi/2]")));
        }
        LatticeSpec::new(name, energy.wavelength() / (2.0 * angle.sin()))
    }
}

/// Bragg angle θ_B = asin(λ / 2d), radians.
pub fn bragg_angle(energy: PhotonEnergy, lattice: &LatticeSpec) -> Result<f64> {
    let s = energy.wavelength() / (2.0 * lattice.d_spacing);
    if s > 1.0 {
        return Err(Error::Domain(format!(
            "no Bragg reflection from {} at {}: wavelength {:.5} Å exceeds 2d = {:.5} Å",
            lattice.name,
            energy,
            energy.wavelength(),
            2.0 * lattice.d_spacing
        )));
    }
    Ok(s.asin())
}

pub fn bragg_angle_deg(energy: PhotonEnergy, lattice: &LatticeSpec) -> Result<f64> {
    bragg_angle(energy, lattice).map(f64::to_degrees)
}

/// Inverse of [`bragg_angle`]: the photon energy reflected at `angle` (radians).
pub fn energy_from_bragg_angle(angle: f64, lattice: &LatticeSpec) -> Result<PhotonEnergy> {
    if !(angle > 0.0 && angle <= PI / 2.0) {
        return Err(Error::Domain(format!("Bragg angle {angle} rad outside (0, pi/2]")));
    }
    PhotonEnergy::new(HC_KEV_ANGSTROM / (2.0 * lattice.d_spacing * angle.sin()))
}

/// Longitudinal phase mismatch Δk_z = k_p cos θ_p − k_h cos θ_h − k_t cos θ_t in 1/Å.
///
/// Angles are measured from the diffracting planes. Energy conservation between
/// the three photons is the caller's business.
pub fn phase_mismatch(
    pump: PhotonEnergy,
    heralded: PhotonEnergy,
    trigger: PhotonEnergy,
    (theta_p, theta_h, theta_t): (f64, f64, f64),
) -> f64 {
    pump.wavenumber() * theta_p.cos()
        - heralded.wavenumber() * theta_h.cos()
        - trigger.wavenumber() * theta_t.cos()
}

/// Mass attenuation data for one material, interpolated log-log.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationTable {
    pub material: String,
    /// g/cm³
    pub density: f64,
    energies: Vec<f64>,
    mu_over_rho: Vec<f64>,
}

impl AttenuationTable {
    pub fn new(
        material: impl Into<String>,
        density: f64,
        samples: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<Self> {
        let (energies, mu_over_rho): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        if !(density.is_finite() && density > 0.0) {
            return Err(Error::invalid("density", format!("must be positive, got {density}")));
        }
        if energies.len() < 2 {
            return Err(Error::invalid("samples", "need at least two samples"));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("samples", "energies must be strictly increasing"));
        }
        if energies.iter().chain(&mu_over_rho).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("samples", "all values must be positive"));
        }
        Ok(AttenuationTable {
            material: material.into(),
            density,
            energies,
            mu_over_rho,
        })
    }

    /// Parse the two-column text format. `# density: <g/cm3>` and
    /// `# material: <name>` header comments are honoured; `density` overrides the
    /// header when given.
    pub fn parse(text: &str, density: Option<f64>) -> Result<Self> {
        let mut material = String::from("unnamed");
        let mut header_density = None;
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once(':') {
                    match key.trim() {
                        "material" => material = value.trim().to_string(),
                        "density" => {
                            header_density = Some(value.trim().parse::<f64>().map_err(|e| Error::Parse {
                                line: i + 1,
                                msg: format!("bad density: {e}"),
                            })?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::Parse {
                        line: i + 1,
                        msg: format!("missing {what}"),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line: i + 1,
                        msg: format!("bad {what}: {e}"),
                    })
            };
            let e = next("energy")?;
            let m = next("mu/rho")?;
            samples.push((e, m));
        }
        let density = density
            .or(header_density)
            .ok_or_else(|| Error::invalid("density", "not given and no `# density:` header"))?;
        AttenuationTable::new(material, density, samples)
    }

    pub fn load(path: impl AsRef<Path>, density: Option<f64>) -> Result<Self> {
        AttenuationTable::parse(&fs::read_to_string(path)?, density)
    }

    pub fn air() -> Self {
        Self::bundled(include_str!("../data/air.txt"))
    }

    pub fn helium() -> Self {
        Self::bundled(include_str!("../data/helium.txt"))
    }

    /// Carbon at the density of highly ordered pyrolytic graphite.
    pub fn hopg() -> Self {
        Self::bundled(include_str!("../data/graphite.txt"))
    }

    pub fn diamond() -> Self {
        Self::bundled(include_str!("../data/diamond.txt"))
    }

    fn bundled(text: &str) -> Self {
        AttenuationTable::parse(text, None).expect("bundled attenuation table is well formed")
    }

    pub fn with_density(mut self, density: f64) -> Result<Self> {
        if !(density.is_finite() && density > 0.0) {
            return Err(Error::invalid("density", format!("must be positive, got {density}")));
        }
        self.density = density;
        Ok(self)
    }

    pub fn energy_range(&self) -> (f64, f64) {
        (self.energies[0], self.energies[self.energies.len() - 1])
    }

    /// μ/ρ in cm²/g.
    pub fn mu_over_rho(&self, energy: f64) -> Result<f64> {
        let (lo, hi) = self.energy_range();
        if !(energy >= lo && energy <= hi) {
            return Err(Error::OutOfRange { energy, lo, hi });
        }
        let j = self.energies.partition_point(|&e| e <= energy).clamp(1, self.energies.len() - 1);
        let (e0, e1) = (self.energies[j - 1], self.energies[j]);
        let (m0, m1) = (self.mu_over_rho[j - 1], self.mu_over_rho[j]);
        let t = (energy / e0).ln() / (e1 / e0).ln();
        Ok((m0.ln() + t * (m1 / m0).ln()).exp())
    }

    /// Linear attenuation coefficient μ in 1/cm.
    pub fn mu(&self, energy: f64) -> Result<f64> {
        Ok(self.mu_over_rho(energy)? * self.density)
    }

    /// exp(−μ·path) for a path length in cm.
    pub fn transmittance(&self, energy: f64, path_cm: f64) -> Result<f64> {
        if !(path_cm >= 0.0) {
            return Err(Error::invalid("path_length", format!("must be >= 0, got {path_cm}")));
        }
        Ok((-self.mu(energy)? * path_cm).exp())
    }
}
