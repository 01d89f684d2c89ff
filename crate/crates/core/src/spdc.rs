//! Biphoton amplitude of x-ray down-conversion in a Laue-geometry crystal and
//! the coincidence-rate integral over a spectral/angular window.
//!
//! Coordinates: `z` runs along the diffracting planes inside the scattering
//! plane, `x` along the reciprocal lattice vector, `y` out of the scattering
//! plane. Photon directions are given by their angle to the planes; heralded
//! grid angles `(θx, θy)` are offsets from the phase-matched central direction.
//!
//! The coupled equations are solved to first order in κL:
//! `a_h(L) ≈ a_h(0) + κL·sinc(Δk_z L/2)·e^{iΔk_z L/2}·a_t†(0)`, so the
//! two-photon amplitude of a mode pair is the coefficient of `a_t†(0)`.
//! Transverse momentum is conserved exactly, which fixes the trigger direction
//! for every heralded cell.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{bragg_angle, wavenumber, LatticeSpec, PhotonEnergy};
use crate::special::{sinc, sinc2_first_moment, sinc2_mean};

/// Largest κL for which the first-order solution is accepted.
pub const MAX_COUPLING: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpdcConfig {
    /// keV
    pub pump_energy: f64,
    pub crystal: LatticeSpec,
    pub thickness_mm: f64,
    /// Rotation of the crystal away from the pump Bragg angle, degrees.
    pub detune_deg: f64,
    /// Nominal heralded detector angle to the planes, degrees. Used to pick the
    /// phase-matching root; the grid is centred on the solved angle.
    pub heralded_angle_deg: f64,
    /// Nominal trigger detector angle to the planes, degrees.
    pub trigger_angle_deg: f64,
    /// Dimensionless coupling κL.
    pub coupling: f64,
}

impl Default for SpdcConfig {
    fn default() -> Self {
        SpdcConfig {
            pump_energy: 21.0,
            crystal: LatticeSpec::diamond_660(),
            thickness_mm: 0.8,
            detune_deg: 0.008,
            heralded_angle_deg: 45.59,
            trigger_angle_deg: 43.63,
            coupling: MAX_COUPLING,
        }
    }
}

impl SpdcConfig {
    pub fn validate(&self) -> Result<()> {
        PhotonEnergy::new(self.pump_energy)?;
        if !(self.coupling > 0.0 && self.coupling <= MAX_COUPLING) {
            return Err(Error::invalid(
                "coupling",
                format!("kappa*L = {} outside the low-gain range (0, {MAX_COUPLING}]", self.coupling),
            ));
        }
        if !(self.thickness_mm > 0.0) {
            return Err(Error::invalid("thickness_mm", "must be positive"));
        }
        if !(self.crystal.d_spacing > 0.0) {
            return Err(Error::invalid("crystal.d_spacing", "must be positive"));
        }
        Ok(())
    }

    pub fn pump(&self) -> PhotonEnergy {
        PhotonEnergy::new(self.pump_energy).expect("validated pump energy")
    }

    /// Pump angle to the diffracting planes, radians.
    pub fn pump_angle(&self) -> Result<f64> {
        Ok(bragg_angle(self.pump(), &self.crystal)? + self.detune_deg.to_radians())
    }

    /// Thickness in Å.
    pub fn length(&self) -> f64 {
        self.thickness_mm * 1e7
    }
}

/// Wavevector bookkeeping for one pump/crystal configuration.
#[derive(Debug, Clone, Copy)]
pub struct PairGeometry {
    pump_energy: f64,
    kp_x: f64,
    kp_z: f64,
    g: f64,
    length: f64,
    /// Phase-matched heralded angle for degenerate photons, radians.
    pub heralded_center: f64,
    /// Trigger angle paired with `heralded_center`, radians.
    pub trigger_center: f64,
}

/// Trigger photon direction implied by transverse momentum conservation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerDirection {
    /// Angle to the planes, radians.
    pub theta: f64,
    /// Out-of-plane angle, radians.
    pub phi: f64,
}

impl PairGeometry {
    pub fn new(config: &SpdcConfig) -> Result<Self> {
        config.validate()?;
        let theta_p = config.pump_angle()?;
        let kp = config.pump().wavenumber();
        let mut geometry = PairGeometry {
            pump_energy: config.pump_energy,
            kp_x: kp * theta_p.sin(),
            kp_z: kp * theta_p.cos(),
            g: config.crystal.reciprocal_vector(),
            length: config.length(),
            heralded_center: 0.0,
            trigger_center: 0.0,
        };
        let center = geometry.solve_heralded_angle(
            0.5 * config.pump_energy,
            config.heralded_angle_deg.to_radians(),
        )?;
        geometry.heralded_center = center;
        geometry.trigger_center = geometry.trigger_at(0.5 * config.pump_energy, center, 0.0).theta;
        Ok(geometry)
    }

    pub fn pump_energy(&self) -> f64 {
        self.pump_energy
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Transverse (x, y) and longitudinal components of the trigger wavevector.
    #[inline]
    fn trigger_k(&self, energy: f64, theta: f64, phi: f64) -> (f64, f64, f64, f64) {
        let kh = wavenumber(energy);
        let kt = wavenumber(self.pump_energy - energy);
        let st = theta.sin();
        let (sp, cp) = phi.sin_cos();
        let kt_x = self.kp_x - self.g + kh * st * cp;
        let kt_y = -kh * sp;
        let kt_z = (kt * kt - kt_x * kt_x - kt_y * kt_y).sqrt();
        (kt, kt_x, kt_y, kt_z)
    }

    /// Δk_z for a heralded photon at `energy` (keV) travelling at angle `theta`
    /// to the planes and `phi` out of plane (radians). NaN when the implied
    /// trigger wavevector cannot propagate.
    #[inline]
    pub fn mismatch_at(&self, energy: f64, theta: f64, phi: f64) -> f64 {
        let kh = wavenumber(energy);
        let (_, _, _, kt_z) = self.trigger_k(energy, theta, phi);
        self.kp_z - kh * theta.cos() * phi.cos() - kt_z
    }

    /// ∂Δk_z/∂θ at fixed energy and φ.
    #[inline]
    pub fn mismatch_slope_at(&self, energy: f64, theta: f64, phi: f64) -> f64 {
        let kh = wavenumber(energy);
        let (_, kt_x, _, kt_z) = self.trigger_k(energy, theta, phi);
        let (st, ct) = theta.sin_cos();
        kh * phi.cos() * (st + kt_x * ct / kt_z)
    }

    /// Δk_z at a grid offset from the central heralded direction.
    #[inline]
    pub fn mismatch(&self, energy: f64, theta_x: f64, theta_y: f64) -> f64 {
        self.mismatch_at(energy, self.heralded_center + theta_x, theta_y)
    }

    pub fn trigger_at(&self, energy: f64, theta: f64, phi: f64) -> TriggerDirection {
        let (kt, kt_x, kt_y, _) = self.trigger_k(energy, theta, phi);
        TriggerDirection {
            theta: (-kt_x / kt).asin(),
            phi: (kt_y / kt).asin(),
        }
    }

    /// First-order two-photon amplitude (coefficient of a_t†(0) in a_h(L)) at a
    /// single point of (energy, θx, θy).
    pub fn amplitude(&self, coupling: f64, energy: f64, theta_x: f64, theta_y: f64) -> Complex64 {
        let half_phase = 0.5 * self.mismatch(energy, theta_x, theta_y) * self.length;
        Complex64::from_polar(coupling * sinc(half_phase), half_phase)
    }

    /// Root of Δk_z(energy, θ, 0) nearest to `guess`, searched within ±2°.
    pub fn solve_heralded_angle(&self, energy: f64, guess: f64) -> Result<f64> {
        let f = |theta: f64| self.mismatch_at(energy, theta, 0.0);
        let step = 1e-4;
        for i in 0..350 {
            for dir in [1.0, -1.0] {
                let a = guess + dir * step * i as f64;
                let b = a + dir * step;
                let (fa, fb) = (f(a), f(b));
                if fa.is_finite() && fb.is_finite() && fa * fb <= 0.0 {
                    return Ok(bisect(f, a.min(b), a.max(b)));
                }
            }
        }
        Err(Error::Domain(format!(
            "no phase-matching angle for {energy} keV within 2 degrees of {:.3} degrees",
            guess.to_degrees()
        )))
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Cell-centred grid over heralded energy and the two transverse angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// keV
    pub energy_lo: f64,
    /// keV
    pub energy_hi: f64,
    pub energy_cells: usize,
    /// Full angular span of each transverse axis, radians.
    pub angle_span: f64,
    pub theta_x_cells: usize,
    pub theta_y_cells: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            energy_lo: 8.5,
            energy_hi: 12.5,
            energy_cells: 201,
            angle_span: 5e-3,
            theta_x_cells: 41,
            theta_y_cells: 41,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_lo > 0.0 && self.energy_hi > self.energy_lo) {
            return Err(Error::invalid("grid.energy", "need 0 < energy_lo < energy_hi"));
        }
        if !(self.angle_span > 0.0) {
            return Err(Error::invalid("grid.angle_span", "must be positive"));
        }
        if self.energy_cells == 0 || self.theta_x_cells == 0 || self.theta_y_cells == 0 {
            return Err(Error::invalid("grid", "cell counts must be positive"));
        }
        Ok(())
    }

    /// Same window, every axis resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            energy_cells: self.energy_cells * factor,
            theta_x_cells: self.theta_x_cells * factor,
            theta_y_cells: self.theta_y_cells * factor,
            ..*self
        }
    }

    pub fn energy_step(&self) -> f64 {
        (self.energy_hi - self.energy_lo) / self.energy_cells as f64
    }

    pub fn theta_x_step(&self) -> f64 {
        self.angle_span / self.theta_x_cells as f64
    }

    pub fn theta_y_step(&self) -> f64 {
        self.angle_span / self.theta_y_cells as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.energy_step() * self.theta_x_step() * self.theta_y_step()
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.energy_lo + (i as f64 + 0.5) * self.energy_step()
    }

    pub fn theta_x(&self, j: usize) -> f64 {
        -0.5 * self.angle_span + (j as f64 + 0.5) * self.theta_x_step()
    }

    pub fn theta_y(&self, k: usize) -> f64 {
        -0.5 * self.angle_span + (k as f64 + 0.5) * self.theta_y_step()
    }

    pub fn len(&self) -> usize {
        self.energy_cells * self.theta_x_cells * self.theta_y_cells
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.theta_x_cells + j) * self.theta_y_cells + k
    }

    #[inline]
    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.theta_y_cells;
        let rest = idx / self.theta_y_cells;
        (rest / self.theta_x_cells, rest % self.theta_x_cells, k)
    }

    pub fn contains_energy(&self, energy: f64) -> bool {
        energy >= self.energy_lo && energy <= self.energy_hi
    }
}

/// One grid cell's coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub energy: f64,
    pub theta_x: f64,
    pub theta_y: f64,
}

/// Discretised biphoton amplitude.
///
/// `amplitude` holds the first-order solution sampled at each cell centre.
/// The phase-matching ridge is only microradians wide for a sub-millimetre
/// crystal, far narrower than any practical cell, so every quadrature uses
/// `intensity`: the exact mean of |amplitude|² across the cell's θx extent
/// (Δk_z linearised in θx within the cell), and `centroid` the
/// intensity-weighted mean θx inside the cell, where filters are evaluated.
/// Amplitude and intensity are normalised so that
/// Σ intensity·ΔV = 1; `scale()` recovers the unnormalised values.
#[derive(Debug, Clone)]
pub struct JointAmplitude {
    grid: GridSpec,
    geometry: PairGeometry,
    amplitude: Vec<Complex64>,
    intensity: Vec<f64>,
    centroid: Vec<f64>,
    scale: f64,
}

/// Build the first-order biphoton amplitude on `grid`.
pub fn biphoton_amplitude(config: &SpdcConfig, grid: &GridSpec) -> Result<JointAmplitude> {
    grid.validate()?;
    let geometry = PairGeometry::new(config)?;
    if grid.energy_lo <= 0.0 || grid.energy_hi >= config.pump_energy {
        return Err(Error::invalid("grid.energy", "heralded energies must lie inside (0, pump energy)"));
    }
    let coupling = config.coupling;
    let half_len = 0.5 * geometry.length;
    let hx = grid.theta_x_step();
    let plane = grid.theta_x_cells * grid.theta_y_cells;

    let mut amplitude = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut intensity = vec![0.0; grid.len()];
    let mut centroid = vec![0.0; grid.len()];
    amplitude
        .par_chunks_mut(plane)
        .zip(intensity.par_chunks_mut(plane))
        .zip(centroid.par_chunks_mut(plane))
        .enumerate()
        .for_each(|(i, ((amp_row, int_row), cen_row))| {
            let energy = grid.energy(i);
            for j in 0..grid.theta_x_cells {
                let theta = geometry.heralded_center + grid.theta_x(j);
                for k in 0..grid.theta_y_cells {
                    let phi = grid.theta_y(k);
                    let dk = geometry.mismatch_at(energy, theta, phi);
                    let idx = j * grid.theta_y_cells + k;
                    cen_row[idx] = grid.theta_x(j);
                    if !dk.is_finite() {
                        continue;
                    }
                    let half_phase = half_len * dk;
                    amp_row[idx] = Complex64::from_polar(coupling * sinc(half_phase), half_phase);
                    let slope = geometry.mismatch_slope_at(energy, theta, phi);
                    let spread = half_len * slope * 0.5 * hx;
                    let (lo, hi) = (half_phase - spread, half_phase + spread);
                    let mean = sinc2_mean(lo, hi);
                    int_row[idx] = coupling * coupling * mean;
                    let mass = mean * (hi - lo);
                    if mass.abs() > 1e-300 && spread != 0.0 {
                        let offset = sinc2_first_moment(lo, hi) / mass - half_phase;
                        cen_row[idx] += (offset / (half_len * slope)).clamp(-0.5 * hx, 0.5 * hx);
                    }
                }
            }
        });

    let raw_total: f64 = intensity.iter().sum::<f64>() * grid.cell_volume();
    if !(raw_total > 0.0) {
        return Err(Error::Domain("no phase-matched cells inside the grid window".into()));
    }
    let scale = raw_total.sqrt();
    amplitude.par_iter_mut().for_each(|a| *a /= scale);
    intensity.par_iter_mut().for_each(|v| *v /= raw_total);

    Ok(JointAmplitude {
        grid: *grid,
        geometry,
        amplitude,
        intensity,
        centroid,
        scale,
    })
}

impl JointAmplitude {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn geometry(&self) -> &PairGeometry {
        &self.geometry
    }

    pub fn pump_energy(&self) -> f64 {
        self.geometry.pump_energy
    }

    /// Normalised first-order amplitude at each cell centre.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitude
    }

    /// Normalised cell-mean intensity; Σ intensity·ΔV = 1.
    pub fn intensities(&self) -> &[f64] {
        &self.intensity
    }

    /// Intensity-weighted mean θx of each cell, radians.
    pub fn centroids(&self) -> &[f64] {
        &self.centroid
    }

    /// Unnormalised scale: raw = normalised × scale (amplitude) or × scale² (intensity).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn cell(&self, idx: usize) -> Cell {
        let (i, j, k) = self.grid.unflatten(idx);
        Cell {
            energy: self.grid.energy(i),
            theta_x: self.grid.theta_x(j),
            theta_y: self.grid.theta_y(k),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "energy_kev,theta_x_rad,theta_y_rad,intensity")?;
        for (idx, v) in self.intensity.iter().enumerate() {
            let c = self.cell(idx);
            writeln!(out, "{},{},{},{}", c.energy, c.theta_x, c.theta_y, v)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Spectral/angular amplitude filter applied to the heralded photon.
pub trait SpectralAngularFilter: Sync {
    /// Amplitude transmission at heralded `energy` (keV) and grid offsets (rad).
    fn amplitude(&self, energy: f64, theta_x: f64, theta_y: f64) -> f64;

    fn check_domain(&self, _grid: &GridSpec) -> Result<()> {
        Ok(())
    }
}

impl<F> SpectralAngularFilter for F
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    fn amplitude(&self, energy: f64, theta_x: f64, theta_y: f64) -> f64 {
        self(energy, theta_x, theta_y)
    }
}

/// No filtering.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unfiltered;

impl SpectralAngularFilter for Unfiltered {
    fn amplitude(&self, _: f64, _: f64, _: f64) -> f64 {
        1.0
    }
}

/// Energy-dependent loss of a pair, as a function of heralded energy.
pub trait PairLoss: Sync {
    fn transmission(&self, heralded_energy: f64) -> f64;
}

impl<F> PairLoss for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn transmission(&self, heralded_energy: f64) -> f64 {
        self(heralded_energy)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Lossless;

impl PairLoss for Lossless {
    fn transmission(&self, _: f64) -> f64 {
        1.0
    }
}

/// Coincidence rate normalised to the unfiltered, lossless rate over the grid:
/// Σ intensity·|filter|²·loss·ΔV.
pub fn coincidence_rate(
    amp: &JointAmplitude,
    filter: &dyn SpectralAngularFilter,
    loss: &dyn PairLoss,
) -> Result<f64> {
    filter.check_domain(&amp.grid)?;
    Ok(energy_marginal(amp, filter, loss)?.iter().map(|(_, d)| d).sum::<f64>() * amp.grid.energy_step())
}

/// Unnormalised coincidence rate (rate × scale²), comparable across grids of
/// the same configuration.
pub fn coincidence_flux(
    amp: &JointAmplitude,
    filter: &dyn SpectralAngularFilter,
    loss: &dyn PairLoss,
) -> Result<f64> {
    Ok(coincidence_rate(amp, filter, loss)? * amp.scale * amp.scale)
}

/// Heralded-energy spectrum: per energy row, Σ over angles of
/// intensity·|filter|²·loss·Δθx·Δθy (a density per keV).
pub fn energy_marginal(
    amp: &JointAmplitude,
    filter: &dyn SpectralAngularFilter,
    loss: &dyn PairLoss,
) -> Result<Vec<(f64, f64)>> {
    let grid = amp.grid;
    filter.check_domain(&grid)?;
    let plane = grid.theta_x_cells * grid.theta_y_cells;
    let area = grid.theta_x_step() * grid.theta_y_step();
    Ok(amp
        .intensity
        .par_chunks(plane)
        .zip(amp.centroid.par_chunks(plane))
        .enumerate()
        .map(|(i, (row, cen))| {
            let energy = grid.energy(i);
            let mut acc = 0.0;
            for (idx, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let k = idx % grid.theta_y_cells;
                let f = filter.amplitude(energy, cen[idx], grid.theta_y(k));
                acc += v * f * f;
            }
            (energy, acc * area * loss.transmission(energy))
        })
        .collect())
}

/// Normalised reflected rate for each Bragg angle (degrees) of a splitter family.
pub fn bragg_angle_sweep<F, S>(
    amp: &JointAmplitude,
    splitter_family: F,
    sweep_deg: &[f64],
    loss: &dyn PairLoss,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<S>,
    S: SpectralAngularFilter,
{
    sweep_deg
        .iter()
        .map(|&deg| {
            if !(deg > 0.0 && deg < 90.0) {
                return Err(Error::invalid("sweep", format!("Bragg angle {deg} outside (0, 90) degrees")));
            }
            let filter = splitter_family(deg)?;
            Ok((deg, coincidence_rate(amp, &filter, loss)?))
        })
        .collect()
}
