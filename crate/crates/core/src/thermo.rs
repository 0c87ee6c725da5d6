//! Canonical thermodynamics and density-of-states reconstruction.
//!
//! The forward direction synthesizes the measurable curve: `E(T)`, the heat
//! capacity `C = dE/dT` and the entropy `S(T)` obtained by integrating
//! `C/T` from the lowest grid point (`k_B = 1` throughout). The inverse
//! direction recovers a density of states from such a curve via
//! `ρ(E(T)) ∝ e^{S(T)} / sqrt(2π T² C(T))`, the steepest-descent inversion
//! of the canonical partition sum, and feeds its standardized fourth moment
//! to the subsystem counter.
//!
//! Positive temperatures reach only energies below the infinite-temperature
//! mean, so the sampled branch covers the lower half of the spectrum; the
//! upper half is completed by even reflection about the extrapolated
//! infinite-temperature energy. Only standardized moments are consumed
//! downstream, which are insensitive to the overall normalization. The even
//! completion means odd moments of the reconstruction vanish identically,
//! and even moments of spectra with asymmetric densities carry a completion
//! bias of a few percent; the low-temperature entropy anchor `ln(g₀)` is an
//! overall factor on `e^S` and cancels from every standardized moment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{count_from_mu4, SubsystemCount};
use crate::spectra::Spectrum;

/// Default temperature grid: `DEFAULT_THERMO_POINTS` log-spaced points over
/// `[0.05, 50] · stddev(E)`.
pub const DEFAULT_THERMO_POINTS: usize = 200;
pub const THERMO_T_MIN_FACTOR: f64 = 0.05;
pub const THERMO_T_MAX_FACTOR: f64 = 50.0;

/// Resolution of the reconstructed fourth moment: grid discretization plus
/// the even-completion bias hold `μ₄` to a couple of percent, so smaller
/// deviations from 3 are Gaussian-compatible at this pipeline's accuracy.
pub const RECONSTRUCTION_DELTA_FLOOR: f64 = 0.05;

/// Canonical curves over an ascending positive temperature grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermoCurve {
    pub temperatures: Vec<f64>,
    pub energy: Vec<f64>,
    pub heat_capacity: Vec<f64>,
    pub entropy: Vec<f64>,
}

impl ThermoCurve {
    /// Check the physical invariants: E and S non-decreasing, C bounded
    /// below by the finite-difference tolerance.
    pub fn validate(&self) -> Result<()> {
        let n = self.temperatures.len();
        if self.energy.len() != n || self.heat_capacity.len() != n || self.entropy.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: self.energy.len(),
            });
        }
        if self.energy.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Numerical("E(T) decreasing".into()));
        }
        if self.entropy.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::Numerical("S(T) decreasing".into()));
        }
        let c_scale = self
            .heat_capacity
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
            .max(1.0);
        if self.heat_capacity.iter().any(|&c| c < -1e-8 * c_scale) {
            return Err(Error::Numerical("negative heat capacity".into()));
        }
        Ok(())
    }
}

/// Log-spaced default grid spanning `[0.05, 50] · stddev(E)`.
pub fn default_temperature_grid(s: &Spectrum, n: usize) -> Vec<f64> {
    let sd = s.stddev().max(f64::MIN_POSITIVE);
    let lo = THERMO_T_MIN_FACTOR * sd;
    let hi = THERMO_T_MAX_FACTOR * sd;
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Ground-state degeneracy, counted at tolerance `1e-9` relative to the
/// spectral spread.
pub fn ground_state_degeneracy(s: &Spectrum) -> usize {
    let tol = 1e-9 * (s.max() - s.min()).max(1.0);
    s.energies()
        .iter()
        .take_while(|&&e| e - s.min() <= tol)
        .count()
}

/// Canonical `E(T)`, `C(T)` and `S(T)` over the given grid.
///
/// Boltzmann weights are evaluated with the ground-state shift for
/// stability. `C` comes from second-order finite differences on the
/// (generally non-uniform) grid; `S` integrates `C/T` by trapezoid from the
/// lowest grid point, anchored at `ln(g₀)`.
pub fn forward_thermo(s: &Spectrum, t_grid: &[f64]) -> Result<ThermoCurve> {
    if t_grid.is_empty() {
        return Err(Error::Empty("temperature grid"));
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::NonPositiveTemperature(t));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidOptions(
            "temperature grid must be strictly ascending".into(),
        ));
    }
    if t_grid.len() < 3 {
        return Err(Error::InvalidOptions(
            "need at least 3 temperatures for finite differences".into(),
        ));
    }

    let e0 = s.min();
    let energy: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let beta = 1.0 / t;
            let mut z = 0.0;
            let mut ez = 0.0;
            for &e in s.energies() {
                let w = (-(e - e0) * beta).exp();
                z += w;
                ez += e * w;
            }
            ez / z
        })
        .collect();

    let heat_capacity = nonuniform_derivative(t_grid, &energy);

    let g0 = ground_state_degeneracy(s);
    let mut entropy = Vec::with_capacity(t_grid.len());
    let mut acc = (g0 as f64).ln();
    entropy.push(acc);
    for i in 1..t_grid.len() {
        let f_prev = heat_capacity[i - 1] / t_grid[i - 1];
        let f_here = heat_capacity[i] / t_grid[i];
        acc += 0.5 * (f_prev + f_here) * (t_grid[i] - t_grid[i - 1]);
        entropy.push(acc);
    }

    let curve = ThermoCurve {
        temperatures: t_grid.to_vec(),
        energy,
        heat_capacity,
        entropy,
    };
    curve.validate()?;
    Ok(curve)
}

/// Second-order derivative estimate on a non-uniform ascending grid;
/// one-sided at the ends.
fn nonuniform_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut dy = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = x[i] - x[i - 1];
        let h2 = x[i + 1] - x[i];
        dy[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1]
            + (h2 - h1) / (h1 * h2) * y[i]
            + h1 / (h2 * (h1 + h2)) * y[i + 1];
    }
    {
        let h1 = x[1] - x[0];
        let h2 = x[2] - x[1];
        dy[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0]
            + (h1 + h2) / (h1 * h2) * y[1]
            - h1 / (h2 * (h1 + h2)) * y[2];
        let g1 = x[n - 1] - x[n - 2];
        let g2 = x[n - 2] - x[n - 3];
        dy[n - 1] = (2.0 * g1 + g2) / (g1 * (g1 + g2)) * y[n - 1]
            - (g1 + g2) / (g1 * g2) * y[n - 2]
            + g1 / (g2 * (g1 + g2)) * y[n - 3];
    }
    dy
}

/// Closed-form canonical entropy `S = (E - F)/T`, `F = -T ln Z`; the
/// cross-check for the integrated curve.
pub fn entropy_closed_form(s: &Spectrum, t: f64) -> f64 {
    let e0 = s.min();
    let beta = 1.0 / t;
    let mut z = 0.0;
    let mut ez = 0.0;
    for &e in s.energies() {
        let w = (-(e - e0) * beta).exp();
        z += w;
        ez += e * w;
    }
    let energy = ez / z;
    let free = e0 - t * z.ln();
    (energy - free) / t
}

/// Weighted density-of-states samples recovered from a thermodynamic curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DosReconstruction {
    /// Sample energies, ascending (lower branch plus mirrored upper branch).
    pub energies: Vec<f64>,
    /// Density values at the samples, normalized to unit trapezoidal mass.
    pub densities: Vec<f64>,
}

impl DosReconstruction {
    /// Trapezoidal integral of `f(E) · ρ(E)`.
    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.energies.len() {
            let de = self.energies[i] - self.energies[i - 1];
            acc += 0.5
                * de
                * (f(self.energies[i - 1]) * self.densities[i - 1]
                    + f(self.energies[i]) * self.densities[i]);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|e| e)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.integrate(|e| (e - m) * (e - m))
    }

    /// Standardized central moment of the reconstructed density.
    pub fn standardized_moment(&self, k: u32) -> f64 {
        let m = self.mean();
        let sd = self.variance().sqrt();
        self.integrate(|e| ((e - m) / sd).powi(k as i32))
    }
}

/// Recover a density of states from a thermodynamic curve.
///
/// Samples `(E(T_k), ρ_k)` with `ρ_k = e^{S_k} / sqrt(2π T_k² C_k)`; the
/// upper spectral branch is completed by reflecting about the extrapolated
/// infinite-temperature energy and the result is normalized to integrate
/// to 1. Requires `E(T)` strictly increasing.
pub fn reconstruct_dos(curve: &ThermoCurve) -> Result<DosReconstruction> {
    curve.validate()?;
    let n = curve.temperatures.len();
    let spread = (curve.energy[n - 1] - curve.energy[0]).abs().max(1.0);

    // Keep a strictly increasing subsequence of E(T): frozen low-temperature
    // plateaus collapse to their first sample, while an actual decrease
    // signals a grid too coarse to invert.
    let mut kept: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        match kept.last() {
            None => kept.push(k),
            Some(&prev) => {
                let de = curve.energy[k] - curve.energy[prev];
                if de > 0.0 {
                    kept.push(k);
                } else if de < -1e-12 * spread {
                    return Err(Error::NonMonotoneEnergy(k));
                }
            }
        }
    }
    if kept.len() < 3 {
        return Err(Error::NonMonotoneEnergy(0));
    }

    // Log-density with the steepest-descent width factor; the clamp keeps
    // the (measure-zero) low-temperature edge finite.
    let c_max = curve
        .heat_capacity
        .iter()
        .fold(f64::MIN_POSITIVE, |m, &c| m.max(c));
    let s_max = curve.entropy.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let log_rho_at = |k: usize| {
        let t = curve.temperatures[k];
        let c = curve.heat_capacity[k].max(1e-12 * c_max);
        curve.entropy[k] - s_max - 0.5 * (2.0 * std::f64::consts::PI * t * t * c).ln()
    };

    // Infinite-temperature energy from the high-T expansion
    // E(T) ~ E_inf - var/T, var = C T².
    let t_last = curve.temperatures[n - 1];
    let e_inf = curve.energy[n - 1] + curve.heat_capacity[n - 1].max(0.0) * t_last;

    let mut energies = Vec::with_capacity(2 * kept.len());
    let mut densities = Vec::with_capacity(2 * kept.len());
    for &k in &kept {
        energies.push(curve.energy[k]);
        densities.push(log_rho_at(k).exp());
    }
    // Mirror branch, descending energies reversed to keep the list sorted.
    for &k in kept.iter().rev() {
        let reflected = 2.0 * e_inf - curve.energy[k];
        if reflected > *energies.last().expect("nonempty") {
            energies.push(reflected);
            densities.push(log_rho_at(k).exp());
        }
    }

    let mut recon = DosReconstruction {
        energies,
        densities,
    };
    let total = recon.integrate(|_| 1.0);
    if !(total > 0.0) {
        return Err(Error::Numerical("reconstructed density has no mass".into()));
    }
    for d in &mut recon.densities {
        *d /= total;
    }
    Ok(recon)
}

/// Subsystem count from a thermodynamic curve, with the Gaussianity floor
/// set to the reconstruction resolution [`RECONSTRUCTION_DELTA_FLOOR`].
pub fn count_from_thermo(curve: &ThermoCurve) -> Result<SubsystemCount> {
    count_from_thermo_with_floor(curve, RECONSTRUCTION_DELTA_FLOOR)
}

pub fn count_from_thermo_with_floor(curve: &ThermoCurve, floor: f64) -> Result<SubsystemCount> {
    let recon = reconstruct_dos(curve)?;
    Ok(count_from_mu4(recon.standardized_moment(4), floor))
}
