//! Moment analysis of spectra and operator sums.
//!
//! Standardized spectral moments are compared against the Gaussian reference
//! values (0 for odd orders, `(k-1)!!` for even orders). The deviations
//! `Δ_k = |μ_k - μ_k^gauss|` carry the subsystem-counting signal: for a sum
//! of `M` commuting strings the fourth moment obeys `μ₄ = 3 - 2·Σh⁴/(Σh²)²`,
//! so `M ≈ 2/Δ₄` counts the elementary subsystems.
//!
//! Moments of an [`OperatorSum`] are also computed exactly by enumerating
//! string contractions, with no diagonalization involved; this is what makes
//! the `Δ₄ ∝ 1/L` scaling observable out to chains far beyond dense reach.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{pauli_mul, build_model, ModelSpec, OperatorSum, PauliString};
use crate::spectra::Spectrum;

/// Highest moment order supported by the string-enumeration path.
pub const MAX_STRING_MOMENT: u32 = 6;

/// Enumeration budget for [`exact_string_moment`]: `M^(k-1)` tuples.
pub const STRING_MOMENT_WORK_CAP: u128 = 1_000_000_000;

/// Cap on [`chord_pairings`] enumeration.
pub const CHORD_ENUMERATION_CAP: u32 = 8;

/// Default floor on `Δ₄` below which a spectrum counts as Gaussian.
///
/// The floor is configurable because it must reflect how the spectrum was
/// obtained: exact spectra resolve `Δ₄` to machine precision, while the
/// kurtosis of `D` Monte-Carlo samples fluctuates with standard error
/// `sqrt(24/D)` (see [`kurtosis_noise_floor`]).
pub const DEFAULT_DELTA_FLOOR: f64 = 1e-6;

/// Standardized moments of a spectrum and their Gaussian deviations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    /// Standardized central moments, orders `3..=k_max`.
    pub standardized_moments: BTreeMap<u32, f64>,
    /// `Δ_k`: absolute deviation from the Gaussian moment, orders `3..=k_max`.
    pub deltas: BTreeMap<u32, f64>,
    /// Subsystem-count estimate when finite; filled by [`count_subsystems`].
    pub m_hat: Option<f64>,
}

/// Outcome of the fourth-moment subsystem counter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubsystemCount {
    /// `M ≈ 2/Δ₄` elementary subsystems.
    Finite { m_hat: f64 },
    /// Gaussian within the floor: the spectrum admits arbitrarily fine
    /// partitioning.
    Unbounded,
    /// `μ₄ > 3`: heavier-than-Gaussian tails, outside the model class the
    /// counter assumes. The formal `2/Δ₄` value is reported flagged.
    HeavyTailed { m_hat: f64 },
}

impl std::fmt::Display for SubsystemCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubsystemCount::Finite { m_hat } => write!(f, "{m_hat:.4}"),
            SubsystemCount::Unbounded => f.write_str("unbounded"),
            SubsystemCount::HeavyTailed { m_hat } => write!(f, "heavy-tailed ({m_hat:.4})"),
        }
    }
}

/// Moments of the standardized spectrum `(E - mean)/stddev`.
pub fn standardized_moments(s: &Spectrum, k_max: u32) -> Result<MomentReport> {
    if k_max < 3 {
        return Err(Error::BadMomentOrder(k_max));
    }
    if s.len() < 2 {
        return Err(Error::InvalidSpectrum(
            "need at least 2 energies for moments".into(),
        ));
    }
    let mean = s.mean();
    let variance = s.variance();
    if variance <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sd = variance.sqrt();
    let n = s.len() as f64;
    let mut standardized = BTreeMap::new();
    let mut deltas = BTreeMap::new();
    for k in 3..=k_max {
        let mk = s
            .energies()
            .iter()
            .map(|e| ((e - mean) / sd).powi(k as i32))
            .sum::<f64>()
            / n;
        standardized.insert(k, mk);
        deltas.insert(k, (mk - gaussian_moment(k)).abs());
    }
    Ok(MomentReport {
        mean,
        variance,
        standardized_moments: standardized,
        deltas,
        m_hat: None,
    })
}

/// `k`-th moment of the standard Gaussian: `(k-1)!!` for even `k`, 0 for odd.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let mut acc = 1.0;
    let mut m = k as i64 - 1;
    while m > 1 {
        acc *= m as f64;
        m -= 2;
    }
    acc
}

/// Number of perfect pairings of `2k` vertices, by explicit enumeration.
///
/// Counts the chord diagrams behind the Gaussian moments; the closed form
/// `(2k-1)!!` is asserted against this enumeration in the tests rather than
/// used here.
pub fn chord_pairings(k: u32) -> Result<u64> {
    if k == 0 || k > CHORD_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            work: k as u128,
            cap: CHORD_ENUMERATION_CAP as u128,
        });
    }
    let mut free = vec![true; 2 * k as usize];
    Ok(count_pairings(&mut free))
}

fn count_pairings(free: &mut [bool]) -> u64 {
    // Pair the first free vertex with every later free vertex, recurse.
    let first = match free.iter().position(|&f| f) {
        Some(i) => i,
        None => return 1,
    };
    free[first] = false;
    let mut total = 0;
    for j in (first + 1)..free.len() {
        if free[j] {
            free[j] = false;
            total += count_pairings(free);
            free[j] = true;
        }
    }
    free[first] = true;
    total
}

/// `(1/2^N)·Tr(H^k)` by exact enumeration of string contractions.
///
/// The trace of an ordered product vanishes unless the product of the first
/// `k-1` strings matches the last one, so the sum over `M^k` index tuples is
/// evaluated by enumerating `M^(k-1)` tuples and resolving the closing index
/// with a mask lookup. The result is identical to the full `M^k` sum; the
/// `M^(k-1)` enumeration count is what the work guard bounds.
pub fn exact_string_moment(op: &OperatorSum, k: u32) -> Result<f64> {
    if k > MAX_STRING_MOMENT {
        return Err(Error::BadMomentOrder(k));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let m = op.n_terms();
    if m == 0 {
        return Ok(0.0);
    }
    let work = (m as u128).pow(k - 1);
    if work > STRING_MOMENT_WORK_CAP {
        return Err(Error::EnumerationCap {
            work,
            cap: STRING_MOMENT_WORK_CAP,
        });
    }

    let lookup: HashMap<(u128, u128), f64> = op
        .terms()
        .iter()
        .map(|(c, s)| ((s.x_mask(), s.z_mask()), *c))
        .collect();

    if k == 1 {
        return Ok(op.identity_coefficient());
    }

    // Parallel over the first index, strictly ordered reduction afterwards so
    // the floating-point result is independent of thread count.
    let partials: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|first| {
            let (c0, s0) = op.terms()[first];
            let mut acc = Complex64::new(0.0, 0.0);
            tuple_sum(op, &lookup, &s0, c0, k - 2, &mut acc);
            acc
        })
        .collect();
    let total: Complex64 = partials.into_iter().sum();

    debug_assert!(
        total.im.abs() <= 1e-9 * (1.0 + total.re.abs()),
        "Hermitian moment has imaginary residue {}",
        total.im
    );
    Ok(total.re)
}

/// Extend a partial product by `remaining` more strings, then close the
/// trace with the lookup.
fn tuple_sum(
    op: &OperatorSum,
    lookup: &HashMap<(u128, u128), f64>,
    prefix: &PauliString,
    coeff: f64,
    remaining: u32,
    acc: &mut Complex64,
) {
    if remaining == 0 {
        if let Some(&h) = lookup.get(&(prefix.x_mask(), prefix.z_mask())) {
            // Closing string equals the running product; the pair multiplies
            // to the identity with phase +1, so only the prefix phase enters.
            *acc += coeff * h;
        }
        return;
    }
    for (c, s) in op.terms() {
        let (product, phase) = pauli_mul(prefix, s).expect("uniform site count");
        let mut sub = Complex64::new(0.0, 0.0);
        tuple_sum(op, lookup, &product, coeff * c, remaining - 1, &mut sub);
        *acc += phase.to_complex() * sub;
    }
}

/// Standardized `k`-th moment of an operator sum via string enumeration.
pub fn string_standardized_moment(op: &OperatorSum, k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::BadMomentOrder(k));
    }
    let raw: Vec<f64> = (0..=k)
        .map(|j| exact_string_moment(op, j))
        .collect::<Result<_>>()?;
    let mean = raw[1];
    let central = |order: u32| -> f64 {
        (0..=order)
            .map(|j| {
                binomial(order, j) * raw[j as usize] * (-mean).powi((order - j) as i32)
            })
            .sum()
    };
    let var = central(2);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(central(k) / var.powf(k as f64 / 2.0))
}

/// `Δ_k` of an operator sum via string enumeration.
pub fn string_delta(op: &OperatorSum, k: u32) -> Result<f64> {
    Ok((string_standardized_moment(op, k)? - gaussian_moment(k)).abs())
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Estimate the number of elementary subsystems from the spectrum alone,
/// using the default Gaussianity floor.
pub fn count_subsystems(s: &Spectrum) -> Result<SubsystemCount> {
    count_subsystems_with_floor(s, DEFAULT_DELTA_FLOOR)
}

/// Subsystem count with an explicit `Δ₄` floor.
///
/// `M = 2/Δ₄` when `μ₄ < 3`; `Unbounded` when `Δ₄ ≤ floor`; a flagged
/// heavy-tailed value when `μ₄ > 3`. For sampled spectra pass a floor of a
/// few [`kurtosis_noise_floor`] standard errors.
pub fn count_subsystems_with_floor(s: &Spectrum, floor: f64) -> Result<SubsystemCount> {
    let report = standardized_moments(s, 4)?;
    Ok(count_from_report(&report, floor))
}

/// Counting rule applied to an existing moment report.
pub fn count_from_report(report: &MomentReport, floor: f64) -> SubsystemCount {
    count_from_mu4(report.standardized_moments[&4], floor)
}

/// Counting rule applied to a standardized fourth moment.
pub fn count_from_mu4(mu4: f64, floor: f64) -> SubsystemCount {
    let delta4 = (mu4 - 3.0).abs();
    if delta4 <= floor {
        SubsystemCount::Unbounded
    } else if mu4 < 3.0 {
        SubsystemCount::Finite {
            m_hat: 2.0 / delta4,
        }
    } else {
        SubsystemCount::HeavyTailed {
            m_hat: 2.0 / delta4,
        }
    }
}

/// Standard error of the sample kurtosis of `len` Gaussian draws, times
/// `n_sigma`.
pub fn kurtosis_noise_floor(len: usize, n_sigma: f64) -> f64 {
    n_sigma * (24.0 / len as f64).sqrt()
}

/// Normalized density of states over uniform bins.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DosHistogram {
    bin_edges: Vec<f64>,
    densities: Vec<f64>,
}

impl DosHistogram {
    /// Wrap edges and densities; the density must integrate to 1.
    pub fn new(bin_edges: Vec<f64>, densities: Vec<f64>) -> Result<DosHistogram> {
        if bin_edges.len() != densities.len() + 1 || densities.is_empty() {
            return Err(Error::InvalidOptions(
                "histogram needs n+1 edges for n bins".into(),
            ));
        }
        if bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidOptions("bin edges not ascending".into()));
        }
        if densities.iter().any(|d| *d < 0.0 || !d.is_finite()) {
            return Err(Error::InvalidOptions("negative or non-finite density".into()));
        }
        let h = DosHistogram {
            bin_edges,
            densities,
        };
        let total = h.total_mass();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidOptions(format!(
                "density integrates to {total}, expected 1"
            )));
        }
        Ok(h)
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }

    /// Uniform bin width.
    pub fn bin_width(&self) -> f64 {
        (self.bin_edges[self.bin_edges.len() - 1] - self.bin_edges[0]) / self.n_bins() as f64
    }

    pub fn support(&self) -> (f64, f64) {
        (self.bin_edges[0], self.bin_edges[self.bin_edges.len() - 1])
    }

    fn total_mass(&self) -> f64 {
        self.bin_edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (w[1] - w[0]) * d)
            .sum()
    }

    /// Per-bin probability masses.
    pub fn masses(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (w[1] - w[0]) * d)
            .collect()
    }

    fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn mean(&self) -> f64 {
        self.centers()
            .iter()
            .zip(self.masses())
            .map(|(c, m)| c * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.centers()
            .iter()
            .zip(self.masses())
            .map(|(c, m)| (c - mean) * (c - mean) * m)
            .sum()
    }

    /// Standardized central moment from bin centers and masses.
    pub fn standardized_moment(&self, k: u32) -> f64 {
        let mean = self.mean();
        let sd = self.variance().sqrt();
        self.centers()
            .iter()
            .zip(self.masses())
            .map(|(c, m)| ((c - mean) / sd).powi(k as i32) * m)
            .sum()
    }

    /// `L1` distance between two piecewise-constant densities, integrating
    /// over the union of both edge grids.
    pub fn l1_distance(&self, other: &DosHistogram) -> f64 {
        let mut edges: Vec<f64> = self
            .bin_edges
            .iter()
            .chain(other.bin_edges.iter())
            .copied()
            .collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut total = 0.0;
        for w in edges.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let fa = self.density_at(mid);
            let fb = other.density_at(mid);
            total += (fa - fb).abs() * (w[1] - w[0]);
        }
        total
    }

    fn density_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x >= hi {
            return 0.0;
        }
        let idx = ((x - lo) / self.bin_width()) as usize;
        self.densities[idx.min(self.n_bins() - 1)]
    }

    /// Rebin to a uniform target width (mass split by overlap). Useful for
    /// comparing densities built on very different grids, e.g. a fine
    /// convolution against a coarse direct histogram.
    pub fn rebinned(&self, width: f64) -> DosHistogram {
        self.rebin(width)
    }

    fn rebin(&self, width: f64) -> DosHistogram {
        let (lo, hi) = self.support();
        let n_new = ((hi - lo) / width).ceil().max(1.0) as usize;
        let masses = self.masses();
        let mut new_masses = vec![0.0; n_new];
        for (i, m) in masses.iter().enumerate() {
            let a = self.bin_edges[i];
            let b = self.bin_edges[i + 1];
            let first = (((a - lo) / width).floor() as usize).min(n_new - 1);
            let last = ((((b - lo) / width).ceil() as usize).max(first + 1)).min(n_new);
            for j in first..last {
                let ja = lo + j as f64 * width;
                let jb = ja + width;
                let overlap = (b.min(jb) - a.max(ja)).max(0.0);
                new_masses[j] += m * overlap / (b - a);
            }
        }
        let edges: Vec<f64> = (0..=n_new).map(|j| lo + j as f64 * width).collect();
        let total: f64 = new_masses.iter().sum();
        let densities: Vec<f64> = new_masses.iter().map(|m| m / total / width).collect();
        DosHistogram {
            bin_edges: edges,
            densities,
        }
    }
}

/// Histogram of a spectrum over `[min, max]`, normalized to integrate to 1.
pub fn dos_histogram(s: &Spectrum, n_bins: usize) -> Result<DosHistogram> {
    if n_bins < 2 {
        return Err(Error::InvalidOptions(format!(
            "need at least 2 bins, got {n_bins}"
        )));
    }
    let lo = s.min();
    let hi = s.max();
    if hi <= lo {
        return Err(Error::DegenerateRange);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &e in s.energies() {
        let idx = (((e - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let total = s.len() as f64;
    let densities: Vec<f64> = counts.iter().map(|&c| c as f64 / total / width).collect();
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    DosHistogram::new(edges, densities)
}

/// Discrete convolution of two densities of states.
///
/// Bin masses are treated as point masses at bin centers; inputs with
/// different widths are rebinned to the finer width first. The result is
/// renormalized to integrate to 1 and its support width is the sum of the
/// input support widths (up to one bin).
pub fn convolve_dos(a: &DosHistogram, b: &DosHistogram) -> Result<DosHistogram> {
    let wa = a.bin_width();
    let wb = b.bin_width();
    let w = wa.min(wb);
    let ra;
    let rb;
    let (a, b) = if (wa - wb).abs() <= 1e-9 * w {
        (a, b)
    } else {
        ra = a.rebin(w);
        rb = b.rebin(w);
        (&ra, &rb)
    };
    let ma = a.masses();
    let mb = b.masses();
    let n_out = ma.len() + mb.len() - 1;
    let mut masses = vec![0.0; n_out];
    for (i, x) in ma.iter().enumerate() {
        for (j, y) in mb.iter().enumerate() {
            masses[i + j] += x * y;
        }
    }
    // Output bin k is centered at center_a(0) + center_b(0) + k·w.
    let start = a.support().0 + b.support().0 + w * 0.5;
    let edges: Vec<f64> = (0..=n_out).map(|k| start + k as f64 * w).collect();
    let total: f64 = masses.iter().sum();
    let densities: Vec<f64> = masses.iter().map(|m| m / total / w).collect();
    DosHistogram::new(edges, densities)
}

/// Spectral generating function `Z(t) = Σ_n exp(i t E_n)`.
///
/// For a composed spectrum `E = A ⊕ B` this factorizes exactly into
/// `Z_A(t) · Z_B(t)`.
pub fn partition_function(s: &Spectrum, t: f64) -> Complex64 {
    s.energies()
        .iter()
        .map(|&e| Complex64::from_polar(1.0, t * e))
        .sum()
}

/// One cell of a Δ_k-versus-length sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaSweepRow {
    pub model: String,
    pub length: usize,
    pub k: u32,
    pub delta: f64,
}

/// Result of a sweep: computed rows plus the cells skipped by the
/// enumeration guard.
#[derive(Clone, Debug, Default)]
pub struct DeltaSweep {
    pub rows: Vec<DeltaSweepRow>,
    pub skipped: Vec<(usize, u32, String)>,
}

/// Δ_k for chain models over a range of lengths, via string moments.
pub fn delta_sweep(template: &ModelSpec, lengths: &[usize], ks: &[u32]) -> Result<DeltaSweep> {
    let mut sweep = DeltaSweep::default();
    for &length in lengths {
        let spec = ModelSpec {
            length,
            ..template.clone()
        };
        let op = build_model(&spec)?;
        for &k in ks {
            match string_delta(&op, k) {
                Ok(delta) => sweep.rows.push(DeltaSweepRow {
                    model: spec.model.as_str().to_string(),
                    length,
                    k,
                    delta,
                }),
                Err(e @ Error::EnumerationCap { .. }) => {
                    sweep.skipped.push((length, k, e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(sweep)
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
