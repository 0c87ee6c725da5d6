//! The spectral bipartition inverse problem.
//!
//! Given a spectrum `E` of dimension `D = d_A · d_B`, find factor spectra
//! `A` and `B` minimizing the matched outer-sum cost
//!
//! ```text
//!   C(A, B) = (1/D) Σ_k ( E_sorted(k) - sorted(A ⊕ B)(k) )²
//! ```
//!
//! The minimization runs BFGS with the sort permutation treated as locally
//! constant, re-sorted at every cost evaluation. The residuals `ε` are the
//! per-level mismatch: `P₁(E) = P₂(A ⊕ B) + ε`, and `max|ε|` is the operator
//! norm of the residual interaction, which is exactly diagonal in the
//! matched product basis.

mod bfgs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{Source, Spectrum};

/// Floor (bits) reported by [`spectral_norm_error`] when the per-level
/// mismatch underflows relative precision.
pub const SPECTRAL_NORM_FLOOR: f64 = -52.0;

/// Initialization scheme for the factor spectra.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Entries drawn from a normal with variance `var(E)/2`, centered on
    /// `mean(E)/2`.
    #[default]
    RandomGaussian,
    /// `A` from block means of the sorted spectrum, `B` from the mean
    /// within-block profile; restarts beyond the first add Gaussian jitter.
    QuantileBlock,
}

/// Options controlling [`minimize_partition`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PartitionOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
    pub init_scheme: InitScheme,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            restarts: 8,
            max_iterations: 4000,
            gradient_tolerance: 1e-12,
            seed: 0,
            init_scheme: InitScheme::RandomGaussian,
        }
    }
}

impl PartitionOptions {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidOptions("restarts must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidOptions("max_iterations must be >= 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidOptions(
                "gradient_tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one bipartition solve.
#[derive(Clone, Debug)]
pub struct PartitionResult {
    /// Factor spectrum `A` (length `d_A`), sorted, gauge-fixed.
    pub a: Spectrum,
    /// Factor spectrum `B` (length `d_B`), sorted, `mean(B) = 0`.
    pub b: Spectrum,
    /// Final matched cost `(1/D) Σ ε²`.
    pub cost: f64,
    /// Permutation sorting the input eigenvalue list (identity here, since
    /// [`Spectrum`] stores energies sorted).
    pub p1: Vec<usize>,
    /// Permutation sorting `A ⊕ B` (row-major index `i·d_B + j`).
    pub p2: Vec<usize>,
    /// Per-level residuals in matched (rank) order.
    pub epsilon: Vec<f64>,
    /// `max |ε|`: operator norm of the diagonal residual interaction.
    pub h_int_norm: f64,
    /// `(iteration, cost)` trace of the winning restart.
    pub trace: Vec<(u64, f64)>,
    /// Restarts that completed with finite cost.
    pub restarts_used: usize,
}

impl PartitionResult {
    pub fn d_a(&self) -> usize {
        self.a.len()
    }

    pub fn d_b(&self) -> usize {
        self.b.len()
    }
}

/// All pairwise sums `a_i + b_j` in row-major order (`i` major).
pub fn outer_sum(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("outer_sum"));
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x + y);
        }
    }
    Ok(out)
}

/// Matched cost and its exact gradient with the sort permutation held fixed.
///
/// `e_sorted` must be ascending; the outer sum of `a` and `b` is sorted
/// (stable) and paired with `e_sorted` positionally. `grad_a[i]` collects
/// `-(2/D)·ε` over every matched level occupied by row `i`.
pub fn cost_and_gradient(
    e_sorted: &[f64],
    a: &[f64],
    b: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if a.len() * b.len() != e_sorted.len() {
        return Err(Error::BadFactorization {
            d_a: a.len(),
            d_b: b.len(),
            len: e_sorted.len(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("cost_and_gradient"));
    }
    let mut ws = CostWorkspace::new(a.len(), b.len());
    let mut grad_a = vec![0.0; a.len()];
    let mut grad_b = vec![0.0; b.len()];
    let cost = cost_grad_into(e_sorted, a, b, &mut ws, &mut grad_a, &mut grad_b);
    Ok((cost, grad_a, grad_b))
}

struct CostWorkspace {
    sums: Vec<f64>,
    perm: Vec<u32>,
}

impl CostWorkspace {
    fn new(d_a: usize, d_b: usize) -> Self {
        let d = d_a * d_b;
        CostWorkspace {
            sums: vec![0.0; d],
            perm: (0..d as u32).collect(),
        }
    }
}

fn cost_grad_into(
    e_sorted: &[f64],
    a: &[f64],
    b: &[f64],
    ws: &mut CostWorkspace,
    grad_a: &mut [f64],
    grad_b: &mut [f64],
) -> f64 {
    let d_b = b.len();
    let d = e_sorted.len();
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            ws.sums[i * d_b + j] = x + y;
        }
    }
    for (k, p) in ws.perm.iter_mut().enumerate() {
        *p = k as u32;
    }
    let sums = &ws.sums;
    // Stable sort: ties resolve to the lowest row-major index, which fixes
    // the subgradient at degenerate points.
    ws.perm.sort_by(|&i, &j| sums[i as usize].total_cmp(&sums[j as usize]));

    grad_a.fill(0.0);
    grad_b.fill(0.0);
    let mut cost = 0.0;
    let scale = 2.0 / d as f64;
    for (k, &idx) in ws.perm.iter().enumerate() {
        let idx = idx as usize;
        let r = e_sorted[k] - sums[idx];
        cost += r * r;
        let g = -scale * r;
        grad_a[idx / d_b] += g;
        grad_b[idx % d_b] += g;
    }
    cost / d as f64
}

/// Splitmix-style seed derivation so restarts and recursion nodes get
/// decorrelated, reproducible streams.
fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Alternating refinement: monotone matching, then the exact least-squares
/// fit of `a_i + b_j` to the matched levels (backfitting over the balanced
/// two-way design). Both steps weakly decrease the cost, so the iteration
/// is monotone; it resolves matching exchanges that stall quasi-Newton
/// steps at kinks of the sorted objective.
fn alternating_refit(e_sorted: &[f64], a: &mut Vec<f64>, b: &mut Vec<f64>, max_sweeps: usize) -> f64 {
    let d_a = a.len();
    let d_b = b.len();
    let d = e_sorted.len();
    let mut sums = vec![0.0; d];
    let mut perm: Vec<u32> = (0..d as u32).collect();
    let mut row = vec![0usize; d];
    let mut col = vec![0usize; d];
    let mut last_cost = f64::INFINITY;
    for _ in 0..max_sweeps {
        for i in 0..d_a {
            for j in 0..d_b {
                sums[i * d_b + j] = a[i] + b[j];
            }
        }
        for (k, p) in perm.iter_mut().enumerate() {
            *p = k as u32;
        }
        perm.sort_by(|&i, &j| sums[i as usize].total_cmp(&sums[j as usize]));
        for (k, &idx) in perm.iter().enumerate() {
            row[k] = idx as usize / d_b;
            col[k] = idx as usize % d_b;
        }
        for _ in 0..100 {
            let mut next_a = vec![0.0; d_a];
            for k in 0..d {
                next_a[row[k]] += e_sorted[k] - b[col[k]];
            }
            for v in &mut next_a {
                *v /= d_b as f64;
            }
            let mut next_b = vec![0.0; d_b];
            for k in 0..d {
                next_b[col[k]] += e_sorted[k] - next_a[row[k]];
            }
            for v in &mut next_b {
                *v /= d_a as f64;
            }
            let delta = a
                .iter()
                .zip(&next_a)
                .chain(b.iter().zip(&next_b))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            *a = next_a;
            *b = next_b;
            if delta < 1e-15 {
                break;
            }
        }
        let mut cost = 0.0;
        for k in 0..d {
            let r = e_sorted[k] - a[row[k]] - b[col[k]];
            cost += r * r;
        }
        cost /= d as f64;
        if cost >= last_cost - 1e-18 * (1.0 + cost) {
            return cost.min(last_cost);
        }
        last_cost = cost;
    }
    last_cost
}

/// Constructive factor recovery for (near-)exact compositions.
///
/// Peels factor values off the sorted spectrum: with the gauge `a_0 = 0`,
/// the smallest unexplained level is either a new `a + b_0` or a new
/// `b + a_0`, and every hypothesis must account for all its pairwise sums
/// within `tol`. Depth-first with backtracking; random spectra that are not
/// outer sums fail the multiset check almost immediately.
fn peel_factors(e_sorted: &[f64], d_a: usize, d_b: usize, tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    struct Search<'a> {
        e: &'a [f64],
        used: Vec<bool>,
        tol: f64,
        budget: usize,
    }

    impl Search<'_> {
        /// Claim an unused level equal to `value` within tol.
        fn claim(&mut self, value: f64) -> Option<usize> {
            // Binary search for the insertion point, then scan outwards.
            let pos = self.e.partition_point(|&x| x < value);
            let mut best: Option<usize> = None;
            let mut best_diff = self.tol;
            for idx in (0..pos).rev() {
                let diff = (value - self.e[idx]).abs();
                if diff > self.tol {
                    break;
                }
                if !self.used[idx] && diff <= best_diff {
                    best = Some(idx);
                    best_diff = diff;
                }
            }
            for idx in pos..self.e.len() {
                let diff = (value - self.e[idx]).abs();
                if diff > self.tol {
                    break;
                }
                if !self.used[idx] && diff < best_diff {
                    best = Some(idx);
                    best_diff = diff;
                }
            }
            if let Some(idx) = best {
                self.used[idx] = true;
            }
            best
        }

        fn claim_all(&mut self, base: f64, others: &[f64]) -> Option<Vec<usize>> {
            let mut claimed = Vec::with_capacity(others.len());
            for &o in others {
                match self.claim(base + o) {
                    Some(idx) => claimed.push(idx),
                    None => {
                        for idx in claimed {
                            self.used[idx] = false;
                        }
                        return None;
                    }
                }
            }
            Some(claimed)
        }

        fn release(&mut self, claimed: &[usize]) {
            for &idx in claimed {
                self.used[idx] = false;
            }
        }

        fn solve(&mut self, a: &mut Vec<f64>, b: &mut Vec<f64>, d_a: usize, d_b: usize) -> bool {
            if self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            if a.len() == d_a && b.len() == d_b {
                return self.used.iter().all(|&u| u);
            }
            let next = match self.used.iter().position(|&u| !u) {
                Some(idx) => self.e[idx],
                None => return false, // levels exhausted but factors missing
            };
            // Hypothesis: next = a_new + b[0].
            if a.len() < d_a {
                let a_new = next - b[0];
                if let Some(claimed) = self.claim_all(a_new, b) {
                    a.push(a_new);
                    if self.solve(a, b, d_a, d_b) {
                        return true;
                    }
                    a.pop();
                    self.release(&claimed);
                }
            }
            // Hypothesis: next = b_new + a[0] (a[0] = 0 by gauge).
            if b.len() < d_b {
                let b_new = next - a[0];
                if let Some(claimed) = self.claim_all(b_new, a) {
                    b.push(b_new);
                    if self.solve(a, b, d_a, d_b) {
                        return true;
                    }
                    b.pop();
                    self.release(&claimed);
                }
            }
            false
        }
    }

    let d = e_sorted.len();
    let mut search = Search {
        e: e_sorted,
        used: vec![false; d],
        tol,
        budget: 64 * d,
    };
    let mut a = vec![0.0];
    let mut b = Vec::with_capacity(d_b);
    // The smallest level is a_0 + b_0; with a_0 = 0 it seeds b.
    let first = search.claim(e_sorted[0]).expect("first level claimable");
    debug_assert_eq!(first, 0);
    b.push(e_sorted[0]);
    search.solve(&mut a, &mut b, d_a, d_b).then_some((a, b))
}

fn initial_point(
    e_sorted: &[f64],
    d_a: usize,
    d_b: usize,
    scheme: InitScheme,
    restart: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let d = e_sorted.len();
    let mean = e_sorted.iter().sum::<f64>() / d as f64;
    let var = e_sorted.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / d as f64;
    let sd_half = (var / 2.0).sqrt();
    match scheme {
        InitScheme::RandomGaussian => {
            let mut x = Vec::with_capacity(d_a + d_b);
            for _ in 0..(d_a + d_b) {
                let g: f64 = StandardNormal.sample(rng);
                x.push(mean / 2.0 + sd_half * g);
            }
            x
        }
        InitScheme::QuantileBlock => {
            let mut a = vec![0.0; d_a];
            let mut b = vec![0.0; d_b];
            for i in 0..d_a {
                let block = &e_sorted[i * d_b..(i + 1) * d_b];
                a[i] = block.iter().sum::<f64>() / d_b as f64;
            }
            for (j, bj) in b.iter_mut().enumerate() {
                *bj = (0..d_a)
                    .map(|i| e_sorted[i * d_b + j] - a[i])
                    .sum::<f64>()
                    / d_a as f64;
            }
            let mut x: Vec<f64> = a.into_iter().chain(b).collect();
            if restart > 0 {
                let jitter = 0.1 * var.sqrt();
                for v in &mut x {
                    let g: f64 = StandardNormal.sample(rng);
                    *v += jitter * g;
                }
            }
            x
        }
    }
}

/// Candidate solution: final cost, parameter vector `[a, b]`, cost trace.
type Candidate = (f64, Vec<f64>, Vec<(u64, f64)>);

/// One descent from a given starting point: BFGS interleaved with the
/// alternating matched refit until neither improves.
fn refine(
    e_sorted: &[f64],
    d_a: usize,
    d_b: usize,
    x0: Vec<f64>,
    opts: &PartitionOptions,
) -> Option<Candidate> {
    let mut ws = CostWorkspace::new(d_a, d_b);
    let control = bfgs::BfgsControl {
        max_iterations: opts.max_iterations,
        gradient_tolerance: opts.gradient_tolerance,
    };
    let mut x = x0;
    let mut trace: Vec<(u64, f64)> = Vec::new();
    let mut best = f64::INFINITY;
    for _round in 0..3 {
        let outcome = bfgs::minimize(
            |x, grad| {
                let (ga, gb) = grad.split_at_mut(d_a);
                cost_grad_into(e_sorted, &x[..d_a], &x[d_a..], &mut ws, ga, gb)
            },
            &x,
            &control,
        );
        if !outcome.value.is_finite() {
            return None;
        }
        let offset = trace.len() as u64;
        trace.extend(outcome.trace.iter().map(|(i, c)| (i + offset, *c)));
        x = outcome.x;
        let improved_bfgs = outcome.value < best - 1e-18 * (1.0 + best.abs());
        best = best.min(outcome.value);

        let mut a = x[..d_a].to_vec();
        let mut b = x[d_a..].to_vec();
        let refit_cost = alternating_refit(e_sorted, &mut a, &mut b, 400);
        if refit_cost < best - 1e-18 * (1.0 + best.abs()) {
            best = refit_cost;
            x = a.into_iter().chain(b).collect();
            trace.push((trace.len() as u64, refit_cost));
        } else if !improved_bfgs {
            break;
        }
    }
    Some((best, x, trace))
}

/// Find factor spectra `A`, `B` for `e` by multi-restart BFGS.
///
/// Deterministic for a given seed; restarts run independently (in parallel
/// when a thread pool is available) and the best final cost wins, ties going
/// to the lowest restart index. Each restart polishes the quasi-Newton
/// result with an alternating matched refit; a constructive peeled seed is
/// added when the spectrum is an exact outer sum. The returned factors are
/// sorted and gauge-fixed to `mean(B) = 0`.
pub fn minimize_partition(
    e: &Spectrum,
    d_a: usize,
    d_b: usize,
    opts: &PartitionOptions,
) -> Result<PartitionResult> {
    opts.validate()?;
    let d = e.len();
    if d_a < 2 || d_b < 2 || d_a * d_b != d {
        return Err(Error::BadFactorization { d_a, d_b, len: d });
    }
    let e_sorted = e.energies();

    let mut outcomes: Vec<Option<Candidate>> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, restart as u64 + 1));
            let x0 = initial_point(e_sorted, d_a, d_b, opts.init_scheme, restart, &mut rng);
            refine(e_sorted, d_a, d_b, x0, opts)
        })
        .collect();
    let restarts_used = outcomes.iter().flatten().count();

    // Constructive candidate: for (near-)exact compositions the factor
    // values can be peeled off the sorted levels directly; quasi-Newton
    // descent from the two random schemes routinely stalls in matching-
    // exchange local minima far above the exact optimum, and this seed
    // restores the self-composition identifiability. Spectra that are not
    // outer sums fail the peel immediately and skip the candidate.
    let spread = (e.max() - e.min()).max(f64::MIN_POSITIVE);
    if let Some((a, b)) = peel_factors(e_sorted, d_a, d_b, 1e-9 * spread) {
        let x0: Vec<f64> = a.into_iter().chain(b).collect();
        outcomes.push(refine(e_sorted, d_a, d_b, x0, opts));
    }

    let best = outcomes
        .into_iter()
        .flatten()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(i.cmp(j)))
        .map(|(_, o)| o);
    let (_, x, trace) = best.ok_or_else(|| {
        Error::Numerical("all restarts produced non-finite cost".into())
    })?;

    let (mut a, mut b) = (x[..d_a].to_vec(), x[d_a..].to_vec());
    // Gauge: shift the scalar degeneracy (A + c, B - c) into A.
    let mean_b = b.iter().sum::<f64>() / d_b as f64;
    for v in &mut a {
        *v += mean_b;
    }
    for v in &mut b {
        *v -= mean_b;
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);

    // Recompute residuals in the sorted, gauge-fixed frame.
    let sums = outer_sum(&a, &b)?;
    let mut p2: Vec<usize> = (0..d).collect();
    p2.sort_by(|&i, &j| sums[i].total_cmp(&sums[j]));
    let epsilon: Vec<f64> = (0..d).map(|k| e_sorted[k] - sums[p2[k]]).collect();
    let cost = epsilon.iter().map(|r| r * r).sum::<f64>() / d as f64;
    let h_int_norm = epsilon.iter().fold(0.0f64, |m, r| m.max(r.abs()));

    let qubits = |n: usize| (n.is_power_of_two()).then(|| n.trailing_zeros());
    Ok(PartitionResult {
        a: Spectrum::new(a, Source::Synthetic, qubits(d_a), None)?,
        b: Spectrum::new(b, Source::Synthetic, qubits(d_b), None)?,
        cost,
        p1: (0..d).collect(),
        p2,
        epsilon,
        h_int_norm,
        trace,
        restarts_used,
    })
}

/// Worst per-level mismatch in bits: `log2( max|E - ℰ| / max|E| )` with
/// `ℰ = sorted(A ⊕ B)`, clamped at [`SPECTRAL_NORM_FLOOR`].
pub fn spectral_norm_error(e: &Spectrum, result: &PartitionResult) -> f64 {
    let radius = e.spectral_radius();
    if radius == 0.0 {
        return SPECTRAL_NORM_FLOOR;
    }
    let ratio = result.h_int_norm / radius;
    if ratio <= SPECTRAL_NORM_FLOOR.exp2() {
        SPECTRAL_NORM_FLOOR
    } else {
        ratio.log2()
    }
}

/// The partitioned Hamiltonian as a diagonal over the product basis.
///
/// Entry `(i, j)` (row-major) is the exact eigenvalue of `E` matched to the
/// sorted position of `A_i + B_j`; the multiset of entries equals `E` and the
/// deviation from `A_i + B_j` reproduces `result.epsilon`.
pub fn assemble_partitioned_diagonal(e: &Spectrum, result: &PartitionResult) -> Result<Vec<f64>> {
    let d = e.len();
    if result.d_a() * result.d_b() != d || result.p2.len() != d {
        return Err(Error::BadFactorization {
            d_a: result.d_a(),
            d_b: result.d_b(),
            len: d,
        });
    }
    let mut diag = vec![0.0; d];
    for (k, &idx) in result.p2.iter().enumerate() {
        diag[idx] = e.energies()[k];
    }
    Ok(diag)
}

/// A node of the recursive partitioning tree.
#[derive(Clone, Debug)]
pub struct PartitionTree {
    pub depth: usize,
    pub spectrum: Spectrum,
    pub split: Option<PartitionSplit>,
}

/// The solved bipartition at an internal node.
#[derive(Clone, Debug)]
pub struct PartitionSplit {
    pub result: PartitionResult,
    pub spectral_norm: f64,
    pub a: Box<PartitionTree>,
    pub b: Box<PartitionTree>,
}

impl PartitionTree {
    /// Depth-first traversal of (depth, split) pairs for internal nodes.
    pub fn splits(&self) -> Vec<(usize, &PartitionSplit)> {
        let mut out = Vec::new();
        self.collect_splits(&mut out);
        out
    }

    fn collect_splits<'a>(&'a self, out: &mut Vec<(usize, &'a PartitionSplit)>) {
        if let Some(split) = &self.split {
            out.push((self.depth, split));
            split.a.collect_splits(out);
            split.b.collect_splits(out);
        }
    }

    pub fn max_depth(&self) -> usize {
        match &self.split {
            None => self.depth,
            Some(s) => s.a.max_depth().max(s.b.max_depth()),
        }
    }
}

fn is_power_of_four(n: usize) -> bool {
    n.is_power_of_two() && n.trailing_zeros() % 2 == 0
}

/// Recursively bipartition a spectrum into equal halves, down to length-4
/// leaves or `max_depth`.
///
/// Each split divides the qubit count in half, so splitting requires the
/// current length to be a power of four. Per-level costs and spectral-norm
/// errors are recorded on the internal nodes, making the depth at which
/// partitioning degrades observable.
pub fn recursive_partition(
    e: &Spectrum,
    max_depth: usize,
    opts: &PartitionOptions,
) -> Result<PartitionTree> {
    if max_depth == 0 {
        return Err(Error::InvalidOptions("max_depth must be >= 1".into()));
    }
    if !is_power_of_four(e.len()) {
        return Err(Error::BadFactorization {
            d_a: 0,
            d_b: 0,
            len: e.len(),
        });
    }
    recurse(e, 0, max_depth, opts)
}

fn recurse(
    e: &Spectrum,
    depth: usize,
    max_depth: usize,
    opts: &PartitionOptions,
) -> Result<PartitionTree> {
    let len = e.len();
    if depth >= max_depth || len < 16 || !is_power_of_four(len) {
        return Ok(PartitionTree {
            depth,
            spectrum: e.clone(),
            split: None,
        });
    }
    let half = 1usize << (len.trailing_zeros() / 2);
    let node_opts = PartitionOptions {
        seed: derive_seed(opts.seed, (depth as u64) << 32 | len as u64),
        ..*opts
    };
    let result = minimize_partition(e, half, half, &node_opts)?;
    let spectral_norm = spectral_norm_error(e, &result);
    let a = recurse(&result.a, depth + 1, max_depth, opts)?;
    let b = recurse(&result.b, depth + 1, max_depth, opts)?;
    Ok(PartitionTree {
        depth,
        spectrum: e.clone(),
        split: Some(PartitionSplit {
            result,
            spectral_norm,
            a: Box::new(a),
            b: Box::new(b),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn synthetic(energies: Vec<f64>) -> Spectrum {
        Spectrum::from_unsorted(energies, Source::Synthetic, None, None).unwrap()
    }

    fn random_factors(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                scale * g
            })
            .collect()
    }

    /// Exact composition of two factor lists, as a sorted spectrum.
    fn compose(a: &[f64], b: &[f64]) -> Spectrum {
        synthetic(outer_sum(a, b).unwrap())
    }

    #[test]
    fn outer_sum_examples() {
        assert_eq!(outer_sum(&[0.0, 1.0], &[0.0, 2.0]).unwrap(), vec![0.0, 2.0, 1.0, 3.0]);
        let shifted = outer_sum(&[5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(shifted, vec![6.0, 7.0, 8.0]);
        let mut s = outer_sum(&[0.0, 1.0], &[0.0, 2.0]).unwrap();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(outer_sum(&[], &[1.0]).is_err());
    }

    #[test]
    fn cost_zero_on_exact_composition() {
        let a = [0.0, 1.5, 3.0];
        let b = [-1.0, 0.25];
        let e = compose(&a, &b);
        let (cost, ga, gb) = cost_and_gradient(e.energies(), &a, &b).unwrap();
        assert!(cost < 1e-28);
        assert!(ga.iter().all(|g| g.abs() < 1e-14));
        assert!(gb.iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn cost_equals_mean_square_residual() {
        let a = [0.0, 2.0];
        let b = [0.0, 5.0];
        let e = synthetic(vec![0.1, 1.9, 5.05, 6.95]);
        let (cost, _, _) = cost_and_gradient(e.energies(), &a, &b).unwrap();
        let expect = (0.1f64.powi(2) + 0.1f64.powi(2) + 0.05f64.powi(2) + 0.05f64.powi(2)) / 4.0;
        assert!((cost - expect).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 20 {
            let d_a = 4;
            let d_b = 3;
            let a = random_factors(&mut rng, d_a, 1.0);
            let b = random_factors(&mut rng, d_b, 1.0);
            let e_vals: Vec<f64> = (0..d_a * d_b)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    2.0 * g
                })
                .collect();
            let e = synthetic(e_vals);
            // Skip near-degenerate points where the sort permutation is about
            // to change inside the FD stencil.
            let mut sums = outer_sum(&a, &b).unwrap();
            sums.sort_by(f64::total_cmp);
            if sums.windows(2).any(|w| w[1] - w[0] < 1e-3) {
                continue;
            }
            checked += 1;

            let (_, ga, gb) = cost_and_gradient(e.energies(), &a, &b).unwrap();
            let h = 1e-6;
            for i in 0..d_a {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[i] += h;
                am[i] -= h;
                let (fp, _, _) = cost_and_gradient(e.energies(), &ap, &b).unwrap();
                let (fm, _, _) = cost_and_gradient(e.energies(), &am, &b).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (fd - ga[i]).abs() < 1e-5,
                    "grad_a[{i}] = {} vs fd {fd}",
                    ga[i]
                );
            }
            for j in 0..d_b {
                let mut bp = b.clone();
                let mut bm = b.clone();
                bp[j] += h;
                bm[j] -= h;
                let (fp, _, _) = cost_and_gradient(e.energies(), &a, &bp).unwrap();
                let (fm, _, _) = cost_and_gradient(e.energies(), &a, &bm).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (fd - gb[j]).abs() < 1e-5,
                    "grad_b[{j}] = {} vs fd {fd}",
                    gb[j]
                );
            }
        }
    }

    #[test]
    fn cost_shift_gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_factors(&mut rng, 5, 1.0);
            let b = random_factors(&mut rng, 4, 1.0);
            let e_vals: Vec<f64> = (0..20)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    3.0 * g
                })
                .collect();
            let e = synthetic(e_vals);
            let c: f64 = rng.random_range(-5.0..5.0);
            let a_shift: Vec<f64> = a.iter().map(|v| v + c).collect();
            let b_shift: Vec<f64> = b.iter().map(|v| v - c).collect();
            let (c0, _, _) = cost_and_gradient(e.energies(), &a, &b).unwrap();
            let (c1, _, _) = cost_and_gradient(e.energies(), &a_shift, &b_shift).unwrap();
            assert!((c0 - c1).abs() <= 1e-12 * (1.0 + c0.abs()));
        }
    }

    #[test]
    fn recovers_two_scale_composition() {
        // [0,1,10,11] = sorted({0,10} ⊕ {0,1}).
        let e = synthetic(vec![0.0, 1.0, 10.0, 11.0]);
        let opts = PartitionOptions {
            seed: 3,
            ..Default::default()
        };
        let r = minimize_partition(&e, 2, 2, &opts).unwrap();
        assert!(r.cost <= 1e-12, "cost {}", r.cost);
        // Gauge-invariant comparison: center both factor lists.
        let center = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| x - m).collect::<Vec<_>>()
        };
        let got_a = center(r.a.energies());
        let got_b = center(r.b.energies());
        // One factor carries the {0,10} gap, the other the {0,1} gap.
        let (coarse, fine) = if got_a[1] - got_a[0] > got_b[1] - got_b[0] {
            (got_a, got_b)
        } else {
            (got_b, got_a)
        };
        assert!((coarse[1] - coarse[0] - 10.0).abs() < 1e-6);
        assert!((fine[1] - fine[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn self_composition_recovery_16() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a_true = random_factors(&mut rng, 16, 1.0);
        let b_true = random_factors(&mut rng, 16, 1.0);
        let e = compose(&a_true, &b_true);
        let opts = PartitionOptions {
            seed: 17,
            ..Default::default()
        };
        let r = minimize_partition(&e, 16, 16, &opts).unwrap();
        assert!(r.cost <= 1e-16, "cost {}", r.cost);

        let mut a_sorted = a_true.clone();
        a_sorted.sort_by(f64::total_cmp);
        let mean_true = a_sorted.iter().sum::<f64>() / 16.0;
        let mean_got = r.a.mean();
        for (got, want) in r.a.energies().iter().zip(&a_sorted) {
            assert!(
                ((got - mean_got) - (want - mean_true)).abs() < 1e-6,
                "factor mismatch"
            );
        }
    }

    #[test]
    fn epsilon_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e_vals: Vec<f64> = (0..64)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                4.0 * g
            })
            .collect();
        let e = synthetic(e_vals);
        let opts = PartitionOptions {
            restarts: 3,
            max_iterations: 600,
            seed: 4,
            ..Default::default()
        };
        let r = minimize_partition(&e, 8, 8, &opts).unwrap();
        let mean_sq = r.epsilon.iter().map(|x| x * x).sum::<f64>() / 64.0;
        assert!((r.cost - mean_sq).abs() < 1e-12 * (1.0 + r.cost));
        let max_abs = r.epsilon.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert_eq!(max_abs, r.h_int_norm);
        // Gauge fix leaves mean(B) at zero.
        assert!(r.b.mean().abs() < 1e-9);
        // trace is monotone non-increasing.
        for w in r.trace.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15);
        }
    }

    #[test]
    fn assemble_diagonal_matches_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let e_vals: Vec<f64> = (0..16)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                2.0 * g
            })
            .collect();
        let e = synthetic(e_vals);
        let opts = PartitionOptions {
            restarts: 3,
            max_iterations: 400,
            seed: 2,
            ..Default::default()
        };
        let r = minimize_partition(&e, 4, 4, &opts).unwrap();
        let diag = assemble_partitioned_diagonal(&e, &r).unwrap();

        // Multiset equality with E.
        let mut sorted = diag.clone();
        sorted.sort_by(f64::total_cmp);
        for (x, y) in sorted.iter().zip(e.energies()) {
            assert_eq!(x, y);
        }
        // Residual against A_i + B_j reproduces epsilon and its max.
        let mut max_resid = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let resid = diag[i * 4 + j] - r.a.energies()[i] - r.b.energies()[j];
                max_resid = max_resid.max(resid.abs());
            }
        }
        assert!((max_resid - r.h_int_norm).abs() < 1e-12);
    }

    #[test]
    fn exact_partition_hits_spectral_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = random_factors(&mut rng, 4, 1.0);
        let b = random_factors(&mut rng, 4, 1.0);
        let e = compose(&a, &b);
        let opts = PartitionOptions {
            seed: 9,
            ..Default::default()
        };
        let r = minimize_partition(&e, 4, 4, &opts).unwrap();
        assert_eq!(spectral_norm_error(&e, &r), SPECTRAL_NORM_FLOOR);
    }

    #[test]
    fn spectral_norm_quarter_radius() {
        // One level off by a quarter of the spectral radius: -2 bits.
        let e = synthetic(vec![-4.0, -1.0, 1.0, 4.0]);
        let mut r = minimize_partition(
            &e,
            2,
            2,
            &PartitionOptions {
                restarts: 2,
                max_iterations: 200,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        r.h_int_norm = 1.0; // 0.25 * max|E|
        assert!((spectral_norm_error(&e, &r) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_factorizations_rejected() {
        let e = synthetic(vec![0.0, 1.0, 2.0, 3.0]);
        assert!(minimize_partition(&e, 2, 3, &PartitionOptions::default()).is_err());
        assert!(minimize_partition(&e, 1, 4, &PartitionOptions::default()).is_err());
        let bad = PartitionOptions {
            restarts: 0,
            ..Default::default()
        };
        assert!(minimize_partition(&e, 2, 2, &bad).is_err());
    }

    #[test]
    fn recursion_on_nested_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let parts: Vec<Vec<f64>> = (0..4).map(|_| random_factors(&mut rng, 4, 1.0)).collect();
        let ab = outer_sum(&parts[0], &parts[1]).unwrap();
        let cd = outer_sum(&parts[2], &parts[3]).unwrap();
        let e = synthetic(outer_sum(&ab, &cd).unwrap());
        assert_eq!(e.len(), 256);

        let opts = PartitionOptions {
            seed: 1234,
            ..Default::default()
        };
        let tree = recursive_partition(&e, 8, &opts).unwrap();
        assert_eq!(tree.max_depth(), 2);
        let splits = tree.splits();
        assert_eq!(splits.len(), 3);
        for (depth, split) in splits {
            assert!(
                split.result.cost <= 1e-12,
                "depth {depth} cost {}",
                split.result.cost
            );
        }
    }

    #[test]
    fn recursion_depth_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e_vals: Vec<f64> = (0..256)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g
            })
            .collect();
        let e = synthetic(e_vals);
        let opts = PartitionOptions {
            restarts: 2,
            max_iterations: 150,
            seed: 5,
            ..Default::default()
        };
        let tree = recursive_partition(&e, 1, &opts).unwrap();
        assert_eq!(tree.max_depth(), 1);
        assert!(tree.split.is_some());
        let split = tree.split.as_ref().unwrap();
        assert!(split.a.split.is_none());
    }

    #[test]
    fn recursion_rejects_bad_length() {
        let e = synthetic(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(recursive_partition(&e, 2, &PartitionOptions::default()).is_err());
    }
}
