//! Dense BFGS with a strong-Wolfe line search.
//!
//! Quasi-Newton minimizer over `R^n` for moderate `n`: the inverse Hessian
//! approximation is kept as a dense matrix and updated with the standard
//! rank-two formula. The line search enforces sufficient decrease and the
//! strong curvature condition (Nocedal & Wright, Algorithms 3.5/3.6), falling
//! back to plain backtracking when the objective is locally non-smooth, as
//! happens at the sort kinks of the partition cost.

use nalgebra::{DMatrix, DVector};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 20;
const MAX_ZOOM: usize = 40;

pub(crate) struct BfgsControl {
    pub max_iterations: usize,
    /// Stop when `||g||_inf <= gradient_tolerance * (1 + |f|)`.
    pub gradient_tolerance: f64,
}

pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    #[allow(dead_code)] // diagnostics, exercised by the module tests
    pub iterations: usize,
    /// Objective value after each accepted step, starting at iteration 0.
    pub trace: Vec<(u64, f64)>,
    #[allow(dead_code)]
    pub converged: bool,
}

/// Minimize `objective(x, grad_out) -> f` starting from `x0`.
pub(crate) fn minimize<F>(mut objective: F, x0: &[f64], control: &BfgsControl) -> BfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut g = DVector::zeros(n);
    let mut f = objective(x.as_slice(), g.as_mut_slice());
    let mut trace = vec![(0u64, f)];

    if !f.is_finite() {
        return BfgsOutcome {
            x: x.as_slice().to_vec(),
            value: f,
            iterations: 0,
            trace,
            converged: false,
        };
    }

    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;
    let mut stalls = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for iter in 1..=control.max_iterations {
        iterations = iter;
        if g.amax() <= control.gradient_tolerance * (1.0 + f.abs()) {
            converged = true;
            iterations = iter - 1;
            break;
        }

        let mut p = -(&h_inv * &g);
        let mut descent = p.dot(&g);
        if !(descent < 0.0) || !descent.is_finite() {
            // Curvature information went bad (crossed a kink); restart from
            // steepest descent.
            h_inv = DMatrix::identity(n, n);
            first_update = true;
            p = -g.clone();
            descent = p.dot(&g);
        }

        let mut step = line_search(&mut objective, &x, f, &p, descent);
        if step.is_none() && first_update == false {
            // The quasi-Newton direction found no decrease; retry once from
            // steepest descent before concluding we sit at a kink minimum.
            h_inv = DMatrix::identity(n, n);
            first_update = true;
            p = -g.clone();
            descent = p.dot(&g);
            step = line_search(&mut objective, &x, f, &p, descent);
        }

        match step {
            Some(ls) => {
                let s = &ls.x - &x;
                let y = &ls.g - &g;
                let sy = s.dot(&y);
                if sy > 1e-12 * s.norm() * y.norm() {
                    if first_update {
                        let yy = y.dot(&y);
                        if yy > 0.0 {
                            h_inv *= sy / yy;
                        }
                        first_update = false;
                    }
                    bfgs_update(&mut h_inv, &s, &y, sy);
                }
                let decrease = f - ls.f;
                if decrease <= 1e-16 * (1.0 + f.abs()) {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                x = ls.x;
                f = ls.f;
                g = ls.g;
                trace.push((iter as u64, f));
                if stalls >= 5 {
                    break;
                }
            }
            None => break, // no decrease possible along p
        }
        if !f.is_finite() {
            break;
        }
    }

    BfgsOutcome {
        x: x.as_slice().to_vec(),
        value: f,
        iterations,
        trace,
        converged,
    }
}

/// `H <- (I - r s yT) H (I - r y sT) + r s sT` with `r = 1/sy`.
fn bfgs_update(h: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, sy: f64) {
    let rho = 1.0 / sy;
    let hy = &*h * y;
    let yhy = y.dot(&hy);
    // Expanded form: H += rho^2 (sy + yHy) s sT - rho (Hy sT + s (Hy)T)
    let coeff = rho * rho * (sy + yhy);
    h.ger(coeff, s, s, 1.0);
    h.ger(-rho, &hy, s, 1.0);
    h.ger(-rho, s, &hy, 1.0);
}

struct LineSearchResult {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

/// Strong-Wolfe line search along `p` from `x0`. Falls back to the best
/// sufficient-decrease point when the curvature condition is unattainable.
fn line_search<F>(
    objective: &mut F,
    x0: &DVector<f64>,
    f0: f64,
    p: &DVector<f64>,
    dphi0: f64,
) -> Option<LineSearchResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |alpha: f64| -> (DVector<f64>, f64, DVector<f64>, f64) {
        let x = x0 + p * alpha;
        let mut g = DVector::zeros(n);
        let f = objective(x.as_slice(), g.as_mut_slice());
        let dphi = g.dot(p);
        (x, f, g, dphi)
    };

    let mut alpha_prev = 0.0;
    let mut f_prev = f0;
    let mut dphi_prev = dphi0;
    let mut alpha = 1.0;
    let mut best: Option<(f64, DVector<f64>, f64, DVector<f64>)> = None;

    for i in 0..MAX_BRACKET {
        let (x, f, g, dphi) = eval(alpha);
        if f.is_finite() && f < f0 + C1 * alpha * dphi0 {
            if best.as_ref().map_or(true, |(_, _, bf, _)| f < *bf) {
                best = Some((alpha, x.clone(), f, g.clone()));
            }
        }
        if !f.is_finite() || f > f0 + C1 * alpha * dphi0 || (i > 0 && f >= f_prev) {
            return zoom(
                &mut eval, f0, dphi0, alpha_prev, f_prev, dphi_prev, alpha, f, best,
            );
        }
        if dphi.abs() <= -C2 * dphi0 {
            return Some(LineSearchResult { x, f, g });
        }
        if dphi >= 0.0 {
            return zoom(
                &mut eval, f0, dphi0, alpha, f, dphi, alpha_prev, f_prev, best,
            );
        }
        alpha_prev = alpha;
        f_prev = f;
        dphi_prev = dphi;
        alpha *= 2.0;
    }
    best.map(|(_, x, f, g)| LineSearchResult { x, f, g })
}

#[allow(clippy::too_many_arguments)]
fn zoom<E>(
    eval: &mut E,
    f0: f64,
    dphi0: f64,
    mut lo: f64,
    mut f_lo: f64,
    mut dphi_lo: f64,
    mut hi: f64,
    mut f_hi: f64,
    mut best: Option<(f64, DVector<f64>, f64, DVector<f64>)>,
) -> Option<LineSearchResult>
where
    E: FnMut(f64) -> (DVector<f64>, f64, DVector<f64>, f64),
{
    for _ in 0..MAX_ZOOM {
        let span = hi - lo;
        if span.abs() <= 1e-16 * lo.abs().max(1.0) {
            break;
        }
        // Minimizer of the quadratic through (lo, f_lo, dphi_lo) and
        // (hi, f_hi), safeguarded towards bisection.
        let alpha = {
            let mid = lo + 0.5 * span;
            let denom = 2.0 * (f_hi - f_lo - dphi_lo * span);
            let quad = if denom.abs() > 1e-300 {
                lo - dphi_lo * span * span / denom
            } else {
                mid
            };
            let inner_lo = lo.min(hi) + 0.1 * span.abs();
            let inner_hi = lo.max(hi) - 0.1 * span.abs();
            if quad.is_finite() && quad > inner_lo && quad < inner_hi {
                quad
            } else {
                mid
            }
        };

        let (x, f, g, dphi) = eval(alpha);
        if f.is_finite() && f < f0 + C1 * alpha * dphi0 {
            if best.as_ref().map_or(true, |(_, _, bf, _)| f < *bf) {
                best = Some((alpha, x.clone(), f, g.clone()));
            }
        }
        if !f.is_finite() || f > f0 + C1 * alpha * dphi0 || f >= f_lo {
            hi = alpha;
            f_hi = f;
        } else {
            if dphi.abs() <= -C2 * dphi0 {
                return Some(LineSearchResult { x, f, g });
            }
            if dphi * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
            }
            lo = alpha;
            f_lo = f;
            dphi_lo = dphi;
        }
    }
    best.map(|(_, x, f, g)| LineSearchResult { x, f, g })
}
