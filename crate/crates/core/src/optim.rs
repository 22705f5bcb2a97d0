//! Projected first-order optimizers for the capacity problems.
//!
//! Both capacity sides are convex over simple feasible sets (boxes with
//! pinned entries, the probability simplex), so projected gradient descent
//! with monotone backtracking reaches the global optimum up to tolerance.
//! The maximal-function variant has a nonsmooth objective; for it the
//! subgradient loop keeps the best iterate instead of insisting on descent.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::Real;

#[derive(Clone, Copy, Debug)]
pub struct PgOptions {
    pub max_iters: usize,
    pub rel_tol: Real,
    /// Consecutive non-improving iterations before the stagnation warning.
    pub stagnation_limit: usize,
    pub step0: Real,
}

impl Default for PgOptions {
    fn default() -> Self {
        PgOptions {
            max_iters: 500,
            rel_tol: 1e-8,
            stagnation_limit: 50,
            step0: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OptimTrace {
    pub values: Vec<Real>,
    pub iters: usize,
    pub stagnation_warning: bool,
    pub converged: bool,
}

/// Monotone projected gradient descent. `objective` returns (value,
/// gradient); `project` maps any point back into the feasible set. Converges
/// when an accepted step changes the value by less than `rel_tol` relatively,
/// or when no projected step of any tried length improves it.
pub fn projected_gradient(
    x0: Vec<Real>,
    mut objective: impl FnMut(&[Real]) -> Result<(Real, Vec<Real>)>,
    project: impl Fn(&mut [Real]),
    opts: &PgOptions,
) -> Result<(Vec<Real>, Real, OptimTrace)> {
    let mut x = x0;
    project(&mut x);
    let (mut fx, mut gx) = objective(&x)?;
    let mut trace = OptimTrace {
        values: vec![fx],
        ..Default::default()
    };
    let mut step = opts.step0;

    for iter in 1..=opts.max_iters {
        trace.iters = iter;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand: Vec<Real> = x.iter().zip(&gx).map(|(xi, gi)| xi - t * gi).collect();
            project(&mut cand);
            let moved = cand
                .iter()
                .zip(&x)
                .map(|(c, xi)| (c - xi).abs())
                .fold(0.0_f64, Real::max);
            if moved == 0.0 {
                break;
            }
            let (fc, gc) = objective(&cand)?;
            if fc < fx {
                accepted = Some((cand, fc, gc, t));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc, gc, t_used)) => {
                let rel = (fx - fc).abs() / fx.abs().max(1e-300);
                x = cand;
                fx = fc;
                gx = gc;
                step = (t_used * 2.0).min(1e6);
                trace.values.push(fx);
                if rel < opts.rel_tol {
                    trace.converged = true;
                    break;
                }
            }
            None => {
                // No projected step of any tried length improves the value:
                // numerically stationary on the feasible set.
                trace.values.push(fx);
                trace.converged = true;
                break;
            }
        }
    }
    if !trace.converged {
        // Budget exhausted while still making tangible progress per step.
        trace.stagnation_warning = true;
    }
    Ok((x, fx, trace))
}

/// Projected subgradient descent with best-iterate tracking, for nonsmooth
/// convex objectives. Steps shrink like 1/√k; the best feasible value seen
/// is returned (any feasible point upper-bounds an infimum).
pub fn projected_subgradient(
    x0: Vec<Real>,
    mut objective: impl FnMut(&[Real]) -> Result<(Real, Vec<Real>)>,
    project: impl Fn(&mut [Real]),
    opts: &PgOptions,
) -> Result<(Vec<Real>, Real, OptimTrace)> {
    let mut x = x0;
    project(&mut x);
    let (f0, mut gx) = objective(&x)?;
    let mut best = (x.clone(), f0);
    let mut trace = OptimTrace {
        values: vec![f0],
        ..Default::default()
    };
    let mut since_best = 0usize;

    for iter in 1..=opts.max_iters {
        trace.iters = iter;
        let gnorm = gx.iter().map(|g| g * g).sum::<Real>().sqrt().max(1e-300);
        let t = opts.step0 / (gnorm * (iter as Real).sqrt());
        for (xi, gi) in x.iter_mut().zip(&gx) {
            *xi -= t * gi;
        }
        project(&mut x);
        let (fc, gc) = objective(&x)?;
        gx = gc;
        trace.values.push(fc);
        if fc < best.1 * (1.0 - opts.rel_tol) {
            best = (x.clone(), fc);
            since_best = 0;
        } else {
            if fc < best.1 {
                best = (x.clone(), fc);
            }
            since_best += 1;
            if since_best >= opts.stagnation_limit {
                trace.stagnation_warning = true;
                break;
            }
        }
    }
    let (xb, fb) = best;
    Ok((xb, fb, trace))
}

/// Euclidean projection onto the probability simplex {w ≥ 0, Σw = 1}.
pub fn project_to_simplex(w: &mut [Real]) {
    if w.is_empty() {
        return;
    }
    let mut sorted: Vec<Real> = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        acc += v;
        let cand = (acc - 1.0) / (k + 1) as Real;
        if v - cand > 0.0 {
            tau = cand;
        }
    }
    for v in w.iter_mut() {
        *v = (*v - tau).max(0.0);
    }
}
