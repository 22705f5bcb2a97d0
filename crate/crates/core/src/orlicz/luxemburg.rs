//! Luxemburg and Orlicz (Amemiya) norms of grid fields against a weight.
//!
//! The Luxemburg norm is `inf { k > 0 : ∫ N(φ/k) w dx ≤ 1 }`, found by
//! bisection on k; the modular is continuous and strictly decreasing in k
//! wherever it is positive, so the crossing is unique.
//!
//! The Amemiya form `inf_{k>0} (1 + ∫ N(kφ) w dx)/k` evaluates the same
//! space's Orlicz norm. In the variable m = 1/k the objective is
//! `m + m·∫N(φ/m)w`, a perspective of a convex function and hence convex in
//! m, so golden-section search is reliable. The two norms satisfy
//! `lux ≤ amemiya ≤ 2·lux`.
//!
//! The pairing bound uses the Amemiya norm on the P side: the constant-one
//! Hölder inequality `∫|φψ|w ≤ ‖φ‖_O(P) ‖ψ‖_Lux(P*)` is rigorous, whereas
//! with both factors in Luxemburg norms the sharp constant is 2 (φ = ψ = 1
//! against the distance weight already exceeds the double-Luxemburg product
//! by a factor ~1.9; a regression test pins that counterexample).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::orlicz::nfunction;
use crate::Real;

/// Which N-function of the pair a norm uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NFunc {
    /// P(t) = e^|t| - 1 - |t| (exponential class).
    Exp,
    /// P*(t) = (1+|t|)ln(1+|t|) - |t| (L ln L class).
    LLogL,
}

impl NFunc {
    pub fn eval(self, t: Real) -> Real {
        match self {
            NFunc::Exp => nfunction::p(t),
            NFunc::LLogL => nfunction::p_star(t),
        }
    }

    pub fn derivative(self, s: Real) -> Real {
        match self {
            NFunc::Exp => nfunction::dp(s),
            NFunc::LLogL => nfunction::dp_star(s),
        }
    }

    pub fn conjugate(self) -> NFunc {
        match self {
            NFunc::Exp => NFunc::LLogL,
            NFunc::LLogL => NFunc::Exp,
        }
    }
}

/// `∫ N(φ/k) w dx` over interior nodes. Zero-weight nodes are skipped so an
/// infinite N value off the weight's support cannot poison the sum.
fn modular(nf: NFunc, phi: &[Real], weight: &[Real], volumes: &[Real], k: Real) -> Real {
    let mut acc = 0.0;
    for i in 0..phi.len() {
        let wv = weight[i] * volumes[i];
        if wv > 0.0 {
            acc += wv * nf.eval(phi[i] / k);
        }
    }
    acc
}

fn norm_inputs<'a>(
    phi: &'a ScalarField,
    weight: &'a ScalarField,
) -> Result<(&'a [Real], &'a [Real], &'a [Real])> {
    phi.check_same_grid(weight)?;
    Ok((phi.values(), weight.values(), phi.grid().volumes()))
}

/// Largest |φ| over nodes carrying positive weight; the norm is zero iff
/// this is zero (the field vanishes a.e. for the weight).
fn supported_sup(phi: &[Real], weight: &[Real], volumes: &[Real]) -> Real {
    let mut sup = 0.0_f64;
    for i in 0..phi.len() {
        if weight[i] * volumes[i] > 0.0 {
            sup = sup.max(phi[i].abs());
        }
    }
    sup
}

/// Luxemburg norm of `phi` in the Orlicz space of `nf` with weight `weight`.
pub fn luxemburg_norm(phi: &ScalarField, weight: &ScalarField, nf: NFunc) -> Result<Real> {
    let (v, w, vol) = norm_inputs(phi, weight)?;
    let sup = supported_sup(v, w, vol);
    if sup == 0.0 {
        return Ok(0.0);
    }
    // Bracket the crossing of modular(k) = 1 starting from k = sup.
    let mut k = sup;
    let (mut lo, mut hi);
    if modular(nf, v, w, vol, k) <= 1.0 {
        let mut doublings = 0;
        loop {
            let next = k / 2.0;
            if modular(nf, v, w, vol, next) > 1.0 {
                lo = next;
                hi = k;
                break;
            }
            k = next;
            doublings += 1;
            if doublings >= 200 {
                // Modular stays ≤ 1 at arbitrarily small k: the field is
                // null for this weight.
                return Ok(0.0);
            }
        }
    } else {
        let mut doublings = 0;
        loop {
            let next = k * 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::NormBracket { doublings });
            }
            if modular(nf, v, w, vol, next) <= 1.0 {
                lo = k;
                hi = next;
                break;
            }
            k = next;
        }
    }
    // Bisect to a tight k; stop early once the modular sits on 1.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = modular(nf, v, w, vol, mid);
        if (m - 1.0).abs() <= 1e-12 {
            return Ok(mid);
        }
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Orlicz (Amemiya) norm: `inf_{k>0} (1 + ∫N(kφ)w)/k`.
pub fn amemiya_norm(phi: &ScalarField, weight: &ScalarField, nf: NFunc) -> Result<Real> {
    amemiya_norm_with_scale(phi, weight, nf).map(|(norm, _)| norm)
}

/// Amemiya norm together with the minimizing scale `m = 1/k`, at which the
/// norm equals `m(1 + ∫N(φ/m)w)`. The scale is what envelope-theorem
/// differentiation of the norm needs: `∂‖φ‖/∂φ_i = w_i vol_i N'(φ_i/m)`.
/// A zero field reports scale 0 (no minimizer; the gradient is the zero
/// subgradient there).
pub fn amemiya_norm_with_scale(
    phi: &ScalarField,
    weight: &ScalarField,
    nf: NFunc,
) -> Result<(Real, Real)> {
    let (v, w, vol) = norm_inputs(phi, weight)?;
    if supported_sup(v, w, vol) == 0.0 {
        return Ok((0.0, 0.0));
    }
    let lux = luxemburg_norm(phi, weight, nf)?;
    let objective = |m: Real| m + m * modular(nf, v, w, vol, m);
    // Convex in m; the minimizer lies in (0, 2·lux] since the objective at
    // m = lux is ≤ 2·lux and the objective is ≥ m.
    let mut a = lux * 1e-6;
    let mut b = lux * 2.0000001;
    let golden = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..160 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = objective(x2);
        }
        if b - a <= 1e-12 * b {
            break;
        }
    }
    if f1 <= f2 {
        Ok((f1, x1))
    } else {
        Ok((f2, x2))
    }
}

/// Both sides of the Hölder-Young pairing bound:
/// `lhs = |∫ φψ w dx|`, `rhs = ‖φ‖_O(P) · ‖ψ‖_Lux(P*)`, with `lhs ≤ rhs`.
pub fn holder_young_pairing(
    phi: &ScalarField,
    psi: &ScalarField,
    weight: &ScalarField,
) -> Result<(Real, Real)> {
    phi.check_same_grid(psi)?;
    let (pv, w, vol) = norm_inputs(phi, weight)?;
    let qv = psi.values();
    let mut lhs = 0.0;
    for i in 0..pv.len() {
        lhs += pv[i] * qv[i] * w[i] * vol[i];
    }
    let rhs = amemiya_norm(phi, weight, NFunc::Exp)? * luxemburg_norm(psi, weight, NFunc::LLogL)?;
    Ok((lhs.abs(), rhs))
}
