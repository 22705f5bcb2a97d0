//! Finite Radon measures on the boundary curve and in the interior.
//!
//! Boundary measures are triples (atoms, density, Cantor parts) in arclength
//! coordinates. Density pieces have closed-form antiderivatives, so
//! discretization onto boundary nodes integrates each owned segment exactly
//! and conserves total variation to rounding. The Cantor generator realizes
//! a singular-continuous part at finite depth g: 2^g equal atoms at the
//! centers of the surviving middle-thirds intervals.
//!
//! The Lebesgue decomposition is structural: atoms + Cantor parts form the
//! singular part, density pieces the part absolutely continuous with respect
//! to arclength. Truncation min(density, k) acts on pure density measures
//! and stays exact because each piece knows its capped antiderivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainKind, Grid2D};
use crate::Real;

/// Absolutely continuous boundary density on an arc `[a, b]` (arclength).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityPiece {
    Constant {
        value: Real,
        arc: (Real, Real),
    },
    /// `amplitude / sqrt(s - origin)` on the arc, optionally capped at
    /// `min(·, cap)` (the truncation scheme's working form). The arc must
    /// start at or after the origin.
    InverseSqrt {
        amplitude: Real,
        origin: Real,
        arc: (Real, Real),
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<Real>,
    },
}

impl DensityPiece {
    pub fn arc(&self) -> (Real, Real) {
        match self {
            DensityPiece::Constant { arc, .. } | DensityPiece::InverseSqrt { arc, .. } => *arc,
        }
    }

    /// Pointwise value at arclength s (0 outside the arc).
    pub fn eval(&self, s: Real) -> Real {
        let (a, b) = self.arc();
        if s < a || s > b {
            return 0.0;
        }
        match self {
            DensityPiece::Constant { value, .. } => *value,
            DensityPiece::InverseSqrt {
                amplitude,
                origin,
                cap,
                ..
            } => {
                let raw = if s <= *origin {
                    Real::INFINITY
                } else {
                    amplitude / (s - origin).sqrt()
                };
                cap.map_or(raw, |k| raw.min(k))
            }
        }
    }

    /// Exact integral over `[lo, hi]` (clipped to the arc).
    pub fn integral(&self, lo: Real, hi: Real) -> Real {
        let (a, b) = self.arc();
        let lo = lo.max(a);
        let hi = hi.min(b);
        if hi <= lo {
            return 0.0;
        }
        match self {
            DensityPiece::Constant { value, .. } => value * (hi - lo),
            DensityPiece::InverseSqrt {
                amplitude,
                origin,
                cap,
                ..
            } => {
                let prim = |s: Real| 2.0 * amplitude * (s - origin).max(0.0).sqrt();
                match cap {
                    None => prim(hi) - prim(lo),
                    Some(k) => {
                        // Kink where amplitude/sqrt(s - origin) = k.
                        let kink = origin + (amplitude / k) * (amplitude / k);
                        let flat_hi = hi.min(kink);
                        let flat = if flat_hi > lo { k * (flat_hi - lo) } else { 0.0 };
                        let curve_lo = lo.max(kink);
                        let curve = if hi > curve_lo {
                            prim(hi) - prim(curve_lo)
                        } else {
                            0.0
                        };
                        flat + curve
                    }
                }
            }
        }
    }

    pub fn total(&self) -> Real {
        let (a, b) = self.arc();
        self.integral(a, b)
    }

    fn truncated(&self, k: Real) -> DensityPiece {
        match self.clone() {
            DensityPiece::Constant { value, arc } => DensityPiece::Constant {
                value: value.min(k),
                arc,
            },
            DensityPiece::InverseSqrt {
                amplitude,
                origin,
                arc,
                cap,
            } => DensityPiece::InverseSqrt {
                amplitude,
                origin,
                arc,
                cap: Some(cap.map_or(k, |c| c.min(k))),
            },
        }
    }
}

/// Position of a boundary atom: by arclength, or by a point that must lie on
/// the boundary curve (checked against h/2 at discretization time).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomLoc {
    Arclength(Real),
    Point([Real; 2]),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CantorPart {
    pub arc: (Real, Real),
    pub mass: Real,
    pub depth: u32,
}

impl CantorPart {
    /// Atom positions (arclength) and the common mass of the 2^depth atoms.
    pub fn atoms(&self) -> (Vec<Real>, Real) {
        let g = self.depth;
        let mut starts = vec![0.0_f64];
        let mut len = 1.0_f64;
        for _ in 0..g {
            len /= 3.0;
            let mut next = Vec::with_capacity(starts.len() * 2);
            for &s in &starts {
                next.push(s);
                next.push(s + 2.0 * len);
            }
            starts = next;
        }
        let (a, b) = self.arc;
        let span = b - a;
        let centers = starts
            .iter()
            .map(|&s| a + (s + len / 2.0) * span)
            .collect();
        (centers, self.mass / (1u64 << g) as Real)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<(AtomLoc, Real)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<DensityPiece>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cantor: Vec<CantorPart>,
}

impl BoundaryMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn atom(s: Real, mass: Real) -> Self {
        BoundaryMeasure {
            atoms: vec![(AtomLoc::Arclength(s), mass)],
            ..Self::default()
        }
    }

    pub fn constant_density(value: Real, arc: (Real, Real)) -> Self {
        BoundaryMeasure {
            density: vec![DensityPiece::Constant { value, arc }],
            ..Self::default()
        }
    }

    pub fn inverse_sqrt_density(amplitude: Real, origin: Real, arc: (Real, Real)) -> Self {
        BoundaryMeasure {
            density: vec![DensityPiece::InverseSqrt {
                amplitude,
                origin,
                arc,
                cap: None,
            }],
            ..Self::default()
        }
    }

    pub fn cantor(arc: (Real, Real), mass: Real, depth: u32) -> Self {
        BoundaryMeasure {
            cantor: vec![CantorPart { arc, mass, depth }],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &(_, m) in &self.atoms {
            if m < 0.0 {
                return Err(Error::NegativeMass);
            }
        }
        for piece in &self.density {
            let bad = match piece {
                DensityPiece::Constant { value, .. } => *value < 0.0,
                DensityPiece::InverseSqrt { amplitude, cap, .. } => {
                    *amplitude < 0.0 || cap.is_some_and(|k| k < 0.0)
                }
            };
            let (a, b) = piece.arc();
            if bad || b < a {
                return Err(Error::NegativeMass);
            }
        }
        for c in &self.cantor {
            if c.mass < 0.0 || c.arc.1 < c.arc.0 {
                return Err(Error::NegativeMass);
            }
        }
        Ok(())
    }

    pub fn total_variation(&self) -> Real {
        let atoms: Real = self.atoms.iter().map(|&(_, m)| m).sum();
        let dens: Real = self.density.iter().map(|p| p.total()).sum();
        let cantor: Real = self.cantor.iter().map(|c| c.mass).sum();
        atoms + dens + cantor
    }

    /// Structural Lebesgue decomposition: (singular, regular).
    pub fn lebesgue_decompose(&self) -> (BoundaryMeasure, BoundaryMeasure) {
        (
            BoundaryMeasure {
                atoms: self.atoms.clone(),
                density: Vec::new(),
                cantor: self.cantor.clone(),
            },
            BoundaryMeasure {
                atoms: Vec::new(),
                density: self.density.clone(),
                cantor: Vec::new(),
            },
        )
    }

    /// `min(density, k)` for a pure density measure. Pieces must not overlap
    /// (min does not distribute over sums) and the measure must carry no
    /// singular part (truncating atoms is undefined in the scheme).
    pub fn truncate_regular(&self, k: Real) -> Result<BoundaryMeasure> {
        if k < 0.0 {
            return Err(Error::NegativeMass);
        }
        if !self.atoms.is_empty() || !self.cantor.is_empty() {
            return Err(Error::NotPureDensity);
        }
        let mut arcs: Vec<(Real, Real)> = self.density.iter().map(|p| p.arc()).collect();
        arcs.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in arcs.windows(2) {
            if w[0].1 > w[1].0 + 1e-12 {
                return Err(Error::OverlappingDensities);
            }
        }
        Ok(BoundaryMeasure {
            atoms: Vec::new(),
            density: self.density.iter().map(|p| p.truncated(k)).collect(),
            cantor: Vec::new(),
        })
    }

    pub fn scaled(&self, a: Real) -> BoundaryMeasure {
        let mut out = self.clone();
        for (_, m) in out.atoms.iter_mut() {
            *m *= a;
        }
        for piece in out.density.iter_mut() {
            match piece {
                DensityPiece::Constant { value, .. } => *value *= a,
                DensityPiece::InverseSqrt {
                    amplitude, cap, ..
                } => {
                    *amplitude *= a;
                    if let Some(k) = cap {
                        *k *= a;
                    }
                }
            }
        }
        for c in out.cantor.iter_mut() {
            c.mass *= a;
        }
        out
    }

    pub fn plus(&self, other: &BoundaryMeasure) -> BoundaryMeasure {
        let mut out = self.clone();
        out.atoms.extend(other.atoms.iter().cloned());
        out.density.extend(other.density.iter().cloned());
        out.cantor.extend(other.cantor.iter().cloned());
        out
    }

    /// Nodal weights: node b receives the measure of its owned boundary
    /// segment (atoms snap to the nearest node). Conserves total variation
    /// to rounding.
    pub fn discretize(&self, grid: &Grid2D) -> Result<Vec<Real>> {
        self.validate()?;
        let per = grid.perimeter();
        let bnodes = grid.boundary();
        let mut weights = vec![0.0; bnodes.len()];

        let snap_atom = |s: Real, mass: Real, weights: &mut Vec<Real>| {
            let b = grid.nearest_boundary(s);
            weights[b] += mass;
        };

        for &(loc, mass) in &self.atoms {
            match loc {
                AtomLoc::Arclength(s) => snap_atom(s.rem_euclid(per), mass, &mut weights),
                AtomLoc::Point([x, y]) => {
                    let (s, dist) = project_to_boundary(grid.kind(), x, y);
                    if dist > grid.h() / 2.0 {
                        return Err(Error::AtomOffBoundary {
                            s,
                            dist,
                            limit: grid.h() / 2.0,
                        });
                    }
                    snap_atom(s, mass, &mut weights);
                }
            }
        }

        for part in &self.cantor {
            let (centers, mass) = part.atoms();
            for s in centers {
                snap_atom(s.rem_euclid(per), mass, &mut weights);
            }
        }

        for piece in &self.density {
            let (a, b) = piece.arc();
            if a < 0.0 || b > per {
                return Err(Error::Config(format!(
                    "density arc ({a}, {b}) outside [0, {per}]"
                )));
            }
            for (i, node) in bnodes.iter().enumerate() {
                let lo = node.s - node.weight / 2.0;
                let hi = node.s + node.weight / 2.0;
                weights[i] += piece.integral(lo, hi);
                // The first node's segment wraps below s = 0.
                if lo < 0.0 {
                    weights[i] += piece.integral(per + lo, per);
                }
            }
        }
        Ok(weights)
    }

    /// Measure of a union of node-owned boundary segments.
    pub fn measure_of_set(&self, grid: &Grid2D, nodes: &[usize]) -> Result<Real> {
        let w = self.discretize(grid)?;
        Ok(nodes.iter().map(|&b| w[b]).sum())
    }
}

/// Arclength of the closest boundary point and the distance to the curve.
pub fn project_to_boundary(kind: DomainKind, x: Real, y: Real) -> (Real, Real) {
    match kind {
        DomainKind::UnitSquare => {
            // Distances to the four edges (clamping the tangential coordinate).
            let seg = |s: Real, d: Real| (s, d);
            let cands = [
                seg(x.clamp(0.0, 1.0), (y).hypot((x - x.clamp(0.0, 1.0)).abs())),
                seg(1.0 + y.clamp(0.0, 1.0), (1.0 - x).hypot((y - y.clamp(0.0, 1.0)).abs())),
                seg(2.0 + (1.0 - x.clamp(0.0, 1.0)), (1.0 - y).hypot((x - x.clamp(0.0, 1.0)).abs())),
                seg(3.0 + (1.0 - y.clamp(0.0, 1.0)), (x).hypot((y - y.clamp(0.0, 1.0)).abs())),
            ];
            cands
                .into_iter()
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap()
        }
        DomainKind::UnitDisk => {
            let r = x.hypot(y);
            let th = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
            (th, (r - 1.0).abs())
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InteriorMeasure {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<([Real; 2], Real)>,
    /// Optional absolutely continuous part, given as a closed-form density
    /// sampled nodewise at discretization time.
    #[serde(skip)]
    pub density: Option<fn(Real, Real) -> Real>,
}

impl InteriorMeasure {
    pub fn atom(x: Real, y: Real, mass: Real) -> Self {
        InteriorMeasure {
            atoms: vec![([x, y], mass)],
            density: None,
        }
    }

    pub fn density(f: fn(Real, Real) -> Real) -> Self {
        InteriorMeasure {
            atoms: Vec::new(),
            density: Some(f),
        }
    }

    /// Nodal source density: an atom of mass a at node i contributes
    /// a / volume(i), so its discrete integral is exactly a.
    pub fn discretize(&self, grid: &Grid2D) -> Result<Vec<Real>> {
        let mut source = vec![0.0; grid.interior_count()];
        for &([x, y], mass) in &self.atoms {
            if mass < 0.0 {
                return Err(Error::NegativeMass);
            }
            let rho = match grid.kind() {
                DomainKind::UnitSquare => x.min(1.0 - x).min(y).min(1.0 - y),
                DomainKind::UnitDisk => 1.0 - x.hypot(y),
            };
            if rho < 0.0 {
                return Err(Error::AtomOutsideDomain { x, y });
            }
            if rho < grid.h() {
                return Err(Error::AtomTooCloseToBoundary { x, y });
            }
            let node = grid
                .nearest_interior(x, y)
                .ok_or(Error::AtomOutsideDomain { x, y })?;
            source[node] += mass / grid.volumes()[node];
        }
        if let Some(f) = self.density {
            for (i, p) in grid.points().iter().enumerate() {
                source[i] += f(p[0], p[1]);
            }
        }
        Ok(source)
    }

    /// Total mass of the discretized measure (atoms are exact; the density
    /// part is its own quadrature).
    pub fn total_variation(&self, grid: &Grid2D) -> Result<Real> {
        let source = self.discretize(grid)?;
        Ok(grid.integrate(&source))
    }
}

/// Turns discretized boundary weights into nodal boundary data (a density
/// with respect to arclength) for the harmonic solver.
pub fn weights_to_density(grid: &Grid2D, weights: &[Real]) -> Vec<Real> {
    grid.boundary()
        .iter()
        .zip(weights)
        .map(|(node, w)| w / node.weight)
        .collect()
}
