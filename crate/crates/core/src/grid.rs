//! Model domains and their discretizations.
//!
//! Two domains are supported: the unit square `(0,1)^2` and the unit disk.
//! The square uses `n` interior nodes per axis with mesh width `h = 1/(n+1)`;
//! the disk uses `n` interior rings (`dr = 1/(n+1)`) with `2n` angular nodes
//! plus a single origin node. Both stencils come from a finite-volume view of
//! the five-point Laplacian, so the assembled stiffness matrix is symmetric on
//! either domain (the disk rows are scaled by cell volume).
//!
//! Boundary nodes are ordered cyclically by arclength. Each carries an
//! arclength weight, a unit outward normal, and the first two interior nodes
//! along the inward normal (used for discrete normal derivatives). On the
//! square the four corner nodes carry quadrature weight but are not coupled to
//! the interior stencil: the five-point graph has no corner edges.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::BandedCholesky;
use crate::Real;

pub const MIN_RESOLUTION: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    UnitSquare,
    UnitDisk,
}

/// Reference to a grid node: interior (solver unknown) or boundary (data).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Int(u32),
    Bnd(u32),
}

#[derive(Clone, Debug)]
pub struct BoundaryNode {
    pub pt: [Real; 2],
    /// Arclength coordinate in `[0, perimeter)`.
    pub s: Real,
    /// Arclength quadrature weight of the owned boundary segment.
    pub weight: Real,
    /// Unit outward normal (diagonal at the square's corners).
    pub normal: [Real; 2],
}

/// First two interior nodes met walking inward from a boundary node, with the
/// spacing between consecutive nodes along that line.
#[derive(Clone, Copy, Debug)]
pub struct InwardChain {
    pub nb1: usize,
    pub nb2: usize,
    pub spacing: Real,
}

/// Dyadic cube tree over the enclosing square `Q_0`.
///
/// Depth `d` partitions `Q_0` into `4^d` congruent cells exactly; `depth` is
/// the finest level, chosen as `floor(log2(1/h))` so finest cells are no
/// smaller than the mesh width.
#[derive(Clone, Copy, Debug)]
pub struct DyadicCubes {
    pub x0: Real,
    pub y0: Real,
    pub side: Real,
    pub depth: u32,
}

impl DyadicCubes {
    pub fn cells_per_side(&self, d: u32) -> usize {
        1usize << d
    }

    pub fn cell_side(&self, d: u32) -> Real {
        self.side / (1u64 << d) as Real
    }

    /// Cell indices at depth `d` of the cell containing `(x, y)`, clamped to
    /// the tree (points on the top/right faces belong to the last cell).
    pub fn cell_of(&self, d: u32, x: Real, y: Real) -> (usize, usize) {
        let m = self.cells_per_side(d);
        let fx = ((x - self.x0) / self.cell_side(d)).floor();
        let fy = ((y - self.y0) / self.cell_side(d)).floor();
        let ix = (fx.max(0.0) as usize).min(m - 1);
        let iy = (fy.max(0.0) as usize).min(m - 1);
        (ix, iy)
    }

    pub fn cell_center(&self, d: u32, ix: usize, iy: usize) -> (Real, Real) {
        let side = self.cell_side(d);
        (
            self.x0 + (ix as Real + 0.5) * side,
            self.y0 + (iy as Real + 0.5) * side,
        )
    }
}

pub struct Grid2D {
    kind: DomainKind,
    n: usize,
    /// Mesh width: `h` on the square, `dr` on the disk.
    h: Real,
    n_theta: usize,
    pts: Vec<[Real; 2]>,
    volumes: Vec<Real>,
    rho: Vec<Real>,
    boundary: Vec<BoundaryNode>,
    inward: Vec<InwardChain>,
    adj_offsets: Vec<usize>,
    adj: Vec<(NodeRef, Real)>,
    diag: Vec<Real>,
    couple: Vec<(u32, u32, Real)>,
    bandwidth: usize,
    cubes: DyadicCubes,
    boundary_half_volumes: Vec<Real>,
    pub(crate) laplace_factor: OnceLock<Arc<BandedCholesky>>,
}

impl std::fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid2D")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .field("interior", &self.pts.len())
            .field("boundary", &self.boundary.len())
            .finish()
    }
}

impl Grid2D {
    pub fn build(kind: DomainKind, n: usize) -> Result<Arc<Grid2D>> {
        if n < MIN_RESOLUTION {
            return Err(Error::InvalidResolution {
                n,
                min: MIN_RESOLUTION,
            });
        }
        let grid = match kind {
            DomainKind::UnitSquare => Self::build_square(n),
            DomainKind::UnitDisk => Self::build_disk(n),
        };
        Ok(Arc::new(grid))
    }

    fn build_square(n: usize) -> Grid2D {
        let h = 1.0 / (n + 1) as Real;
        let nn = n * n;
        let idx = |i: usize, j: usize| (j - 1) * n + (i - 1);

        let mut pts = Vec::with_capacity(nn);
        let mut rho = Vec::with_capacity(nn);
        for j in 1..=n {
            for i in 1..=n {
                let (x, y) = (i as Real * h, j as Real * h);
                pts.push([x, y]);
                rho.push(x.min(1.0 - x).min(y).min(1.0 - y));
            }
        }
        let volumes = vec![h * h; nn];

        // Boundary: four edges of n+1 nodes each, counterclockwise from (0,0),
        // each corner listed once (as the first node of its edge).
        let ne = n + 1;
        let mut boundary = Vec::with_capacity(4 * ne);
        let mut inward = Vec::with_capacity(4 * ne);
        let diag_n = 0.5_f64.sqrt();
        for t in 0..ne {
            let x = t as Real * h;
            boundary.push(BoundaryNode {
                pt: [x, 0.0],
                s: x,
                weight: h,
                normal: if t == 0 {
                    [-diag_n, -diag_n]
                } else {
                    [0.0, -1.0]
                },
            });
            inward.push(if t == 0 {
                InwardChain {
                    nb1: idx(1, 1),
                    nb2: idx(2, 2),
                    spacing: h * 2.0_f64.sqrt(),
                }
            } else {
                InwardChain {
                    nb1: idx(t, 1),
                    nb2: idx(t, 2),
                    spacing: h,
                }
            });
        }
        for t in 0..ne {
            let y = t as Real * h;
            boundary.push(BoundaryNode {
                pt: [1.0, y],
                s: 1.0 + y,
                weight: h,
                normal: if t == 0 {
                    [diag_n, -diag_n]
                } else {
                    [1.0, 0.0]
                },
            });
            inward.push(if t == 0 {
                InwardChain {
                    nb1: idx(n, 1),
                    nb2: idx(n - 1, 2),
                    spacing: h * 2.0_f64.sqrt(),
                }
            } else {
                InwardChain {
                    nb1: idx(n, t),
                    nb2: idx(n - 1, t),
                    spacing: h,
                }
            });
        }
        for t in 0..ne {
            let x = 1.0 - t as Real * h;
            boundary.push(BoundaryNode {
                pt: [x, 1.0],
                s: 2.0 + t as Real * h,
                weight: h,
                normal: if t == 0 { [diag_n, diag_n] } else { [0.0, 1.0] },
            });
            inward.push(if t == 0 {
                InwardChain {
                    nb1: idx(n, n),
                    nb2: idx(n - 1, n - 1),
                    spacing: h * 2.0_f64.sqrt(),
                }
            } else {
                InwardChain {
                    nb1: idx(n + 1 - t, n),
                    nb2: idx(n + 1 - t, n - 1),
                    spacing: h,
                }
            });
        }
        for t in 0..ne {
            let y = 1.0 - t as Real * h;
            boundary.push(BoundaryNode {
                pt: [0.0, y],
                s: 3.0 + t as Real * h,
                weight: h,
                normal: if t == 0 {
                    [-diag_n, diag_n]
                } else {
                    [-1.0, 0.0]
                },
            });
            inward.push(if t == 0 {
                InwardChain {
                    nb1: idx(1, n),
                    nb2: idx(2, n - 1),
                    spacing: h * 2.0_f64.sqrt(),
                }
            } else {
                InwardChain {
                    nb1: idx(1, n + 1 - t),
                    nb2: idx(2, n + 1 - t),
                    spacing: h,
                }
            });
        }

        // Boundary ids by edge: bottom t, right ne+t, top 2ne+t, left 3ne+t.
        let bnd_bottom = |i: usize| i;
        let bnd_right = |j: usize| ne + j;
        let bnd_top = |i: usize| 2 * ne + (n + 1 - i);
        let bnd_left = |j: usize| 3 * ne + (n + 1 - j);

        // Finite-volume flux coefficients: every interior face carries h/h = 1.
        let mut adj_offsets = Vec::with_capacity(nn + 1);
        let mut adj = Vec::new();
        let mut diag = Vec::with_capacity(nn);
        let mut couple = Vec::new();
        adj_offsets.push(0);
        for j in 1..=n {
            for i in 1..=n {
                let me = idx(i, j) as u32;
                let neighbors = [
                    if i > 1 {
                        NodeRef::Int(idx(i - 1, j) as u32)
                    } else {
                        NodeRef::Bnd(bnd_left(j) as u32)
                    },
                    if i < n {
                        NodeRef::Int(idx(i + 1, j) as u32)
                    } else {
                        NodeRef::Bnd(bnd_right(j) as u32)
                    },
                    if j > 1 {
                        NodeRef::Int(idx(i, j - 1) as u32)
                    } else {
                        NodeRef::Bnd(bnd_bottom(i) as u32)
                    },
                    if j < n {
                        NodeRef::Int(idx(i, j + 1) as u32)
                    } else {
                        NodeRef::Bnd(bnd_top(i) as u32)
                    },
                ];
                for nref in neighbors {
                    if let NodeRef::Bnd(b) = nref {
                        couple.push((b, me, 1.0));
                    }
                    adj.push((nref, 1.0));
                }
                diag.push(4.0);
                adj_offsets.push(adj.len());
            }
        }

        let mut boundary_half_volumes = vec![h * h / 2.0; 4 * ne];
        for corner in [0, ne, 2 * ne, 3 * ne] {
            boundary_half_volumes[corner] = h * h / 4.0;
        }

        let depth = ((n + 1) as Real).log2().floor() as u32;

        Grid2D {
            kind: DomainKind::UnitSquare,
            n,
            h,
            n_theta: 0,
            pts,
            volumes,
            rho,
            boundary,
            inward,
            adj_offsets,
            adj,
            diag,
            couple,
            bandwidth: n,
            cubes: DyadicCubes {
                x0: 0.0,
                y0: 0.0,
                side: 1.0,
                depth,
            },
            boundary_half_volumes,
            laplace_factor: OnceLock::new(),
        }
    }

    fn build_disk(n: usize) -> Grid2D {
        let dr = 1.0 / (n + 1) as Real;
        let n_theta = 2 * n;
        let dth = 2.0 * std::f64::consts::PI / n_theta as Real;
        let count = 1 + n * n_theta;
        let idx = |ring: usize, j: usize| 1 + (ring - 1) * n_theta + j;

        let mut pts = Vec::with_capacity(count);
        let mut volumes = Vec::with_capacity(count);
        let mut rho = Vec::with_capacity(count);
        pts.push([0.0, 0.0]);
        volumes.push(std::f64::consts::PI * (dr / 2.0) * (dr / 2.0));
        rho.push(1.0);
        for ring in 1..=n {
            let r = ring as Real * dr;
            for j in 0..n_theta {
                let th = j as Real * dth;
                pts.push([r * th.cos(), r * th.sin()]);
                volumes.push(r * dr * dth);
                rho.push(1.0 - r);
            }
        }

        let mut boundary = Vec::with_capacity(n_theta);
        let mut inward = Vec::with_capacity(n_theta);
        for j in 0..n_theta {
            let th = j as Real * dth;
            let (c, s) = (th.cos(), th.sin());
            boundary.push(BoundaryNode {
                pt: [c, s],
                s: th,
                weight: dth,
                normal: [c, s],
            });
            inward.push(InwardChain {
                nb1: idx(n, j),
                nb2: idx(n - 1, j),
                spacing: dr,
            });
        }

        // Finite-volume fluxes on the polar mesh (rows scaled by cell volume):
        // radial face at r_(i+1/2) carries (i+1/2) dθ, angular faces carry
        // dr/(r_i dθ), the origin couples to ring 1 through dθ/2 per sector.
        let mut adj_offsets = Vec::with_capacity(count + 1);
        let mut adj = Vec::new();
        let mut diag = Vec::with_capacity(count);
        let mut couple = Vec::new();
        adj_offsets.push(0);
        {
            let mut d = 0.0;
            for j in 0..n_theta {
                let c = dth / 2.0;
                adj.push((NodeRef::Int(idx(1, j) as u32), c));
                d += c;
            }
            diag.push(d);
            adj_offsets.push(adj.len());
        }
        for ring in 1..=n {
            let r = ring as Real * dr;
            let c_in = (ring as Real - 0.5) * dth;
            let c_out = (ring as Real + 0.5) * dth;
            let c_ang = dr / (r * dth);
            for j in 0..n_theta {
                let me = idx(ring, j) as u32;
                let mut d = 0.0;
                let inner = if ring == 1 {
                    NodeRef::Int(0)
                } else {
                    NodeRef::Int(idx(ring - 1, j) as u32)
                };
                adj.push((inner, c_in));
                d += c_in;
                if ring < n {
                    adj.push((NodeRef::Int(idx(ring + 1, j) as u32), c_out));
                } else {
                    adj.push((NodeRef::Bnd(j as u32), c_out));
                    couple.push((j as u32, me, c_out));
                }
                d += c_out;
                let prev = (j + n_theta - 1) % n_theta;
                let next = (j + 1) % n_theta;
                adj.push((NodeRef::Int(idx(ring, prev) as u32), c_ang));
                adj.push((NodeRef::Int(idx(ring, next) as u32), c_ang));
                d += 2.0 * c_ang;
                diag.push(d);
                adj_offsets.push(adj.len());
            }
        }

        // Boundary cells are the half-ring [1 - dr/2, 1]: per unit angle the
        // exact area is (dr/2)(1 - dr/4).
        let half_vol = dth * (dr / 2.0) * (1.0 - dr / 4.0);
        let boundary_half_volumes = vec![half_vol; n_theta];

        let depth = ((n + 1) as Real).log2().floor() as u32;

        Grid2D {
            kind: DomainKind::UnitDisk,
            n,
            h: dr,
            n_theta,
            pts,
            volumes,
            rho,
            boundary,
            inward,
            adj_offsets,
            adj,
            diag,
            couple,
            bandwidth: n_theta,
            cubes: DyadicCubes {
                x0: -1.0,
                y0: -1.0,
                side: 2.0,
                depth,
            },
            boundary_half_volumes,
            laplace_factor: OnceLock::new(),
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width: `h = 1/(n+1)` on the square, `dr = 1/(n+1)` on the disk.
    pub fn h(&self) -> Real {
        self.h
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn interior_count(&self) -> usize {
        self.pts.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn points(&self) -> &[[Real; 2]] {
        &self.pts
    }

    pub fn volumes(&self) -> &[Real] {
        &self.volumes
    }

    pub fn rho_values(&self) -> &[Real] {
        &self.rho
    }

    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn inward(&self) -> &[InwardChain] {
        &self.inward
    }

    pub fn cubes(&self) -> &DyadicCubes {
        &self.cubes
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Quadrature volume of the boundary strip cell owned by each boundary
    /// node; together with the interior volumes these tile the closed domain.
    pub fn boundary_half_volumes(&self) -> &[Real] {
        &self.boundary_half_volumes
    }

    pub fn perimeter(&self) -> Real {
        match self.kind {
            DomainKind::UnitSquare => 4.0,
            DomainKind::UnitDisk => 2.0 * std::f64::consts::PI,
        }
    }

    pub fn area(&self) -> Real {
        match self.kind {
            DomainKind::UnitSquare => 1.0,
            DomainKind::UnitDisk => std::f64::consts::PI,
        }
    }

    /// Stencil of interior node `i`: `(neighbor, flux coefficient)` pairs.
    /// The stiffness diagonal is the sum of the coefficients.
    pub fn stencil(&self, i: usize) -> &[(NodeRef, Real)] {
        &self.adj[self.adj_offsets[i]..self.adj_offsets[i + 1]]
    }

    pub fn stiffness_diag(&self, i: usize) -> Real {
        self.diag[i]
    }

    /// `(boundary node, interior node, flux coefficient)` triplets: the
    /// eliminated Dirichlet couplings. Corner nodes never appear.
    pub fn boundary_coupling(&self) -> &[(u32, u32, Real)] {
        &self.couple
    }

    pub fn same_grid(&self, other: &Grid2D) -> bool {
        self.kind == other.kind && self.n == other.n
    }

    /// Interior node index nearest to `(x, y)`, or `None` outside the closure
    /// of the domain.
    pub fn nearest_interior(&self, x: Real, y: Real) -> Option<usize> {
        match self.kind {
            DomainKind::UnitSquare => {
                if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                    return None;
                }
                let i = ((x / self.h).round() as i64).clamp(1, self.n as i64) as usize;
                let j = ((y / self.h).round() as i64).clamp(1, self.n as i64) as usize;
                Some((j - 1) * self.n + (i - 1))
            }
            DomainKind::UnitDisk => {
                let r = x.hypot(y);
                if r > 1.0 {
                    return None;
                }
                let ring = (r / self.h).round() as usize;
                if ring == 0 {
                    return Some(0);
                }
                let ring = ring.min(self.n);
                let dth = 2.0 * std::f64::consts::PI / self.n_theta as Real;
                let th = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
                let j = (th / dth).round() as usize % self.n_theta;
                Some(1 + (ring - 1) * self.n_theta + j)
            }
        }
    }

    /// Value of an interior nodal function at the node nearest to `(x, y)`;
    /// zero outside the domain closure (extension by zero).
    pub fn sample_nearest(&self, values: &[Real], x: Real, y: Real) -> Real {
        self.nearest_interior(x, y).map_or(0.0, |i| values[i])
    }

    /// Boundary node index nearest to arclength `s` (cyclic).
    pub fn nearest_boundary(&self, s: Real) -> usize {
        let per = self.perimeter();
        let s = s.rem_euclid(per);
        let spacing = per / self.boundary.len() as Real;
        (s / spacing).round() as usize % self.boundary.len()
    }

    /// Boundary nodes whose arclength lies in `[a, b]` (cyclic if `a > b`),
    /// with a half-ulp slack so arc endpoints landing on nodes are kept.
    pub fn boundary_nodes_in_arc(&self, a: Real, b: Real) -> Vec<usize> {
        let per = self.perimeter();
        let eps = 1e-12 * per;
        let a = a.rem_euclid(per);
        let b = b.rem_euclid(per);
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, node)| {
                if a <= b {
                    node.s >= a - eps && node.s <= b + eps
                } else {
                    node.s >= a - eps || node.s <= b + eps
                }
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Expand a set of boundary node indices by `margin` nodes on each side
    /// along the cyclic boundary ordering.
    pub fn expand_boundary_set(&self, set: &[usize], margin: usize) -> Vec<usize> {
        let m = self.boundary.len();
        let mut marked = vec![false; m];
        for &b in set {
            for k in 0..=margin {
                marked[(b + k) % m] = true;
                marked[(b + m - k % m) % m] = true;
            }
        }
        (0..m).filter(|&i| marked[i]).collect()
    }

    /// Composite node-times-cell-volume quadrature over interior nodes.
    /// Second order for smooth integrands vanishing on the boundary; for
    /// non-vanishing integrands the uncovered boundary strip costs O(h)
    /// (see [`Grid2D::integrate_closed`]).
    pub fn integrate(&self, values: &[Real]) -> Real {
        debug_assert_eq!(values.len(), self.volumes.len());
        let mut acc = 0.0;
        for (v, w) in values.iter().zip(&self.volumes) {
            acc += v * w;
        }
        acc
    }

    /// Quadrature including the boundary strip: trapezoid-style closure with
    /// the integrand's boundary values. Second order for smooth integrands.
    pub fn integrate_closed(&self, values: &[Real], boundary_values: &[Real]) -> Real {
        debug_assert_eq!(boundary_values.len(), self.boundary.len());
        let mut acc = self.integrate(values);
        for (v, w) in boundary_values.iter().zip(&self.boundary_half_volumes) {
            acc += v * w;
        }
        acc
    }
}

/// Nodal scalar field on a grid. Interior values always exist; boundary
/// values are optional and required only by operations that need a boundary
/// closure (discrete Laplacian, boundary-aware quadrature).
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<Grid2D>,
    values: Vec<Real>,
    boundary: Option<Vec<Real>>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("has_boundary", &self.boundary.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.interior_count()],
            boundary: None,
        }
    }

    pub fn constant(grid: &Arc<Grid2D>, c: Real) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.interior_count()],
            boundary: None,
        }
    }

    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<Real>) -> Self {
        assert_eq!(values.len(), grid.interior_count());
        ScalarField {
            grid: grid.clone(),
            values,
            boundary: None,
        }
    }

    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(Real, Real) -> Real) -> Self {
        let values = grid.points().iter().map(|p| f(p[0], p[1])).collect();
        ScalarField {
            grid: grid.clone(),
            values,
            boundary: None,
        }
    }

    /// Samples `f` at interior and boundary nodes.
    pub fn from_fn_closed(grid: &Arc<Grid2D>, f: impl Fn(Real, Real) -> Real) -> Self {
        let mut field = Self::from_fn(grid, &f);
        field.boundary = Some(grid.boundary().iter().map(|b| f(b.pt[0], b.pt[1])).collect());
        field
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[Real] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Real] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Real> {
        self.values
    }

    pub fn boundary_values(&self) -> Option<&[Real]> {
        self.boundary.as_deref()
    }

    pub fn with_boundary(mut self, boundary: Vec<Real>) -> Self {
        assert_eq!(boundary.len(), self.grid.boundary_count());
        self.boundary = Some(boundary);
        self
    }

    pub fn with_zero_boundary(self) -> Self {
        let n = self.grid.boundary_count();
        self.with_boundary(vec![0.0; n])
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_grid(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn integrate(&self) -> Real {
        self.grid.integrate(&self.values)
    }

    /// `∫ f·w dx` over interior nodes.
    pub fn integrate_times(&self, weight: &ScalarField) -> Result<Real> {
        self.check_same_grid(weight)?;
        let mut acc = 0.0;
        for ((v, w), vol) in self
            .values
            .iter()
            .zip(&weight.values)
            .zip(self.grid.volumes())
        {
            acc += v * w * vol;
        }
        Ok(acc)
    }

    pub fn norm_inf(&self) -> Real {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(Real) -> Real) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            boundary: self.boundary.as_ref().map(|b| b.iter().map(|&v| f(v)).collect()),
        }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(Real, Real) -> Real) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            boundary: None,
        })
    }

    /// Writes `x,y,value` rows (interior nodes, then boundary nodes if any).
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for (p, v) in self.grid.points().iter().zip(&self.values) {
            writeln!(w, "{},{},{}", p[0], p[1], v)?;
        }
        if let Some(b) = &self.boundary {
            for (node, v) in self.grid.boundary().iter().zip(b) {
                writeln!(w, "{},{},{}", node.pt[0], node.pt[1], v)?;
            }
        }
        Ok(())
    }
}

/// Distance-to-boundary field ρ: exact `min(x, 1-x, y, 1-y)` on the square,
/// `1 - |x|` on the disk. Boundary values are zero.
pub fn distance_field(grid: &Arc<Grid2D>) -> ScalarField {
    ScalarField {
        grid: grid.clone(),
        values: grid.rho_values().to_vec(),
        boundary: Some(vec![0.0; grid.boundary_count()]),
    }
}
