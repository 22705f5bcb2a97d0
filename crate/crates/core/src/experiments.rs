//! Packaged experiments: deterministic sweeps that turn the kernels into
//! classified, serializable findings. No experiment draws random numbers;
//! rerunning one reproduces its report bit for bit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capacity::{
    boundary_capacity_pair, boundary_capacity_primal, interior_capacity, InteriorVariant,
};
use crate::error::{Error, Result};
use crate::grid::{DomainKind, Grid2D, ScalarField};
use crate::laplace::apply_laplacian_zero_bc;
use crate::measures::{BoundaryMeasure, InteriorMeasure};
use crate::optim::PgOptions;
use crate::potentials::{admissibility_test, bexp_boundary_norm, green_potential, Admissibility};
use crate::solver::{solve_dirichlet, solve_with_pinned, BoundaryData, Nonlinearity, SolveOptions};
use crate::Real;

const PI: Real = std::f64::consts::PI;

fn hot_solve_opts() -> SolveOptions {
    SolveOptions {
        weak_residual: false,
        ..Default::default()
    }
}

// ---------------------------------------------------------------------------
// concentrated-mass threshold

/// Growth tolerance for the stable verdict: the absorbed mass settles once
/// consecutive refinements change it by at most this relative amount.
pub const STABLE_TAU: Real = 0.15;
/// A refinement ratio at or above this is outright blow-up.
pub const BLOWUP_RATIO: Real = 1.5;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DiracThresholdParams {
    pub domain: DomainKind,
    pub levels: Vec<u32>,
    pub location: [Real; 2],
    pub mass_lo: Real,
    pub mass_hi: Real,
    /// Bisection stops once the bracketing interval is this narrow.
    pub width_target: Real,
}

impl Default for DiracThresholdParams {
    fn default() -> Self {
        DiracThresholdParams {
            domain: DomainKind::UnitSquare,
            levels: vec![64, 128, 256],
            location: [0.5, 0.5],
            mass_lo: 2.0 * PI,
            mass_hi: 6.0 * PI,
            width_target: 0.5 * PI,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    Stable,
    BlowUp,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelSample {
    pub n: u32,
    /// ∫ g(u) dx at this level, from the nonlinear solve.
    pub absorbed: Real,
    pub sup_u: Real,
    /// ∫ exp(G[aδ]) dx: exponential integrability of the point mass's own
    /// Green potential. This is the classifier statistic; unlike the
    /// absorbed mass it is not capped by conservation, so divergence shows
    /// up as unbounded growth under refinement.
    pub exp_green: Real,
    pub saturated: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiracProbe {
    pub mass: Real,
    pub verdict: GrowthVerdict,
    /// Bisection-side decision: true when the integrability statistic keeps
    /// growing by more than the stable tolerance per refinement.
    pub diverging_side: bool,
    pub samples: Vec<LevelSample>,
    /// Consecutive-level ratios of exp_green.
    pub ratios: Vec<Real>,
    /// Discrete mass balance on the nonlinear solves: the equation absorbs
    /// at most the supplied mass, the rest leaves through the boundary.
    /// Holds at every level. This cap is also why the absorbed mass itself
    /// cannot serve as a divergence detector.
    pub flux_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiracThresholdReport {
    pub probes: Vec<DiracProbe>,
    /// Final bracket: masses below the left end stay stable, above the
    /// right end blow up under refinement.
    pub interval: [Real; 2],
}

fn exp_integral(values: &[Real], vols: &[Real]) -> Real {
    let mut acc = 0.0;
    for (v, w) in values.iter().zip(vols) {
        if *v > crate::EXP_GUARD {
            return Real::INFINITY;
        }
        acc += w * v.exp();
    }
    acc
}

fn classify_point_mass(
    grids: &[Arc<Grid2D>],
    location: [Real; 2],
    mass: Real,
    opts: &SolveOptions,
) -> Result<DiracProbe> {
    let mu = InteriorMeasure::atom(location[0], location[1], mass);
    let mut samples = Vec::with_capacity(grids.len());
    let mut flux_ok = true;
    for grid in grids {
        let f = mu.discretize(grid)?;
        let report = solve_dirichlet(grid, &BoundaryData::Zero, Nonlinearity::Exp, Some(&f), opts)?;
        let absorbed = report.u.map(|v| Nonlinearity::Exp.g(v)).integrate();
        flux_ok &= absorbed <= mass * (1.0 + 1e-8) + 1e-12;
        let green = green_potential(grid, &mu)?;
        samples.push(LevelSample {
            n: grid.n() as u32,
            absorbed,
            sup_u: report.u.norm_inf(),
            exp_green: exp_integral(green.field.values(), grid.volumes()),
            saturated: report.saturated,
        });
    }
    let saturated = samples
        .iter()
        .any(|s| s.saturated || !s.exp_green.is_finite());
    let ratios: Vec<Real> = samples
        .windows(2)
        .map(|w| w[1].exp_green / w[0].exp_green)
        .collect();
    let last = *ratios.last().expect("needs at least two levels");
    let verdict = if saturated || last >= BLOWUP_RATIO {
        GrowthVerdict::BlowUp
    } else if (last - 1.0).abs() <= STABLE_TAU {
        GrowthVerdict::Stable
    } else {
        GrowthVerdict::Inconclusive
    };
    Ok(DiracProbe {
        mass,
        verdict,
        diverging_side: saturated || last >= 1.0 + STABLE_TAU,
        samples,
        ratios,
        flux_ok,
    })
}

/// Bisects for the mass threshold separating point sources the equation can
/// absorb from ones with no solution. The detector is exponential
/// integrability of the atom's Green potential under refinement; each probe
/// also carries the nonlinear solve trace (absorbed mass, sup), which
/// saturates rather than diverges past the threshold and so serves as the
/// audit record, not the verdict.
pub fn dirac_threshold(params: &DiracThresholdParams) -> Result<DiracThresholdReport> {
    if params.levels.len() < 2 {
        return Err(Error::Config(
            "threshold classification needs at least 2 levels".into(),
        ));
    }
    let grids: Vec<Arc<Grid2D>> = params
        .levels
        .iter()
        .map(|&n| Grid2D::build(params.domain, n as usize))
        .collect::<Result<_>>()?;
    let opts = hot_solve_opts();

    let mut probes = Vec::new();
    let lo_probe = classify_point_mass(&grids, params.location, params.mass_lo, &opts)?;
    if lo_probe.verdict != GrowthVerdict::Stable {
        return Err(Error::ThresholdRange {
            verdict: "lower endpoint mass did not classify stable",
        });
    }
    let hi_probe = classify_point_mass(&grids, params.location, params.mass_hi, &opts)?;
    if hi_probe.verdict != GrowthVerdict::BlowUp {
        return Err(Error::ThresholdRange {
            verdict: "upper endpoint mass did not classify blow-up",
        });
    }
    probes.push(lo_probe);
    probes.push(hi_probe);

    let (mut lo, mut hi) = (params.mass_lo, params.mass_hi);
    while hi - lo > params.width_target {
        let mid = 0.5 * (lo + hi);
        let probe = classify_point_mass(&grids, params.location, mid, &opts)?;
        if probe.diverging_side {
            hi = mid;
        } else {
            lo = mid;
        }
        probes.push(probe);
    }
    Ok(DiracThresholdReport {
        probes,
        interval: [lo, hi],
    })
}

// ---------------------------------------------------------------------------
// interior removability

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RemovabilityInteriorParams {
    pub n: u32,
    /// Pin heights B; consecutive entries should double for the growth
    /// probes to be meaningful.
    pub pin_values: Vec<Real>,
    pub probe_distance: Real,
    /// Side of the fat (positive-capacity) comparison set.
    pub square_side: Real,
}

impl Default for RemovabilityInteriorParams {
    fn default() -> Self {
        RemovabilityInteriorParams {
            n: 128,
            pin_values: vec![5.0, 10.0, 20.0, 40.0],
            probe_distance: 0.25,
            square_side: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PinProbe {
    pub pin: Real,
    /// Solution at the probe point when a single center node is pinned.
    pub point_probe: Real,
    /// Same, when the whole fat set is pinned.
    pub set_probe: Real,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemovabilityInteriorReport {
    pub probes: Vec<PinProbe>,
    /// (level, interior capacity) for the single-node set.
    pub point_capacity: Vec<(u32, Real)>,
    /// (level, interior capacity) for the fat set.
    pub set_capacity: Vec<(u32, Real)>,
    /// ∫ |Δ_h η| ln(1 + |Δ_h η|) dx for each minimizer at the finest level.
    pub point_llogl_mass: Real,
    pub set_llogl_mass: Real,
}

fn center_square_nodes(grid: &Grid2D, side: Real) -> Vec<usize> {
    let half = side / 2.0;
    grid.points()
        .iter()
        .enumerate()
        .filter(|(_, p)| (p[0] - 0.5).abs() <= half + 1e-12 && (p[1] - 0.5).abs() <= half + 1e-12)
        .map(|(i, _)| i)
        .collect()
}

fn llogl_mass_of_laplacian(grid: &Arc<Grid2D>, eta: &[Real]) -> Real {
    let field = ScalarField::from_values(grid, eta.to_vec());
    let lap = apply_laplacian_zero_bc(&field);
    lap.values()
        .iter()
        .zip(grid.volumes())
        .map(|(l, v)| v * l.abs() * l.abs().ln_1p())
        .sum()
}

/// Pins the solution to increasing heights on a single node and on a fat
/// set, probing how much of the forcing survives at a distance. A
/// zero-capacity pin is absorbed (probe saturates in B); a positive-capacity
/// pin keeps pushing (probe keeps growing).
pub fn removability_interior(
    params: &RemovabilityInteriorParams,
) -> Result<RemovabilityInteriorReport> {
    let grid = Grid2D::build(DomainKind::UnitSquare, params.n as usize)?;
    let opts = hot_solve_opts();
    let point_node = grid
        .nearest_interior(0.5, 0.5)
        .ok_or_else(|| Error::Config("center node not found".into()))?;
    let set_nodes = center_square_nodes(&grid, params.square_side);
    if set_nodes.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let point_probe_at = [0.5 + params.probe_distance, 0.5];
    let set_probe_at = [0.5 + params.square_side / 2.0 + params.probe_distance, 0.5];

    let mut probes = Vec::new();
    for &b in &params.pin_values {
        let point_solve = solve_with_pinned(&grid, &[(point_node, b)], Nonlinearity::Exp, &opts)?;
        let pins: Vec<(usize, Real)> = set_nodes.iter().map(|&i| (i, b)).collect();
        let set_solve = solve_with_pinned(&grid, &pins, Nonlinearity::Exp, &opts)?;
        probes.push(PinProbe {
            pin: b,
            point_probe: grid.sample_nearest(
                point_solve.u.values(),
                point_probe_at[0],
                point_probe_at[1],
            ),
            set_probe: grid.sample_nearest(set_solve.u.values(), set_probe_at[0], set_probe_at[1]),
        });
    }

    let pg = PgOptions::default();
    let mut point_capacity = Vec::new();
    let mut set_capacity = Vec::new();
    let mut point_llogl_mass = 0.0;
    let mut set_llogl_mass = 0.0;
    for &level in &[params.n / 2, params.n] {
        let g = Grid2D::build(DomainKind::UnitSquare, level as usize)?;
        let pt = g
            .nearest_interior(0.5, 0.5)
            .ok_or_else(|| Error::Config("center node not found".into()))?;
        let point_side =
            interior_capacity(&g, &[pt], InteriorVariant::Luxemburg, &pg)?;
        let fat = center_square_nodes(&g, params.square_side);
        let fat_side = interior_capacity(&g, &fat, InteriorVariant::Luxemburg, &pg)?;
        if level == params.n {
            point_llogl_mass = llogl_mass_of_laplacian(&g, &point_side.eta);
            set_llogl_mass = llogl_mass_of_laplacian(&g, &fat_side.eta);
        }
        point_capacity.push((level, point_side.value));
        set_capacity.push((level, fat_side.value));
    }

    Ok(RemovabilityInteriorReport {
        probes,
        point_capacity,
        set_capacity,
        point_llogl_mass,
        set_llogl_mass,
    })
}

// ---------------------------------------------------------------------------
// boundary removability

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RemovabilityBoundaryParams {
    pub n: u32,
    pub arc: (Real, Real),
    /// Density heights B on the arc; consecutive entries should double.
    pub data_levels: Vec<Real>,
    /// Inward distances from the arc midpoint where the solution is probed.
    pub probe_depths: Vec<Real>,
    /// Masses for the boundary-atom admissibility cross-check.
    pub atom_masses: Vec<Real>,
    pub admissibility_levels: Vec<u32>,
    /// Arc lengths for the joint probe/capacity decay sweep at fixed data.
    pub shrink_lengths: Vec<Real>,
    pub shrink_data: Real,
    pub margin: usize,
}

impl Default for RemovabilityBoundaryParams {
    fn default() -> Self {
        RemovabilityBoundaryParams {
            n: 96,
            arc: (0.45, 0.55),
            data_levels: vec![5.0, 10.0, 20.0, 40.0],
            probe_depths: vec![0.1, 0.25, 0.5],
            atom_masses: vec![1.0, 4.0],
            admissibility_levels: vec![32, 64, 128],
            shrink_lengths: vec![0.4, 0.2, 0.1, 0.05],
            shrink_data: 20.0,
            margin: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArcShrinkSample {
    pub length: Real,
    /// Solution at the domain center under fixed density on the arc.
    pub center_probe: Real,
    pub capacity: Real,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryGrowthSample {
    pub data: Real,
    /// Solution values at the probe depths, in parameter order.
    pub probes: Vec<Real>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemovabilityBoundaryReport {
    pub samples: Vec<BoundaryGrowthSample>,
    /// Per depth: u(2B)/u(B) across consecutive data doublings. Nonlinear
    /// absorption keeps these below the linear response factor 2.
    pub probe_ratios: Vec<Vec<Real>>,
    pub atom_verdicts: Vec<(Real, Admissibility)>,
    /// Shrinking arcs at fixed data: probe influence and capacity decay together.
    pub shrink: Vec<ArcShrinkSample>,
    pub shrink_jointly_decreasing: bool,
}

pub fn removability_boundary(
    params: &RemovabilityBoundaryParams,
) -> Result<RemovabilityBoundaryReport> {
    let grid = Grid2D::build(DomainKind::UnitSquare, params.n as usize)?;
    let opts = hot_solve_opts();
    let mid = 0.5 * (params.arc.0 + params.arc.1);

    let mut samples = Vec::new();
    for &b in &params.data_levels {
        let mu = BoundaryMeasure::constant_density(b, params.arc);
        let report = solve_dirichlet(
            &grid,
            &BoundaryData::Measure(mu),
            Nonlinearity::Exp,
            None,
            &opts,
        )?;
        let probes: Vec<Real> = params
            .probe_depths
            .iter()
            .map(|&d| grid.sample_nearest(report.u.values(), mid, d))
            .collect();
        samples.push(BoundaryGrowthSample { data: b, probes });
    }
    let probe_ratios: Vec<Vec<Real>> = (0..params.probe_depths.len())
        .map(|d| {
            samples
                .windows(2)
                .map(|w| w[1].probes[d] / w[0].probes[d])
                .collect()
        })
        .collect();

    let mut atom_verdicts = Vec::new();
    for &a in &params.atom_masses {
        let mu = BoundaryMeasure::atom(mid, a);
        let verdict =
            admissibility_test(DomainKind::UnitSquare, &params.admissibility_levels, &mu)?;
        atom_verdicts.push((a, verdict.verdict));
    }

    let pg = PgOptions::default();
    let mut shrink = Vec::new();
    for &len in &params.shrink_lengths {
        let arc = (mid - len / 2.0, mid + len / 2.0);
        let mu = BoundaryMeasure::constant_density(params.shrink_data, arc);
        let report = solve_dirichlet(
            &grid,
            &BoundaryData::Measure(mu),
            Nonlinearity::Exp,
            None,
            &opts,
        )?;
        let k = grid.boundary_nodes_in_arc(arc.0, arc.1);
        let cap = boundary_capacity_primal(&grid, &k, params.margin, &pg)?;
        shrink.push(ArcShrinkSample {
            length: len,
            center_probe: grid.sample_nearest(report.u.values(), 0.5, 0.5),
            capacity: cap.value,
        });
    }
    let shrink_jointly_decreasing = shrink
        .windows(2)
        .all(|w| w[1].center_probe < w[0].center_probe && w[1].capacity < w[0].capacity);

    Ok(RemovabilityBoundaryReport {
        samples,
        probe_ratios,
        atom_verdicts,
        shrink,
        shrink_jointly_decreasing,
    })
}

// ---------------------------------------------------------------------------
// admissibility sweep

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmissibilitySweepParams {
    pub domain: DomainKind,
    pub levels: Vec<u32>,
    /// Total-variation masses swept per family.
    pub masses: Vec<Real>,
    pub cantor_depth: u32,
    pub cantor_arc: (Real, Real),
    pub invsqrt_arc: (Real, Real),
    pub atom_location: Real,
}

impl Default for AdmissibilitySweepParams {
    fn default() -> Self {
        AdmissibilitySweepParams {
            domain: DomainKind::UnitSquare,
            levels: vec![16, 32, 64],
            masses: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            cantor_depth: 6,
            cantor_arc: (0.3, 0.7),
            invsqrt_arc: (0.5, 0.9),
            atom_location: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub mass: Real,
    pub verdict: Admissibility,
    pub ratios: Vec<Real>,
    /// Exponential-class norm of the potential at the finest level.
    pub bexp_norm: Real,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilySweep {
    pub family: String,
    pub rows: Vec<SweepRow>,
    pub largest_admissible: Option<Real>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilitySweepReport {
    pub families: Vec<FamilySweep>,
}

/// Classifies three measure families over a mass grid: a boundary atom
/// (never admissible), a Cantor set measure, and an integrable density with
/// an inverse-square-root singularity. Meant to locate each family's
/// empirical admissibility threshold.
pub fn admissibility_sweep(params: &AdmissibilitySweepParams) -> Result<AdmissibilitySweepReport> {
    let finest = *params
        .levels
        .iter()
        .max()
        .ok_or_else(|| Error::Config("no levels".into()))?;
    let fine_grid = Grid2D::build(params.domain, finest as usize)?;

    let make: Vec<(&str, Box<dyn Fn(Real) -> BoundaryMeasure>)> = vec![
        (
            "atom",
            Box::new(|a| BoundaryMeasure::atom(params.atom_location, a)),
        ),
        (
            "cantor",
            Box::new(|a| BoundaryMeasure::cantor(params.cantor_arc, a, params.cantor_depth)),
        ),
        (
            "inverse_sqrt",
            Box::new(|a| {
                let base = BoundaryMeasure::inverse_sqrt_density(
                    1.0,
                    params.invsqrt_arc.0,
                    params.invsqrt_arc,
                );
                let tv = base.total_variation();
                base.scaled(a / tv)
            }),
        ),
    ];

    let mut families = Vec::new();
    for (name, build) in make {
        let mut rows = Vec::new();
        let mut largest = None;
        for &a in &params.masses {
            let mu = build(a);
            let report = admissibility_test(params.domain, &params.levels, &mu)?;
            if report.verdict == Admissibility::Admissible {
                largest = Some(a);
            }
            rows.push(SweepRow {
                mass: a,
                verdict: report.verdict,
                ratios: report.ratios,
                bexp_norm: bexp_boundary_norm(&fine_grid, &mu)?,
            });
        }
        families.push(FamilySweep {
            family: name.to_string(),
            rows,
            largest_admissible: largest,
        });
    }
    Ok(AdmissibilitySweepReport { families })
}

// ---------------------------------------------------------------------------
// capacity of shrinking arcs

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacityShrinkParams {
    pub n: u32,
    pub lengths: Vec<Real>,
    pub center: Real,
    pub margin: usize,
}

impl Default for CapacityShrinkParams {
    fn default() -> Self {
        CapacityShrinkParams {
            n: 128,
            lengths: vec![0.4, 0.2, 0.1, 0.05],
            center: 0.5,
            margin: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityShrinkReport {
    /// (arc length, primal capacity).
    pub rows: Vec<(Real, Real)>,
    pub strictly_decreasing: bool,
}

pub fn capacity_shrink(params: &CapacityShrinkParams) -> Result<CapacityShrinkReport> {
    let grid = Grid2D::build(DomainKind::UnitSquare, params.n as usize)?;
    let pg = PgOptions::default();
    let mut rows = Vec::new();
    for &len in &params.lengths {
        let arc = (params.center - len / 2.0, params.center + len / 2.0);
        let k = grid.boundary_nodes_in_arc(arc.0, arc.1);
        let side = boundary_capacity_primal(&grid, &k, params.margin, &pg)?;
        rows.push((len, side.value));
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(CapacityShrinkReport {
        rows,
        strictly_decreasing,
    })
}

// ---------------------------------------------------------------------------
// duality gap trend

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DualityGapParams {
    pub levels: Vec<u32>,
    pub arcs: Vec<(Real, Real)>,
    pub margin: usize,
}

impl Default for DualityGapParams {
    fn default() -> Self {
        DualityGapParams {
            levels: vec![64, 128],
            arcs: vec![(0.3, 0.7), (0.4, 0.6), (0.45, 0.55)],
            margin: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityGapRow {
    pub arc: (Real, Real),
    pub n: u32,
    pub primal: Real,
    pub dual: Real,
    pub gap_rel: Real,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityGapReport {
    pub rows: Vec<DualityGapRow>,
    /// Per arc, the relative gap does not grow as the grid refines.
    pub gap_non_increasing: bool,
}

pub fn duality_gap(params: &DualityGapParams) -> Result<DualityGapReport> {
    let pg = PgOptions::default();
    let mut rows = Vec::new();
    for &arc in &params.arcs {
        for &n in &params.levels {
            let grid = Grid2D::build(DomainKind::UnitSquare, n as usize)?;
            let k = grid.boundary_nodes_in_arc(arc.0, arc.1);
            let pair = boundary_capacity_pair(&grid, &k, params.margin, &pg)?;
            rows.push(DualityGapRow {
                arc,
                n,
                primal: pair.primal.value,
                dual: pair.dual.value,
                gap_rel: pair.gap_rel,
            });
        }
    }
    let mut non_increasing = true;
    for chunk in rows.chunks(params.levels.len()) {
        for w in chunk.windows(2) {
            non_increasing &= w[1].gap_rel <= w[0].gap_rel + 1e-12;
        }
    }
    Ok(DualityGapReport {
        rows,
        gap_non_increasing: non_increasing,
    })
}

// ---------------------------------------------------------------------------
// dispatcher

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    DiracThreshold(DiracThresholdParams),
    RemovabilityInterior(RemovabilityInteriorParams),
    RemovabilityBoundary(RemovabilityBoundaryParams),
    AdmissibilitySweep(AdmissibilitySweepParams),
    CapacityShrink(CapacityShrinkParams),
    DualityGap(DualityGapParams),
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentReport {
    DiracThreshold(DiracThresholdReport),
    RemovabilityInterior(RemovabilityInteriorReport),
    RemovabilityBoundary(RemovabilityBoundaryReport),
    AdmissibilitySweep(AdmissibilitySweepReport),
    CapacityShrink(CapacityShrinkReport),
    DualityGap(DualityGapReport),
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    Ok(match spec {
        ExperimentSpec::DiracThreshold(p) => {
            ExperimentReport::DiracThreshold(dirac_threshold(p)?)
        }
        ExperimentSpec::RemovabilityInterior(p) => {
            ExperimentReport::RemovabilityInterior(removability_interior(p)?)
        }
        ExperimentSpec::RemovabilityBoundary(p) => {
            ExperimentReport::RemovabilityBoundary(removability_boundary(p)?)
        }
        ExperimentSpec::AdmissibilitySweep(p) => {
            ExperimentReport::AdmissibilitySweep(admissibility_sweep(p)?)
        }
        ExperimentSpec::CapacityShrink(p) => ExperimentReport::CapacityShrink(capacity_shrink(p)?),
        ExperimentSpec::DualityGap(p) => ExperimentReport::DualityGap(duality_gap(p)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_threshold_brackets_the_transition() {
        let params = DiracThresholdParams {
            levels: vec![16, 32, 64],
            width_target: PI,
            ..Default::default()
        };
        let report = dirac_threshold(&params).unwrap();
        assert!(report.probes.iter().all(|p| p.flux_ok));
        assert_eq!(report.probes[0].verdict, GrowthVerdict::Stable);
        assert_eq!(report.probes[1].verdict, GrowthVerdict::BlowUp);
        assert!(report.interval[0] >= 2.0 * PI - 1e-12);
        assert!(report.interval[1] <= 6.0 * PI + 1e-12);
        assert!(report.interval[1] - report.interval[0] <= PI + 1e-12);
        // the nonlinear audit trace obeys the conservation cap strictly
        for p in &report.probes {
            for s in &p.samples {
                assert!(s.absorbed <= p.mass);
                assert!(s.sup_u.is_finite());
            }
        }
    }

    #[test]
    fn endpoint_misclassification_is_a_range_error() {
        // both endpoints deep in the stable regime: no transition to bracket
        let params = DiracThresholdParams {
            levels: vec![16, 32],
            mass_lo: 1.0,
            mass_hi: 2.0,
            width_target: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            dirac_threshold(&params),
            Err(Error::ThresholdRange { .. })
        ));
    }

    #[test]
    fn pinned_sets_separate_by_capacity() {
        let params = RemovabilityInteriorParams {
            n: 48,
            pin_values: vec![5.0, 10.0, 20.0, 40.0],
            ..Default::default()
        };
        let report = removability_interior(&params).unwrap();
        // absorption caps the influence at a fixed distance: increments
        // shrink under B-doubling, hard for the single node
        let point_inc: Vec<Real> = report
            .probes
            .windows(2)
            .map(|w| w[1].point_probe - w[0].point_probe)
            .collect();
        assert!(point_inc.windows(2).all(|w| w[1] < w[0]));
        assert!(point_inc.last().unwrap() < &(0.3 * point_inc[0]));
        // the fat set radiates more at every height
        for p in &report.probes {
            assert!(p.set_probe > p.point_probe);
        }
        for ((_, pc), (_, sc)) in report.point_capacity.iter().zip(&report.set_capacity) {
            assert!(*pc > 0.0);
            assert!(*sc > *pc);
        }
        assert!(report.point_llogl_mass > 0.0);
        assert!(report.set_llogl_mass > 0.0);
    }

    #[test]
    fn boundary_growth_is_sublinear_and_atoms_are_rejected() {
        let params = RemovabilityBoundaryParams {
            n: 32,
            data_levels: vec![5.0, 10.0, 20.0],
            probe_depths: vec![0.1, 0.25, 0.5],
            atom_masses: vec![1.0],
            admissibility_levels: vec![16, 32, 64],
            shrink_lengths: vec![0.4, 0.2, 0.1],
            ..Default::default()
        };
        let report = removability_boundary(&params).unwrap();
        for ratios in &report.probe_ratios {
            for r in ratios {
                assert!(*r > 1.0);
                assert!(*r < 1.95);
            }
        }
        for (_, v) in &report.atom_verdicts {
            assert_eq!(*v, Admissibility::NotAdmissible);
        }
        assert!(report.shrink_jointly_decreasing);
    }

    #[test]
    fn admissibility_families_have_the_expected_shape() {
        let params = AdmissibilitySweepParams {
            levels: vec![12, 24, 48],
            masses: vec![0.5, 4.0, 32.0, 256.0],
            ..Default::default()
        };
        let report = admissibility_sweep(&params).unwrap();
        let by_name = |name: &str| {
            report
                .families
                .iter()
                .find(|f| f.family == name)
                .expect("family present")
        };
        assert_eq!(by_name("atom").largest_admissible, None);
        let cantor = by_name("cantor");
        assert!(cantor.largest_admissible.is_some());
        assert!(cantor
            .rows
            .iter()
            .any(|r| r.verdict != Admissibility::Admissible));
        assert!(by_name("inverse_sqrt").largest_admissible.is_some());
        for f in &report.families {
            for row in &f.rows {
                assert!(row.bexp_norm >= 0.0);
            }
        }
    }

    #[test]
    fn shrinking_arcs_lose_capacity() {
        let params = CapacityShrinkParams {
            n: 48,
            lengths: vec![0.4, 0.2, 0.1],
            ..Default::default()
        };
        let report = capacity_shrink(&params).unwrap();
        assert!(report.strictly_decreasing);
        assert!(report.rows.iter().all(|(_, c)| *c > 0.0));
    }

    #[test]
    fn duality_rows_assemble_per_arc_and_level() {
        let params = DualityGapParams {
            levels: vec![24, 48],
            arcs: vec![(0.35, 0.65)],
            ..Default::default()
        };
        let report = duality_gap(&params).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.dual <= row.primal * (1.0 + 1e-9));
            assert!(row.gap_rel.is_finite());
        }
    }

    #[test]
    fn experiment_specs_round_trip_and_rerun_identically() {
        let text = r#"{ "kind": "capacity_shrink", "n": 16, "lengths": [0.4, 0.2] }"#;
        let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
        let a = serde_json::to_string(&run_experiment(&spec).unwrap()).unwrap();
        let b = serde_json::to_string(&run_experiment(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"kind\":\"capacity_shrink\""));
        // defaults fill omitted fields
        match &spec {
            ExperimentSpec::CapacityShrink(p) => {
                assert_eq!(p.margin, 2);
                assert_eq!(p.center, 0.5);
            }
            _ => panic!("wrong variant"),
        }
    }
}

