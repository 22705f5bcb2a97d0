use thiserror::Error;

/// Errors surfaced by the laboratory's numerical kernels.
///
/// Diagnostic outcomes that the experiments interpret (exp-range saturation,
/// inconclusive classifier verdicts) are *not* errors; they travel inside the
/// report types. Errors here mean the requested computation is ill-posed or a
/// kernel genuinely failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution n = {n} too coarse; need n >= {min}")]
    InvalidResolution { n: usize, min: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation needs boundary values but the field has none")]
    MissingBoundaryValues,

    #[error("atom at arclength s = {s} is {dist:.3e} away from the boundary (limit {limit:.3e})")]
    AtomOffBoundary { s: f64, dist: f64, limit: f64 },

    #[error("interior atom at ({x}, {y}) lies within one mesh width of the boundary")]
    AtomTooCloseToBoundary { x: f64, y: f64 },

    #[error("interior atom at ({x}, {y}) lies outside the domain")]
    AtomOutsideDomain { x: f64, y: f64 },

    #[error("operation requires a pure density measure but a singular part is present")]
    NotPureDensity,

    #[error("density pieces overlap on the boundary; truncation needs disjoint supports")]
    OverlappingDensities,

    #[error("measure term has negative mass or amplitude")]
    NegativeMass,

    #[error("kernel evaluation point ({x}, {y}) is not interior to the disk")]
    PointOutsideDisk { x: f64, y: f64 },

    #[error("Green kernel is singular at coincident points")]
    CoincidentPoints,

    #[error("Luxemburg norm bracket failed to close after {doublings} doublings")]
    NormBracket { doublings: u32 },

    #[error(
        "truncation iterates lost monotonicity at k = {k} (violation {violation:.3e}); \
         this signals a solver defect, not bad data"
    )]
    TruncationMonotonicity { k: f64, violation: f64 },

    #[error("threshold sweep never crossed: every sample classified {verdict}")]
    ThresholdRange { verdict: &'static str },

    #[error("Newton stagnated at residual {residual:.3e} after {iters} iterations")]
    NewtonStagnation {
        residual: f64,
        iters: usize,
        trace: Vec<f64>,
    },

    #[error("inverse power iteration did not reach residual {tol:.1e} in {iters} iterations")]
    EigenNonConvergence { tol: f64, iters: usize },

    #[error("matrix is not positive definite (pivot {pivot:.3e} at column {col})")]
    NotPositiveDefinite { col: usize, pivot: f64 },

    #[error("capacity target set contains no grid nodes")]
    EmptyTargetSet,

    #[error(
        "weak duality violated: dual {dual:.6e} exceeds primal {primal:.6e}; \
         the discretization of one side is defective"
    )]
    WeakDualityViolation { primal: f64, dual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
