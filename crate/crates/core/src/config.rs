//! One declarative file describes a run. Each command reads its own
//! section; the grid and output sections are shared. Unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::InteriorVariant;
use crate::error::{Error, Result};
use crate::experiments::ExperimentSpec;
use crate::grid::DomainKind;
use crate::measures::BoundaryMeasure;
use crate::orlicz::NFunc;
use crate::solver::{Nonlinearity, SolveOptions};
use crate::Real;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub domain: DomainKind,
    pub n: u32,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            domain: DomainKind::UnitSquare,
            n: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for the JSON report and CSV files.
    pub dir: String,
    /// File name stem; the command appends its own suffixes.
    pub prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            prefix: "run".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    /// Boundary measure data; ignored when `boundary_values` is given.
    pub boundary: BoundaryMeasure,
    /// Explicit nodal trace (one value per boundary node).
    pub boundary_values: Option<Vec<Real>>,
    /// Interior point sources: [x, y, mass].
    pub source_atoms: Vec<[Real; 3]>,
    pub nonlinearity: Nonlinearity,
    pub tol: Real,
    pub max_iters: usize,
    pub max_halvings: usize,
    pub weak_residual: bool,
    /// When set, runs the monotone truncation scheme along this strictly
    /// increasing cutoff schedule instead of a single solve.
    pub k_schedule: Option<Vec<Real>>,
}

impl Default for SolveSection {
    fn default() -> Self {
        let opts = SolveOptions::default();
        SolveSection {
            boundary: BoundaryMeasure::zero(),
            boundary_values: None,
            source_atoms: Vec::new(),
            nonlinearity: Nonlinearity::Exp,
            tol: opts.tol,
            max_iters: opts.max_iters,
            max_halvings: opts.max_halvings,
            weak_residual: true,
            k_schedule: None,
        }
    }
}

impl SolveSection {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            max_halvings: self.max_halvings,
            weak_residual: self.weak_residual,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacitySide {
    Boundary,
    Interior,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub side: CapacitySide,
    /// Boundary target: union of arclength intervals.
    pub arcs: Vec<(Real, Real)>,
    /// Interior target: axis boxes [x0, y0, x1, y1] plus nearest nodes to
    /// listed points.
    pub boxes: Vec<[Real; 4]>,
    pub points: Vec<[Real; 2]>,
    pub variant: InteriorVariant,
    pub margin: usize,
    pub max_iters: usize,
    /// Also compute the dual side and the gap.
    pub dual: bool,
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection {
            side: CapacitySide::Boundary,
            arcs: Vec::new(),
            boxes: Vec::new(),
            points: Vec::new(),
            variant: InteriorVariant::Luxemburg,
            margin: 2,
            max_iters: 500,
            dual: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Luxemburg,
    Amemiya,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// Boundary-distance weight ρ.
    Rho,
    Unit,
}

/// Where the field under the norm comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    Constant { value: Real },
    /// CSV with x,y,value rows matching the grid's interior nodes, as
    /// written by the solve command.
    Csv { path: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrliczNormSection {
    pub nfunction: NFunc,
    pub norm: NormKind,
    pub weight: WeightKind,
    pub field: FieldSource,
}

impl Default for OrliczNormSection {
    fn default() -> Self {
        OrliczNormSection {
            nfunction: NFunc::Exp,
            norm: NormKind::Luxemburg,
            weight: WeightKind::Rho,
            field: FieldSource::Constant { value: 1.0 },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibilitySection {
    pub levels: Vec<u32>,
    pub measure: BoundaryMeasure,
}

impl Default for AdmissibilitySection {
    fn default() -> Self {
        AdmissibilitySection {
            levels: vec![32, 64, 128],
            measure: BoundaryMeasure::zero(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub output: OutputSection,
    pub solve: Option<SolveSection>,
    pub capacity: Option<CapacitySection>,
    pub orlicz_norm: Option<OrliczNormSection>,
    pub admissibility: Option<AdmissibilitySection>,
    pub experiment: Option<ExperimentSpec>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    parse_config(&text)
}
