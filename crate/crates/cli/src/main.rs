//! Command-line front end: each subcommand reads its section of one TOML
//! config, runs the corresponding kernel, and writes a JSON envelope plus
//! CSV tables into the configured output directory.
//!
//! Exit codes: 0 on success, 2 when a classifier returns an inconclusive
//! verdict, 1 on any error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use orlicz_lab::capacity::{
    boundary_capacity_pair, boundary_capacity_primal, interior_capacity, interior_capacity_pair,
    InteriorVariant,
};
use orlicz_lab::config::{CapacitySide, FieldSource, NormKind, RunConfig, WeightKind};
use orlicz_lab::experiments::{run_experiment, ExperimentReport, ExperimentSpec};
use orlicz_lab::grid::{distance_field, DomainKind, Grid2D, ScalarField};
use orlicz_lab::measures::InteriorMeasure;
use orlicz_lab::optim::PgOptions;
use orlicz_lab::orlicz::{amemiya_norm_with_scale, luxemburg_norm};
use orlicz_lab::potentials::{admissibility_test, Admissibility};
use orlicz_lab::report::{
    boundary_csv, envelope_json, field_csv, rows_csv, write_text,
};
use orlicz_lab::solver::{
    solve_dirichlet, truncation_scheme, BoundaryData, SolveReport, TruncationStep,
};
use orlicz_lab::Real;

#[derive(Parser)]
#[command(
    name = "orlicz-lab",
    version,
    about = "Semilinear measure-data laboratory: solves, capacities, Orlicz norms"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true, default_value = "run.toml")]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Dirichlet problem described by the [solve] section.
    Solve,
    /// Capacities of the target sets in the [capacity] section.
    Capacity,
    /// Orlicz norm of a field per the [orlicz_norm] section.
    OrliczNorm,
    /// Multi-level admissibility verdict for the [admissibility] measure.
    /// Exits 2 when the classifier is inconclusive.
    Admissibility,
    /// Run a packaged experiment. The kind must match the [experiment]
    /// section when one is present; without a section the experiment runs
    /// with default parameters.
    Experiment { kind: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading config {}", cli.config.display()))?;
    let cfg: RunConfig = orlicz_lab::config::parse_config(&text)?;
    match &cli.command {
        Command::Solve => cmd_solve(&cfg, &text),
        Command::Capacity => cmd_capacity(&cfg, &text),
        Command::OrliczNorm => cmd_orlicz_norm(&cfg, &text),
        Command::Admissibility => cmd_admissibility(&cfg, &text),
        Command::Experiment { kind } => cmd_experiment(&cfg, &text, kind),
    }
}

fn write_report<T: Serialize>(
    cfg: &RunConfig,
    config_text: &str,
    command: &str,
    started: Instant,
    report: T,
) -> anyhow::Result<PathBuf> {
    let json = envelope_json(
        command,
        started.elapsed().as_secs_f64(),
        config_text,
        report,
    )?;
    let name = format!("{}_{}.json", cfg.output.prefix, command.replace('-', "_"));
    Ok(write_text(&cfg.output.dir, &name, &json)?)
}

fn write_table(cfg: &RunConfig, name_tail: &str, text: &str) -> anyhow::Result<PathBuf> {
    let name = format!("{}_{}", cfg.output.prefix, name_tail);
    Ok(write_text(&cfg.output.dir, &name, text)?)
}

// ---------------------------------------------------------------------------
// solve

#[derive(Serialize)]
struct SolveSummary {
    domain: DomainKind,
    n: u32,
    newton_iters: usize,
    residual_inf: Real,
    weak_residual: Option<Real>,
    mass_balance: Real,
    saturated: bool,
    quadratic_tail: Option<Real>,
    sup_u: Real,
    integral_u: Real,
    /// ∫ g(u) dx, the mass the absorption term soaks up.
    absorbed: Real,
    truncation: Vec<TruncationStep>,
}

fn summarize(grid: &Arc<Grid2D>, rep: &SolveReport, nl: orlicz_lab::solver::Nonlinearity) -> SolveSummary {
    SolveSummary {
        domain: grid.kind(),
        n: grid.n() as u32,
        newton_iters: rep.newton_iters,
        residual_inf: rep.residual_inf,
        weak_residual: rep.weak_residual,
        mass_balance: rep.mass_balance,
        saturated: rep.saturated,
        quadratic_tail: rep.quadratic_tail,
        sup_u: rep.u.norm_inf(),
        integral_u: rep.u.integrate(),
        absorbed: rep.u.map(|v| nl.g(v)).integrate(),
        truncation: rep.truncation_trace.clone(),
    }
}

fn cmd_solve(cfg: &RunConfig, text: &str) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let sec = cfg
        .solve
        .clone()
        .context("config has no [solve] section")?;
    let grid = Grid2D::build(cfg.grid.domain, cfg.grid.n as usize)?;
    let opts = sec.solve_options();

    let report = if let Some(schedule) = &sec.k_schedule {
        if sec.boundary_values.is_some() || !sec.source_atoms.is_empty() {
            bail!("k_schedule runs the truncation scheme, which takes measure boundary data only");
        }
        truncation_scheme(&grid, &sec.boundary, schedule, sec.nonlinearity, &opts)?.final_report
    } else {
        let boundary = match &sec.boundary_values {
            Some(v) => BoundaryData::Nodal(v.clone()),
            None => BoundaryData::Measure(sec.boundary.clone()),
        };
        let source = if sec.source_atoms.is_empty() {
            None
        } else {
            let mu = InteriorMeasure {
                atoms: sec
                    .source_atoms
                    .iter()
                    .map(|&[x, y, m]| ([x, y], m))
                    .collect(),
                density: None,
            };
            Some(mu.discretize(&grid)?)
        };
        solve_dirichlet(&grid, &boundary, sec.nonlinearity, source.as_deref(), &opts)?
    };

    let summary = summarize(&grid, &report, sec.nonlinearity);
    write_table(cfg, "solution.csv", &field_csv(&grid, report.u.values()))?;
    let path = write_report(cfg, text, "solve", started, &summary)?;
    println!(
        "solve: {:?} n={}, {} Newton iters, residual {:.3e}, sup u {:.6} -> {}",
        grid.kind(),
        grid.n(),
        summary.newton_iters,
        summary.residual_inf,
        summary.sup_u,
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// capacity

#[derive(Serialize)]
struct CapacityRow {
    /// Human-readable target description from the config section.
    target: String,
    nodes: usize,
    primal: Real,
    dual: Option<Real>,
    gap_rel: Option<Real>,
}

fn interior_box_nodes(grid: &Grid2D, b: [Real; 4]) -> Vec<usize> {
    grid.points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p[0] >= b[0] && p[0] <= b[2] && p[1] >= b[1] && p[1] <= b[3])
        .map(|(i, _)| i)
        .collect()
}

fn cmd_capacity(cfg: &RunConfig, text: &str) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let sec = cfg
        .capacity
        .clone()
        .context("config has no [capacity] section")?;
    let grid = Grid2D::build(cfg.grid.domain, cfg.grid.n as usize)?;
    let pg = PgOptions {
        max_iters: sec.max_iters,
        ..Default::default()
    };

    let mut rows = Vec::new();
    match sec.side {
        CapacitySide::Boundary => {
            if sec.arcs.is_empty() {
                bail!("boundary capacity needs at least one arc");
            }
            for (i, &(a, b)) in sec.arcs.iter().enumerate() {
                let k = grid.boundary_nodes_in_arc(a, b);
                if k.is_empty() {
                    bail!("arc ({a}, {b}) contains no boundary nodes at n = {}", cfg.grid.n);
                }
                let row = if sec.dual {
                    let rep = boundary_capacity_pair(&grid, &k, sec.margin, &pg)?;
                    write_eta_csv(cfg, i, &grid, &rep.primal.eta, true)?;
                    CapacityRow {
                        target: format!("arc [{a}, {b}]"),
                        nodes: k.len(),
                        primal: rep.primal.value,
                        dual: Some(rep.dual.value),
                        gap_rel: Some(rep.gap_rel),
                    }
                } else {
                    let primal = boundary_capacity_primal(&grid, &k, sec.margin, &pg)?;
                    write_eta_csv(cfg, i, &grid, &primal.eta, true)?;
                    CapacityRow {
                        target: format!("arc [{a}, {b}]"),
                        nodes: k.len(),
                        primal: primal.value,
                        dual: None,
                        gap_rel: None,
                    }
                };
                rows.push(row);
            }
        }
        CapacitySide::Interior => {
            let mut targets: Vec<(String, Vec<usize>)> = Vec::new();
            for &b in &sec.boxes {
                targets.push((
                    format!("box [{}, {}] x [{}, {}]", b[0], b[2], b[1], b[3]),
                    interior_box_nodes(&grid, b),
                ));
            }
            for &[x, y] in &sec.points {
                let node = grid
                    .nearest_interior(x, y)
                    .with_context(|| format!("point ({x}, {y}) lies outside the domain"))?;
                targets.push((format!("point ({x}, {y})"), vec![node]));
            }
            if targets.is_empty() {
                bail!("interior capacity needs boxes or points");
            }
            for (i, (target, k)) in targets.into_iter().enumerate() {
                if k.is_empty() {
                    bail!("{target} contains no grid nodes at n = {}", cfg.grid.n);
                }
                let row = if sec.dual && sec.variant == InteriorVariant::Luxemburg {
                    let rep = interior_capacity_pair(&grid, &k, &pg)?;
                    write_eta_csv(cfg, i, &grid, &rep.primal.eta, false)?;
                    CapacityRow {
                        target,
                        nodes: k.len(),
                        primal: rep.primal.value,
                        dual: Some(rep.dual.value),
                        gap_rel: Some(rep.gap_rel),
                    }
                } else {
                    let primal = interior_capacity(&grid, &k, sec.variant, &pg)?;
                    write_eta_csv(cfg, i, &grid, &primal.eta, false)?;
                    CapacityRow {
                        target,
                        nodes: k.len(),
                        primal: primal.value,
                        dual: None,
                        gap_rel: None,
                    }
                };
                rows.push(row);
            }
        }
    }

    let path = write_report(cfg, text, "capacity", started, &rows)?;
    for row in &rows {
        match row.dual {
            Some(d) => println!(
                "capacity: {} -> primal {:.6}, dual {:.6}, gap {:.2}%",
                row.target,
                row.primal,
                d,
                100.0 * row.gap_rel.unwrap_or(0.0)
            ),
            None => println!("capacity: {} -> primal {:.6}", row.target, row.primal),
        }
    }
    println!("capacity report -> {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn write_eta_csv(
    cfg: &RunConfig,
    index: usize,
    grid: &Grid2D,
    eta: &[Real],
    boundary: bool,
) -> anyhow::Result<()> {
    let csv = if boundary {
        boundary_csv(grid, eta)
    } else {
        field_csv(grid, eta)
    };
    write_table(cfg, &format!("capacity_{index}_eta.csv"), &csv)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// orlicz-norm

#[derive(Serialize)]
struct NormSummary {
    nfunction: orlicz_lab::orlicz::NFunc,
    norm: NormKind,
    weight: WeightKind,
    value: Real,
}

fn load_field(grid: &Arc<Grid2D>, source: &FieldSource) -> anyhow::Result<ScalarField> {
    match source {
        FieldSource::Constant { value } => Ok(ScalarField::constant(grid, *value)),
        FieldSource::Csv { path } => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading field csv {path}"))?;
            let mut values = Vec::new();
            for (lineno, line) in text.lines().enumerate().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let cell = line
                    .split(',')
                    .nth(2)
                    .with_context(|| format!("{path}:{}: expected x,y,value", lineno + 1))?;
                values.push(cell.trim().parse::<Real>().with_context(|| {
                    format!("{path}:{}: bad value {cell:?}", lineno + 1)
                })?);
            }
            if values.len() != grid.interior_count() {
                bail!(
                    "{path} holds {} values but the n = {} grid has {} interior nodes",
                    values.len(),
                    grid.n(),
                    grid.interior_count()
                );
            }
            Ok(ScalarField::from_values(grid, values))
        }
    }
}

fn cmd_orlicz_norm(cfg: &RunConfig, text: &str) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let sec = cfg
        .orlicz_norm
        .clone()
        .context("config has no [orlicz_norm] section")?;
    let grid = Grid2D::build(cfg.grid.domain, cfg.grid.n as usize)?;
    let field = load_field(&grid, &sec.field)?;
    let weight = match sec.weight {
        WeightKind::Rho => distance_field(&grid),
        WeightKind::Unit => ScalarField::constant(&grid, 1.0),
    };
    let value = match sec.norm {
        NormKind::Luxemburg => luxemburg_norm(&field, &weight, sec.nfunction)?,
        NormKind::Amemiya => amemiya_norm_with_scale(&field, &weight, sec.nfunction)?.0,
    };
    let summary = NormSummary {
        nfunction: sec.nfunction,
        norm: sec.norm,
        weight: sec.weight,
        value,
    };
    let path = write_report(cfg, text, "orlicz-norm", started, &summary)?;
    println!("orlicz-norm: {value:.12} -> {}", path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// admissibility

fn cmd_admissibility(cfg: &RunConfig, text: &str) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let sec = cfg
        .admissibility
        .clone()
        .context("config has no [admissibility] section")?;
    let report = admissibility_test(cfg.grid.domain, &sec.levels, &sec.measure)?;
    let verdict = report.verdict;

    let rows: Vec<Vec<Real>> = report
        .trace
        .iter()
        .map(|&(n, i_n)| vec![n as Real, i_n])
        .collect();
    write_table(cfg, "admissibility_trace.csv", &rows_csv("n,exp_integral", &rows))?;
    let path = write_report(cfg, text, "admissibility", started, &report)?;
    println!("admissibility: {verdict:?} -> {}", path.display());
    Ok(match verdict {
        Admissibility::Inconclusive => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    })
}

// ---------------------------------------------------------------------------
// experiment

fn spec_kind(spec: &ExperimentSpec) -> &'static str {
    match spec {
        ExperimentSpec::DiracThreshold(_) => "dirac_threshold",
        ExperimentSpec::RemovabilityInterior(_) => "removability_interior",
        ExperimentSpec::RemovabilityBoundary(_) => "removability_boundary",
        ExperimentSpec::AdmissibilitySweep(_) => "admissibility_sweep",
        ExperimentSpec::CapacityShrink(_) => "capacity_shrink",
        ExperimentSpec::DualityGap(_) => "duality_gap",
    }
}

fn cmd_experiment(cfg: &RunConfig, text: &str, kind: &str) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let spec = match &cfg.experiment {
        Some(spec) => {
            if spec_kind(spec) != kind {
                bail!(
                    "config [experiment] section is '{}' but the command asked for '{kind}'",
                    spec_kind(spec)
                );
            }
            spec.clone()
        }
        None => serde_json::from_value(serde_json::json!({ "kind": kind })).with_context(|| {
            format!("no [experiment] section and '{kind}' is not an experiment kind")
        })?,
    };

    let report = run_experiment(&spec)?;
    write_experiment_tables(cfg, &report)?;
    let path = write_report(cfg, text, &format!("experiment_{kind}"), started, &report)?;
    println!("experiment {kind} -> {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn write_experiment_tables(cfg: &RunConfig, report: &ExperimentReport) -> anyhow::Result<()> {
    match report {
        ExperimentReport::DiracThreshold(r) => {
            let mut rows = Vec::new();
            for probe in &r.probes {
                for s in &probe.samples {
                    rows.push(vec![
                        probe.mass,
                        s.n as Real,
                        s.absorbed,
                        s.sup_u,
                        s.exp_green,
                    ]);
                }
            }
            write_table(
                cfg,
                "dirac_levels.csv",
                &rows_csv("mass,n,absorbed,sup_u,exp_green", &rows),
            )?;
        }
        ExperimentReport::RemovabilityInterior(r) => {
            let rows: Vec<Vec<Real>> = r
                .probes
                .iter()
                .map(|p| vec![p.pin, p.point_probe, p.set_probe])
                .collect();
            write_table(
                cfg,
                "pin_probes.csv",
                &rows_csv("pin,point_probe,set_probe", &rows),
            )?;
        }
        ExperimentReport::RemovabilityBoundary(r) => {
            let rows: Vec<Vec<Real>> = r
                .samples
                .iter()
                .map(|s| {
                    let mut row = vec![s.data];
                    row.extend(&s.probes);
                    row
                })
                .collect();
            write_table(cfg, "boundary_growth.csv", &rows_csv("data,probes", &rows))?;
            let shrink: Vec<Vec<Real>> = r
                .shrink
                .iter()
                .map(|s| vec![s.length, s.center_probe, s.capacity])
                .collect();
            write_table(
                cfg,
                "arc_shrink.csv",
                &rows_csv("length,center_probe,capacity", &shrink),
            )?;
        }
        ExperimentReport::AdmissibilitySweep(r) => {
            for sweep in &r.families {
                let rows: Vec<Vec<Real>> = sweep
                    .rows
                    .iter()
                    .map(|row| vec![row.mass, row.bexp_norm])
                    .collect();
                write_table(
                    cfg,
                    &format!("sweep_{}.csv", sweep.family),
                    &rows_csv("mass,bexp_norm", &rows),
                )?;
            }
        }
        ExperimentReport::CapacityShrink(r) => {
            let rows: Vec<Vec<Real>> = r.rows.iter().map(|&(l, c)| vec![l, c]).collect();
            write_table(cfg, "capacity_shrink.csv", &rows_csv("length,capacity", &rows))?;
        }
        ExperimentReport::DualityGap(r) => {
            let rows: Vec<Vec<Real>> = r
                .rows
                .iter()
                .map(|row| {
                    vec![row.arc.0, row.arc.1, row.n as Real, row.primal, row.dual, row.gap_rel]
                })
                .collect();
            write_table(
                cfg,
                "duality_gap.csv",
                &rows_csv("arc_start,arc_end,n,primal,dual,gap_rel", &rows),
            )?;
        }
    }
    Ok(())
}
