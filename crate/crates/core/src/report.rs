//! Report writing: one JSON envelope per run plus CSV field dumps. Wall
//! time lives in a single top-level field so a rerun comparison can strip
//! it and expect byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::Real;

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    /// The only field allowed to differ between reruns of the same config.
    pub timing_seconds: f64,
    /// The config text verbatim, for auditability.
    pub config: &'a str,
    pub report: T,
}

pub fn envelope_json<T: Serialize>(
    command: &str,
    timing_seconds: f64,
    config: &str,
    report: T,
) -> Result<String> {
    let env = Envelope {
        command,
        timing_seconds,
        config,
        report,
    };
    let mut text = serde_json::to_string_pretty(&env)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Parses a JSON envelope and zeroes the timing field, leaving everything
/// else byte-comparable between reruns.
pub fn normalize_envelope(json: &str) -> Result<String> {
    let mut value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| Error::Config(format!("report parse: {e}")))?;
    if let Some(t) = value.get_mut("timing_seconds") {
        *t = serde_json::Value::from(0.0);
    }
    serde_json::to_string_pretty(&value).map_err(|e| Error::Config(format!("report: {e}")))
}

pub fn write_text(dir: impl AsRef<Path>, name: &str, text: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Config(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

/// Interior nodal field as x,y,value rows in node order.
pub fn field_csv(grid: &Grid2D, values: &[Real]) -> String {
    let mut out = String::from("x,y,value\n");
    for (p, v) in grid.points().iter().zip(values) {
        out.push_str(&format!("{},{},{v}\n", p[0], p[1]));
    }
    out
}

/// Boundary nodal field as s,x,y,value rows in node order.
pub fn boundary_csv(grid: &Grid2D, values: &[Real]) -> String {
    let mut out = String::from("s,x,y,value\n");
    for (b, v) in grid.boundary().iter().zip(values) {
        out.push_str(&format!("{},{},{},{v}\n", b.s, b.pt[0], b.pt[1]));
    }
    out
}

/// Generic numeric table.
pub fn rows_csv(header: &str, rows: &[Vec<Real>]) -> String {
    let mut out = String::from(header);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainKind;

    #[test]
    fn envelope_normalization_hides_only_timing() {
        #[derive(Serialize)]
        struct Dummy {
            value: f64,
        }
        let a = envelope_json("solve", 1.25, "n = 4", Dummy { value: 0.5 }).unwrap();
        let b = envelope_json("solve", 9.75, "n = 4", Dummy { value: 0.5 }).unwrap();
        assert_ne!(a, b);
        assert_eq!(
            normalize_envelope(&a).unwrap(),
            normalize_envelope(&b).unwrap()
        );
        let c = envelope_json("solve", 1.25, "n = 4", Dummy { value: 0.625 }).unwrap();
        assert_ne!(
            normalize_envelope(&a).unwrap(),
            normalize_envelope(&c).unwrap()
        );
    }

    #[test]
    fn csv_shapes() {
        let g = Grid2D::build(DomainKind::UnitSquare, 4).unwrap();
        let field = vec![1.5; g.interior_count()];
        let csv = field_csv(&g, &field);
        assert_eq!(csv.lines().count(), g.interior_count() + 1);
        assert!(csv.starts_with("x,y,value\n"));
        let bcsv = boundary_csv(&g, &vec![0.25; g.boundary_count()]);
        assert_eq!(bcsv.lines().count(), g.boundary_count() + 1);
        let table = rows_csv("a,b", &[vec![1.0, 2.0], vec![3.0, 4.5]]);
        assert_eq!(table, "a,b\n1,2\n3,4.5\n");
    }

    #[test]
    fn write_text_creates_directories() {
        let dir = std::env::temp_dir().join("orlicz_report_test");
        let _ = fs::remove_dir_all(&dir);
        let path = write_text(dir.join("nested"), "t.csv", "x\n1\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "x\n1\n");
        let _ = fs::remove_dir_all(&dir);
    }
}
