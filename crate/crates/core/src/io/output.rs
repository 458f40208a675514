//! CSV diagnostics series and VTK legacy snapshots.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::coupling::{SimState, StepDiagnostics};
use crate::error::{Error, Result};
use crate::flow::projection::ObstacleField;
use crate::grid::{interpolate_to_centers, Grid};
use crate::io::config::SnapshotField;

pub const SERIES_COLUMNS: [&str; 16] = [
    "step",
    "t",
    "picard_iters",
    "u_min",
    "u_max",
    "w_min",
    "w_max",
    "kinetic_energy",
    "phi_u",
    "nutrient_l2",
    "max_constraint_excess",
    "max_div",
    "mass_u",
    "mass_w",
    "clamp_u",
    "clamp_w",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV row, without the line terminator.
pub fn format_row(d: &StepDiagnostics) -> String {
    let reals = [
        d.t,
        d.u_min,
        d.u_max,
        d.w_min,
        d.w_max,
        d.kinetic_energy,
        d.phi_u,
        d.nutrient_l2,
        d.max_constraint_excess,
        d.max_div,
        d.mass_u,
        d.mass_w,
        d.clamp_u,
        d.clamp_w,
    ];
    let mut row = format!("{}", d.step);
    for (i, x) in reals.iter().enumerate() {
        if i == 1 {
            write!(row, ",{}", d.picard_iters).unwrap();
        }
        write!(row, ",{}", num(*x)).unwrap();
    }
    row
}

/// Appends diagnostics rows to a CSV file, flushing after each row.
pub struct SeriesWriter {
    out: BufWriter<File>,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> Result<SeriesWriter> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", SERIES_COLUMNS.join(","))?;
        out.flush()?;
        Ok(SeriesWriter { out })
    }

    pub fn push(&mut self, d: &StepDiagnostics) -> Result<()> {
        writeln!(self.out, "{}", format_row(d))?;
        self.out.flush()?;
        Ok(())
    }
}

/// Writes a whole series at once.
pub fn write_series(path: &Path, entries: &[StepDiagnostics]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::Config("a diagnostics series needs at least one entry".into()));
    }
    let mut w = SeriesWriter::create(path)?;
    for d in entries {
        w.push(d)?;
    }
    Ok(())
}

fn vtk_header(g: &Grid, title: &str) -> String {
    let c = g.cells();
    let h = g.h();
    let dims: Vec<usize> = (0..3).map(|a| if a < g.dim() { c[a] + 1 } else { 1 }).collect();
    let spacing: Vec<f64> = (0..3).map(|a| if a < g.dim() { h[a] } else { 1.0 }).collect();
    format!(
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_POINTS\nDIMENSIONS {} {} {}\nORIGIN 0 0 0\nSPACING {} {} {}\nCELL_DATA {}\n",
        dims[0],
        dims[1],
        dims[2],
        num(spacing[0]),
        num(spacing[1]),
        num(spacing[2]),
        g.num_cells()
    )
}

fn scalars(g: &Grid, title: &str, name: &str, values: &[f64]) -> String {
    let mut s = vtk_header(g, title);
    writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
    for x in values {
        s.push_str(&num(*x));
        s.push('\n');
    }
    s
}

/// Writes one VTK legacy file per requested field, named
/// `{field}_{step:06}.vtk`, and returns their paths.
pub fn write_snapshot(
    dir: &Path,
    state: &SimState,
    obstacle: &ObstacleField,
    fields: &[SnapshotField],
    step: usize,
) -> Result<Vec<PathBuf>> {
    let g = state.u.grid;
    let title = format!("biofilm step {step} t {}", num(state.t));
    let mut paths = Vec::new();
    for &f in fields {
        let body = match f {
            SnapshotField::U => scalars(&g, &title, "u", &state.u.values),
            SnapshotField::W => scalars(&g, &title, "w", &state.w.values),
            SnapshotField::P => scalars(&g, &title, "P", &state.p.values),
            SnapshotField::Obstacle => scalars(&g, &title, "obstacle", &obstacle.values),
            SnapshotField::V => {
                let centers = interpolate_to_centers(&state.v);
                let mut s = vtk_header(&g, &title);
                s.push_str("VECTORS v double\n");
                for c in &centers {
                    writeln!(s, "{} {} {}", num(c[0]), num(c[1]), num(c[2])).unwrap();
                }
                s
            }
        };
        let path = dir.join(format!("{}_{step:06}.vtk", f.name()));
        std::fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ScalarField, Side, VectorField};

    #[test]
    fn row_has_sixteen_columns() {
        let d = StepDiagnostics {
            step: 3,
            t: 0.1,
            picard_iters: 4,
            ..Default::default()
        };
        let row = format_row(&d);
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), SERIES_COLUMNS.len());
        assert_eq!(cols[0], "3");
        assert_eq!(cols[2], "4");
        assert_eq!(cols[1].parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn snapshot_header() {
        let g = Grid::new(2, &[1.0, 1.0], &[4, 4], &[Side::XMin]).unwrap();
        let s = SimState {
            t: 0.0,
            u: ScalarField::constant(&g, 0.5),
            w: ScalarField::constant(&g, 1.0),
            v: VectorField::zeros(&g),
            p: ScalarField::zeros(&g),
        };
        let dir = tempfile::tempdir().unwrap();
        let obs = ObstacleField::constant(&g, 1.0);
        let paths = write_snapshot(dir.path(), &s, &obs, &[SnapshotField::U, SnapshotField::V], 7).unwrap();
        assert!(paths[0].ends_with("u_000007.vtk"));
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[3], "DATASET STRUCTURED_POINTS");
        assert!(lines.contains(&"CELL_DATA 16"));
        let v = std::fs::read_to_string(&paths[1]).unwrap();
        let last = v.lines().last().unwrap();
        assert_eq!(last.split_whitespace().count(), 3);
    }
}
