//! Norms and invariant checks on simulation states.

use crate::constitutive::ModelParams;
use crate::coupling::SimState;
use crate::flow::ops::divergence;
use crate::flow::projection::ObstacleField;
use crate::grid::{center_speeds, ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldNorms {
    pub l2: f64,
    pub linf: f64,
    /// `sum x h^n`
    pub mass: f64,
}

pub fn field_norms(f: &ScalarField) -> FieldNorms {
    let vol = f.grid.cell_volume();
    FieldNorms {
        l2: (f.values.iter().map(|x| x * x).sum::<f64>() * vol).sqrt(),
        linf: f.values.iter().fold(0.0, |m, x| m.max(x.abs())),
        mass: f.values.iter().sum::<f64>() * vol,
    }
}

/// `|v|^2 / 2` over all faces.
pub fn kinetic_energy(v: &VectorField) -> f64 {
    0.5 * v.norm_sq()
}

/// Tolerances for [`invariant_report`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantTolerances {
    pub bounds: f64,
    pub constraint: f64,
    pub divergence: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        InvariantTolerances {
            bounds: 1e-8,
            constraint: 1e-8,
            divergence: 1e-10,
        }
    }
}

/// Outcome of one invariant check. `worst` is the largest violation (or
/// negative margin when satisfied) and `location` the cell attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub location: Option<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Largest value of `excess(i)` over cells with its location.
fn worst_cell(n: usize, excess: impl Fn(usize) -> f64) -> (f64, Option<usize>) {
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for i in 0..n {
        let e = excess(i);
        if e > worst || e.is_nan() {
            worst = e;
            at = Some(i);
            if e.is_nan() {
                break;
            }
        }
    }
    (worst, at)
}

/// Checks bounds of `u` and `w`, the velocity constraint against `obstacle`,
/// the discrete divergence and finiteness of every field.
pub fn invariant_report(
    s: &SimState,
    params: &ModelParams,
    obstacle: &ObstacleField,
    tol: &InvariantTolerances,
) -> InvariantReport {
    let g = s.u.grid;
    let n = g.num_cells();
    let mut checks = Vec::new();
    let mut push = |name, limit: f64, (worst, at): (f64, Option<usize>)| {
        checks.push(InvariantCheck {
            name,
            passed: worst <= limit,
            worst,
            location: at.map(|c| g.coords(c)),
        });
    };
    let u = &s.u.values;
    let w = &s.w.values;
    push("u >= 0", tol.bounds, worst_cell(n, |i| -u[i]));
    push("u <= u_star", tol.bounds, worst_cell(n, |i| u[i] - params.u_star));
    push("w >= 0", tol.bounds, worst_cell(n, |i| -w[i]));
    push("w <= 1", tol.bounds, worst_cell(n, |i| w[i] - 1.0));
    let speeds = center_speeds(&s.v);
    let scale = params.p0(params.mu).unwrap_or(1.0);
    push(
        "|v| <= obstacle",
        tol.constraint * scale,
        worst_cell(n, |i| speeds[i] - obstacle.values[i]),
    );
    let div = divergence(&s.v).values;
    let div_scale = s.v.max_abs() / g.min_h() + 1.0;
    push("div v = 0", tol.divergence * div_scale, worst_cell(n, |i| div[i].abs()));
    let finite = s.u.is_finite() && s.w.is_finite() && s.v.is_finite() && s.p.is_finite();
    checks.push(InvariantCheck {
        name: "finite",
        passed: finite,
        worst: if finite { 0.0 } else { f64::NAN },
        location: None,
    });
    InvariantReport { checks }
}
