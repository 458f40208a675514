//! Projections onto the divergence-free space, the pointwise speed bound and
//! their intersection.

use std::collections::VecDeque;

use crate::constitutive::ModelParams;
use crate::error::{Error, Result};
use crate::flow::ops::{divergence, gradient, max_abs_divergence, pressure_solver};
use crate::grid::{center_speeds, Grid, ScalarField, VectorField};
use crate::linalg::SeparableSolver;
use crate::mollify::{mollify_cut, CutoffField, MollifierKernel};

/// Per-cell speed bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ObstacleField {
    pub fn constant(grid: &Grid, value: f64) -> ObstacleField {
        ObstacleField {
            grid: *grid,
            values: vec![value; grid.num_cells()],
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest amount by which any cell-center speed of `v` exceeds the bound.
    pub fn excess(&self, v: &VectorField) -> f64 {
        center_speeds(v)
            .iter()
            .zip(&self.values)
            .fold(0.0, |m, (s, o)| m.max(s - o))
    }

    /// `sup |self - other|`
    pub fn distance(&self, other: &ObstacleField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Speed bound `p_mu(rho * (gamma u))` from the current biomass.
pub fn build_obstacle(
    u: &ScalarField,
    params: &ModelParams,
    cutoff: &CutoffField,
    kernel: &MollifierKernel,
) -> ObstacleField {
    let smoothed = mollify_cut(u, cutoff, kernel);
    ObstacleField {
        grid: u.grid,
        values: smoothed.values.iter().map(|&r| params.p_mu_clamped(r)).collect(),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowStepReport {
    /// Max cell divergence left by the pressure solve.
    pub pressure_residual: f64,
    pub sweeps: usize,
    pub max_excess: f64,
    pub max_div: f64,
}

/// Projects a single cell's center vector onto the ball of radius `r`.
///
/// The cell's center value along axis `a` is the mean of its two `a`-faces,
/// so shifting both faces by the same amount is the least-squares change that
/// moves the center vector radially onto the sphere.
fn project_cell(v: &mut VectorField, c: usize, r: f64) {
    let g = v.grid;
    let mut m = [0.0; 3];
    let mut faces = [[0usize; 2]; 3];
    for a in 0..g.dim() {
        faces[a] = [g.cell_face(c, a, false), g.cell_face(c, a, true)];
        m[a] = 0.5 * (v.comps[a][faces[a][0]] + v.comps[a][faces[a][1]]);
    }
    let speed = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    if speed <= r {
        return;
    }
    let shrink = 1.0 - r / speed;
    for a in 0..g.dim() {
        let d = shrink * m[a];
        v.comps[a][faces[a][0]] -= d;
        v.comps[a][faces[a][1]] -= d;
    }
}

fn cell_color(g: &Grid, c: usize) -> usize {
    let x = g.coords(c);
    (x[0] + x[1] + x[2]) % 2
}

/// Exact projection onto the speed bound for all cells of one checkerboard
/// color. Cells of one color share no faces, so their projections commute.
fn project_color(v: &mut VectorField, obs: &ObstacleField, color: usize) {
    let g = v.grid;
    for c in 0..g.num_cells() {
        if cell_color(&g, c) == color {
            project_cell(v, c, obs.values[c]);
        }
    }
}

/// One Dykstra step for a convex set with projector `proj`:
/// `x <- P(x + p)`, `p <- x_old + p - x_new`.
fn dykstra_step(x: &mut VectorField, incr: &mut VectorField, proj: impl FnOnce(&mut VectorField)) {
    let mut z = x.clone();
    z.axpy(1.0, incr);
    let before = z.clone();
    proj(&mut z);
    *incr = before.sub(&z);
    *x = z;
}

fn max_change(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).max_abs()
}

/// Scale of velocity divergences on this grid: `max|v| / h`.
fn div_scale(v: &VectorField) -> f64 {
    v.max_abs() / v.grid.min_h() + 1.0
}

/// Euclidean projection onto the set of face fields whose cell-center speeds
/// stay below `obs`, computed by Dykstra iteration over the two checkerboard
/// colors.
pub fn obstacle_project(v: &VectorField, obs: &ObstacleField) -> VectorField {
    let tol = 1e-13 * (v.max_abs() + obs.values.iter().cloned().fold(0.0, f64::max));
    let mut x = v.clone();
    let mut p = [VectorField::zeros(&v.grid), VectorField::zeros(&v.grid)];
    for _ in 0..100_000 {
        let prev = x.clone();
        for (color, incr) in p.iter_mut().enumerate() {
            dykstra_step(&mut x, incr, |z| project_color(z, obs, color));
        }
        if max_change(&x, &prev) <= tol {
            break;
        }
    }
    x
}

fn flatten(incr: &[VectorField; 2]) -> Vec<f64> {
    incr.iter().flat_map(|f| f.comps.iter().flatten().copied()).collect()
}

fn unflatten(g: &Grid, z: &[f64]) -> [VectorField; 2] {
    let mut out = [VectorField::zeros(g), VectorField::zeros(g)];
    let mut k = 0;
    for f in out.iter_mut() {
        for comp in f.comps.iter_mut() {
            let len = comp.len();
            comp.copy_from_slice(&z[k..k + len]);
            k += len;
        }
    }
    out
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Coefficients minimizing `|g - sum_j gamma_j cols_j|`, from lightly
/// regularized normal equations. `None` for an empty or degenerate history.
fn least_squares(cols: &VecDeque<Vec<f64>>, g: &[f64]) -> Option<Vec<f64>> {
    let m = cols.len();
    if m == 0 {
        return None;
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        for j in 0..=i {
            let d = dot(&cols[i], &cols[j]);
            a[i][j] = d;
            a[j][i] = d;
        }
        a[i][m] = dot(&cols[i], g);
    }
    let reg = 1e-12 * (0..m).map(|i| a[i][i]).fold(0.0, f64::max);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += reg;
    }
    // Gaussian elimination with partial pivoting on the augmented matrix.
    for k in 0..m {
        let piv = (k..m).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        a.swap(k, piv);
        if !(a[k][k].abs() > 0.0) {
            return None;
        }
        for i in k + 1..m {
            let f = a[i][k] / a[k][k];
            for j in k..=m {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let s: f64 = (k + 1..m).map(|j| a[k][j] * x[j]).sum();
        x[k] = (a[k][m] - s) / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Checkerboard multipliers carried from one bounded projection to the next.
#[derive(Clone, Debug, Default)]
pub struct WarmStart(Vec<f64>);

/// Precomputed projector onto divergence-free fields with zero normal
/// velocity on the boundary.
#[derive(Clone, Debug)]
pub struct Projector {
    grid: Grid,
    solver: SeparableSolver,
}

impl Projector {
    pub fn new(grid: &Grid) -> Projector {
        Projector {
            grid: *grid,
            solver: pressure_solver(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Returns the projected field and the potential `phi` with
    /// `v = v* - grad phi` (mean zero).
    fn project_with_potential(&self, v: &VectorField) -> (VectorField, ScalarField) {
        let mut out = v.clone();
        out.zero_boundary();
        let rhs: Vec<f64> = divergence(&out).values.iter().map(|d| -d).collect();
        let phi = ScalarField {
            grid: self.grid,
            values: self.solver.solve(0.0, 1.0, &rhs),
        };
        out.axpy(-1.0, &gradient(&phi));
        (out, phi)
    }

    /// Pressure projection: `v = v* - dt grad P` with `Lap P = div v* / dt`.
    pub fn pressure_project(&self, v: &VectorField, dt: f64) -> Result<(VectorField, ScalarField)> {
        let (out, phi) = self.project_with_potential(v);
        let residual = max_abs_divergence(&out);
        if !out.is_finite() || residual > 1e-8 * div_scale(v) {
            return Err(Error::LinearSolve(format!(
                "pressure solve left divergence {residual:.3e}"
            )));
        }
        Ok((out, phi.map(|x| x / dt)))
    }

    fn project(&self, v: &VectorField) -> VectorField {
        self.project_with_potential(v).0
    }

    /// Euclidean projection onto `{div v = 0, |v_c| <= obs}` by Dykstra's
    /// algorithm over the divergence-free subspace and the two checkerboard
    /// halves of the speed bound.
    ///
    /// The iteration stops once the divergence-free iterate exceeds the bound
    /// by at most `tol` and the increments move by at most `tol` per sweep. That iterate is
    /// then shrunk uniformly so the bound holds exactly.
    pub fn project_k(
        &self,
        v: &VectorField,
        obs: &ObstacleField,
        tol: f64,
        max_sweeps: usize,
    ) -> Result<(VectorField, FlowStepReport)> {
        if !(tol > 0.0) {
            return Err(Error::Param(format!("projection tolerance must be positive, got {tol}")));
        }
        let scale = div_scale(v);
        if v.boundary_max_abs() == 0.0 && max_abs_divergence(v) <= tol * scale && obs.excess(v) <= tol {
            let report = FlowStepReport {
                pressure_residual: 0.0,
                sweeps: 0,
                max_excess: obs.excess(v).max(0.0),
                max_div: max_abs_divergence(v),
            };
            return Ok((v.clone(), report));
        }
        self.accelerated_project(v, obs, tol, max_sweeps, &mut WarmStart::default())
    }

    /// `project_k` started from the multipliers left in `warm` by an earlier
    /// call on the same grid. Any starting point converges to the same
    /// projection; a nearby one needs fewer sweeps. `warm` is updated on success.
    pub fn project_k_warm(
        &self,
        v: &VectorField,
        obs: &ObstacleField,
        tol: f64,
        max_sweeps: usize,
        warm: &mut WarmStart,
    ) -> Result<(VectorField, FlowStepReport)> {
        if !(tol > 0.0) {
            return Err(Error::Param(format!("projection tolerance must be positive, got {tol}")));
        }
        self.accelerated_project(v, obs, tol, max_sweeps, warm)
    }

    /// One Dykstra sweep as a map on the checkerboard increments: returns the
    /// divergence-free iterate and the updated increments.
    fn dykstra_map(&self, v: &VectorField, obs: &ObstacleField, z: &[f64]) -> (VectorField, Vec<f64>) {
        let mut incr = unflatten(&self.grid, z);
        let mut x = v.sub(&incr[0]);
        x.axpy(-1.0, &incr[1]);
        let y = self.project(&x);
        x = y.clone();
        for (color, p) in incr.iter_mut().enumerate() {
            dykstra_step(&mut x, p, |w| project_color(w, obs, color));
        }
        (y, flatten(&incr))
    }

    /// Dykstra's iteration with Anderson mixing of the increments. A mixed
    /// step is kept only when it lowers the fixed-point residual; otherwise the
    /// history is dropped and the plain sweep is taken.
    fn accelerated_project(
        &self,
        v: &VectorField,
        obs: &ObstacleField,
        tol: f64,
        max_sweeps: usize,
        warm: &mut WarmStart,
    ) -> Result<(VectorField, FlowStepReport)> {
        const DEPTH: usize = 10;
        let n = 2 * (0..3).map(|a| self.grid.num_faces(a)).sum::<usize>();
        let mut z = if warm.0.len() == n { warm.0.clone() } else { vec![0.0; n] };
        let (mut y, mut tz) = self.dykstra_map(v, obs, &z);
        let mut g: Vec<f64> = tz.iter().zip(&z).map(|(t, z)| t - z).collect();
        let mut sweeps = 1;
        let mut dz: VecDeque<Vec<f64>> = VecDeque::new();
        let mut dg: VecDeque<Vec<f64>> = VecDeque::new();
        loop {
            let excess = obs.excess(&y);
            if excess <= tol && max_abs(&g) <= tol {
                warm.0 = z;
                return Ok(self.finish(y, obs, sweeps));
            }
            if sweeps >= max_sweeps {
                return Err(Error::Projection { sweeps, excess });
            }
            let gnorm = norm2(&g);
            let mut next = None;
            if let Some(gamma) = least_squares(&dg, &g) {
                let mut cand = tz.clone();
                for ((dzj, dgj), c) in dz.iter().zip(&dg).zip(&gamma) {
                    for i in 0..n {
                        cand[i] -= c * (dzj[i] + dgj[i]);
                    }
                }
                let (yc, tc) = self.dykstra_map(v, obs, &cand);
                sweeps += 1;
                let gc: Vec<f64> = tc.iter().zip(&cand).map(|(t, z)| t - z).collect();
                if norm2(&gc) < gnorm {
                    next = Some((cand, yc, tc, gc));
                } else {
                    dz.clear();
                    dg.clear();
                }
            }
            let (zn, yn, tn, gn) = match next {
                Some(step) => step,
                None => {
                    let (yp, tp) = self.dykstra_map(v, obs, &tz);
                    sweeps += 1;
                    let gp: Vec<f64> = tp.iter().zip(&tz).map(|(t, z)| t - z).collect();
                    (tz, yp, tp, gp)
                }
            };
            if dz.len() == DEPTH {
                dz.pop_front();
                dg.pop_front();
            }
            dz.push_back(zn.iter().zip(&z).map(|(a, b)| a - b).collect());
            dg.push_back(gn.iter().zip(&g).map(|(a, b)| a - b).collect());
            z = zn;
            y = yn;
            tz = tn;
            g = gn;
        }
    }

    fn finish(&self, mut y: VectorField, obs: &ObstacleField, sweeps: usize) -> (VectorField, FlowStepReport) {
        let theta = center_speeds(&y)
            .iter()
            .zip(&obs.values)
            .fold(1.0f64, |t, (s, o)| if *s > *o { t.min(o / s) } else { t });
        if theta < 1.0 {
            y.scale(theta);
        }
        let max_div = max_abs_divergence(&y);
        let report = FlowStepReport {
            pressure_residual: max_div,
            sweeps,
            max_excess: obs.excess(&y).max(0.0),
            max_div,
        };
        (y, report)
    }
}

/// Shrinks a test field feasible for `obs_old` so it is feasible for `obs_new`.
pub fn make_feasible(
    eta: &VectorField,
    obs_new: &ObstacleField,
    obs_old: &ObstacleField,
    mu: f64,
) -> Result<VectorField> {
    let s = obs_new.distance(obs_old);
    if s >= mu {
        return Err(Error::Param(format!(
            "obstacle moved by {s:.3e}, not below the regularization {mu:.3e}"
        )));
    }
    Ok(eta.scaled(1.0 - s / mu))
}
