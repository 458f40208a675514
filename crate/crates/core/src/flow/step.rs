//! Velocity predictor and the full constrained flow step.

use crate::error::{Error, Result};
use crate::flow::ops::{convection_component, gather_interior, scatter_interior, viscous_solver};
use crate::flow::projection::{FlowStepReport, ObstacleField, Projector};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::linalg::{gmres, SeparableSolver};

/// Result of one flow step.
#[derive(Clone, Debug)]
pub struct FlowStep {
    pub velocity: VectorField,
    pub pressure: ScalarField,
    /// Unconstrained predictor the projection started from.
    pub predictor: VectorField,
    pub report: FlowStepReport,
}

/// Reusable solver state for a fixed grid and viscosity.
#[derive(Clone, Debug)]
pub struct FlowSolver {
    grid: Grid,
    nu: f64,
    projector: Projector,
    viscous: Vec<SeparableSolver>,
}

/// Largest `dt |v| / h` over faces and axes.
pub fn cfl_number(v: &VectorField, dt: f64) -> f64 {
    let h = v.grid.h();
    (0..v.grid.dim())
        .map(|a| dt * v.comps[a].iter().fold(0.0f64, |m, x| m.max(x.abs())) / h[a])
        .fold(0.0, f64::max)
}

impl FlowSolver {
    pub fn new(grid: &Grid, nu: f64) -> Result<FlowSolver> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Param(format!("viscosity must be positive, got {nu}")));
        }
        for a in 0..grid.dim() {
            if grid.cells()[a] < 2 {
                return Err(Error::Grid("the flow solver needs at least two cells per axis".into()));
            }
        }
        Ok(FlowSolver {
            grid: *grid,
            nu,
            projector: Projector::new(grid),
            viscous: (0..grid.dim()).map(|a| viscous_solver(grid, a)).collect(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// Solves `(I - dt nu Lap + dt G(v, .)) v* = v + dt g` with no-slip walls.
    ///
    /// The transport velocity is the old field, so the convection term is
    /// linear in the unknown and, for solenoidal `v`, drops out of the energy
    /// balance exactly.
    pub fn predict_velocity(&self, v: &VectorField, g: &VectorField, dt: f64) -> Result<VectorField> {
        if !(dt > 0.0) {
            return Err(Error::Param(format!("time step must be positive, got {dt}")));
        }
        let cfl = cfl_number(v, dt);
        if cfl > 1.0 {
            return Err(Error::Cfl {
                what: "fluid convection",
                number: cfl,
            });
        }
        let grid = self.grid;
        let dnu = dt * self.nu;
        let mut out = VectorField::zeros(&grid);
        for a in 0..grid.dim() {
            let solver = &self.viscous[a];
            let mut rhs_field = v.clone();
            rhs_field.axpy(dt, g);
            let rhs = gather_interior(&rhs_field, a);
            // Initial guess: the Stokes predictor.
            let mut x = solver.solve(1.0, dnu, &rhs);
            if v.max_abs() > 0.0 {
                let blank = VectorField::zeros(&grid);
                let apply = |inp: &[f64], outp: &mut [f64]| {
                    let mut w = blank.clone();
                    scatter_interior(&mut w, a, inp);
                    let conv = convection_component(v, &w.comps[a], a);
                    w.comps[a] = conv;
                    let c = gather_interior(&w, a);
                    let d = solver.apply(1.0, dnu, inp);
                    for i in 0..outp.len() {
                        outp[i] = d[i] + dt * c[i];
                    }
                };
                let precond = |z: &mut [f64]| {
                    let s = solver.solve(1.0, dnu, z);
                    z.copy_from_slice(&s);
                };
                gmres(apply, precond, &rhs, &mut x, 1e-13, 40, 2000)?;
            }
            scatter_interior(&mut out, a, &x);
        }
        Ok(out)
    }

    /// Predictor followed by the projection onto the admissible set.
    pub fn step(
        &self,
        v: &VectorField,
        obs: &ObstacleField,
        g: &VectorField,
        dt: f64,
        tol: f64,
        max_sweeps: usize,
    ) -> Result<FlowStep> {
        let predictor = self.predict_velocity(v, g, dt)?;
        let (_, pressure) = self.projector.pressure_project(&predictor, dt)?;
        let (velocity, report) = self.projector.project_k(&predictor, obs, tol, max_sweeps)?;
        Ok(FlowStep {
            velocity,
            pressure,
            predictor,
            report,
        })
    }

    /// Poincare constant `L` with `|v| <= L |grad v|` for the discrete
    /// no-slip Laplacian, from power iteration on its inverse.
    pub fn poincare_constant(&self) -> f64 {
        let mut best: f64 = 0.0;
        for solver in &self.viscous {
            let n = solver.len();
            let mut x = vec![1.0 / (n as f64).sqrt(); n];
            let mut rayleigh = 0.0;
            for _ in 0..10_000 {
                let y = solver.solve(0.0, 1.0, &x);
                let r: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
                let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
                x = y.iter().map(|a| a / ny).collect();
                let done = (r - rayleigh).abs() <= 1e-15 * r;
                rayleigh = r;
                if done {
                    break;
                }
            }
            best = best.max(rayleigh);
        }
        best.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ops::{curl_of_stream, grad_norm_sq, max_abs_divergence, neg_laplacian};
    use crate::grid::{center_speeds, Side};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(2, &[1.0, 1.0], &[n, n], &[Side::XMin]).unwrap()
    }

    fn swirl(g: &Grid, amp: f64) -> VectorField {
        let mut v = curl_of_stream(g, |x| amp * (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2));
        v.zero_boundary();
        v
    }

    fn uniform_force(g: &Grid, f: [f64; 3]) -> VectorField {
        let mut v = VectorField::from_fn(g, |_| f);
        v.zero_boundary();
        v
    }

    #[test]
    fn rest_stays_at_rest() {
        let g = grid(12);
        let s = FlowSolver::new(&g, 0.05).unwrap();
        let zero = VectorField::zeros(&g);
        let vs = s.predict_velocity(&zero, &zero, 1e-3).unwrap();
        assert_eq!(vs.max_abs(), 0.0);
        let step = s.step(&zero, &ObstacleField::constant(&g, 1.0), &zero, 1e-3, 1e-10, 100).unwrap();
        assert_eq!(step.velocity.max_abs(), 0.0);
    }

    #[test]
    fn constant_force_from_rest() {
        let g = grid(16);
        let nu = 0.05;
        let dt = 1e-3;
        let s = FlowSolver::new(&g, nu).unwrap();
        let force = uniform_force(&g, [1.0, -2.0, 0.0]);
        let vs = s.predict_velocity(&VectorField::zeros(&g), &force, dt).unwrap();
        // Residual of (I + dt nu A) v* = dt g.
        let mut res = vs.clone();
        res.axpy(dt * nu, &neg_laplacian(&vs));
        res.axpy(-dt, &force);
        assert!(res.max_abs() < 1e-14);
        let centre = g.face_idx(0, 8, 8, 0);
        assert!((vs.comps[0][centre] - dt).abs() < dt * dt * nu / g.min_h().powi(2));
    }

    #[test]
    fn stokes_decay() {
        let g = grid(16);
        let s = FlowSolver::new(&g, 0.05).unwrap();
        let zero = VectorField::zeros(&g);
        let mut v = swirl(&g, 1.0);
        let obs = ObstacleField::constant(&g, 100.0);
        for _ in 0..5 {
            let next = s.step(&v, &obs, &zero, 1e-3, 1e-12, 100).unwrap().velocity;
            assert!(next.norm_sq() < v.norm_sq());
            v = next;
        }
    }

    #[test]
    fn predictor_energy_identity() {
        let g = grid(16);
        let nu = 0.02;
        let dt = 2e-3;
        let s = FlowSolver::new(&g, nu).unwrap();
        let v = swirl(&g, 3.0);
        assert!(max_abs_divergence(&v) < 1e-12);
        let force = uniform_force(&g, [0.3, 0.7, 0.0]);
        let vs = s.predict_velocity(&v, &force, dt).unwrap();
        // |v*|^2 - |v|^2 + |v* - v|^2 + 2 dt nu |grad v*|^2 = 2 dt <g, v*>
        let lhs = vs.norm_sq() - v.norm_sq() + vs.sub(&v).norm_sq() + 2.0 * dt * nu * grad_norm_sq(&vs);
        let rhs = 2.0 * dt * force.dot(&vs);
        assert!((lhs - rhs).abs() < 1e-12 * v.norm_sq());
    }

    #[test]
    fn cfl_guard() {
        let g = grid(8);
        let s = FlowSolver::new(&g, 0.05).unwrap();
        let v = swirl(&g, 50.0);
        let zero = VectorField::zeros(&g);
        assert!(matches!(s.predict_velocity(&v, &zero, 1.0), Err(Error::Cfl { .. })));
    }

    #[test]
    fn solid_region_slows_to_bound() {
        let g = grid(16);
        let s = FlowSolver::new(&g, 0.05).unwrap();
        let mu = 0.05;
        let obs = ObstacleField {
            grid: g,
            values: (0..g.num_cells())
                .map(|c| {
                    let x = g.center(c);
                    if (x[0] - 0.5).abs() < 0.2 && (x[1] - 0.5).abs() < 0.2 {
                        mu
                    } else {
                        2.0
                    }
                })
                .collect(),
        };
        let v = swirl(&g, 2.0);
        let force = uniform_force(&g, [0.0, 0.0, 0.0]);
        let step = s.step(&v, &obs, &force, 1e-3, 1e-10, 20_000).unwrap();
        let speeds = center_speeds(&step.velocity);
        for (sp, o) in speeds.iter().zip(&obs.values) {
            assert!(*sp <= o + 1e-8 * 2.0);
        }
        assert!(step.report.max_div < 1e-10);
        assert!(step.report.sweeps > 1);
    }

    #[test]
    fn poincare_matches_spectrum() {
        let g = Grid::new(2, &[1.0, 2.0], &[10, 14], &[Side::XMin]).unwrap();
        let s = FlowSolver::new(&g, 0.1).unwrap();
        let lp = s.poincare_constant();
        let lam = (0..2).map(|a| viscous_solver(&g, a).spectral_range().0).fold(f64::INFINITY, f64::min);
        assert!((lp - 1.0 / lam.sqrt()).abs() < 1e-7 * lp);
    }
}
