//! Discrete variational inequality and energy checks on flow trajectories.

use crate::error::{Error, Result};
use crate::flow::ops::{convection, grad_norm_sq, max_abs_divergence, neg_laplacian};
use crate::flow::projection::ObstacleField;
use crate::grid::VectorField;

/// Everything a flow run produces that the a-posteriori checks need.
#[derive(Clone, Debug, Default)]
pub struct FlowTrajectory {
    pub dt: f64,
    pub nu: f64,
    /// `v^0 .. v^N`
    pub states: Vec<VectorField>,
    /// Predictor of step `n`, which produced `states[n + 1]`.
    pub predictors: Vec<VectorField>,
    /// Forcing used in step `n`.
    pub forcing: Vec<VectorField>,
    /// Speed bound `states[n]` was projected onto (`obstacles[0]` for the initial state).
    pub obstacles: Vec<ObstacleField>,
}

impl FlowTrajectory {
    pub fn new(dt: f64, nu: f64, v0: VectorField, obs0: ObstacleField) -> FlowTrajectory {
        FlowTrajectory {
            dt,
            nu,
            states: vec![v0],
            predictors: Vec::new(),
            forcing: Vec::new(),
            obstacles: vec![obs0],
        }
    }

    pub fn push(&mut self, predictor: VectorField, forcing: VectorField, obs: ObstacleField, state: VectorField) {
        self.predictors.push(predictor);
        self.forcing.push(forcing);
        self.obstacles.push(obs);
        self.states.push(state);
    }

    pub fn steps(&self) -> usize {
        self.predictors.len()
    }
}

/// `RHS - LHS` of the discrete variational inequality tested with `eta`.
///
/// With `e = v - eta` the inequality reads
/// `sum <eta^{n+1} - eta^n, e^{n+1}> + dt nu sum <grad v*_n, grad e^{n+1}>
///  + dt sum <G(v^n, v*_n), e^{n+1}> + |e^N|^2 / 2
///  <= dt sum <g_n, e^{n+1}> + |e^0|^2 / 2`.
/// `eta` must hold one divergence-free field per state, each within the
/// matching speed bound up to `tol`.
pub fn vi_residual(traj: &FlowTrajectory, eta: &[VectorField], tol: f64) -> Result<f64> {
    let n = traj.steps();
    if eta.len() != n + 1 || traj.states.len() != n + 1 || traj.obstacles.len() != n + 1 {
        return Err(Error::Param(format!(
            "test trajectory has {} fields for {} steps",
            eta.len(),
            n
        )));
    }
    for (k, (e, obs)) in eta.iter().zip(&traj.obstacles).enumerate() {
        let excess = obs.excess(e);
        let div = max_abs_divergence(e);
        if excess > tol || div > tol * (e.max_abs() / e.grid.min_h() + 1.0) || e.boundary_max_abs() > 0.0 {
            return Err(Error::Param(format!(
                "test field {k} is not admissible (excess {excess:.3e}, divergence {div:.3e})"
            )));
        }
    }
    let dt = traj.dt;
    let err: Vec<VectorField> = traj.states.iter().zip(eta).map(|(v, e)| v.sub(e)).collect();
    let mut rhs = 0.5 * err[0].norm_sq();
    let mut lhs = 0.5 * err[n].norm_sq();
    for k in 0..n {
        let next = &err[k + 1];
        rhs += dt * traj.forcing[k].dot(next);
        lhs += eta[k + 1].sub(&eta[k]).dot(next);
        lhs += dt * traj.nu * neg_laplacian(&traj.predictors[k]).dot(next);
        lhs += dt * convection(&traj.states[k], &traj.predictors[k]).dot(next);
    }
    Ok(rhs - lhs)
}

/// Largest ratio along the run of
/// `|v^n|^2 + nu dt sum_{k<n} |grad v*_k|^2` to `|v^0|^2 + (L^2 / nu) dt sum_{k<n} |g_k|^2`.
pub fn flow_energy_ratio(traj: &FlowTrajectory, poincare: f64) -> f64 {
    let dt = traj.dt;
    let nu = traj.nu;
    let e0 = traj.states[0].norm_sq();
    let mut dissipated = 0.0;
    let mut supplied = 0.0;
    let mut worst: f64 = 0.0;
    for k in 0..traj.steps() {
        dissipated += nu * dt * grad_norm_sq(&traj.predictors[k]);
        supplied += poincare * poincare / nu * dt * traj.forcing[k].norm_sq();
        let num = traj.states[k + 1].norm_sq() + dissipated;
        let den = e0 + supplied;
        if num > 0.0 {
            worst = worst.max(num / den);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ops::curl_of_stream;
    use crate::flow::step::FlowSolver;
    use crate::grid::{Grid, Side};
    use std::f64::consts::PI;

    fn run(steps: usize) -> (FlowTrajectory, f64) {
        let g = Grid::new(2, &[1.0, 1.0], &[12, 12], &[Side::XMin]).unwrap();
        let solver = FlowSolver::new(&g, 0.05).unwrap();
        let mut v0 = curl_of_stream(&g, |x| 0.4 * (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2));
        v0.zero_boundary();
        let obs = ObstacleField {
            grid: g,
            values: (0..g.num_cells()).map(|c| if c % 7 == 0 { 0.05 } else { 1.0 }).collect(),
        };
        let (v0, _) = solver.projector().project_k(&v0, &obs, 1e-12, 100_000).unwrap();
        let mut force = curl_of_stream(&g, |x| (2.0 * PI * x[0]).sin() * (PI * x[1]).sin().powi(2));
        force.zero_boundary();
        let dt = 1e-2;
        let mut traj = FlowTrajectory::new(dt, solver.nu(), v0.clone(), obs.clone());
        let mut v = v0;
        for _ in 0..steps {
            let s = solver.step(&v, &obs, &force, dt, 1e-12, 100_000).unwrap();
            v = s.velocity.clone();
            traj.push(s.predictor, force.clone(), obs.clone(), s.velocity);
        }
        (traj, solver.poincare_constant())
    }

    #[test]
    fn solution_as_test_field() {
        let (traj, _) = run(4);
        let eta = traj.states.clone();
        let r = vi_residual(&traj, &eta, 1e-9).unwrap();
        assert!(r >= -1e-8, "{r}");
    }

    #[test]
    fn zero_test_field_and_energy() {
        let (traj, lp) = run(4);
        let zero = vec![VectorField::zeros(&traj.states[0].grid); traj.states.len()];
        assert!(vi_residual(&traj, &zero, 1e-9).unwrap() >= -1e-10);
        let ratio = flow_energy_ratio(&traj, lp);
        assert!(ratio > 0.0 && ratio <= 1.0 + 1e-9, "{ratio}");
    }

    #[test]
    fn rejects_inadmissible_test_field() {
        let (traj, _) = run(1);
        let mut eta = traj.states.clone();
        eta[1].scale(100.0);
        assert!(vi_residual(&traj, &eta, 1e-9).is_err());
        assert!(vi_residual(&traj, &eta[..1], 1e-9).is_err());
    }
}
