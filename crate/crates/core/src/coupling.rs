//! Per-step Picard coupling of flow, nutrient and biomass.

use serde::{Deserialize, Serialize};

use crate::biomass::{biomass_energy, BiomassSolver, BiomassStepConfig, BiomassStepReport};
use crate::constitutive::{BetaHat, ModelParams};
use crate::error::{Error, Result};
use crate::flow::ops::{grad_norm_sq, max_abs_divergence};
use crate::flow::projection::{build_obstacle, FlowStepReport, ObstacleField, WarmStart};
use crate::flow::step::{FlowSolver, FlowStep};
use crate::grid::{center_speeds, Grid, ScalarField, VectorField};
use crate::mollify::{build_cutoff, CutoffField, MollifierKernel};
use crate::nutrient::{self, NutrientSolver, NutrientStepReport};

/// Order of the three solves inside a Picard iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitOrder {
    /// Flow, then nutrient with the previous biomass iterate, then biomass.
    #[default]
    FlowNutrientBiomass,
    /// Flow, then biomass with the previous nutrient iterate, then nutrient.
    FlowBiomassNutrient,
}

/// The `[coupling]` config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    /// Relative L2 tolerance on successive biomass iterates.
    pub picard_tol: f64,
    /// Absolute floor added to the Picard tolerance.
    pub picard_abs_tol: f64,
    pub picard_max: usize,
    pub order: SplitOrder,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Feasibility tolerance of the velocity projection.
    pub projection_tol: f64,
    pub projection_max_sweeps: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            picard_tol: 1e-8,
            picard_abs_tol: 1e-12,
            picard_max: 30,
            order: SplitOrder::default(),
            newton_tol: 1e-11,
            newton_max: 60,
            projection_tol: 1e-10,
            projection_max_sweeps: 20_000,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("picard_tol", self.picard_tol),
            ("newton_tol", self.newton_tol),
            ("projection_tol", self.projection_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("coupling.{name} must be positive, got {v}")));
            }
        }
        if !(self.picard_abs_tol >= 0.0) {
            return Err(Error::Config("coupling.picard_abs_tol must be nonnegative".into()));
        }
        if self.picard_max == 0 || self.newton_max == 0 || self.projection_max_sweeps == 0 {
            return Err(Error::Config("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

/// Unknowns at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: ScalarField,
    pub w: ScalarField,
    pub v: VectorField,
    pub p: ScalarField,
}

/// Per-step report. The first sixteen fields form the CSV series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub picard_iters: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// `|v|^2 / 2`
    pub kinetic_energy: f64,
    /// `sum beta_hat(u) h^n`
    pub phi_u: f64,
    pub nutrient_l2: f64,
    pub max_constraint_excess: f64,
    pub max_div: f64,
    pub mass_u: f64,
    pub mass_w: f64,
    pub clamp_u: f64,
    pub clamp_w: f64,
    /// Successive `|u^{k+1} - u^k|` of the Picard iteration.
    pub picard_residuals: Vec<f64>,
    pub u_min_pre: f64,
    pub u_max_pre: f64,
    pub w_min_pre: f64,
    pub w_max_pre: f64,
    pub newton_iterations: usize,
    pub projection_sweeps: usize,
    /// `|grad w|^2` and the predictor's `|grad v*|^2` at the new level.
    pub nutrient_grad_sq: f64,
    pub viscous_grad_sq: f64,
}

/// Result of one accepted time step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: SimState,
    pub diagnostics: StepDiagnostics,
    pub flow: FlowStep,
    pub obstacle: ObstacleField,
    pub forcing: VectorField,
}

/// Solvers and fixed data for one simulation.
#[derive(Clone, Debug)]
pub struct Simulation {
    grid: Grid,
    params: ModelParams,
    dt: f64,
    coupling: CouplingConfig,
    forcing: VectorField,
    flow: FlowSolver,
    biomass: BiomassSolver,
    nutrient: NutrientSolver,
    obstacle_kernel: MollifierKernel,
    cutoff: CutoffField,
    beta_hat: BetaHat,
}

/// `sqrt(sum x^2 h^n)`
fn l2(grid: &Grid, x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt()
}

fn l2_diff(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() * grid.cell_volume()).sqrt()
}

impl Simulation {
    pub fn new(
        grid: &Grid,
        params: &ModelParams,
        dt: f64,
        coupling: &CouplingConfig,
        forcing: VectorField,
    ) -> Result<Simulation> {
        params.validate()?;
        coupling.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if forcing.grid != *grid || !forcing.is_finite() {
            return Err(Error::Config("forcing must be a finite field on the simulation grid".into()));
        }
        let mut forcing = forcing;
        forcing.zero_boundary();
        Ok(Simulation {
            grid: *grid,
            params: params.clone(),
            dt,
            coupling: coupling.clone(),
            forcing,
            flow: FlowSolver::new(grid, params.nu)?,
            biomass: BiomassSolver::new(grid, params)?,
            nutrient: NutrientSolver::new(grid, params)?,
            obstacle_kernel: MollifierKernel::new(params.eps, grid)?,
            cutoff: build_cutoff(grid, params.mu)?,
            beta_hat: BetaHat::new(params),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn forcing(&self) -> &VectorField {
        &self.forcing
    }

    pub fn flow_solver(&self) -> &FlowSolver {
        &self.flow
    }

    pub fn biomass_solver(&self) -> &BiomassSolver {
        &self.biomass
    }

    pub fn nutrient_solver(&self) -> &NutrientSolver {
        &self.nutrient
    }

    pub fn beta_hat(&self) -> &BetaHat {
        &self.beta_hat
    }

    pub fn coupling(&self) -> &CouplingConfig {
        &self.coupling
    }

    /// Speed bound generated by biomass `u`.
    pub fn obstacle(&self, u: &ScalarField) -> ObstacleField {
        build_obstacle(u, &self.params, &self.cutoff, &self.obstacle_kernel)
    }

    /// Checks the hypotheses on the initial data and returns the starting
    /// state, with `v0` projected onto the admissible set of the solver.
    pub fn check_initial_data(&self, u0: &ScalarField, w0: &ScalarField, v0: &VectorField) -> Result<SimState> {
        let g = &self.grid;
        if u0.grid != *g || w0.grid != *g || v0.grid != *g {
            return Err(Error::InitialData("initial fields live on different grids".into()));
        }
        let u_star = self.params.u_star;
        for (c, &x) in u0.values.iter().enumerate() {
            if !(x.is_finite() && (0.0..=u_star).contains(&x)) {
                return Err(Error::InitialData(format!(
                    "biomass {x} at cell {:?} outside [0, u_star = {u_star}]",
                    g.coords(c)
                )));
            }
        }
        for (c, &x) in w0.values.iter().enumerate() {
            if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
                return Err(Error::InitialData(format!(
                    "nutrient {x} at cell {:?} outside [0, 1]",
                    g.coords(c)
                )));
            }
        }
        let phi = biomass_energy(u0, &self.beta_hat);
        if !phi.is_finite() {
            return Err(Error::InitialData("biomass energy of the initial state is not finite".into()));
        }
        if !v0.is_finite() {
            return Err(Error::InitialData("initial velocity is not finite".into()));
        }
        let averaged = self.obstacle_kernel.apply(g, &u0.values);
        for (c, s) in center_speeds(v0).iter().enumerate() {
            let r = averaged[c];
            let bound = if r <= 0.0 {
                f64::INFINITY
            } else {
                self.params.p0(r)?
            };
            if bound <= 0.0 && *s > 0.0 {
                return Err(Error::InitialData(format!(
                    "initial velocity {s:.3e} at cell {:?} lies in the solid region (averaged biomass {r:.4} >= delta0)",
                    g.coords(c)
                )));
            }
            if bound > 0.0 && *s >= bound {
                return Err(Error::InitialData(format!(
                    "initial speed {s:.3e} at cell {:?} is not below the obstacle {bound:.3e}",
                    g.coords(c)
                )));
            }
        }
        let obs = self.obstacle(u0);
        let (v, _) = self.flow.projector().project_k(
            v0,
            &obs,
            self.coupling.projection_tol,
            self.coupling.projection_max_sweeps,
        )?;
        Ok(SimState {
            t: 0.0,
            u: u0.clone(),
            w: w0.clone(),
            v,
            p: ScalarField::zeros(g),
        })
    }

    fn biomass_cfg(&self) -> BiomassStepConfig {
        BiomassStepConfig {
            dt: self.dt,
            newton_tol: self.coupling.newton_tol,
            newton_max: self.coupling.newton_max,
        }
    }

    fn project(
        &self,
        predictor: &VectorField,
        obs: &ObstacleField,
        warm: &mut WarmStart,
    ) -> Result<(VectorField, FlowStepReport)> {
        self.flow.projector().project_k_warm(
            predictor,
            obs,
            self.coupling.projection_tol,
            self.coupling.projection_max_sweeps,
            warm,
        )
    }

    /// Advances `state` by one time step.
    pub fn picard_step(&self, state: &SimState, step: usize) -> Result<StepOutcome> {
        let dt = self.dt;
        let g = &self.grid;
        let predictor = self.flow.predict_velocity(&state.v, &self.forcing, dt)?;
        let (_, pressure) = self.flow.projector().pressure_project(&predictor, dt)?;
        let bcfg = self.biomass_cfg();

        let mut u_k = state.u.clone();
        let mut w_k = state.w.clone();
        let mut residuals = Vec::new();
        let mut sweeps = 0;
        let mut newton = 0;
        let mut warm = WarmStart::default();
        let (brep, nrep) = loop {
            if residuals.len() >= self.coupling.picard_max {
                return Err(Error::Picard { residuals });
            }
            let obs = self.obstacle(&u_k);
            let (v, frep) = self.project(&predictor, &obs, &mut warm)?;
            sweeps += frep.sweeps;
            let (u_next, w_next, brep, nrep) = match self.coupling.order {
                SplitOrder::FlowNutrientBiomass => {
                    let (w_next, nrep) = self.nutrient.step(&state.w, &u_k, &v, dt)?;
                    let (u_next, brep) = self.biomass.step(&state.u, &w_next, &v, &bcfg)?;
                    (u_next, w_next, brep, nrep)
                }
                SplitOrder::FlowBiomassNutrient => {
                    let (u_next, brep) = self.biomass.step(&state.u, &w_k, &v, &bcfg)?;
                    let (w_next, nrep) = self.nutrient.step(&state.w, &u_next, &v, dt)?;
                    (u_next, w_next, brep, nrep)
                }
            };
            newton += brep.newton_iterations;
            let r = l2_diff(g, &u_next.values, &u_k.values);
            let scale = l2(g, &u_k.values);
            residuals.push(r);
            u_k = u_next;
            w_k = w_next;
            if r <= self.coupling.picard_tol * scale + self.coupling.picard_abs_tol {
                break (brep, nrep);
            }
        };
        // The accepted velocity is projected onto the bound of the accepted biomass.
        let obstacle = self.obstacle(&u_k);
        let (v, frep) = self.project(&predictor, &obstacle, &mut warm)?;
        sweeps += frep.sweeps;
        let state = SimState {
            t: state.t + dt,
            u: u_k,
            w: w_k,
            v,
            p: pressure.clone(),
        };
        let diagnostics = self.diagnostics(&state, step, &obstacle, &residuals, &brep, &nrep, &predictor, newton, sweeps);
        let flow = FlowStep {
            velocity: state.v.clone(),
            pressure,
            predictor,
            report: frep,
        };
        Ok(StepOutcome {
            state,
            diagnostics,
            flow,
            obstacle,
            forcing: self.forcing.clone(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn diagnostics(
        &self,
        s: &SimState,
        step: usize,
        obs: &ObstacleField,
        residuals: &[f64],
        brep: &BiomassStepReport,
        nrep: &NutrientStepReport,
        predictor: &VectorField,
        newton: usize,
        sweeps: usize,
    ) -> StepDiagnostics {
        let g = &self.grid;
        let vol = g.cell_volume();
        StepDiagnostics {
            step,
            t: s.t,
            picard_iters: residuals.len(),
            u_min: s.u.min(),
            u_max: s.u.max(),
            w_min: s.w.min(),
            w_max: s.w.max(),
            kinetic_energy: 0.5 * s.v.norm_sq(),
            phi_u: biomass_energy(&s.u, &self.beta_hat),
            nutrient_l2: l2(g, &s.w.values),
            max_constraint_excess: obs.excess(&s.v).max(0.0),
            max_div: max_abs_divergence(&s.v),
            mass_u: s.u.values.iter().sum::<f64>() * vol,
            mass_w: s.w.values.iter().sum::<f64>() * vol,
            clamp_u: brep.clamp_mass,
            clamp_w: nrep.clamp_mass,
            picard_residuals: residuals.to_vec(),
            u_min_pre: brep.min_pre,
            u_max_pre: brep.max_pre,
            w_min_pre: nrep.min_pre,
            w_max_pre: nrep.max_pre,
            newton_iterations: newton,
            projection_sweeps: sweeps,
            nutrient_grad_sq: nutrient::grad_norm_sq(&s.w),
            viscous_grad_sq: grad_norm_sq(predictor),
        }
    }

    /// Diagnostics of a state that has not been produced by a step (step 0).
    pub fn initial_diagnostics(&self, s: &SimState) -> StepDiagnostics {
        let g = &self.grid;
        let vol = g.cell_volume();
        let obs = self.obstacle(&s.u);
        StepDiagnostics {
            step: 0,
            t: s.t,
            picard_iters: 0,
            u_min: s.u.min(),
            u_max: s.u.max(),
            w_min: s.w.min(),
            w_max: s.w.max(),
            kinetic_energy: 0.5 * s.v.norm_sq(),
            phi_u: biomass_energy(&s.u, &self.beta_hat),
            nutrient_l2: l2(g, &s.w.values),
            max_constraint_excess: obs.excess(&s.v).max(0.0),
            max_div: max_abs_divergence(&s.v),
            mass_u: s.u.values.iter().sum::<f64>() * vol,
            mass_w: s.w.values.iter().sum::<f64>() * vol,
            u_min_pre: s.u.min(),
            u_max_pre: s.u.max(),
            w_min_pre: s.w.min(),
            w_max_pre: s.w.max(),
            ..StepDiagnostics::default()
        }
    }

    /// Runs `steps` Picard steps from `state`, handing every outcome to `observe`.
    pub fn run(
        &self,
        state: SimState,
        steps: usize,
        mut observe: impl FnMut(&StepOutcome) -> Result<()>,
    ) -> Result<SimState> {
        let mut state = state;
        for n in 1..=steps {
            let out = self.picard_step(&state, n)?;
            observe(&out)?;
            state = out.state;
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ops::curl_of_stream;
    use crate::grid::Side;
    use std::f64::consts::PI;

    fn setup(n: usize) -> Simulation {
        let g = Grid::new(2, &[1.0, 1.0], &[n, n], &[Side::XMin]).unwrap();
        let mut f = curl_of_stream(&g, |x| (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2));
        f.zero_boundary();
        Simulation::new(&g, &ModelParams::default(), 2e-3, &CouplingConfig::default(), f).unwrap()
    }

    #[test]
    fn empty_initial_state_accepted() {
        let sim = setup(12);
        let g = *sim.grid();
        let s = sim
            .check_initial_data(&ScalarField::zeros(&g), &ScalarField::constant(&g, 1.0), &VectorField::zeros(&g))
            .unwrap();
        assert_eq!(s.t, 0.0);
    }

    #[test]
    fn velocity_inside_solid_rejected() {
        let sim = setup(16);
        let g = *sim.grid();
        let u = ScalarField::from_fn(&g, |x| if (x[0] - 0.5).abs() < 0.25 && (x[1] - 0.5).abs() < 0.25 { 1.0 } else { 0.0 });
        let mut v = curl_of_stream(&g, |x| 0.01 * (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2));
        v.zero_boundary();
        let w = ScalarField::constant(&g, 1.0);
        assert!(matches!(sim.check_initial_data(&u, &w, &v), Err(Error::InitialData(_))));
        // Full density is admissible on its own.
        assert!(sim.check_initial_data(&u, &w, &VectorField::zeros(&g)).is_ok());
        let bad = ScalarField::constant(&g, 1.5);
        assert!(sim.check_initial_data(&bad, &w, &VectorField::zeros(&g)).is_err());
    }

    #[test]
    fn decoupled_data_converges_at_once() {
        let sim = setup(12);
        let g = *sim.grid();
        let s = sim
            .check_initial_data(&ScalarField::zeros(&g), &ScalarField::constant(&g, 1.0), &VectorField::zeros(&g))
            .unwrap();
        let out = sim.picard_step(&s, 1).unwrap();
        assert!(out.diagnostics.picard_iters <= 2);
        assert!(out.state.v.max_abs() > 0.0);
    }

    #[test]
    fn coupled_steps_keep_invariants() {
        let sim = setup(16);
        let g = *sim.grid();
        let u0 = ScalarField::from_fn(&g, |x| 0.9 * (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / 0.02).exp());
        let s = sim
            .check_initial_data(&u0, &ScalarField::constant(&g, 0.8), &VectorField::zeros(&g))
            .unwrap();
        let end = sim
            .run(s, 4, |o| {
                let d = &o.diagnostics;
                assert!(d.u_min_pre >= 0.0 && d.u_max_pre <= 1.0);
                assert!(d.w_min_pre >= -1e-12 && d.w_max_pre <= 1.0 + 1e-12);
                assert!(d.max_constraint_excess <= 1e-12);
                assert!(d.max_div <= 1e-8 * (o.state.v.max_abs() / g.min_h() + 1.0));
                assert!(d.picard_iters >= 2);
                Ok(())
            })
            .unwrap();
        assert!((end.t - 4.0 * sim.dt()).abs() < 1e-15);
    }
}
