//! Browser bindings: constitutive curves and a small interactive coupled run.
//!
//! Errors cross the boundary as strings so the same API runs natively in tests.

use biofilm_core::constitutive::ModelParams;
use biofilm_core::coupling::{SimState, Simulation, StepDiagnostics};
use biofilm_core::grid::center_speeds;
use biofilm_core::init::{FieldPreset, ForcingConfig};
use biofilm_core::io::SimConfig;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Samples the speed bound and the biomass diffusion potential on
/// `samples` evenly spaced densities in `[0, u*)` for regularization `mu`.
/// Returns `[r_0, bound_0, potential_0, r_1, ...]`.
#[wasm_bindgen]
pub fn constitutive_curves(mu: f64, samples: usize) -> Result<Vec<f64>, String> {
    let params = ModelParams {
        mu,
        ..ModelParams::default()
    };
    params.validate().map_err(err)?;
    if samples < 2 {
        return Err("at least two samples are needed".into());
    }
    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let r = params.u_star * i as f64 / samples as f64;
        out.extend([r, params.p_mu_clamped(r), params.beta_reg(r)]);
    }
    Ok(out)
}

/// A coupled run on the unit square with an inflow side at `x = 0`.
#[wasm_bindgen]
pub struct Demo {
    sim: Simulation,
    state: SimState,
    steps: usize,
    last: StepDiagnostics,
}

#[wasm_bindgen]
impl Demo {
    /// `cells` per side, a random smooth initial biomass from `seed`, and a
    /// vortex body force of peak stream function `forcing`.
    #[wasm_bindgen(constructor)]
    pub fn new(cells: usize, seed: u32, forcing: f64) -> Result<Demo, String> {
        if !(4..=128).contains(&cells) {
            return Err(format!("cells must lie in 4..=128, got {cells}"));
        }
        let mut cfg = SimConfig::default();
        cfg.grid.cells = vec![cells, cells];
        cfg.time.dt = 1e-3;
        cfg.initial.seed = seed.into();
        cfg.initial.u = FieldPreset::RandomSmooth {
            low: 0.0,
            high: 0.7,
            modes: 3,
        };
        cfg.forcing = ForcingConfig::Vortex { amplitude: forcing };
        let (sim, state) = cfg.prepare().map_err(err)?;
        let last = sim.initial_diagnostics(&state);
        Ok(Demo {
            sim,
            state,
            steps: 0,
            last,
        })
    }

    /// Advances `count` steps.
    pub fn step(&mut self, count: usize) -> Result<(), String> {
        for _ in 0..count {
            self.steps += 1;
            let out = self.sim.picard_step(&self.state, self.steps).map_err(err)?;
            self.state = out.state;
            self.last = out.diagnostics;
        }
        Ok(())
    }

    /// Adds a Gaussian bump of biomass of peak `amount` at `(x, y)`, capped
    /// at the maximal density.
    pub fn add_biomass(&mut self, x: f64, y: f64, radius: f64, amount: f64) -> Result<(), String> {
        if !(radius > 0.0 && amount.is_finite()) {
            return Err("radius must be positive and amount finite".into());
        }
        let g = *self.sim.grid();
        let cap = self.sim.params().u_star * (1.0 - 1e-6);
        for (c, u) in self.state.u.values.iter_mut().enumerate() {
            let p = g.center(c);
            let d2 = (p[0] - x).powi(2) + (p[1] - y).powi(2);
            *u = (*u + amount * (-d2 / (radius * radius)).exp()).clamp(0.0, cap);
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.sim.grid().cells()[0]
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Biomass per cell, `x` fastest.
    pub fn biomass(&self) -> Vec<f64> {
        self.state.u.values.clone()
    }

    pub fn nutrient(&self) -> Vec<f64> {
        self.state.w.values.clone()
    }

    /// Cell-center speeds.
    pub fn speed(&self) -> Vec<f64> {
        center_speeds(&self.state.v)
    }

    /// Current per-cell speed bound.
    pub fn obstacle(&self) -> Vec<f64> {
        self.sim.obstacle(&self.state.u).values
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.last.kinetic_energy
    }

    pub fn biomass_mass(&self) -> f64 {
        self.last.mass_u
    }

    pub fn picard_iterations(&self) -> usize {
        self.last.picard_iters
    }

    pub fn constraint_excess(&self) -> f64 {
        self.last.max_constraint_excess
    }
}
