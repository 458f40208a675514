//! Semi-implicit nutrient step: implicit diffusion, explicit upwind
//! convection, linearized Monod consumption.

use crate::constitutive::ModelParams;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::linalg::pcg;
use crate::mollify::MollifierKernel;
use crate::transport::{centered_divergence, outflow_cfl, upwind_divergence};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NutrientStepReport {
    pub cg_iterations: usize,
    pub min_pre: f64,
    pub max_pre: f64,
    /// `sum |w_pre - w_clamped| h^n`
    pub clamp_mass: f64,
}

/// Face diffusivities and neighbor structure for one step.
struct Stencil {
    /// Per cell: `(neighbor, d_face / h^2)`.
    links: Vec<Vec<(usize, f64)>>,
}

impl Stencil {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (c, links) in self.links.iter().enumerate() {
            out[c] = links.iter().map(|&(n, k)| k * (x[c] - x[n])).sum();
        }
    }
}

#[derive(Clone, Debug)]
pub struct NutrientSolver {
    grid: Grid,
    params: ModelParams,
    kernel: MollifierKernel,
}

impl NutrientSolver {
    pub fn new(grid: &Grid, params: &ModelParams) -> Result<NutrientSolver> {
        params.validate()?;
        Ok(NutrientSolver {
            grid: *grid,
            params: params.clone(),
            kernel: MollifierKernel::new(params.mu, grid)?,
        })
    }

    pub fn with_kernel(grid: &Grid, params: &ModelParams, kernel: MollifierKernel) -> NutrientSolver {
        NutrientSolver {
            grid: *grid,
            params: params.clone(),
            kernel,
        }
    }

    /// Averaged biomass `rho * u` that drives diffusivity and consumption.
    pub fn averaged_biomass(&self, u: &ScalarField) -> Vec<f64> {
        self.kernel.apply(&self.grid, &u.values)
    }

    /// Harmonic mean of `d(rho * u)` on every interior face, per cell.
    fn stencil(&self, ubar: &[f64]) -> Stencil {
        let g = &self.grid;
        let h = g.h();
        let d: Vec<f64> = ubar.iter().map(|&r| self.params.d(r)).collect();
        let links = (0..g.num_cells())
            .map(|c| {
                let mut l = Vec::with_capacity(2 * g.dim());
                for a in 0..g.dim() {
                    for forward in [false, true] {
                        if let Some(n) = g.neighbor(c, a, forward) {
                            let face = 2.0 * d[c] * d[n] / (d[c] + d[n]);
                            l.push((n, face / (h[a] * h[a])));
                        }
                    }
                }
                l
            })
            .collect();
        Stencil { links }
    }

    /// Diffusivity on every interior face.
    pub fn face_diffusivities(&self, u: &ScalarField) -> Vec<f64> {
        let g = &self.grid;
        let d: Vec<f64> = self.averaged_biomass(u).iter().map(|&r| self.params.d(r)).collect();
        let mut out = Vec::new();
        for c in 0..g.num_cells() {
            for a in 0..g.dim() {
                if let Some(n) = g.neighbor(c, a, true) {
                    out.push(2.0 * d[c] * d[n] / (d[c] + d[n]));
                }
            }
        }
        out
    }

    fn check_cfl(&self, v: &VectorField, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Param(format!("time step must be positive, got {dt}")));
        }
        let cfl = outflow_cfl(v, dt);
        if cfl > 1.0 {
            return Err(Error::Cfl {
                what: "nutrient convection",
                number: cfl,
            });
        }
        Ok(())
    }

    /// Solves `(I + dt D + dt diag(react)) x = rhs`.
    fn solve(&self, st: &Stencil, react: &[f64], rhs: &[f64], dt: f64) -> Result<(Vec<f64>, usize)> {
        let diag: Vec<f64> = st
            .links
            .iter()
            .zip(react)
            .map(|(l, r)| 1.0 + dt * (l.iter().map(|&(_, k)| k).sum::<f64>() + r))
            .collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            st.apply(x, out);
            for i in 0..out.len() {
                out[i] = x[i] + dt * (out[i] + react[i] * x[i]);
            }
        };
        let mut x = rhs.to_vec();
        let stats = pcg(apply, &diag, rhs, &mut x, 1e-14, 10 * rhs.len() + 100)?;
        Ok((x, stats.iterations))
    }

    /// Advances `w` by one step given biomass `u` and velocity `v`.
    pub fn step(
        &self,
        w: &ScalarField,
        u: &ScalarField,
        v: &VectorField,
        dt: f64,
    ) -> Result<(ScalarField, NutrientStepReport)> {
        self.check_cfl(v, dt)?;
        let ubar = self.averaged_biomass(u);
        let st = self.stencil(&ubar);
        let conv = upwind_divergence(&w.values, v);
        let rhs: Vec<f64> = w.values.iter().zip(&conv).map(|(x, c)| x - dt * c).collect();
        let p = &self.params;
        let react: Vec<f64> = ubar
            .iter()
            .zip(&w.values)
            .map(|(&ub, &wo)| p.k1 * ub.max(0.0) / (p.k2 + wo.max(0.0)))
            .collect();
        let (pre, iterations) = self.solve(&st, &react, &rhs, dt)?;
        let vol = self.grid.cell_volume();
        let mut report = NutrientStepReport {
            cg_iterations: iterations,
            min_pre: pre.iter().cloned().fold(f64::INFINITY, f64::min),
            max_pre: pre.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            clamp_mass: 0.0,
        };
        let values = pre
            .iter()
            .map(|&x| {
                let c = x.clamp(0.0, 1.0);
                report.clamp_mass += (x - c).abs() * vol;
                c
            })
            .collect();
        Ok((
            ScalarField {
                grid: self.grid,
                values,
            },
            report,
        ))
    }

    /// The step with consumption frozen at `f(w_src) * (rho * u)` as an
    /// explicit source. Used to check the contraction of the fixed-point map
    /// behind the existence argument.
    pub fn step_with_source(
        &self,
        w: &ScalarField,
        w_src: &ScalarField,
        u: &ScalarField,
        v: &VectorField,
        dt: f64,
    ) -> Result<ScalarField> {
        self.check_cfl(v, dt)?;
        let ubar = self.averaged_biomass(u);
        let st = self.stencil(&ubar);
        let conv = upwind_divergence(&w.values, v);
        let rhs: Vec<f64> = (0..w.values.len())
            .map(|i| w.values[i] - dt * conv[i] - dt * self.params.f(w_src.values[i]) * ubar[i])
            .collect();
        let zero = vec![0.0; rhs.len()];
        let (values, _) = self.solve(&st, &zero, &rhs, dt)?;
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }
}

/// `sum_faces ((w_hi - w_lo) / h)^2 h^n` over interior faces.
pub fn grad_norm_sq(w: &ScalarField) -> f64 {
    let g = &w.grid;
    let h = g.h();
    let mut s = 0.0;
    for c in 0..g.num_cells() {
        for a in 0..g.dim() {
            if let Some(n) = g.neighbor(c, a, true) {
                let d = (w.values[n] - w.values[c]) / h[a];
                s += d * d;
            }
        }
    }
    s * g.cell_volume()
}

pub fn l2_norm_sq(w: &ScalarField) -> f64 {
    w.values.iter().map(|x| x * x).sum::<f64>() * w.grid.cell_volume()
}

/// Running check of `|w(t)|^2 + 2 c_d sum dt |grad w|^2 <= exp(2 u* L(f) t) |w0|^2`.
#[derive(Clone, Debug)]
pub struct NutrientEnergy {
    growth: f64,
    c_d: f64,
    initial: f64,
    t: f64,
    dissipated: f64,
    worst: f64,
}

impl NutrientEnergy {
    pub fn new(w0: &ScalarField, params: &ModelParams) -> NutrientEnergy {
        NutrientEnergy {
            growth: 2.0 * params.u_star * params.lipschitz_f(),
            c_d: params.c_d,
            initial: l2_norm_sq(w0),
            t: 0.0,
            dissipated: 0.0,
            worst: 0.0,
        }
    }

    /// Records the state after a step of length `dt`; returns the current ratio.
    pub fn push(&mut self, w: &ScalarField, dt: f64) -> f64 {
        self.t += dt;
        self.dissipated += 2.0 * self.c_d * dt * grad_norm_sq(w);
        let lhs = l2_norm_sq(w) + self.dissipated;
        let rhs = (self.growth * self.t).exp() * self.initial;
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        self.worst = self.worst.max(ratio);
        ratio
    }

    pub fn max_ratio(&self) -> f64 {
        self.worst
    }
}

/// `sum (div_h(w v))_i w_i h^n` with the centered flux.
pub fn skew_convection_check(w: &ScalarField, v: &VectorField) -> f64 {
    centered_divergence(&w.values, v)
        .iter()
        .zip(&w.values)
        .map(|(d, x)| d * x)
        .sum::<f64>()
        * w.grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ops::curl_of_stream;
    use crate::grid::Side;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(2, &[1.0, 1.0], &[n, n], &[Side::XMin]).unwrap()
    }

    fn swirl(g: &Grid, amp: f64) -> VectorField {
        let mut v = curl_of_stream(g, |x| amp * (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2));
        v.zero_boundary();
        v
    }

    #[test]
    fn full_nutrient_without_biomass_is_steady() {
        let g = grid(12);
        let s = NutrientSolver::new(&g, &ModelParams::default()).unwrap();
        let w = ScalarField::constant(&g, 1.0);
        let (out, rep) = s.step(&w, &ScalarField::zeros(&g), &swirl(&g, 1.0), 1e-3).unwrap();
        assert!(out.values.iter().all(|&x| (x - 1.0).abs() < 1e-13));
        assert_eq!(rep.clamp_mass, 0.0);
    }

    #[test]
    fn bounds_and_energy_on_random_data() {
        let g = grid(16);
        let params = ModelParams::default();
        let s = NutrientSolver::new(&g, &params).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut w = ScalarField::from_fn(&g, |_| rng.gen_range(0.0..1.0));
        let u = ScalarField::from_fn(&g, |_| rng.gen_range(0.0..params.u_star));
        let v = swirl(&g, 2.0);
        let mut energy = NutrientEnergy::new(&w, &params);
        for _ in 0..20 {
            let (next, rep) = s.step(&w, &u, &v, 2e-3).unwrap();
            assert!(rep.min_pre >= -1e-12 && rep.max_pre <= 1.0 + 1e-12);
            assert!(energy.push(&next, 2e-3) <= 1.0);
            w = next;
        }
    }

    #[test]
    fn mass_balance_without_consumption() {
        let g = grid(16);
        let params = ModelParams {
            k1: 0.0,
            ..ModelParams::default()
        };
        // Zero consumption is outside the validated parameter range.
        let s = NutrientSolver::with_kernel(&g, &params, MollifierKernel::new(params.mu, &g).unwrap());
        let w = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin().abs() * x[1]);
        let u = ScalarField::from_fn(&g, |x| x[0] * 0.9);
        let (out, _) = s.step(&w, &u, &swirl(&g, 3.0), 1e-3).unwrap();
        let m0: f64 = w.values.iter().sum();
        let m1: f64 = out.values.iter().sum();
        assert!((m0 - m1).abs() < 1e-10 * m0);
    }

    #[test]
    fn cfl_is_an_error() {
        let g = grid(8);
        let s = NutrientSolver::new(&g, &ModelParams::default()).unwrap();
        let w = ScalarField::constant(&g, 0.5);
        let r = s.step(&w, &ScalarField::zeros(&g), &swirl(&g, 100.0), 0.1);
        assert!(matches!(r, Err(Error::Cfl { .. })));
    }

    #[test]
    fn face_diffusivities_in_range() {
        let g = grid(10);
        let params = ModelParams::default();
        let s = NutrientSolver::new(&g, &params).unwrap();
        let u = ScalarField::from_fn(&g, |x| params.u_star * x[0]);
        for d in s.face_diffusivities(&u) {
            assert!(d >= params.c_d - 1e-15 && d <= params.c_d_prime + 1e-15);
        }
    }

    #[test]
    fn skew_check_zero_for_solenoidal() {
        let g = grid(14);
        let w = ScalarField::from_fn(&g, |x| (5.0 * x[0]).cos() + x[1]);
        assert_eq!(skew_convection_check(&w, &VectorField::zeros(&g)), 0.0);
        let v = swirl(&g, 1.0);
        let scale = l2_norm_sq(&w) * v.max_abs() / g.min_h();
        assert!(skew_convection_check(&w, &v).abs() <= 1e-12 * scale);
    }
}
