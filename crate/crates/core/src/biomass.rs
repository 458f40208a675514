//! Implicit biomass step: degenerate diffusion, nonlocal convection, growth.
//!
//! Each step solves the backward-Euler system
//!
//! ```text
//! (u - u_old)/dt - Lap_h U + div_h(z v) + (b - f(rho * w)) u = 0,   U in beta(u),
//! z = rho * (gamma u)
//! ```
//!
//! where `beta` is the diffusion graph: `beta_reg` for `u > 0` and the whole
//! ray `(-inf, 0]` at `u = 0`. The pair `(u, U)` is parametrized by one
//! unknown `y` per cell: `u = max(y, 0)`, `U = beta_reg(y)` for `y > 0` and
//! `U = y` otherwise. Cells with `y <= 0` form the active set where the
//! biomass is exactly zero. The system is solved by semismooth Newton with
//! GMRES on the exact Jacobian, preconditioned by a banded LU of a local
//! approximation.

use crate::constitutive::{BetaHat, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{BoundaryTag, Grid, ScalarField, Side, VectorField};
use crate::linalg::{gmres, BandLu};
use crate::mollify::{build_cutoff, CutoffField, MollifierKernel};
use crate::transport::{upwind_columns, upwind_divergence};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiomassStepConfig {
    pub dt: f64,
    /// Bound on `dt * max |residual|`, in density units.
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl Default for BiomassStepConfig {
    fn default() -> Self {
        BiomassStepConfig {
            dt: 1e-3,
            newton_tol: 1e-11,
            newton_max: 60,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BiomassStepReport {
    pub newton_iterations: usize,
    pub krylov_iterations: usize,
    /// Final `dt * max |residual|`.
    pub residual: f64,
    /// Extremes of the Newton solution before clamping.
    pub min_pre: f64,
    pub max_pre: f64,
    /// `sum |u_pre - u_clamped| h^n`
    pub clamp_mass: f64,
    pub active_cells: usize,
}

/// One face of a cell as seen by the diffusion operator.
#[derive(Clone, Copy, Debug)]
enum Link {
    Cell(usize, f64),
    /// Dirichlet face on the inflow boundary, with coefficient `2 / h^2`.
    Pinned(f64),
}

#[derive(Clone, Debug)]
pub struct BiomassSolver {
    grid: Grid,
    params: ModelParams,
    kernel: MollifierKernel,
    cutoff: CutoffField,
    links: Vec<Vec<Link>>,
}

impl BiomassSolver {
    /// Solver whose convection kernel and cutoff both use the regularization radius `mu`.
    pub fn new(grid: &Grid, params: &ModelParams) -> Result<BiomassSolver> {
        params.validate()?;
        let kernel = MollifierKernel::new(params.mu, grid)?;
        let cutoff = build_cutoff(grid, params.mu)?;
        Ok(BiomassSolver::with_parts(grid, params, kernel, cutoff))
    }

    pub fn with_parts(grid: &Grid, params: &ModelParams, kernel: MollifierKernel, cutoff: CutoffField) -> BiomassSolver {
        let h = grid.h();
        let links = (0..grid.num_cells())
            .map(|c| {
                let mut l = Vec::with_capacity(2 * grid.dim());
                for a in 0..grid.dim() {
                    let inv = 1.0 / (h[a] * h[a]);
                    for forward in [false, true] {
                        match grid.neighbor(c, a, forward) {
                            Some(n) => l.push(Link::Cell(n, inv)),
                            None => {
                                if grid.tag(Side::of(a, forward)) == BoundaryTag::Gamma0 {
                                    l.push(Link::Pinned(2.0 * inv));
                                }
                            }
                        }
                    }
                }
                l
            })
            .collect();
        BiomassSolver {
            grid: *grid,
            params: params.clone(),
            kernel,
            cutoff,
            links,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kernel(&self) -> &MollifierKernel {
        &self.kernel
    }

    pub fn cutoff(&self) -> &CutoffField {
        &self.cutoff
    }

    /// `-Lap_h U` with `U = 0` on inflow faces and no flux through walls.
    pub fn diffusion(&self, ut: &[f64]) -> Vec<f64> {
        self.links
            .iter()
            .enumerate()
            .map(|(c, links)| {
                links
                    .iter()
                    .map(|l| match *l {
                        Link::Cell(n, k) => k * (ut[c] - ut[n]),
                        Link::Pinned(k) => k * ut[c],
                    })
                    .sum()
            })
            .collect()
    }

    /// `rho * (gamma u)`, the convected density.
    pub fn convected(&self, u: &[f64]) -> Vec<f64> {
        self.kernel.apply(&self.grid, &self.cutoff.apply(u))
    }

    /// Net per-capita growth `f(rho * clamp(w)) - b` in every cell.
    pub fn growth_rate(&self, w: &ScalarField) -> Vec<f64> {
        let clamped: Vec<f64> = w.values.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        self.kernel
            .apply(&self.grid, &clamped)
            .iter()
            .map(|&s| self.params.f(s) - self.params.b)
            .collect()
    }

    /// Point on the diffusion graph for parameter `y`, with derivatives.
    fn graph(&self, y: f64) -> (f64, f64, f64, f64) {
        if y > 0.0 {
            (y, self.params.beta_reg(y), 1.0, self.params.beta_reg_prime(y))
        } else {
            (0.0, y, 0.0, 1.0)
        }
    }

    fn residual(&self, y: &[f64], u_old: &[f64], growth: &[f64], v: &VectorField, dt: f64) -> Vec<f64> {
        let (u, ut): (Vec<f64>, Vec<f64>) = y
            .iter()
            .map(|&s| {
                let (a, b, _, _) = self.graph(s);
                (a, b)
            })
            .unzip();
        let diff = self.diffusion(&ut);
        let conv = upwind_divergence(&self.convected(&u), v);
        (0..u.len())
            .map(|i| (u[i] - u_old[i]) / dt + diff[i] + conv[i] - growth[i] * u[i])
            .collect()
    }

    fn preconditioner(&self, du: &[f64], dut: &[f64], growth: &[f64], v: &VectorField, dt: f64) -> Result<BandLu> {
        let g = &self.grid;
        let n = g.num_cells();
        let band = g.stride(g.dim() - 1);
        let mut m = BandLu::zeros(n, band, band);
        for c in 0..n {
            m.add(c, c, (1.0 / dt - growth[c]) * du[c]);
            for l in &self.links[c] {
                match *l {
                    Link::Cell(nb, k) => {
                        m.add(c, c, k * dut[c]);
                        m.add(nb, c, -k * dut[c]);
                    }
                    Link::Pinned(k) => m.add(c, c, k * dut[c]),
                }
            }
            let local = self.cutoff.values[c] * du[c];
            if local != 0.0 {
                for (row, k) in upwind_columns(v, c) {
                    m.add(row, c, k * local);
                }
            }
        }
        m.factor()?;
        Ok(m)
    }

    /// Advances `u` by one step with nutrient `w` and velocity `v`.
    pub fn step(
        &self,
        u: &ScalarField,
        w: &ScalarField,
        v: &VectorField,
        cfg: &BiomassStepConfig,
    ) -> Result<(ScalarField, BiomassStepReport)> {
        let dt = cfg.dt;
        if !(dt > 0.0) {
            return Err(Error::Param(format!("time step must be positive, got {dt}")));
        }
        if !(cfg.newton_tol > 0.0) {
            return Err(Error::Param("newton tolerance must be positive".into()));
        }
        let n = self.grid.num_cells();
        let growth = self.growth_rate(w);
        let u_old = &u.values;
        let mut y: Vec<f64> = u_old.iter().map(|&x| x.max(0.0)).collect();
        let mut f = self.residual(&y, u_old, &growth, v, dt);
        let mut res = dt * max_abs(&f);
        let mut report = BiomassStepReport::default();
        let mut iterations = 0;
        let mut lu: Option<BandLu> = None;
        let mut last_krylov = 0;
        while res > cfg.newton_tol {
            if iterations >= cfg.newton_max {
                return Err(Error::Newton {
                    iterations,
                    residual: res,
                });
            }
            iterations += 1;
            let (du, dut): (Vec<f64>, Vec<f64>) = y
                .iter()
                .map(|&s| {
                    let (_, _, a, b) = self.graph(s);
                    (a, b)
                })
                .unzip();
            // The factorization is reused while GMRES converges quickly with it.
            if lu.is_none() || last_krylov > 12 {
                lu = Some(self.preconditioner(&du, &dut, &growth, v, dt)?);
            }
            let lu = lu.as_ref().expect("factored above");
            let apply = |x: &[f64], out: &mut [f64]| {
                let xi: Vec<f64> = x.iter().zip(&du).map(|(a, b)| a * b).collect();
                let eta: Vec<f64> = x.iter().zip(&dut).map(|(a, b)| a * b).collect();
                let diff = self.diffusion(&eta);
                let conv = upwind_divergence(&self.convected(&xi), v);
                for i in 0..out.len() {
                    out[i] = xi[i] / dt + diff[i] + conv[i] - growth[i] * xi[i];
                }
            };
            let precond = |z: &mut [f64]| lu.solve_in_place(z);
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let mut delta = vec![0.0; n];
            let stats = gmres(apply, precond, &rhs, &mut delta, 1e-12, 50, 500)?;
            report.krylov_iterations += stats.iterations;
            last_krylov = stats.iterations;
            // Backtracking on the residual norm; semismooth steps across the
            // kink at zero are usually accepted in full.
            let norm0 = l2(&f);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
                let ft = self.residual(&trial, u_old, &growth, v, dt);
                if l2(&ft) <= (1.0 - 1e-4 * t) * norm0 || t < 1e-6 {
                    y = trial;
                    f = ft;
                    break;
                }
                t *= 0.5;
            }
            res = dt * max_abs(&f);
        }
        report.newton_iterations = iterations;
        report.residual = res;
        let pre: Vec<f64> = y.iter().map(|&s| s.max(0.0)).collect();
        report.active_cells = y.iter().filter(|&&s| s <= 0.0).count();
        report.min_pre = pre.iter().cloned().fold(f64::INFINITY, f64::min);
        report.max_pre = pre.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let u_star = self.params.u_star;
        let vol = self.grid.cell_volume();
        let mut clamp_mass = 0.0;
        let values = pre
            .iter()
            .map(|&x| {
                let c = x.clamp(0.0, u_star);
                clamp_mass += (x - c).abs() * vol;
                c
            })
            .collect();
        report.clamp_mass = clamp_mass;
        Ok((
            ScalarField {
                grid: self.grid,
                values,
            },
            report,
        ))
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Biomass energy `sum beta_hat(u_i) h^n`.
pub fn biomass_energy(u: &ScalarField, beta_hat: &BetaHat) -> f64 {
    u.values.iter().map(|&x| beta_hat.eval(x)).sum::<f64>() * u.grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ops::curl_of_stream;
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

    fn blob(g: &Grid) -> ScalarField {
        ScalarField::from_fn(g, |x| {
            let r2 = (x[0] - 0.55).powi(2) + (x[1] - 0.5).powi(2);
            0.8 * (-r2 / 0.02).exp()
        })
    }

    #[test]
    fn zero_stays_zero() {
        let g = grid(12);
        let s = BiomassSolver::new(&g, &ModelParams::default()).unwrap();
        let (u, rep) = s
            .step(&ScalarField::zeros(&g), &ScalarField::constant(&g, 1.0), &swirl(&g, 1.0), &BiomassStepConfig::default())
            .unwrap();
        assert!(u.values.iter().all(|&x| x == 0.0));
        assert_eq!(rep.newton_iterations, 0);
    }

    #[test]
    fn rejects_bad_dt() {
        let g = grid(6);
        let s = BiomassSolver::new(&g, &ModelParams::default()).unwrap();
        let cfg = BiomassStepConfig {
            dt: 0.0,
            ..Default::default()
        };
        let z = ScalarField::zeros(&g);
        assert!(s.step(&z, &z, &VectorField::zeros(&g), &cfg).is_err());
    }

    #[test]
    fn convected_blob_stays_in_bounds() {
        let g = grid(24);
        let params = ModelParams::default();
        let s = BiomassSolver::new(&g, &params).unwrap();
        let v = swirl(&g, 2.0);
        let w = ScalarField::constant(&g, 0.7);
        let cfg = BiomassStepConfig::default();
        let mut u = blob(&g);
        for _ in 0..10 {
            let (next, rep) = s.step(&u, &w, &v, &cfg).unwrap();
            assert!(rep.min_pre >= 0.0);
            assert!(rep.max_pre <= params.u_star);
            assert!(rep.residual <= cfg.newton_tol);
            u = next;
        }
        assert!(u.max() > 0.5);
    }

    #[test]
    fn conserves_mass_without_reaction_or_inflow() {
        let g = Grid::without_gamma0(2, &[1.0, 1.0], &[20, 20]).unwrap();
        let params = ModelParams {
            b: 0.0,
            k1: 0.0,
            ..ModelParams::default()
        };
        let kernel = MollifierKernel::new(params.mu, &g).unwrap();
        let cutoff = CutoffField {
            grid: g,
            mu: params.mu,
            values: vec![1.0; g.num_cells()],
        };
        let s = BiomassSolver::with_parts(&g, &params, kernel, cutoff);
        let v = swirl(&g, 3.0);
        let mut u = blob(&g);
        let m0: f64 = u.values.iter().sum();
        let cfg = BiomassStepConfig {
            newton_tol: 1e-14,
            ..Default::default()
        };
        for _ in 0..5 {
            u = s.step(&u, &ScalarField::zeros(&g), &v, &cfg).unwrap().0;
        }
        let m1: f64 = u.values.iter().sum();
        assert!((m1 - m0).abs() < 1e-10 * m0, "{m0} {m1}");
    }

    #[test]
    fn random_data_bounds() {
        let g = grid(16);
        let params = ModelParams::default();
        let s = BiomassSolver::new(&g, &params).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let u = ScalarField::from_fn(&g, |_| rng.gen_range(0.0..params.u_star * 0.95));
        let w = ScalarField::from_fn(&g, |_| rng.gen_range(0.0..1.0));
        let v = swirl(&g, 1.5);
        let (_, rep) = s.step(&u, &w, &v, &BiomassStepConfig::default()).unwrap();
        assert!(rep.min_pre >= 0.0 && rep.max_pre <= params.u_star + 1e-10);
    }

    #[test]
    fn energy_of_constants() {
        let g = grid(8);
        let params = ModelParams::default();
        let bh = BetaHat::new(&params);
        assert_eq!(biomass_energy(&ScalarField::zeros(&g), &bh), 0.0);
        let e = biomass_energy(&ScalarField::constant(&g, 0.3), &bh);
        assert!((e - bh.eval(0.3) * g.domain_volume()).abs() < 1e-14);
    }
}
