//! Discrete mollifier, inflow cutoff and zero-extended convolutions.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Sampled mollifier on a stencil of cell offsets.
///
/// `weights` are densities: the discrete integral `sum(weights) * h^n` is 1.
#[derive(Clone, Debug)]
pub struct MollifierKernel {
    pub radius: f64,
    pub offsets: Vec<[isize; 3]>,
    pub weights: Vec<f64>,
    cell_volume: f64,
}

impl MollifierKernel {
    /// Builds the normalized bump `exp(-1 / (1 - |x|^2 / r^2))` sampled at cell
    /// offsets. Radii below the coarsest spacing give the identity kernel.
    pub fn new(radius: f64, grid: &Grid) -> Result<MollifierKernel> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Param(format!("mollifier radius must be positive, got {radius}")));
        }
        let h = grid.h();
        let vol = grid.cell_volume();
        let dim = grid.dim();
        if radius < grid.max_h() {
            return Ok(MollifierKernel::identity(radius, vol));
        }
        let mut reach = [0isize; 3];
        for a in 0..dim {
            reach[a] = (radius / h[a]).floor() as isize;
        }
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for k in -reach[2]..=reach[2] {
            for j in -reach[1]..=reach[1] {
                for i in -reach[0]..=reach[0] {
                    let o = [i, j, k];
                    let mut r2 = 0.0;
                    for a in 0..dim {
                        let x = o[a] as f64 * h[a];
                        r2 += x * x;
                    }
                    let s = r2 / (radius * radius);
                    if s < 1.0 {
                        offsets.push(o);
                        weights.push((-1.0 / (1.0 - s)).exp());
                    }
                }
            }
        }
        let total: f64 = weights.iter().sum::<f64>() * vol;
        for w in weights.iter_mut() {
            *w /= total;
        }
        Ok(MollifierKernel {
            radius,
            offsets,
            weights,
            cell_volume: vol,
        })
    }

    fn identity(radius: f64, vol: f64) -> MollifierKernel {
        MollifierKernel {
            radius,
            offsets: vec![[0, 0, 0]],
            weights: vec![1.0 / vol],
            cell_volume: vol,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.offsets.len() == 1
    }

    /// Discrete integral of the kernel (1 up to rounding).
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.cell_volume
    }

    /// Largest offset along any axis, in cells.
    pub fn reach(&self) -> usize {
        self.offsets
            .iter()
            .flat_map(|o| o.iter())
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Convolves `values` (cell ordered on `grid`) with the kernel, treating
    /// everything outside the box as zero.
    pub fn apply(&self, grid: &Grid, values: &[f64]) -> Vec<f64> {
        let n = grid.cells();
        let vol = self.cell_volume;
        let reach: Vec<usize> = (0..3)
            .map(|a| self.offsets.iter().map(|o| o[a].unsigned_abs()).max().unwrap_or(0))
            .collect();
        let linear: Vec<isize> = self
            .offsets
            .iter()
            .map(|o| o[0] + n[0] as isize * (o[1] + n[1] as isize * o[2]))
            .collect();
        let cell = |idx: usize| {
            let c = grid.coords(idx);
            if (0..3).all(|a| c[a] >= reach[a] && c[a] + reach[a] < n[a]) {
                let acc: f64 = linear
                    .iter()
                    .zip(&self.weights)
                    .map(|(&o, w)| w * values[(idx as isize + o) as usize])
                    .sum();
                return acc * vol;
            }
            let mut acc = 0.0;
            for (o, w) in self.offsets.iter().zip(&self.weights) {
                let i = c[0] as isize + o[0];
                let j = c[1] as isize + o[1];
                let k = c[2] as isize + o[2];
                if i < 0
                    || j < 0
                    || k < 0
                    || i >= n[0] as isize
                    || j >= n[1] as isize
                    || k >= n[2] as isize
                {
                    continue;
                }
                acc += w * values[grid.idx(i as usize, j as usize, k as usize)];
            }
            acc * vol
        };
        crate::par::map_indices(grid.num_cells(), cell)
    }
}

/// Zero-extended convolution of a scalar field with a kernel.
pub fn mollify(field: &ScalarField, kernel: &MollifierKernel) -> ScalarField {
    ScalarField {
        grid: field.grid,
        values: kernel.apply(&field.grid, &field.values),
    }
}

/// Smooth cutoff vanishing near the inflow boundary.
#[derive(Clone, Debug)]
pub struct CutoffField {
    pub grid: Grid,
    pub mu: f64,
    pub values: Vec<f64>,
}

/// `0` within `mu/2` of the inflow boundary, `1` beyond `mu`, C1 smoothstep between.
pub fn cutoff_profile(dist: f64, mu: f64) -> f64 {
    let half = 0.5 * mu;
    if dist <= half {
        0.0
    } else if dist >= mu {
        1.0
    } else {
        let t = (dist - half) / half;
        t * t * (3.0 - 2.0 * t)
    }
}

pub fn build_cutoff(grid: &Grid, mu: f64) -> Result<CutoffField> {
    if !(mu > 0.0) {
        return Err(Error::Param(format!("cutoff parameter must be positive, got {mu}")));
    }
    let values = (0..grid.num_cells())
        .map(|c| cutoff_profile(grid.dist_to_gamma0(grid.center(c)), mu))
        .collect();
    Ok(CutoffField {
        grid: *grid,
        mu,
        values,
    })
}

impl CutoffField {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.values).map(|(a, g)| a * g).collect()
    }
}

/// `rho * (gamma u)` for a kernel and cutoff on the same grid.
pub fn mollify_cut(u: &ScalarField, cutoff: &CutoffField, kernel: &MollifierKernel) -> ScalarField {
    let cut = cutoff.apply(&u.values);
    ScalarField {
        grid: u.grid,
        values: kernel.apply(&u.grid, &cut),
    }
}
