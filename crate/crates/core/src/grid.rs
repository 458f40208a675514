//! Structured box grids with a MAC (staggered) layout.
//!
//! Scalars live at cell centers. Component `a` of a vector field lives on the
//! faces normal to axis `a`, so its array has one more entry along that axis.
//! Boundary faces of the box are tagged either [`BoundaryTag::Gamma0`] (the
//! inflow portion where biomass is pinned to zero) or [`BoundaryTag::Wall`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One side of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "x-")]
    XMin,
    #[serde(rename = "x+")]
    XMax,
    #[serde(rename = "y-")]
    YMin,
    #[serde(rename = "y+")]
    YMax,
    #[serde(rename = "z-")]
    ZMin,
    #[serde(rename = "z+")]
    ZMax,
}

impl Side {
    pub const ALL: [Side; 6] = [
        Side::XMin,
        Side::XMax,
        Side::YMin,
        Side::YMax,
        Side::ZMin,
        Side::ZMax,
    ];

    pub fn axis(self) -> usize {
        self.index() / 2
    }

    pub fn is_max(self) -> bool {
        self.index() % 2 == 1
    }

    fn index(self) -> usize {
        match self {
            Side::XMin => 0,
            Side::XMax => 1,
            Side::YMin => 2,
            Side::YMax => 3,
            Side::ZMin => 4,
            Side::ZMax => 5,
        }
    }

    pub fn of(axis: usize, max: bool) -> Side {
        Side::ALL[2 * axis + usize::from(max)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    Gamma0,
    Wall,
}

/// The `[grid]` section of the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Spatial dimension, 2 or 3.
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
    /// Sides of the box making up the inflow boundary.
    pub gamma0: Vec<Side>,
}

fn default_dim() -> usize {
    2
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: 2,
            extents: vec![1.0, 1.0],
            cells: vec![64, 64],
            gamma0: vec![Side::XMin],
        }
    }
}

/// Axis-aligned box discretized by uniform cells along each axis.
///
/// Unused axes (the third one in 2D) have one cell and are never differenced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [f64; 3],
    cells: [usize; 3],
    h: [f64; 3],
    gamma0: [bool; 6],
}

impl Grid {
    pub fn new(dim: usize, extents: &[f64], cells: &[usize], gamma0: &[Side]) -> Result<Grid> {
        let grid = Grid::unchecked(dim, extents, cells, gamma0)?;
        let (g0, wall) = grid.face_counts();
        if g0 == 0 {
            return Err(Error::Grid("gamma0 must contain at least one boundary side".into()));
        }
        if wall == 0 {
            return Err(Error::Grid(
                "gamma0 covers the whole boundary; at least one wall side is required".into(),
            ));
        }
        Ok(grid)
    }

    /// Grid whose whole boundary is a wall. Only meant for conservation tests,
    /// the model itself always needs a nonempty inflow boundary.
    pub fn without_gamma0(dim: usize, extents: &[f64], cells: &[usize]) -> Result<Grid> {
        Grid::unchecked(dim, extents, cells, &[])
    }

    fn unchecked(dim: usize, extents: &[f64], cells: &[usize], gamma0: &[Side]) -> Result<Grid> {
        if dim != 2 && dim != 3 {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if extents.len() != dim || cells.len() != dim {
            return Err(Error::Grid(format!(
                "expected {dim} extents and cell counts, got {} and {}",
                extents.len(),
                cells.len()
            )));
        }
        let mut e = [1.0; 3];
        let mut c = [1usize; 3];
        let mut h = [1.0; 3];
        for a in 0..dim {
            if !(extents[a].is_finite() && extents[a] > 0.0) {
                return Err(Error::Grid(format!("extent along axis {a} must be positive")));
            }
            if cells[a] == 0 {
                return Err(Error::Grid(format!("cell count along axis {a} must be positive")));
            }
            e[a] = extents[a];
            c[a] = cells[a];
            h[a] = extents[a] / cells[a] as f64;
        }
        if dim == 2 {
            // Thickness of the virtual third axis; keeps h^n weights two-dimensional.
            h[2] = 1.0;
            e[2] = 1.0;
        }
        let mut g = [false; 6];
        for s in gamma0 {
            if s.axis() >= dim {
                return Err(Error::Grid(format!("side {s:?} does not exist in {dim}D")));
            }
            g[s.index()] = true;
        }
        Ok(Grid {
            dim,
            extents: e,
            cells: c,
            h,
            gamma0: g,
        })
    }

    pub fn from_config(cfg: &GridConfig) -> Result<Grid> {
        Grid::new(cfg.dim, &cfg.extents, &cfg.cells, &cfg.gamma0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn h(&self) -> [f64; 3] {
        self.h
    }

    pub fn min_h(&self) -> f64 {
        self.h[..self.dim].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_h(&self) -> f64 {
        self.h[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    /// Cell volume h^n.
    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.extents[..self.dim].iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.cells[0] * (j + self.cells[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.cells[0];
        let ny = self.cells[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (c[a] as f64 + 0.5) * self.h[a];
        }
        x
    }

    /// Neighbor of cell `idx` along `axis` (`+1` or `-1` step), if inside.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let c = self.coords(idx);
        let stride = self.stride(axis);
        if forward {
            (c[axis] + 1 < self.cells[axis]).then(|| idx + stride)
        } else {
            (c[axis] > 0).then(|| idx - stride)
        }
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.cells[0],
            _ => self.cells[0] * self.cells[1],
        }
    }

    /// Shape of the face array holding component `axis` of a vector field.
    pub fn face_shape(&self, axis: usize) -> [usize; 3] {
        let mut s = self.cells;
        s[axis] += 1;
        s
    }

    pub fn num_faces(&self, axis: usize) -> usize {
        if axis >= self.dim {
            return 0;
        }
        self.face_shape(axis).iter().product()
    }

    #[inline]
    pub fn face_idx(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let s = self.face_shape(axis);
        i + s[0] * (j + s[1] * k)
    }

    /// Face on the low (`forward == false`) or high side of cell `idx`.
    #[inline]
    pub fn cell_face(&self, idx: usize, axis: usize, high: bool) -> usize {
        let mut c = self.coords(idx);
        if high {
            c[axis] += 1;
        }
        self.face_idx(axis, c[0], c[1], c[2])
    }

    pub fn face_coords(&self, axis: usize, f: usize) -> [usize; 3] {
        let s = self.face_shape(axis);
        [f % s[0], (f / s[0]) % s[1], f / (s[0] * s[1])]
    }

    /// Whether face `f` of component `axis` lies on the box boundary.
    #[inline]
    pub fn is_boundary_face(&self, axis: usize, f: usize) -> bool {
        let c = self.face_coords(axis, f);
        c[axis] == 0 || c[axis] == self.cells[axis]
    }

    pub fn face_position(&self, axis: usize, f: usize) -> [f64; 3] {
        let c = self.face_coords(axis, f);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = if a == axis {
                c[a] as f64 * self.h[a]
            } else {
                (c[a] as f64 + 0.5) * self.h[a]
            };
        }
        x
    }

    pub fn tag(&self, side: Side) -> BoundaryTag {
        if self.gamma0[side.index()] {
            BoundaryTag::Gamma0
        } else {
            BoundaryTag::Wall
        }
    }

    pub fn gamma0_sides(&self) -> Vec<Side> {
        Side::ALL
            .iter()
            .copied()
            .filter(|s| s.axis() < self.dim && self.gamma0[s.index()])
            .collect()
    }

    pub fn has_gamma0(&self) -> bool {
        self.gamma0.iter().any(|&g| g)
    }

    /// Number of boundary faces on one side.
    pub fn side_face_count(&self, side: Side) -> usize {
        (0..self.dim)
            .filter(|&a| a != side.axis())
            .map(|a| self.cells[a])
            .product()
    }

    /// Boundary face counts `(gamma0, wall)`.
    pub fn face_counts(&self) -> (usize, usize) {
        let mut g0 = 0;
        let mut wall = 0;
        for s in Side::ALL.iter().filter(|s| s.axis() < self.dim) {
            let n = self.side_face_count(*s);
            match self.tag(*s) {
                BoundaryTag::Gamma0 => g0 += n,
                BoundaryTag::Wall => wall += n,
            }
        }
        (g0, wall)
    }

    /// Euclidean distance from a point to the inflow boundary. Each inflow
    /// side is a whole face of the box, so the nearest point is the foot of
    /// the perpendicular.
    pub fn dist_to_gamma0(&self, x: [f64; 3]) -> f64 {
        self.gamma0_sides()
            .iter()
            .map(|s| {
                let a = s.axis();
                if s.is_max() {
                    self.extents[a] - x[a]
                } else {
                    x[a]
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn dist_to_boundary(&self, x: [f64; 3]) -> f64 {
        (0..self.dim)
            .map(|a| x[a].min(self.extents[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Cell-centered scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField {
            grid: *grid,
            values: vec![c; grid.num_cells()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..grid.num_cells()).map(|i| f(grid.center(i))).collect();
        ScalarField {
            grid: *grid,
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Grid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        Ok(ScalarField {
            grid: *grid,
            values,
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Face-staggered vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    /// `comps[a]` holds the values on faces normal to axis `a`. Empty for
    /// axes beyond the grid dimension.
    pub comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            grid: *grid,
            comps: [0, 1, 2].map(|a| vec![0.0; grid.num_faces(a)]),
        }
    }

    /// Samples each component at its face positions.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = VectorField::zeros(grid);
        for a in 0..grid.dim() {
            for (fi, val) in v.comps[a].iter_mut().enumerate() {
                *val = f(grid.face_position(a, fi))[a];
            }
        }
        v
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.comps.iter_mut() {
            c.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        for a in 0..3 {
            for (x, y) in self.comps[a].iter_mut().zip(&other.comps[a]) {
                *x += s * y;
            }
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Euclidean dot product of the face arrays weighted by h^n.
    pub fn dot(&self, other: &VectorField) -> f64 {
        let w = self.grid.cell_volume();
        let mut s = 0.0;
        for a in 0..3 {
            for (x, y) in self.comps[a].iter().zip(&other.comps[a]) {
                s += x * y;
            }
        }
        s * w
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flat_map(|c| c.iter()).all(|v| v.is_finite())
    }

    /// Zeroes the normal components on the box boundary.
    pub fn zero_boundary(&mut self) {
        let g = self.grid;
        for a in 0..g.dim() {
            for f in 0..self.comps[a].len() {
                if g.is_boundary_face(a, f) {
                    self.comps[a][f] = 0.0;
                }
            }
        }
    }

    pub fn boundary_max_abs(&self) -> f64 {
        let g = self.grid;
        let mut m: f64 = 0.0;
        for a in 0..g.dim() {
            for (f, v) in self.comps[a].iter().enumerate() {
                if g.is_boundary_face(a, f) {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }
}

/// Averages the two faces bracketing each cell along every axis.
pub fn interpolate_to_centers(vf: &VectorField) -> Vec<[f64; 3]> {
    let g = &vf.grid;
    (0..g.num_cells())
        .map(|c| {
            let mut out = [0.0; 3];
            for (a, o) in out.iter_mut().enumerate().take(g.dim()) {
                let lo = g.cell_face(c, a, false);
                let hi = g.cell_face(c, a, true);
                *o = 0.5 * (vf.comps[a][lo] + vf.comps[a][hi]);
            }
            out
        })
        .collect()
}

pub fn center_speeds(vf: &VectorField) -> Vec<f64> {
    interpolate_to_centers(vf)
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Grid {
        Grid::new(2, &[1.0, 1.0], &[n, n], &[Side::XMin]).unwrap()
    }

    #[test]
    fn left_edge_tags() {
        let g = square(64);
        assert_eq!(g.face_counts(), (64, 192));
        assert_eq!(g.h()[0], 1.0 / 64.0);
        assert_eq!(g.h()[1], 1.0 / 64.0);
    }

    #[test]
    fn rejects_full_or_empty_gamma0() {
        let all = [Side::XMin, Side::XMax, Side::YMin, Side::YMax];
        assert!(Grid::new(2, &[1.0, 1.0], &[8, 8], &all).is_err());
        assert!(Grid::new(2, &[1.0, 1.0], &[8, 8], &[]).is_err());
        assert!(Grid::new(2, &[1.0, 1.0], &[8, 8], &[Side::ZMin]).is_err());
        assert!(Grid::new(2, &[1.0, -1.0], &[8, 8], &[Side::XMin]).is_err());
    }

    #[test]
    fn tags_partition_boundary_3d() {
        let g = Grid::new(3, &[1.0, 2.0, 1.0], &[4, 5, 6], &[Side::ZMax, Side::XMin]).unwrap();
        let (g0, wall) = g.face_counts();
        let total = 2 * (5 * 6 + 4 * 6 + 4 * 5);
        assert_eq!(g0 + wall, total);
        assert_eq!(g0, 4 * 5 + 5 * 6);
    }

    #[test]
    fn interpolation_of_constants_and_zero() {
        let g = square(5);
        let c = VectorField::from_fn(&g, |_| [2.5, -1.0, 0.0]);
        for v in interpolate_to_centers(&c) {
            assert_eq!(v, [2.5, -1.0, 0.0]);
        }
        for v in interpolate_to_centers(&VectorField::zeros(&g)) {
            assert_eq!(v, [0.0; 3]);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let g = Grid::new(2, &[2.0, 1.0], &[7, 9], &[Side::YMax]).unwrap();
        let lin = |x: [f64; 3]| [1.0 + 3.0 * x[0] - x[1], 0.5 * x[1] + 2.0 * x[0], 0.0];
        let vf = VectorField::from_fn(&g, lin);
        for (c, v) in interpolate_to_centers(&vf).iter().enumerate() {
            let exact = lin(g.center(c));
            assert!((v[0] - exact[0]).abs() < 1e-14);
            assert!((v[1] - exact[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma0_distance() {
        let g = Grid::new(2, &[1.0, 1.0], &[4, 4], &[Side::XMax, Side::YMin]).unwrap();
        assert!((g.dist_to_gamma0([0.1, 0.7, 0.0]) - 0.7).abs() < 1e-15);
        assert!((g.dist_to_gamma0([0.9, 0.7, 0.0]) - 0.1).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn interpolation_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let g = Grid::new(2, &[1.0, 1.0], &[6, 5], &[Side::XMin]).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut f = VectorField::zeros(&g);
            let mut h = VectorField::zeros(&g);
            for c in 0..2 {
                f.comps[c].iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
                h.comps[c].iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            }
            let mut comb = f.scaled(a);
            comb.axpy(b, &h);
            let lhs = interpolate_to_centers(&comb);
            let fi = interpolate_to_centers(&f);
            let hi = interpolate_to_centers(&h);
            for i in 0..lhs.len() {
                for d in 0..2 {
                    let rhs = a * fi[i][d] + b * hi[i][d];
                    proptest::prop_assert!((lhs[i][d] - rhs).abs() < 1e-13);
                }
            }
        }
    }
}
