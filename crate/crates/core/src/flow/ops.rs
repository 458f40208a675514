//! Discrete differential operators on the MAC grid.

use crate::grid::{Grid, ScalarField, VectorField};
use crate::linalg::{AxisKind, SeparableSolver};

/// Cell divergence `sum_a (v_a[hi] - v_a[lo]) / h_a`.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let h = g.h();
    let values = (0..g.num_cells())
        .map(|c| {
            (0..g.dim())
                .map(|a| (v.comps[a][g.cell_face(c, a, true)] - v.comps[a][g.cell_face(c, a, false)]) / h[a])
                .sum()
        })
        .collect();
    ScalarField { grid: g, values }
}

pub fn max_abs_divergence(v: &VectorField) -> f64 {
    divergence(v).values.iter().fold(0.0, |m, d| m.max(d.abs()))
}

/// Face gradient of a cell field; boundary faces get zero.
pub fn gradient(p: &ScalarField) -> VectorField {
    let g = p.grid;
    let h = g.h();
    let mut out = VectorField::zeros(&g);
    for a in 0..g.dim() {
        for (f, val) in out.comps[a].iter_mut().enumerate() {
            if g.is_boundary_face(a, f) {
                continue;
            }
            let c = g.face_coords(a, f);
            let hi = g.idx(c[0], c[1], c[2]);
            let lo = hi - g.stride(a);
            *val = (p.values[hi] - p.values[lo]) / h[a];
        }
    }
    out
}

/// Neumann Laplacian on cell centers, as a separable solver for `-div grad`.
pub fn pressure_solver(g: &Grid) -> SeparableSolver {
    let n = g.cells();
    let h = g.h();
    let mut axes = [None; 3];
    for a in 0..g.dim() {
        axes[a] = Some((AxisKind::Neumann, n[a], h[a]));
    }
    SeparableSolver::new(axes)
}

/// Shape of the interior-face unknowns of component `a`.
pub fn interior_shape(g: &Grid, a: usize) -> [usize; 3] {
    let mut s = g.cells();
    s[a] -= 1;
    s
}

/// Dirichlet vector Laplacian `-Lap_h` restricted to interior faces of component `a`.
pub fn viscous_solver(g: &Grid, a: usize) -> SeparableSolver {
    let n = g.cells();
    let h = g.h();
    let mut axes = [None; 3];
    for b in 0..g.dim() {
        let kind = if b == a {
            AxisKind::DirichletNodes
        } else {
            AxisKind::DirichletCells
        };
        axes[b] = Some((kind, n[b], h[b]));
    }
    SeparableSolver::new(axes)
}

/// Copies the interior faces of component `a` into a compact array.
pub fn gather_interior(v: &VectorField, a: usize) -> Vec<f64> {
    let g = v.grid;
    let s = interior_shape(&g, a);
    let mut out = Vec::with_capacity(s.iter().product());
    for k in 0..s[2] {
        for j in 0..s[1] {
            for i in 0..s[0] {
                let mut c = [i, j, k];
                c[a] += 1;
                out.push(v.comps[a][g.face_idx(a, c[0], c[1], c[2])]);
            }
        }
    }
    out
}

pub fn scatter_interior(v: &mut VectorField, a: usize, data: &[f64]) {
    let g = v.grid;
    let s = interior_shape(&g, a);
    let mut it = data.iter();
    for k in 0..s[2] {
        for j in 0..s[1] {
            for i in 0..s[0] {
                let mut c = [i, j, k];
                c[a] += 1;
                v.comps[a][g.face_idx(a, c[0], c[1], c[2])] = *it.next().expect("interior size");
            }
        }
    }
}

/// `-Lap_h v` with no-slip walls, applied componentwise on interior faces.
pub fn neg_laplacian(v: &VectorField) -> VectorField {
    let g = v.grid;
    let h = g.h();
    let mut out = VectorField::zeros(&g);
    for a in 0..g.dim() {
        let shape = g.face_shape(a);
        for f in 0..v.comps[a].len() {
            if g.is_boundary_face(a, f) {
                continue;
            }
            let c = g.face_coords(a, f);
            let x = v.comps[a][f];
            let mut acc = 0.0;
            for b in 0..g.dim() {
                let inv = 1.0 / (h[b] * h[b]);
                let stride = match b {
                    0 => 1,
                    1 => shape[0],
                    _ => shape[0] * shape[1],
                };
                // Along the component's own axis the neighbors are faces
                // (boundary faces hold zero); across, walls act through mirror ghosts.
                let lo = if b == a || c[b] > 0 { v.comps[a][f - stride] } else { -x };
                let hi = if b == a || c[b] + 1 < shape[b] { v.comps[a][f + stride] } else { -x };
                acc += (2.0 * x - lo - hi) * inv;
            }
            out.comps[a][f] = acc;
        }
    }
    out
}

/// Discrete Dirichlet energy `<-Lap_h v, v>` (the squared H1 seminorm).
pub fn grad_norm_sq(v: &VectorField) -> f64 {
    neg_laplacian(v).dot(v)
}

/// Skew-symmetric (centered divergence form) convection `(a . grad) b`.
///
/// Each component is transported on its own staggered control volumes with
/// face velocities averaged from `a`. For discretely divergence-free `a` the
/// control-volume divergence vanishes, which gives `<G(a, b), b> = 0`.
pub fn convection(a: &VectorField, b: &VectorField) -> VectorField {
    let g = a.grid;
    let mut out = VectorField::zeros(&g);
    for j in 0..g.dim() {
        out.comps[j] = convection_component(a, &b.comps[j], j);
    }
    out
}

/// Component `j` of [`convection`], given only the face values `bj` of that component.
pub fn convection_component(a: &VectorField, bj: &[f64], j: usize) -> Vec<f64> {
    let g = a.grid;
    let h = g.h();
    let dim = g.dim();
    let shape_j = g.face_shape(j);
    let mut out = vec![0.0; bj.len()];
    for (f, o) in out.iter_mut().enumerate() {
        if g.is_boundary_face(j, f) {
            continue;
        }
        let c = g.face_coords(j, f);
        let bf = bj[f];
        let mut acc = 0.0;
        for k in 0..dim {
            let (u_hi, u_lo) = if k == j {
                let fp = g.face_idx(j, c[0] + usize::from(j == 0), c[1] + usize::from(j == 1), c[2] + usize::from(j == 2));
                let fm = g.face_idx(j, c[0] - usize::from(j == 0), c[1] - usize::from(j == 1), c[2] - usize::from(j == 2));
                (
                    0.5 * (a.comps[j][f] + a.comps[j][fp]),
                    0.5 * (a.comps[j][fm] + a.comps[j][f]),
                )
            } else {
                // k-faces of the two cells sharing this j-face, above and below along k.
                let mut lo_cell = c;
                lo_cell[j] -= 1;
                let hi_cell = c;
                let avg = |kk: usize| {
                    let mut p = lo_cell;
                    p[k] = kk;
                    let mut q = hi_cell;
                    q[k] = kk;
                    0.5 * (a.comps[k][g.face_idx(k, p[0], p[1], p[2])] + a.comps[k][g.face_idx(k, q[0], q[1], q[2])])
                };
                (avg(c[k] + 1), avg(c[k]))
            };
            let nb = |up: bool| -> f64 {
                let mut q = c;
                if up {
                    if q[k] + 1 >= shape_j[k] {
                        return 0.0;
                    }
                    q[k] += 1;
                } else {
                    if q[k] == 0 {
                        return 0.0;
                    }
                    q[k] -= 1;
                }
                bj[g.face_idx(j, q[0], q[1], q[2])]
            };
            acc += (u_hi * 0.5 * (bf + nb(true)) - u_lo * 0.5 * (bf + nb(false))) / h[k];
        }
        *o = acc;
    }
    out
}

/// Discrete trilinear form `<G(a, b), c>`.
pub fn trilinear(a: &VectorField, b: &VectorField, c: &VectorField) -> f64 {
    convection(a, b).dot(c)
}

/// Velocity from a node-based stream function (2D) or a face-wise vector
/// potential sampled by `psi` (3D: uses `psi` as the z-component potential
/// only). The result is exactly divergence-free with zero normal boundary
/// velocity when `psi` vanishes on the boundary.
pub fn curl_of_stream(g: &Grid, psi: impl Fn([f64; 3]) -> f64) -> VectorField {
    let h = g.h();
    let mut v = VectorField::zeros(g);
    // Nodes at (i h0, j h1, (k + 1/2) h2).
    let node = |i: usize, j: usize, k: usize| psi([i as f64 * h[0], j as f64 * h[1], (k as f64 + 0.5) * h[2]]);
    for f in 0..v.comps[0].len() {
        let c = g.face_coords(0, f);
        v.comps[0][f] = (node(c[0], c[1] + 1, c[2]) - node(c[0], c[1], c[2])) / h[1];
    }
    for f in 0..v.comps[1].len() {
        let c = g.face_coords(1, f);
        v.comps[1][f] = -(node(c[0] + 1, c[1], c[2]) - node(c[0], c[1], c[2])) / h[0];
    }
    v
}
