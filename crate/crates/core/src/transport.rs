//! Finite-volume transport of cell scalars by face velocities.

use crate::grid::VectorField;

/// `div_h(z v)` with first-order upwinding of `z`; boundary faces carry no flux.
pub fn upwind_divergence(z: &[f64], v: &VectorField) -> Vec<f64> {
    let g = v.grid;
    let h = g.h();
    let n = g.cells();
    let mut out = vec![0.0; g.num_cells()];
    for a in 0..g.dim() {
        let shape = g.face_shape(a);
        let stride = g.stride(a);
        let comp = &v.comps[a];
        let mut f = 0;
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    let c = [i, j, k];
                    if c[a] != 0 && c[a] != n[a] {
                        let hi = g.idx(i, j, k);
                        let lo = hi - stride;
                        let vf = comp[f];
                        let flux = if vf >= 0.0 { vf * z[lo] } else { vf * z[hi] } / h[a];
                        out[lo] += flux;
                        out[hi] -= flux;
                    }
                    f += 1;
                }
            }
        }
    }
    out
}

/// `div_h(z v)` with the centered face average of `z`. For solenoidal `v`
/// with no normal boundary flow, `sum_i div_h(z v)_i z_i = 0` exactly.
pub fn centered_divergence(z: &[f64], v: &VectorField) -> Vec<f64> {
    let g = v.grid;
    let h = g.h();
    let flux = |a: usize, f: usize| {
        if g.is_boundary_face(a, f) {
            // Only the normal velocity matters here; keep it so that
            // non-solenoidal controls see their boundary flux.
            let c = g.face_coords(a, f);
            let cell = if c[a] == 0 {
                g.idx(c[0], c[1], c[2])
            } else {
                let mut q = c;
                q[a] -= 1;
                g.idx(q[0], q[1], q[2])
            };
            return v.comps[a][f] * z[cell];
        }
        let c = g.face_coords(a, f);
        let hi = g.idx(c[0], c[1], c[2]);
        let lo = hi - g.stride(a);
        v.comps[a][f] * 0.5 * (z[lo] + z[hi])
    };
    (0..g.num_cells())
        .map(|c| {
            (0..g.dim())
                .map(|a| (flux(a, g.cell_face(c, a, true)) - flux(a, g.cell_face(c, a, false))) / h[a])
                .sum::<f64>()
        })
        .collect()
}

/// Largest `dt * (sum of outgoing face speeds / h)` over cells. Explicit
/// upwinding is monotone exactly when this is at most one.
pub fn outflow_cfl(v: &VectorField, dt: f64) -> f64 {
    let g = v.grid;
    let h = g.h();
    (0..g.num_cells())
        .map(|c| {
            let mut out = 0.0;
            for a in 0..g.dim() {
                out += v.comps[a][g.cell_face(c, a, true)].max(0.0) / h[a];
                out += (-v.comps[a][g.cell_face(c, a, false)]).max(0.0) / h[a];
            }
            dt * out
        })
        .fold(0.0, f64::max)
}

/// Column-wise entries of the upwind divergence operator: for each cell `c`,
/// the pairs `(row, coefficient)` such that `upwind_divergence(z)[row]`
/// contains `coefficient * z[c]`.
pub fn upwind_columns(v: &VectorField, c: usize) -> Vec<(usize, f64)> {
    let g = v.grid;
    let h = g.h();
    let mut out = Vec::with_capacity(1 + 2 * g.dim());
    let mut diag = 0.0;
    for a in 0..g.dim() {
        let fhi = g.cell_face(c, a, true);
        if !g.is_boundary_face(a, fhi) && v.comps[a][fhi] > 0.0 {
            let s = v.comps[a][fhi] / h[a];
            diag += s;
            out.push((c + g.stride(a), -s));
        }
        let flo = g.cell_face(c, a, false);
        if !g.is_boundary_face(a, flo) && v.comps[a][flo] < 0.0 {
            let s = -v.comps[a][flo] / h[a];
            diag += s;
            out.push((c - g.stride(a), -s));
        }
    }
    out.push((c, diag));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ops::curl_of_stream;
    use crate::grid::{Grid, Side};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn setup() -> (Grid, VectorField, Vec<f64>) {
        let g = Grid::new(2, &[1.0, 1.0], &[10, 12], &[Side::XMin]).unwrap();
        let mut v = curl_of_stream(&g, |x| (PI * x[0]).sin().powi(2) * (PI * x[1]).sin() * (1.0 + x[0]));
        v.zero_boundary();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let z = (0..g.num_cells()).map(|_| rng.gen_range(0.0..1.0)).collect();
        (g, v, z)
    }

    #[test]
    fn upwind_conserves_and_matches_columns() {
        let (g, v, z) = setup();
        let d = upwind_divergence(&z, &v);
        assert!(d.iter().sum::<f64>().abs() < 1e-12);
        let mut from_cols = vec![0.0; g.num_cells()];
        for c in 0..g.num_cells() {
            for (r, k) in upwind_columns(&v, c) {
                from_cols[r] += k * z[c];
            }
        }
        for (a, b) in d.iter().zip(&from_cols) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_form_is_skew() {
        let (g, v, z) = setup();
        let d = centered_divergence(&z, &v);
        let s: f64 = d.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
        assert!(s.abs() < 1e-13);
    }

    #[test]
    fn outflow_cfl_scales_with_dt() {
        let (_, v, _) = setup();
        let c1 = outflow_cfl(&v, 1.0);
        assert!(c1 > 0.0);
        assert!((outflow_cfl(&v, 0.25) - 0.25 * c1).abs() < 1e-14);
    }
}
