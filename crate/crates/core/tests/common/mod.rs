//! Independent reference solvers shared by the integration tests.
#![allow(dead_code)]

use biofilm_core::constitutive::ModelParams;
use biofilm_core::flow::ObstacleField;
use biofilm_core::grid::{Grid, VectorField};
use nalgebra::{DMatrix, DVector};

/// Adaptive Dormand-Prince 5(4) integration of `y' = f(y)` over `[0, t_end]`.
pub fn rk45(f: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t_end: f64, tol: f64) -> Vec<f64> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h = t_end / 100.0;
    while t < t_end {
        h = h.min(t_end - t);
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let ys: Vec<f64> = (0..n)
                .map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>())
                .collect();
            k.push(f(&ys));
        }
        let y5: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>()).collect();
        let y4: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|s| B4[s] * k[s][i]).sum::<f64>()).collect();
        let err = (0..n)
            .map(|i| (y5[i] - y4[i]).abs() / (tol * (1.0 + y5[i].abs())))
            .fold(0.0, f64::max);
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    y
}

/// Dense reference for the projection onto divergence-free face fields with
/// zero normal boundary velocity and `|center velocity| <= obs` in every cell.
///
/// Log-barrier interior point method on the null space of the divergence,
/// with damped Newton steps that keep every cell strictly feasible. The
/// barrier weight is driven down to `1e-16`, so the result is within about
/// `sqrt(2 cells * 1e-16)` of the true projection.
pub fn qp_project(v: &VectorField, obs: &ObstacleField) -> VectorField {
    let g = v.grid;
    assert_eq!(g.dim(), 2, "reference covers 2D grids");
    let [nx, ny, _] = g.cells();
    let h = g.h();
    let mut unknowns = Vec::new();
    for a in 0..2 {
        for f in 0..g.num_faces(a) {
            if !g.is_boundary_face(a, f) {
                unknowns.push((a, f));
            }
        }
    }
    let m = unknowns.len();
    let col = |a: usize, f: usize| unknowns.iter().position(|&u| u == (a, f));
    let ncell = nx * ny;
    let mut d = DMatrix::<f64>::zeros(ncell, m);
    let mut centers: Vec<DMatrix<f64>> = Vec::new();
    for c in 0..ncell {
        let mut ac = DMatrix::<f64>::zeros(2, m);
        for a in 0..2 {
            for (high, sign) in [(false, -1.0), (true, 1.0)] {
                let f = g.cell_face(c, a, high);
                if let Some(j) = col(a, f) {
                    d[(c, j)] += sign / h[a];
                    ac[(a, j)] += 0.5;
                }
            }
        }
        centers.push(ac.transpose() * ac);
    }
    // Orthonormal basis of the null space of the divergence.
    let eig = (d.transpose() * &d).symmetric_eigen();
    let top = eig.eigenvalues.max();
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] < 1e-10 * top).collect();
    let basis = DMatrix::from_fn(m, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
    let k = keep.len();
    // Reduced quantities: x = N y, |A_c x|^2 = y^T Q_c y.
    let target = DVector::from_iterator(m, unknowns.iter().map(|&(a, f)| v.comps[a][f]));
    let b = basis.transpose() * &target;
    let q: Vec<DMatrix<f64>> = centers.iter().map(|c| basis.transpose() * c * &basis).collect();
    let r2: Vec<f64> = obs.values.iter().map(|r| r * r).collect();

    let slacks = |y: &DVector<f64>| -> Option<Vec<f64>> {
        let s: Vec<f64> = q.iter().zip(&r2).map(|(qc, r)| r - y.dot(&(qc * y))).collect();
        s.iter().all(|&x| x > 0.0).then_some(s)
    };
    let objective = |y: &DVector<f64>, t: f64| -> Option<f64> {
        let s = slacks(y)?;
        Some(0.5 * (y - &b).norm_squared() - t * s.iter().map(|x| x.ln()).sum::<f64>())
    };

    let mut y = DVector::<f64>::zeros(k);
    let mut t = 1.0;
    while t > 1e-16 {
        for _ in 0..100 {
            let s = slacks(&y).expect("iterate stays strictly feasible");
            let mut grad = &y - &b;
            let mut hess = DMatrix::<f64>::identity(k, k);
            for (qc, sc) in q.iter().zip(&s) {
                let qy = qc * &y;
                grad += (2.0 * t / sc) * &qy;
                hess += (2.0 * t / sc) * qc + (4.0 * t / (sc * sc)) * &qy * qy.transpose();
            }
            // Tiny slacks make the Hessian badly scaled; pivoted LU copes.
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => hess.lu().solve(&(-&grad)).expect("barrier Hessian is nonsingular"),
            };
            let decrement = -grad.dot(&step);
            if decrement < 1e-28 {
                break;
            }
            let f0 = objective(&y, t).unwrap();
            let mut alpha = 1.0;
            loop {
                let trial = &y + alpha * &step;
                if let Some(f) = objective(&trial, t) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        y = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    break;
                }
            }
            if alpha < 1e-20 {
                break;
            }
        }
        t *= 0.1;
    }
    let x = &basis * y;
    let mut out = VectorField::zeros(&g);
    for (j, &(a, f)) in unknowns.iter().enumerate() {
        out.comps[a][f] = x[j];
    }
    out
}

/// Explicit finite-volume solution of `u_t = (d1(u))_xx` on `[0, 1]` with
/// no-flux ends, `cells` cells, up to time `t_end`.
pub fn explicit_degenerate_1d(params: &ModelParams, u0: impl Fn(f64) -> f64, cells: usize, t_end: f64) -> Vec<f64> {
    let h = 1.0 / cells as f64;
    let mut u: Vec<f64> = (0..cells).map(|i| u0((i as f64 + 0.5) * h)).collect();
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let slope = params.d1_prime(umax).unwrap().max(1e-12);
    let steps = (t_end / (0.4 * h * h / slope)).ceil() as usize;
    let dt = t_end / steps as f64;
    let beta = |r: f64| params.d1(r.max(0.0)).unwrap();
    for _ in 0..steps {
        let b: Vec<f64> = u.iter().map(|&r| beta(r)).collect();
        for i in 0..cells {
            let left = if i > 0 { b[i - 1] - b[i] } else { 0.0 };
            let right = if i + 1 < cells { b[i + 1] - b[i] } else { 0.0 };
            u[i] += dt / (h * h) * (left + right);
        }
    }
    u
}

/// Cell averages of a fine 1D profile onto `coarse` cells.
pub fn restrict(fine: &[f64], coarse: usize) -> Vec<f64> {
    let r = fine.len() / coarse;
    assert_eq!(r * coarse, fine.len());
    fine.chunks(r).map(|c| c.iter().sum::<f64>() / r as f64).collect()
}

/// Unit square grid with an inflow side at `x = 0`.
pub fn square(n: usize) -> Grid {
    Grid::new(2, &[1.0, 1.0], &[n, n], &[biofilm_core::grid::Side::XMin]).unwrap()
}
