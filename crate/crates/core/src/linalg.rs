//! Linear solvers used by the step operators.
//!
//! * [`SeparableSolver`]: exact solves of `(alpha I - beta Lap_h) x = b` on a
//!   tensor-product grid by fast diagonalization (per-axis eigenbases).
//! * [`BandLu`]: banded LU without pivoting for the column diagonally
//!   dominant Newton matrices.
//! * [`pcg`] and [`gmres`]: matrix-free Krylov solvers.

use crate::error::{Error, Result};

/// Boundary treatment of a 1D second-difference operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisKind {
    /// Cell-centered unknowns with zero-flux ends.
    Neumann,
    /// Node unknowns strictly inside the interval with zero values at both ends.
    DirichletNodes,
    /// Cell-centered unknowns with zero values on the walls (mirror ghosts).
    DirichletCells,
}

/// Orthonormal eigenbasis of the unit-spacing 1D operator `tridiag(-1, 2, -1)`
/// with the given end treatment.
#[derive(Clone, Debug)]
pub struct AxisBasis {
    /// Number of unknowns along the axis.
    pub len: usize,
    /// Column-major: mode `m` occupies `vecs[m * len..(m + 1) * len]`.
    pub vecs: Vec<f64>,
    pub eigs: Vec<f64>,
}

impl AxisBasis {
    /// Basis for an axis with `cells` cells.
    pub fn new(kind: AxisKind, cells: usize) -> AxisBasis {
        use std::f64::consts::PI;
        let n = cells as f64;
        let (len, modes): (usize, Vec<(f64, Box<dyn Fn(usize) -> f64>)>) = match kind {
            AxisKind::Neumann => (
                cells,
                (0..cells)
                    .map(|k| {
                        let k = k as f64;
                        let f: Box<dyn Fn(usize) -> f64> =
                            Box::new(move |i| (PI * k * (i as f64 + 0.5) / n).cos());
                        (2.0 - 2.0 * (PI * k / n).cos(), f)
                    })
                    .collect(),
            ),
            AxisKind::DirichletNodes => (
                cells.saturating_sub(1),
                (1..cells)
                    .map(|k| {
                        let k = k as f64;
                        let f: Box<dyn Fn(usize) -> f64> =
                            Box::new(move |i| (PI * k * (i as f64 + 1.0) / n).sin());
                        (2.0 - 2.0 * (PI * k / n).cos(), f)
                    })
                    .collect(),
            ),
            AxisKind::DirichletCells => (
                cells,
                (1..=cells)
                    .map(|k| {
                        let k = k as f64;
                        let f: Box<dyn Fn(usize) -> f64> =
                            Box::new(move |i| (PI * k * (i as f64 + 0.5) / n).sin());
                        (2.0 - 2.0 * (PI * k / n).cos(), f)
                    })
                    .collect(),
            ),
        };
        let mut vecs = Vec::with_capacity(len * len);
        let mut eigs = Vec::with_capacity(len);
        for (eig, f) in modes {
            let col: Vec<f64> = (0..len).map(&f).collect();
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            vecs.extend(col.iter().map(|x| x / norm));
            eigs.push(eig);
        }
        AxisBasis { len, vecs, eigs }
    }

    /// A trivial basis for an axis that is not differenced.
    pub fn unit() -> AxisBasis {
        AxisBasis {
            len: 1,
            vecs: vec![1.0],
            eigs: vec![0.0],
        }
    }
}

/// Applies a per-axis linear map to a 3-index array.
///
/// `forward` maps values to mode coefficients (`V^T x`), otherwise the inverse.
fn transform_axis(data: &mut Vec<f64>, shape: [usize; 3], axis: usize, basis: &AxisBasis, forward: bool) {
    let n = shape[axis];
    if n <= 1 {
        return;
    }
    let stride: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; data.len()];
    let mut line = vec![0.0; n];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * stride * n + s;
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[base + i * stride];
            }
            for r in 0..n {
                let mut acc = 0.0;
                if forward {
                    let col = &basis.vecs[r * n..(r + 1) * n];
                    for i in 0..n {
                        acc += col[i] * line[i];
                    }
                } else {
                    for (m, l) in line.iter().enumerate() {
                        acc += basis.vecs[m * n + r] * l;
                    }
                }
                out[base + r * stride] = acc;
            }
        }
    }
    *data = out;
}

/// Exact solver for `(alpha I + beta L) x = b` where `L` is the sum over axes
/// of the 1D second-difference operators divided by `h^2`.
#[derive(Clone, Debug)]
pub struct SeparableSolver {
    shape: [usize; 3],
    bases: [AxisBasis; 3],
    /// Per-mode eigenvalue of `L`.
    spectrum: Vec<f64>,
}

impl SeparableSolver {
    /// `axes[a]` is `None` for axes with a single unknown that are not differenced.
    pub fn new(axes: [Option<(AxisKind, usize, f64)>; 3]) -> SeparableSolver {
        let mut bases = [AxisBasis::unit(), AxisBasis::unit(), AxisBasis::unit()];
        let mut inv_h2 = [0.0; 3];
        for a in 0..3 {
            if let Some((kind, cells, h)) = axes[a] {
                bases[a] = AxisBasis::new(kind, cells);
                inv_h2[a] = 1.0 / (h * h);
            }
        }
        let shape = [bases[0].len, bases[1].len, bases[2].len];
        let mut spectrum = Vec::with_capacity(shape.iter().product());
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    spectrum.push(
                        bases[0].eigs[i] * inv_h2[0]
                            + bases[1].eigs[j] * inv_h2[1]
                            + bases[2].eigs[k] * inv_h2[2],
                    );
                }
            }
        }
        SeparableSolver {
            shape,
            bases,
            spectrum,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    /// Smallest and largest eigenvalue of `L`.
    pub fn spectral_range(&self) -> (f64, f64) {
        let lo = self.spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.spectrum.iter().cloned().fold(0.0, f64::max);
        (lo, hi)
    }

    /// Solves `(alpha I + beta L) x = rhs`. Modes with a zero eigenvalue
    /// (the constant in the pure Neumann case) are projected out.
    pub fn solve(&self, alpha: f64, beta: f64, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.len());
        let mut x = rhs.to_vec();
        for a in 0..3 {
            transform_axis(&mut x, self.shape, a, &self.bases[a], true);
        }
        for (xm, lam) in x.iter_mut().zip(&self.spectrum) {
            let d = alpha + beta * lam;
            *xm = if d.abs() > 1e-300 && !(alpha == 0.0 && *lam < 1e-12) {
                *xm / d
            } else {
                0.0
            };
        }
        for a in 0..3 {
            transform_axis(&mut x, self.shape, a, &self.bases[a], false);
        }
        x
    }

    /// Applies `(alpha I + beta L)` through the eigenbasis.
    pub fn apply(&self, alpha: f64, beta: f64, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for a in 0..3 {
            transform_axis(&mut y, self.shape, a, &self.bases[a], true);
        }
        for (ym, lam) in y.iter_mut().zip(&self.spectrum) {
            *ym *= alpha + beta * lam;
        }
        for a in 0..3 {
            transform_axis(&mut y, self.shape, a, &self.bases[a], false);
        }
        y
    }
}

/// Banded matrix with in-place LU factorization (no pivoting).
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandLu {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> BandLu {
        BandLu {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
            factored: false,
        }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper);
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.pos(k, k)];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(Error::LinearSolve(format!("zero pivot in banded LU at row {k}")));
            }
            let imax = (k + self.lower + 1).min(n);
            let jmax = (k + self.upper + 1).min(n);
            for i in k + 1..imax {
                let pik = self.pos(i, k);
                let l = self.data[pik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[pik] = l;
                // Rows are stored contiguously, so the update is a slice axpy.
                let (pk, pi) = (self.pos(k, k + 1), self.pos(i, k + 1));
                let len = jmax - k - 1;
                let (head, tail) = self.data.split_at_mut(pi);
                for (x, y) in tail[..len].iter_mut().zip(&head[pk..pk + len]) {
                    *x -= l * y;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert!(self.factored, "BandLu::solve before factor");
        let n = self.n;
        for i in 0..n {
            let jmin = i.saturating_sub(self.lower);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(i).skip(jmin) {
                acc -= self.data[self.pos(i, j)] * bj;
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let jmax = (i + self.upper + 1).min(n);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(jmax).skip(i + 1) {
                acc -= self.data[self.pos(i, j)] * bj;
            }
            b[i] = acc / self.data[self.pos(i, i)];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = norm(&r);
        if res <= rtol * bnorm {
            return Ok(KrylovStats {
                iterations: it,
                residual: res / bnorm,
            });
        }
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm(&r) / bnorm;
    if res <= rtol * 10.0 {
        return Ok(KrylovStats {
            iterations: max_iter,
            residual: res,
        });
    }
    Err(Error::LinearSolve(format!(
        "conjugate gradients stalled at relative residual {res:.3e}"
    )))
}

/// Restarted GMRES with right preconditioning.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut total = 0;
    let mut w = vec![0.0; n];
    loop {
        let mut r = vec![0.0; n];
        apply(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= rtol * bnorm {
            return Ok(KrylovStats {
                iterations: total,
                residual: beta / bnorm,
            });
        }
        if total >= max_iter {
            return Err(Error::LinearSolve(format!(
                "GMRES stalled at relative residual {:.3e}",
                beta / bnorm
            )));
        }
        let m = restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        v.push(r.iter().map(|a| a / beta).collect());
        let mut hmat = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut z = v[k].clone();
            precond(&mut z);
            apply(&z, &mut w);
            zs.push(z);
            for (j, vj) in v.iter().enumerate() {
                let hjk = dot(&w, vj);
                hmat[j][k] = hjk;
                for i in 0..n {
                    w[i] -= hjk * vj[i];
                }
            }
            let hnext = norm(&w);
            hmat[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * hmat[j][k] + sn[j] * hmat[j + 1][k];
                hmat[j + 1][k] = -sn[j] * hmat[j][k] + cs[j] * hmat[j + 1][k];
                hmat[j][k] = t;
            }
            let denom = (hmat[k][k] * hmat[k][k] + hmat[k + 1][k] * hmat[k + 1][k]).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hmat[k][k] / denom;
            sn[k] = hmat[k + 1][k] / denom;
            hmat[k][k] = denom;
            hmat[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() <= rtol * bnorm || hnext == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|a| a / hnext).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hmat[i][j] * y[j];
            }
            y[i] = acc / hmat[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * zs[j][i];
            }
        }
    }
}
