//! Dense complex linear algebra for the forward and inverse solvers.
//!
//! Parallel loops split work across independent output elements and every
//! element is accumulated in a fixed sequential order, so all results are
//! bitwise identical regardless of thread count. That invariant is load
//! bearing: reproducibility of full pipeline runs is asserted in tests.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

type C = Complex64;

/// Row-major dense complex matrix.
#[derive(Clone, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![C::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> C {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut C {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[C] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<C> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    pub fn conj_transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |r, c| self.at(c, r).conj())
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self * other`, parallel across output rows.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        let oc = other.cols;
        out.data
            .par_chunks_mut(oc)
            .enumerate()
            .for_each(|(r, out_row)| {
                for k in 0..self.cols {
                    let a = self.at(r, k);
                    if a != C::new(0.0, 0.0) {
                        let brow = other.row(k);
                        for (o, &b) in out_row.iter_mut().zip(brow) {
                            *o += a * b;
                        }
                    }
                }
            });
        out
    }

    pub fn matvec(&self, x: &[C]) -> Vec<C> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows)
            .into_par_iter()
            .map(|r| {
                let mut acc = C::new(0.0, 0.0);
                for (a, &xi) in self.row(r).iter().zip(x) {
                    acc += a * xi;
                }
                acc
            })
            .collect()
    }

    /// `self^H * x` without forming the adjoint.
    pub fn matvec_conj_transpose(&self, x: &[C]) -> Vec<C> {
        assert_eq!(self.rows, x.len(), "adjoint matvec shape mismatch");
        (0..self.cols)
            .into_par_iter()
            .map(|c| {
                let mut acc = C::new(0.0, 0.0);
                for r in 0..self.rows {
                    acc += self.at(r, c).conj() * x[r];
                }
                acc
            })
            .collect()
    }
}

/// Conjugated dot product `a^H b`.
pub fn cdot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(a: &[C]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: C, x: &[C], y: &mut [C]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// LU factorization with partial pivoting, stored packed (unit lower + upper).
pub struct LuFactors {
    lu: Mat,
    /// Row interchanged with row `i` at elimination step `i`.
    piv: Vec<usize>,
}

const LU_BLOCK: usize = 32;

/// Blocked right-looking LU with partial pivoting.
///
/// The trailing update is parallel across rows; within a row the elimination
/// steps run in ascending order, so the factorization is deterministic.
pub fn lu_factor(mut a: Mat) -> Result<LuFactors> {
    assert_eq!(a.rows, a.cols, "LU requires a square matrix");
    let n = a.rows;
    let mut piv = vec![0usize; n];

    let mut k0 = 0;
    while k0 < n {
        let nb = LU_BLOCK.min(n - k0);
        let panel_end = k0 + nb;

        // Unblocked factorization of the panel; pivot swaps apply to full rows.
        for c in k0..panel_end {
            let mut best = c;
            let mut best_mag = a.at(c, c).norm_sqr();
            for r in (c + 1)..n {
                let mag = a.at(r, c).norm_sqr();
                if mag > best_mag {
                    best = r;
                    best_mag = mag;
                }
            }
            piv[c] = best;
            if best_mag == 0.0 {
                return Err(Error::Numeric(format!(
                    "singular matrix in LU factorization at column {c}"
                )));
            }
            if best != c {
                for j in 0..n {
                    let t = a.at(c, j);
                    *a.at_mut(c, j) = a.at(best, j);
                    *a.at_mut(best, j) = t;
                }
            }
            let inv = C::new(1.0, 0.0) / a.at(c, c);
            for r in (c + 1)..n {
                let l = a.at(r, c) * inv;
                *a.at_mut(r, c) = l;
                for j in (c + 1)..panel_end {
                    let u = a.at(c, j);
                    *a.at_mut(r, j) -= l * u;
                }
            }
        }

        if panel_end == n {
            break;
        }

        // U block: solve L11 * U12 = A12 by forward substitution.
        for r in (k0 + 1)..panel_end {
            for q in k0..r {
                let l = a.at(r, q);
                if l != C::new(0.0, 0.0) {
                    for j in panel_end..n {
                        let u = a.at(q, j);
                        *a.at_mut(r, j) -= l * u;
                    }
                }
            }
        }

        // Trailing update A22 -= L21 * U12. Copy U12 out so row tasks can
        // read it while mutating their own row.
        let ntrail = n - panel_end;
        let mut ublock = vec![C::new(0.0, 0.0); nb * ntrail];
        for (q, urow) in ublock.chunks_mut(ntrail).enumerate() {
            urow.copy_from_slice(&a.row(k0 + q)[panel_end..]);
        }
        let cols = a.cols;
        a.data.par_chunks_mut(cols).skip(panel_end).for_each(|row| {
            for q in 0..nb {
                let l = row[k0 + q];
                if l != C::new(0.0, 0.0) {
                    let urow = &ublock[q * ntrail..(q + 1) * ntrail];
                    for (x, &u) in row[panel_end..].iter_mut().zip(urow) {
                        *x -= l * u;
                    }
                }
            }
        });

        k0 = panel_end;
    }
    Ok(LuFactors { lu: a, piv })
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.lu.rows
    }

    /// Solve in place for a block of right-hand sides (one per column of `b`).
    pub fn solve_mat(&self, b: &mut Mat) {
        assert_eq!(b.rows, self.n(), "rhs row count mismatch");
        let n = self.n();
        let k = b.cols;
        // Apply recorded row interchanges.
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                for j in 0..k {
                    let t = b.at(i, j);
                    *b.at_mut(i, j) = b.at(p, j);
                    *b.at_mut(p, j) = t;
                }
            }
        }
        // Forward substitution with unit lower factor.
        for q in 0..n {
            for r in (q + 1)..n {
                let l = self.lu.at(r, q);
                if l != C::new(0.0, 0.0) {
                    for j in 0..k {
                        let y = b.at(q, j);
                        *b.at_mut(r, j) -= l * y;
                    }
                }
            }
        }
        // Back substitution.
        for q in (0..n).rev() {
            let inv = C::new(1.0, 0.0) / self.lu.at(q, q);
            for j in 0..k {
                *b.at_mut(q, j) *= inv;
            }
            for r in 0..q {
                let u = self.lu.at(r, q);
                if u != C::new(0.0, 0.0) {
                    for j in 0..k {
                        let y = b.at(q, j);
                        *b.at_mut(r, j) -= u * y;
                    }
                }
            }
        }
    }

    pub fn solve_vec(&self, b: &[C]) -> Vec<C> {
        let mut m = Mat {
            rows: b.len(),
            cols: 1,
            data: b.to_vec(),
        };
        self.solve_mat(&mut m);
        m.data
    }
}

/// Singular value decomposition `A = U diag(s) V^H`.
///
/// For `rows >= cols`: `u` is rows x cols, `v` is cols x cols.
/// For `rows < cols`: `u` is rows x rows, `v` is cols x rows.
/// Singular values are sorted in descending order.
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

/// One-sided Jacobi SVD. Cyclic sweeps orthogonalize column pairs; each
/// rotation is the exact 2x2 unitary that zeroes the Gram off-diagonal.
pub fn svd(a: &Mat) -> Svd {
    if a.rows >= a.cols {
        svd_tall(a)
    } else {
        // A = (A^H)^H: factor the tall adjoint and swap the factors.
        let t = svd_tall(&a.conj_transpose());
        Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        }
    }
}

fn svd_tall(a: &Mat) -> Svd {
    let m = a.rows;
    let n = a.cols;
    let mut acols: Vec<Vec<C>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<C>> = (0..n)
        .map(|j| {
            let mut e = vec![C::new(0.0, 0.0); n];
            e[j] = C::new(1.0, 0.0);
            e
        })
        .collect();

    let tol = 1e-14;
    for _sweep in 0..40 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let app: f64 = acols[p].iter().map(|z| z.norm_sqr()).sum();
                let aqq: f64 = acols[q].iter().map(|z| z.norm_sqr()).sum();
                let apq = cdot(&acols[p], &acols[q]);
                let r = apq.norm();
                if r <= tol * (app * aqq).sqrt() || r == 0.0 {
                    continue;
                }
                rotated = true;
                // Phase so the off-diagonal becomes real, then a real Jacobi
                // rotation on [[app, r], [r, aqq]].
                let phase = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let sp = phase * s;
                for i in 0..m {
                    let xp = acols[p][i];
                    let xq = acols[q][i];
                    acols[p][i] = c * xp - sp.conj() * xq;
                    acols[q][i] = sp * xp + c * xq;
                }
                for i in 0..n {
                    let xp = vcols[p][i];
                    let xq = vcols[q][i];
                    vcols[p][i] = c * xp - sp.conj() * xq;
                    vcols[q][i] = sp * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = acols.iter().map(|col| vec_norm(col)).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = Mat::zeros(m, n);
    let mut v = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        if sigma > 0.0 {
            for i in 0..m {
                *u.at_mut(i, k) = acols[j][i] / sigma;
            }
        }
        for i in 0..n {
            *v.at_mut(i, k) = vcols[j][i];
        }
    }
    Svd { u, s, v }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splitmix64(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn uniform(state: &mut u64) -> f64 {
        (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut st = seed;
        Mat::from_fn(rows, cols, |_, _| {
            C::new(uniform(&mut st), uniform(&mut st))
        })
    }

    #[test]
    fn matmul_small_oracle() {
        // [[1, i], [2, 0]] * [[1, 1], [i, 0]] = [[0, 1], [2, 2]]
        let i = C::new(0.0, 1.0);
        let one = C::new(1.0, 0.0);
        let a = Mat {
            rows: 2,
            cols: 2,
            data: vec![one, i, 2.0 * one, C::new(0.0, 0.0)],
        };
        let b = Mat {
            rows: 2,
            cols: 2,
            data: vec![one, one, i, C::new(0.0, 0.0)],
        };
        let c = a.matmul(&b);
        assert!((c.at(0, 0) - C::new(0.0, 0.0)).norm() < 1e-15);
        assert!((c.at(0, 1) - one).norm() < 1e-15);
        assert!((c.at(1, 0) - 2.0 * one).norm() < 1e-15);
        assert!((c.at(1, 1) - 2.0 * one).norm() < 1e-15);
    }

    #[test]
    fn lu_solves_hand_checked_system() {
        // (1+i) x + 2 y = 5 + 3i ; 3 x + (4-i) y = 11 - 2i
        // has solution x = 1 - i, y = 2 + i (forward-substituted by hand).
        let a = Mat {
            rows: 2,
            cols: 2,
            data: vec![
                C::new(1.0, 1.0),
                C::new(2.0, 0.0),
                C::new(3.0, 0.0),
                C::new(4.0, -1.0),
            ],
        };
        let x = vec![C::new(1.0, -1.0), C::new(2.0, 1.0)];
        let b = a.matvec(&x);
        let f = lu_factor(a).unwrap();
        let got = f.solve_vec(&b);
        assert!((got[0] - x[0]).norm() < 1e-13);
        assert!((got[1] - x[1]).norm() < 1e-13);
    }

    #[test]
    fn lu_residual_small_on_random_system() {
        let n = 97; // not a block multiple; exercises the ragged last panel
        let a = random_mat(n, n, 7);
        let xs = random_mat(n, 3, 8);
        let mut b = a.matmul(&xs);
        let f = lu_factor(a.clone()).unwrap();
        f.solve_mat(&mut b);
        let mut err: f64 = 0.0;
        for r in 0..n {
            for c in 0..3 {
                err = err.max((b.at(r, c) - xs.at(r, c)).norm());
            }
        }
        assert!(err < 1e-9, "max solve error {err}");
    }

    #[test]
    fn lu_reports_singular_matrix() {
        let mut a = random_mat(5, 5, 9);
        // Make row 3 a copy of row 1.
        for j in 0..5 {
            let v = a.at(1, j);
            *a.at_mut(3, j) = v;
        }
        match lu_factor(a) {
            Err(Error::Numeric(_)) => {}
            other => panic!("expected numeric error, got {:?}", other.map(|f| f.n())),
        }
    }

    #[test]
    fn lu_is_bitwise_deterministic_across_thread_counts() {
        let a = random_mat(120, 120, 42);
        let run = |threads: usize| -> Vec<u64> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let f = pool.install(|| lu_factor(a.clone()).unwrap());
            f.lu.data
                .iter()
                .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
                .collect()
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one, four, "LU bits differ between 1 and 4 threads");
    }

    #[test]
    fn svd_known_singular_values() {
        // [[0, 2i], [i, 0]] has singular values 2 and 1.
        let a = Mat {
            rows: 2,
            cols: 2,
            data: vec![
                C::new(0.0, 0.0),
                C::new(0.0, 2.0),
                C::new(0.0, 1.0),
                C::new(0.0, 0.0),
            ],
        };
        let d = svd(&a);
        assert!((d.s[0] - 2.0).abs() < 1e-14);
        assert!((d.s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        for (rows, cols, seed) in [(12, 8, 3u64), (8, 12, 4), (10, 10, 5)] {
            let a = random_mat(rows, cols, seed);
            let d = svd(&a);
            let k = d.s.len();
            let mut recon = Mat::zeros(rows, cols);
            for t in 0..k {
                for r in 0..rows {
                    for c in 0..cols {
                        *recon.at_mut(r, c) += d.u.at(r, t) * d.s[t] * d.v.at(c, t).conj();
                    }
                }
            }
            let mut diff: f64 = 0.0;
            for idx in 0..recon.data.len() {
                diff = diff.max((recon.data[idx] - a.data[idx]).norm());
            }
            assert!(diff < 1e-12, "{rows}x{cols}: reconstruction error {diff}");

            // Factor columns are orthonormal.
            for p in 0..k {
                for q in 0..k {
                    let ud = cdot(&d.u.col(p), &d.u.col(q));
                    let vd = cdot(&d.v.col(p), &d.v.col(q));
                    let expect = if p == q { 1.0 } else { 0.0 };
                    assert!((ud - C::new(expect, 0.0)).norm() < 1e-12);
                    assert!((vd - C::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        // Singular values squared are eigenvalues of A^H A; check the trace.
        let a = random_mat(9, 6, 11);
        let d = svd(&a);
        let trace_gram: f64 = a.data.iter().map(|z| z.norm_sqr()).sum();
        let trace_sigma: f64 = d.s.iter().map(|s| s * s).sum();
        assert!((trace_gram - trace_sigma).abs() < 1e-12 * trace_gram.max(1.0));
    }

    #[test]
    fn adjoint_matvec_matches_explicit_adjoint() {
        let a = random_mat(7, 5, 21);
        let x: Vec<C> = (0..7)
            .map(|i| C::new(i as f64 + 0.5, -(i as f64)))
            .collect();
        let fast = a.matvec_conj_transpose(&x);
        let slow = a.conj_transpose().matvec(&x);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).norm() < 1e-13);
        }
    }
}
