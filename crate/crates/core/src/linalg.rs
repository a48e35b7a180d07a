//! Thin dense linear-algebra layer over `faer`.
//!
//! All kernels run sequentially: results must be bit-identical for any
//! worker count, and parallel BLAS reductions would break that.

use std::sync::Once;

use faer::linalg::matmul::{matmul, triangular, triangular::BlockStructure};
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

static SEQUENTIAL: Once = Once::new();

pub(crate) fn sequential() {
    SEQUENTIAL.call_once(|| {
        faer::set_global_parallelism(Par::Seq);
        pin_mmap_threshold();
    });
}

/// glibc raises its mmap threshold after each large free, after which the
/// D x D temporaries of successive cells land on the heap and fragment it
/// without bound. A fixed threshold keeps them on fresh mappings.
#[cfg(all(target_os = "linux", target_env = "gnu"))]
fn pin_mmap_threshold() {
    // SAFETY: mallopt only adjusts allocator tuning parameters.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 20);
    }
}

#[cfg(not(all(target_os = "linux", target_env = "gnu")))]
fn pin_mmap_threshold() {}

/// `acc(lower) += alpha * block^T block`, touching only the lower triangle.
pub fn gram_lower_add(acc: &mut Mat<f64>, block: MatRef<'_, f64>, alpha: f64) {
    sequential();
    triangular::matmul(
        acc.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Add,
        block.transpose(),
        BlockStructure::Rectangular,
        block,
        BlockStructure::Rectangular,
        alpha,
        Par::Seq,
    );
}

/// Copies the strict lower triangle onto the upper one.
pub fn mirror_lower(m: &mut Mat<f64>) {
    let d = m.nrows();
    for j in 0..d {
        for i in (j + 1)..d {
            let v = m[(i, j)];
            m[(j, i)] = v;
        }
    }
}

/// Full product `lhs * rhs`.
pub fn product(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Mat<f64> {
    sequential();
    let mut out = Mat::zeros(lhs.nrows(), rhs.ncols());
    matmul(out.as_mut(), Accum::Replace, lhs, rhs, 1.0, Par::Seq);
    out
}

pub fn mat_vec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    assert_eq!(m.ncols(), v.len());
    let mut out = vec![0.0; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

pub fn mat_t_vec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    assert_eq!(m.nrows(), v.len());
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)] * v[i]).sum())
        .collect()
}

/// Lower bound on the condition number of a symmetric positive matrix from
/// its diagonal.
pub fn diagonal_condition(m: &Mat<f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..m.nrows() {
        let v = m[(i, i)];
        lo = lo.min(v);
        hi = hi.max(v.abs());
    }
    if lo <= 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `h x = rhs` for symmetric positive definite `h` (lower triangle read).
pub fn spd_solve(h: &Mat<f64>, rhs: &[f64], context: &str) -> Result<Vec<f64>> {
    sequential();
    let fail = || Error::NumericFailure {
        context: context.to_string(),
        condition_estimate: diagonal_condition(h),
    };
    let llt = h.as_ref().llt(Side::Lower).map_err(|_| fail())?;
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = llt.solve(b.as_ref());
    let out: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(fail())
    }
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(h: &Mat<f64>, context: &str) -> Result<Mat<f64>> {
    sequential();
    let llt = h
        .as_ref()
        .llt(Side::Lower)
        .map_err(|_| Error::NumericFailure {
            context: context.to_string(),
            condition_estimate: diagonal_condition(h),
        })?;
    let eye = Mat::<f64>::identity(h.nrows(), h.ncols());
    Ok(llt.solve(eye.as_ref()))
}

/// Eigenvalues of a symmetric matrix, sorted in non-increasing order.
pub fn symmetric_eigenvalues(m: &Mat<f64>, context: &str) -> Result<Vec<f64>> {
    sequential();
    let mut vals = m
        .as_ref()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NumericFailure {
            context: context.to_string(),
            condition_estimate: f64::NAN,
        })?;
    vals.reverse();
    Ok(vals)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of R's diagonal folded into Q.
pub fn haar_orthogonal<R: Rng>(d: usize, rng: &mut R) -> Mat<f64> {
    sequential();
    let mut draws = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        draws.push(rng.sample::<f64, _>(StandardNormal));
    }
    let g = Mat::from_fn(d, d, |i, j| draws[j * d + i]);
    let qr = g.as_ref().qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Largest |eigenvalue| of a symmetric matrix by power iteration, stopping
/// when the norm estimate changes by less than `tol` (relative).
pub fn power_norm(m: &Mat<f64>, tol: f64, max_iter: usize) -> f64 {
    let d = m.nrows();
    if d == 0 {
        return 0.0;
    }
    // Deterministic start with no special alignment to the coordinate axes.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n0 = norm(&v);
    v.iter_mut().for_each(|a| *a /= n0);
    let mut est = 0.0;
    for _ in 0..max_iter {
        // Iterate with m^2 so that eigenvalues of equal magnitude and
        // opposite sign cannot make the direction oscillate.
        let w = mat_vec(m.as_ref(), &v);
        let w2 = mat_vec(m.as_ref(), &w);
        let nw2 = norm(&w2);
        if nw2 == 0.0 {
            return 0.0;
        }
        let next = (w.iter().map(|a| a * a).sum::<f64>()).sqrt();
        v = w2.iter().map(|a| a / nw2).collect();
        if (next - est).abs() <= tol * next {
            return next.max(norm(&mat_vec(m.as_ref(), &v)));
        }
        est = next;
    }
    est.max(norm(&mat_vec(m.as_ref(), &v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gram_matches_explicit_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let z = Mat::from_fn(7, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut g = Mat::zeros(4, 4);
        gram_lower_add(&mut g, z.as_ref(), 1.0);
        mirror_lower(&mut g);
        let full = product(z.as_ref().transpose(), z.as_ref());
        for i in 0..4 {
            for j in 0..4 {
                assert!((g[(i, j)] - full[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let q = haar_orthogonal(12, &mut rng);
        let qtq = product(q.as_ref().transpose(), q.as_ref());
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn power_norm_agrees_with_eigensolver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let a = Mat::from_fn(30, 30, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = Mat::from_fn(30, 30, |i, j| a[(i, j)] + a[(j, i)]);
        let eig = symmetric_eigenvalues(&s, "test").unwrap();
        let want = eig[0].abs().max(eig[eig.len() - 1].abs());
        let got = power_norm(&s, 1e-12, 100_000);
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn solve_reports_indefinite_matrix() {
        let h = Mat::from_fn(2, 2, |i, j| if i == j { -1.0 } else { 0.0 });
        match spd_solve(&h, &[1.0, 1.0], "probe") {
            Err(Error::NumericFailure {
                context,
                condition_estimate,
            }) => {
                assert_eq!(context, "probe");
                assert!(condition_estimate.is_infinite());
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
