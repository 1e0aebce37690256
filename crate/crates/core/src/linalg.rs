//! Small dense linear-algebra helpers shared by the geometry modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GeometryError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Random stream used by every sampling loop.
pub type SampleRng = ChaCha8Rng;

/// Independent, reproducible stream for sample `index` under `seed`.
pub fn rng_for(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

pub fn gaussian_vector(rng: &mut SampleRng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn unit_vector(dim: usize, index: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    v[index] = 1.0;
    v
}

/// Orthonormal basis of the range of an orthogonal projector.
///
/// Columns `P e_i` are orthonormalized greedily, always taking the column
/// with the largest remaining residual (ties go to the lowest index), so the
/// basis is a deterministic function of the projector.
pub fn range_basis(projector: &Matrix, rank: usize) -> Matrix {
    let n = projector.nrows();
    let mut residuals: Vec<Vector> = (0..projector.ncols())
        .map(|j| projector.column(j).into_owned())
        .collect();
    let mut basis = Matrix::zeros(n, rank);
    for k in 0..rank {
        let (best, _) = residuals
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (j, r)| {
                let norm = r.norm();
                if norm > acc.1 + 1e-12 {
                    (j, norm)
                } else {
                    acc
                }
            });
        let q = &residuals[best] / residuals[best].norm();
        for r in residuals.iter_mut() {
            let c = q.dot(r);
            r.axpy(-c, &q, 1.0);
        }
        basis.set_column(k, &q);
    }
    basis
}

/// Orthogonal projector onto the column span of `q` (columns orthonormal).
pub fn projector_from_orthonormal(q: &Matrix) -> Matrix {
    q * q.transpose()
}

/// Singular values (descending) together with right singular vectors as
/// columns. Wide matrices are padded with zero rows so that a full set of
/// right singular vectors is always available.
pub fn full_svd(a: &Matrix) -> (Vec<f64>, Matrix) {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = Matrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = Matrix::zeros(n, order.len());
    for (k, &i) in order.iter().enumerate() {
        v.set_column(k, &v_t.row(i).transpose());
    }
    (values, v)
}

pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Numerical rank: singular values above `rel_tol * max(1, σ_max)`.
pub fn numerical_rank(values: &[f64], abs_tol: f64) -> usize {
    values.iter().filter(|&&s| s > abs_tol).count()
}

/// Split the domain of `a` into row space and null space using a threshold
/// relative to the largest singular value. Returns `(row_basis, null_basis)`.
pub fn row_and_null_space(a: &Matrix, rel_tol: f64) -> (Matrix, Matrix) {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (Matrix::zeros(n, 0), Matrix::identity(n, n));
    }
    let (values, v) = full_svd(a);
    let smax = values.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        values.iter().filter(|&&s| s > rel_tol * smax).count()
    };
    let row = v.columns(0, rank).into_owned();
    let null = v.columns(rank, n - rank).into_owned();
    (row, null)
}

/// Solve a symmetric positive-definite system, reporting ill-conditioning.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or(GeometryError::IllConditioned { condition: f64::INFINITY })?;
    Ok(chol.solve(b))
}

/// Condition number of a symmetric positive semi-definite matrix.
pub fn spd_condition(a: &Matrix) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm()
}

/// Block-diagonal assembly of two square blocks.
pub fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
    let (n1, n2) = (a.nrows(), b.nrows());
    let mut out = Matrix::zeros(n1 + n2, n1 + n2);
    out.view_mut((0, 0), (n1, n1)).copy_from(a);
    out.view_mut((n1, n1), (n2, n2)).copy_from(b);
    out
}

pub fn concat(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

pub fn split(v: &Vector, first: usize) -> (Vector, Vector) {
    (
        v.rows(0, first).into_owned(),
        v.rows(first, v.len() - first).into_owned(),
    )
}
