//! Normed division algebras via Cayley–Dickson doubling.
//!
//! Elements are real slices of length 1, 2, 4 or 8. A pair `(a, b)` doubles
//! to `(a, b)(c, d) = (ac - d̄b, da + bc̄)` with `conj(a, b) = (ā, -b)`.

use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivisionAlgebra {
    Complex,
    Quaternion,
    Octonion,
}

impl DivisionAlgebra {
    pub fn dim(self) -> usize {
        match self {
            Self::Complex => 2,
            Self::Quaternion => 4,
            Self::Octonion => 8,
        }
    }
}

pub fn conjugate(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for v in out.iter_mut().skip(1) {
        *v = -*v;
    }
    out
}

pub fn multiply(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n == 1 {
        return vec![x[0] * y[0]];
    }
    assert!(n.is_power_of_two(), "Cayley-Dickson elements have power-of-two length");
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let (c, d) = y.split_at(h);
    let ac = multiply(a, c);
    let db = multiply(&conjugate(d), b);
    let da = multiply(d, a);
    let bc = multiply(b, &conjugate(c));
    let mut out = Vec::with_capacity(n);
    out.extend(ac.iter().zip(&db).map(|(p, q)| p - q));
    out.extend(da.iter().zip(&bc).map(|(p, q)| p + q));
    out
}

/// Matrix of `y ↦ c y`.
pub fn left_multiplication(c: &[f64]) -> Matrix {
    let n = c.len();
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        m.set_column(j, &Vector::from_vec(multiply(c, &e)));
    }
    m
}
