//! Small dense complex linear algebra helpers shared by the physics modules.
//!
//! Everything here works on `DMatrix<Complex64>`; the matrices involved are
//! tiny (a handful of branches, at most a few hundred Fock levels) so dense
//! routines are fine.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(real)
}

/// `(m + m†) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * real(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending. The input is hermitized first.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Eigen-decomposition of a Hermitian matrix with eigenpairs sorted by
/// descending eigenvalue.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// How a non-orthogonal basis is mapped to an orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Orthogonalization {
    /// Löwdin `S^{-1/2}`; falls back to canonical orthogonalization
    /// `U_k Λ_k^{-1/2}` when small Gram eigenvalues are projected out.
    #[default]
    Symmetric,
    /// Modified Gram–Schmidt in the Gram metric, visiting basis vectors in
    /// the given order.
    GramSchmidt { reversed: bool },
}

/// Columns of `transform` are the coefficients of orthonormal vectors in the
/// original (non-orthogonal) basis: `transform† · gram · transform = I`.
#[derive(Debug, Clone)]
pub struct OrthonormalFrame {
    pub transform: CMatrix,
    /// Number of basis directions dropped because they were (numerically)
    /// linearly dependent.
    pub dropped: usize,
}

impl OrthonormalFrame {
    pub fn rank(&self) -> usize {
        self.transform.ncols()
    }

    /// Matrix of the operator `Σ C_ij |i⟩⟨j|` in this frame: `X† S C S X`.
    pub fn operator_matrix(&self, gram: &CMatrix, coefficients: &CMatrix) -> CMatrix {
        let sx = gram * &self.transform;
        sx.adjoint() * coefficients * sx
    }

    /// Components `⟨e_a|i⟩` of every original basis vector in this frame.
    pub fn projections(&self, gram: &CMatrix) -> CMatrix {
        self.transform.adjoint() * gram
    }
}

pub fn orthonormal_frame(gram: &CMatrix, method: Orthogonalization, cutoff: f64) -> OrthonormalFrame {
    let frame = match method {
        Orthogonalization::Symmetric => symmetric_frame(gram, cutoff),
        Orthogonalization::GramSchmidt { reversed } => gram_schmidt_frame(gram, reversed, cutoff),
    };
    if frame.dropped > 0 {
        log::debug!(
            "gram matrix of size {} reduced to rank {} ({} direction(s) projected out)",
            gram.nrows(),
            frame.rank(),
            frame.dropped
        );
    }
    frame
}

fn symmetric_frame(gram: &CMatrix, cutoff: f64) -> OrthonormalFrame {
    let n = gram.nrows();
    let (values, vectors) = hermitian_eigen(gram);
    let kept: Vec<usize> = (0..n).filter(|&k| values[k] > cutoff).collect();
    let dropped = n - kept.len();
    let canonical = CMatrix::from_fn(n, kept.len(), |i, j| {
        vectors[(i, kept[j])] * real(values[kept[j]].sqrt().recip())
    });
    let transform = if dropped == 0 {
        // S^{-1/2} = U Λ^{-1/2} U†
        &canonical * vectors.adjoint()
    } else {
        canonical
    };
    OrthonormalFrame { transform, dropped }
}

fn gram_schmidt_frame(gram: &CMatrix, reversed: bool, cutoff: f64) -> OrthonormalFrame {
    let n = gram.nrows();
    let order: Vec<usize> = if reversed { (0..n).rev().collect() } else { (0..n).collect() };
    let mut columns: Vec<CVector> = Vec::with_capacity(n);
    for &k in &order {
        let mut v = CVector::zeros(n);
        v[k] = real(1.0);
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for q in &columns {
                let proj = (q.adjoint() * gram * &v)[(0, 0)];
                v -= q * proj;
            }
        }
        let norm2 = (v.adjoint() * gram * &v)[(0, 0)].re;
        if norm2 > cutoff * gram[(k, k)].re.max(f64::MIN_POSITIVE) {
            columns.push(v / real(norm2.sqrt()));
        }
    }
    let dropped = n - columns.len();
    let transform = if columns.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&columns)
    };
    OrthonormalFrame { transform, dropped }
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Von Neumann entropy (nats) of a spectrum; entries below 1e-15 contribute 0.
pub fn von_neumann_entropy(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&p| p > 1e-15)
        .map(|&p| -p * p.ln())
        .sum()
}

pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
