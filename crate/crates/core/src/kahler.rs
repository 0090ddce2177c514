//! Kähler triples `(G, Ω, J)` describing bosonic and fermionic Gaussian
//! states on a finite phase space.
//!
//! Every matrix is tied to a [`PhaseSpaceLayout`] that records the ordering
//! of the operator vector `ξ`. Two orderings are supported:
//!
//! * [`Ordering::PositionMomentumBlocked`]: `ξ = (q₁,…,q_N, p₁,…,p_N)`, all
//!   components Hermitian.
//! * [`Ordering::FockPaired`]: `ξ = (a₁, a₁†, a₂, a₂†, …)`.
//!
//! The two are related by `ξ_fock = M ξ_blocked` with
//! `a_k = (q_k + i p_k)/√2`. Bilinear forms with upper indices (`G`, `Ω`)
//! transform as `M X Mᵀ`, the complex structure as `M J M⁻¹`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, max_abs, real, CMatrix, I};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KahlerError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("symplectic form is singular")]
    SingularSymplecticForm,
    #[error("metric is singular")]
    SingularMetric,
    #[error("-G·Ω⁻¹ and Ω·G⁻¹ disagree by {residual:.3e}; inputs are not a compatible pair")]
    FormulasDisagree { residual: f64 },
    #[error("metric is not symmetric (residual {0:.3e})")]
    MetricNotSymmetric(f64),
    #[error("metric is not positive definite in the real frame")]
    MetricNotPositive,
    #[error("symplectic form is not antisymmetric (residual {0:.3e})")]
    SymplecticNotAntisymmetric(f64),
    #[error("J² + I has max entry {0:.3e}; G and Ω are not Kähler compatible")]
    NotCompatible(f64),
    #[error("fermionic metric must be the canonical form for the recorded ordering (residual {0:.3e})")]
    NonCanonicalFermionMetric(f64),
    #[error("bosonic symplectic form must be the canonical form for the recorded ordering (residual {0:.3e})")]
    NonCanonicalBosonForm(f64),
    #[error("number of modes must be positive")]
    NoModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    PositionMomentumBlocked,
    FockPaired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistics {
    Boson,
    Fermion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpaceLayout {
    n_modes: usize,
    ordering: Ordering,
    statistics: Statistics,
}

impl PhaseSpaceLayout {
    pub fn new(n_modes: usize, ordering: Ordering, statistics: Statistics) -> Result<Self, KahlerError> {
        if n_modes == 0 {
            return Err(KahlerError::NoModes);
        }
        Ok(Self { n_modes, ordering, statistics })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    /// `M` such that `ξ_self = M ξ_blocked`.
    pub fn from_blocked(&self) -> CMatrix {
        let n = self.n_modes;
        match self.ordering {
            Ordering::PositionMomentumBlocked => CMatrix::identity(2 * n, 2 * n),
            Ordering::FockPaired => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let mut m = CMatrix::zeros(2 * n, 2 * n);
                for k in 0..n {
                    m[(2 * k, k)] = real(s);
                    m[(2 * k, n + k)] = c(0.0, s);
                    m[(2 * k + 1, k)] = real(s);
                    m[(2 * k + 1, n + k)] = c(0.0, -s);
                }
                m
            }
        }
    }

    /// Re-express a form with upper indices (`G`, `Ω`) given in this
    /// layout in the blocked ordering.
    pub fn form_to_blocked(&self, form: &CMatrix) -> CMatrix {
        let m_inv = self
            .from_blocked()
            .try_inverse()
            .expect("layout conversion is invertible");
        &m_inv * form * m_inv.transpose()
    }

    pub fn form_from_blocked(&self, form: &CMatrix) -> CMatrix {
        let m = self.from_blocked();
        &m * form * m.transpose()
    }

    /// Index permutation `a ↔ a†` applied when conjugating a linear
    /// functional; identity for the Hermitian blocked ordering.
    fn adjoint_partner(&self, index: usize) -> usize {
        match self.ordering {
            Ordering::PositionMomentumBlocked => index,
            Ordering::FockPaired => index ^ 1,
        }
    }

    /// Canonical symplectic form `[[0, I], [-I, 0]]` (bosons), expressed in
    /// this ordering.
    pub fn canonical_symplectic(&self) -> CMatrix {
        let n = self.n_modes;
        let mut blocked = CMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            blocked[(k, n + k)] = real(1.0);
            blocked[(n + k, k)] = real(-1.0);
        }
        self.form_from_blocked(&blocked)
    }

    /// Canonical fermionic metric (`I` in the blocked ordering), expressed
    /// in this ordering.
    pub fn canonical_metric(&self) -> CMatrix {
        let n = self.n_modes;
        self.form_from_blocked(&CMatrix::identity(2 * n, 2 * n))
    }
}

/// `J = -G·Ω⁻¹`, checked against `Ω·G⁻¹`.
pub fn complex_structure(g: &CMatrix, omega: &CMatrix, tol: f64) -> Result<CMatrix, KahlerError> {
    if !g.is_square() || !omega.is_square() || g.shape() != omega.shape() {
        return Err(KahlerError::DimensionMismatch(format!(
            "G is {:?}, Ω is {:?}",
            g.shape(),
            omega.shape()
        )));
    }
    let omega_inv = omega
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.is_finite()))
        .ok_or(KahlerError::SingularSymplecticForm)?;
    let g_inv = g
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.is_finite()))
        .ok_or(KahlerError::SingularMetric)?;
    let j = -(g * omega_inv);
    let alt = omega * g_inv;
    let residual = max_abs(&(&j - alt));
    if residual > tol {
        return Err(KahlerError::FormulasDisagree { residual });
    }
    Ok(j)
}

/// True iff `‖J² + I‖_max ≤ tol`.
pub fn check_kahler_compatible(j: &CMatrix, tol: f64) -> bool {
    if !j.is_square() {
        return false;
    }
    let n = j.nrows();
    max_abs(&(j * j + CMatrix::identity(n, n))) <= tol
}

#[derive(Debug, Clone, PartialEq)]
pub struct KahlerStructure {
    layout: PhaseSpaceLayout,
    g: CMatrix,
    omega: CMatrix,
    j: CMatrix,
    one_point: Option<DVector<f64>>,
}

impl KahlerStructure {
    /// Validate `(G, Ω)` and derive `J`. For fermions the one-point function
    /// is identically zero and `one_point` is ignored.
    pub fn new(
        layout: PhaseSpaceLayout,
        g: CMatrix,
        omega: CMatrix,
        one_point: Option<DVector<f64>>,
        tol: f64,
    ) -> Result<Self, KahlerError> {
        let d = layout.dim();
        if g.shape() != (d, d) || omega.shape() != (d, d) {
            return Err(KahlerError::DimensionMismatch(format!(
                "layout needs {d}x{d}, got G {:?} and Ω {:?}",
                g.shape(),
                omega.shape()
            )));
        }
        let sym = max_abs(&(&g - g.transpose()));
        if sym > tol {
            return Err(KahlerError::MetricNotSymmetric(sym));
        }
        let anti = max_abs(&(&omega + omega.transpose()));
        if anti > tol {
            return Err(KahlerError::SymplecticNotAntisymmetric(anti));
        }
        let g_real = layout.form_to_blocked(&g);
        if g_real.iter().any(|z| z.im.abs() > tol) {
            return Err(KahlerError::MetricNotPositive);
        }
        let g_re: DMatrix<f64> = g_real.map(|z| z.re);
        let g_re = (&g_re + g_re.transpose()) * 0.5;
        if g_re.cholesky().is_none() {
            return Err(KahlerError::MetricNotPositive);
        }
        match layout.statistics() {
            Statistics::Fermion => {
                let r = max_abs(&(&g - layout.canonical_metric()));
                if r > tol {
                    return Err(KahlerError::NonCanonicalFermionMetric(r));
                }
            }
            Statistics::Boson => {
                let r = max_abs(&(&omega - layout.canonical_symplectic()));
                if r > tol {
                    return Err(KahlerError::NonCanonicalBosonForm(r));
                }
            }
        }
        let j = complex_structure(&g, &omega, tol)?;
        let n = j.nrows();
        let residual = max_abs(&(&j * &j + CMatrix::identity(n, n)));
        if residual > tol {
            return Err(KahlerError::NotCompatible(residual));
        }
        let one_point = match layout.statistics() {
            Statistics::Fermion => None,
            Statistics::Boson => {
                let z = one_point.unwrap_or_else(|| DVector::zeros(d));
                if z.len() != d {
                    return Err(KahlerError::DimensionMismatch(format!(
                        "one-point function has length {}, expected {d}",
                        z.len()
                    )));
                }
                Some(z)
            }
        };
        Ok(Self { layout, g, omega, j, one_point })
    }

    /// Bosonic ground state of `N` identical oscillators with frequency `ω`
    /// in the blocked ordering: `G = diag(1/ω,…, ω,…)`.
    pub fn bosonic_vacuum(n_modes: usize, omega: f64) -> Result<Self, KahlerError> {
        let layout = PhaseSpaceLayout::new(n_modes, Ordering::PositionMomentumBlocked, Statistics::Boson)?;
        let mut g = CMatrix::zeros(2 * n_modes, 2 * n_modes);
        for k in 0..n_modes {
            g[(k, k)] = real(1.0 / omega);
            g[(n_modes + k, n_modes + k)] = real(omega);
        }
        let sympl = layout.canonical_symplectic();
        Self::new(layout, g, sympl, None, DEFAULT_TOLERANCE)
    }

    pub fn layout(&self) -> PhaseSpaceLayout {
        self.layout
    }

    pub fn metric(&self) -> &CMatrix {
        &self.g
    }

    pub fn symplectic_form(&self) -> &CMatrix {
        &self.omega
    }

    pub fn complex_structure(&self) -> &CMatrix {
        &self.j
    }

    /// `z^a`; always zero for fermions.
    pub fn one_point(&self) -> DVector<f64> {
        self.one_point.clone().unwrap_or_else(|| DVector::zeros(self.layout.dim()))
    }
}

/// `P = ½(I + iJ)`: the rows of `P·(ξ - z)` annihilate the Gaussian state.
pub fn gaussianity_projector(k: &KahlerStructure) -> CMatrix {
    let n = k.j.nrows();
    (CMatrix::identity(n, n) + &k.j * I) * real(0.5)
}

/// Check that the rows of `v` (`â_i = v_ia ξ^a`) define canonical ladder
/// operators for the statistics of `k`.
///
/// Bosons: `Ω v vᵀ = 0` and `Ω v̄ vᵀ = i·I`; fermions: `G v vᵀ = 0` and
/// `G v̄ vᵀ = I`, where `v̄` is the coefficient vector of `â†`. In the blocked
/// ordering `v̄ = v*`; in the Fock-paired ordering conjugation also swaps the
/// `a`/`a†` slots since those components are not Hermitian.
pub fn mode_transformation_check(v: &CMatrix, k: &KahlerStructure, tol: f64) -> Result<bool, KahlerError> {
    let layout = k.layout();
    if v.ncols() != layout.dim() || v.nrows() == 0 || v.nrows() > layout.n_modes() {
        return Err(KahlerError::DimensionMismatch(format!(
            "v must be (≤{})x{}, got {:?}",
            layout.n_modes(),
            layout.dim(),
            v.shape()
        )));
    }
    let rows = v.nrows();
    let v_bar = CMatrix::from_fn(rows, layout.dim(), |i, a| v[(i, layout.adjoint_partner(a))].conj());
    let (form, target) = match layout.statistics() {
        Statistics::Boson => (&k.omega, I),
        Statistics::Fermion => (&k.g, real(1.0)),
    };
    let first = v * form * v.transpose();
    let second = &v_bar * form * v.transpose();
    let expected = CMatrix::identity(rows, rows) * target;
    Ok(max_abs(&first) <= tol && max_abs(&(second - expected)) <= tol)
}

/// Quadratic Hamiltonian `Ĥ = ½ h_ab ξ^a ξ^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    h: CMatrix,
    frequency: f64,
}

impl HamiltonianMatrix {
    pub fn new(h: CMatrix, frequency: f64, tol: f64) -> Result<Self, KahlerError> {
        if !h.is_square() || !h.nrows().is_multiple_of(2) {
            return Err(KahlerError::DimensionMismatch(format!("h is {:?}", h.shape())));
        }
        if !(frequency > 0.0) {
            return Err(KahlerError::DimensionMismatch(format!("frequency must be positive, got {frequency}")));
        }
        let herm = max_abs(&(&h - h.adjoint()));
        if herm > tol {
            return Err(KahlerError::DimensionMismatch(format!("h is not Hermitian (residual {herm:.3e})")));
        }
        Ok(Self { h, frequency })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }
}

/// The single-mode fermionic oscillator `Ĥ = ω(a†a − aa†)/2` in the
/// Fock-paired ordering `ξ = (a, a†)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionicOscillator {
    pub hamiltonian: HamiltonianMatrix,
    pub ground: KahlerStructure,
    pub excited: KahlerStructure,
}

impl FermionicOscillator {
    pub fn new(omega: f64) -> Result<Self, KahlerError> {
        let layout = PhaseSpaceLayout::new(1, Ordering::FockPaired, Statistics::Fermion)?;
        let h = CMatrix::from_row_slice(2, 2, &[real(0.0), c(0.0, omega), c(0.0, -omega), real(0.0)]);
        let hamiltonian = HamiltonianMatrix::new(h, omega, DEFAULT_TOLERANCE)?;
        let g = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        let omega_ground = CMatrix::from_row_slice(2, 2, &[real(0.0), c(0.0, -1.0), c(0.0, 1.0), real(0.0)]);
        let omega_excited = -omega_ground.clone();
        let ground = KahlerStructure::new(layout, g.clone(), omega_ground, None, DEFAULT_TOLERANCE)?;
        let excited = KahlerStructure::new(layout, g, omega_excited, None, DEFAULT_TOLERANCE)?;
        Ok(Self { hamiltonian, ground, excited })
    }
}

/// Convenience: a complex matrix from nested rows.
pub fn cmatrix(rows: &[&[Complex64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| rows[i][j])
}
