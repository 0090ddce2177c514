//! Density operators over non-orthogonal product-wavepacket bases: partial
//! traces, the translation group average (a trace over the CM slot) and
//! entanglement quantifiers.
//!
//! An operator is `ρ = Σ C_ij |i⟩⟨j|` with `S_ij = ⟨i|j⟩`; its trace is
//! `tr(C S)`. Spectral quantities are computed in an orthonormal frame `X`
//! of the span (`X† S X = I`), where the operator matrix is `X† S C S X`.

use num_complex::Complex64;
use thiserror::Error;

use crate::gaussian::{overlap, overlap_general, raw_scale, Wavepacket};
use crate::linalg::{
    hermitian_eigenvalues, max_abs, orthonormal_frame, real, trace_norm, von_neumann_entropy, CMatrix,
    Orthogonalization,
};
use crate::partition::{Partition, ProductStateSuperposition, SlotLabel};

pub const DEFAULT_RANK_CUTOFF: f64 = 1e-12;
const HERMITICITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelationalError {
    #[error("state has no terms")]
    EmptyState,
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("cannot trace out every slot; use trace() for the scalar trace")]
    TraceAllSlots,
    #[error("expected the {expected:?} partition, found {found:?}")]
    WrongPartition { expected: Partition, found: Partition },
    #[error("coefficient matrix is not Hermitian (residual {0:.3e})")]
    NonHermitian(f64),
    #[error("operator has zero trace")]
    ZeroTrace,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Two complementary, nonempty sets of slot indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    a: Vec<usize>,
    b: Vec<usize>,
}

impl Bipartition {
    /// `a` plus its complement in `0..n_slots`.
    pub fn new(mut a: Vec<usize>, n_slots: usize) -> Result<Self, RelationalError> {
        a.sort_unstable();
        a.dedup();
        if let Some(&bad) = a.iter().find(|&&s| s >= n_slots) {
            return Err(RelationalError::InvalidCut(format!("slot {bad} out of range for {n_slots} slots")));
        }
        let b: Vec<usize> = (0..n_slots).filter(|s| !a.contains(s)).collect();
        if a.is_empty() || b.is_empty() {
            return Err(RelationalError::InvalidCut("both sides of a cut must be nonempty".into()));
        }
        Ok(Self { a, b })
    }

    pub fn side_a(&self) -> &[usize] {
        &self.a
    }

    pub fn side_b(&self) -> &[usize] {
        &self.b
    }

    pub fn n_slots(&self) -> usize {
        self.a.len() + self.b.len()
    }

    /// Every unordered bipartition of `n_slots` slots (slot 0 always in A).
    pub fn all_cuts(n_slots: usize) -> Vec<Bipartition> {
        if n_slots < 2 {
            return Vec::new();
        }
        (0u64..(1u64 << (n_slots - 1)))
            .filter_map(|mask| {
                let a: Vec<usize> =
                    std::iter::once(0).chain((1..n_slots).filter(|s| mask & (1 << (s - 1)) != 0)).collect();
                Bipartition::new(a, n_slots).ok()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketDensityOperator {
    partition: Partition,
    labels: Vec<SlotLabel>,
    basis: Vec<Vec<Wavepacket>>,
    coefficients: CMatrix,
    gram: CMatrix,
    raw_scale: f64,
}

fn slot_overlap(a: &Wavepacket, b: &Wavepacket) -> Complex64 {
    overlap(a, b).unwrap_or_else(|_| overlap_general(a, b))
}

fn slot_gram(basis: &[Vec<Wavepacket>], slot: usize) -> CMatrix {
    let n = basis.len();
    CMatrix::from_fn(n, n, |i, j| slot_overlap(&basis[i][slot], &basis[j][slot]))
}

fn product_gram(basis: &[Vec<Wavepacket>], slots: &[usize]) -> CMatrix {
    let n = basis.len();
    let mut s = CMatrix::from_element(n, n, real(1.0));
    for &slot in slots {
        s.component_mul_assign(&slot_gram(basis, slot));
    }
    s
}

impl WavepacketDensityOperator {
    pub fn new(
        partition: Partition,
        labels: Vec<SlotLabel>,
        basis: Vec<Vec<Wavepacket>>,
        coefficients: CMatrix,
    ) -> Result<Self, RelationalError> {
        if basis.is_empty() {
            return Err(RelationalError::EmptyState);
        }
        let n = basis.len();
        if coefficients.shape() != (n, n) {
            return Err(RelationalError::DimensionMismatch(format!(
                "{n} basis terms but coefficients are {:?}",
                coefficients.shape()
            )));
        }
        if let Some(bad) = basis.iter().position(|t| t.len() != labels.len()) {
            return Err(RelationalError::DimensionMismatch(format!(
                "basis term {bad} has {} factors, expected {}",
                basis[bad].len(),
                labels.len()
            )));
        }
        let scale = max_abs(&coefficients).max(f64::MIN_POSITIVE);
        let residual = max_abs(&(&coefficients - coefficients.adjoint())) / scale;
        if residual > HERMITICITY_TOLERANCE {
            return Err(RelationalError::NonHermitian(residual));
        }
        let all: Vec<usize> = (0..labels.len()).collect();
        let gram = product_gram(&basis, &all);
        Ok(Self { partition, labels, basis, coefficients, gram, raw_scale: 1.0 })
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn labels(&self) -> &[SlotLabel] {
        &self.labels
    }

    pub fn basis(&self) -> &[Vec<Wavepacket>] {
        &self.basis
    }

    pub fn coefficients(&self) -> &CMatrix {
        &self.coefficients
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn n_slots(&self) -> usize {
        self.labels.len()
    }

    pub fn slot_index(&self, label: SlotLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Scale discarded by normalizations so far; stands in for the divergent
    /// constant of δ-normalized kets and is never used downstream.
    pub fn raw_scale(&self) -> f64 {
        self.raw_scale
    }

    pub fn slot_gram(&self, slot: usize) -> CMatrix {
        slot_gram(&self.basis, slot)
    }

    /// `tr(C S)`
    pub fn trace(&self) -> f64 {
        (&self.coefficients * &self.gram).trace().re
    }

    /// Unit-trace copy; the removed factor is folded into `raw_scale`.
    pub fn normalized(&self) -> Result<Self, RelationalError> {
        let tr = self.trace();
        if !(tr.abs() > 1e-300) {
            return Err(RelationalError::ZeroTrace);
        }
        let mut out = self.clone();
        out.coefficients = &self.coefficients * real(tr.recip());
        out.raw_scale = self.raw_scale * tr;
        Ok(out)
    }

    /// Matrix of the operator in an orthonormal frame of the basis span.
    pub fn orthonormal_matrix(&self, method: Orthogonalization, cutoff: f64) -> CMatrix {
        orthonormal_frame(&self.gram, method, cutoff).operator_matrix(&self.gram, &self.coefficients)
    }

    /// Eigenvalues (ascending) in the symmetric orthonormal frame.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.orthonormal_matrix(Orthogonalization::Symmetric, DEFAULT_RANK_CUTOFF))
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(&self.eigenvalues())
    }

    /// `Tr(ρ O)` for an operator acting on one slot, given its matrix
    /// elements `⟨a|O|b⟩` between wavepackets.
    pub fn slot_expectation(&self, slot: usize, element: impl Fn(&Wavepacket, &Wavepacket) -> Complex64) -> Complex64 {
        let n = self.basis.len();
        let others: Vec<usize> = (0..self.n_slots()).filter(|&s| s != slot).collect();
        let rest = product_gram(&self.basis, &others);
        let mut total = real(0.0);
        for i in 0..n {
            for j in 0..n {
                // Tr(|i⟩⟨j| O) = ⟨j|O|i⟩
                let e = element(&self.basis[j][slot], &self.basis[i][slot]) * rest[(j, i)];
                total += self.coefficients[(i, j)] * e;
            }
        }
        total
    }

    /// Product with a fixed pure state `|w⟩⟨w|` on a new slot at `position`.
    pub fn attach_slot(&self, position: usize, label: SlotLabel, w: Wavepacket) -> Result<Self, RelationalError> {
        if position > self.n_slots() {
            return Err(RelationalError::InvalidCut(format!("cannot insert at slot {position}")));
        }
        let mut labels = self.labels.clone();
        labels.insert(position, label);
        let basis = self
            .basis
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.insert(position, w);
                t
            })
            .collect();
        let partition = if label == SlotLabel::CenterOfMass { Partition::CmRelational } else { self.partition };
        let mut out = Self::new(partition, labels, basis, self.coefficients.clone())?;
        out.raw_scale = self.raw_scale;
        Ok(out)
    }
}

/// `C = a a†` over the branch terms.
pub fn pure_to_density(state: &ProductStateSuperposition) -> Result<WavepacketDensityOperator, RelationalError> {
    if state.terms().is_empty() {
        return Err(RelationalError::EmptyState);
    }
    let a = nalgebra::DVector::from_vec(state.amplitudes());
    let coefficients = &a * a.adjoint();
    let basis = state.terms().iter().map(|t| t.factors.clone()).collect();
    WavepacketDensityOperator::new(state.partition(), state.labels().to_vec(), basis, coefficients)
}

/// `C'_ij = C_ij Π_{s traced} ⟨j_s|i_s⟩`, renormalized to unit trace. The
/// reported raw scale multiplies in `1/(b_s√π)` per traced slot.
pub fn partial_trace(
    rho: &WavepacketDensityOperator,
    traced_slots: &[usize],
) -> Result<WavepacketDensityOperator, RelationalError> {
    let mut traced = traced_slots.to_vec();
    traced.sort_unstable();
    traced.dedup();
    if let Some(&bad) = traced.iter().find(|&&s| s >= rho.n_slots()) {
        return Err(RelationalError::InvalidCut(format!("slot {bad} out of range")));
    }
    if traced.len() == rho.n_slots() {
        return Err(RelationalError::TraceAllSlots);
    }
    let contraction = product_gram(&rho.basis, &traced).transpose();
    let coefficients = rho.coefficients.component_mul(&contraction);
    let kept: Vec<usize> = (0..rho.n_slots()).filter(|s| !traced.contains(s)).collect();
    let labels = kept.iter().map(|&s| rho.labels[s]).collect();
    let basis = rho.basis.iter().map(|t| kept.iter().map(|&s| t[s]).collect()).collect();
    let removes_cm = traced.iter().any(|&s| rho.labels[s] == SlotLabel::CenterOfMass);
    let partition = if removes_cm && rho.partition == Partition::CmRelational {
        Partition::Relational
    } else {
        rho.partition
    };
    let mut out = WavepacketDensityOperator::new(partition, labels, basis, coefficients)?;
    out.raw_scale = rho.raw_scale * traced.iter().map(|&s| raw_scale(rho.basis[0][s].width())).product::<f64>();
    out.normalized()
}

/// Group average over translations, realized as the trace over the CM slot.
pub fn g_twirl(rho: &WavepacketDensityOperator) -> Result<WavepacketDensityOperator, RelationalError> {
    if rho.partition != Partition::CmRelational {
        return Err(RelationalError::WrongPartition { expected: Partition::CmRelational, found: rho.partition });
    }
    let cm = rho
        .slot_index(SlotLabel::CenterOfMass)
        .ok_or_else(|| RelationalError::InvalidCut("state has no center-of-mass slot".into()))?;
    partial_trace(rho, &[cm])
}

/// Von Neumann entropy (nats) of the reduced state on side A.
pub fn entanglement_entropy(state: &ProductStateSuperposition, cut: &Bipartition) -> Result<f64, RelationalError> {
    entanglement_entropy_with(state, cut, Orthogonalization::Symmetric)
}

pub fn entanglement_entropy_with(
    state: &ProductStateSuperposition,
    cut: &Bipartition,
    method: Orthogonalization,
) -> Result<f64, RelationalError> {
    if cut.n_slots() != state.n_slots() {
        return Err(RelationalError::InvalidCut(format!(
            "cut covers {} slots, state has {}",
            cut.n_slots(),
            state.n_slots()
        )));
    }
    let reduced = partial_trace(&pure_to_density(state)?, cut.side_b())?;
    let m = reduced.orthonormal_matrix(method, DEFAULT_RANK_CUTOFF);
    Ok(von_neumann_entropy(&hermitian_eigenvalues(&m)))
}

/// Operator matrix on the product of orthonormal frames of the two sides,
/// indexed `(a, b)` with `a` major.
fn bipartite_matrix(rho: &WavepacketDensityOperator, cut: &Bipartition) -> (CMatrix, usize, usize) {
    let proj = |slots: &[usize]| {
        let s = product_gram(&rho.basis, slots);
        orthonormal_frame(&s, Orthogonalization::Symmetric, DEFAULT_RANK_CUTOFF).projections(&s)
    };
    let pa = proj(cut.side_a());
    let pb = proj(cut.side_b());
    let (ka, kb, n) = (pa.nrows(), pb.nrows(), rho.basis.len());
    let v = CMatrix::from_fn(ka * kb, n, |row, i| pa[(row / kb, i)] * pb[(row % kb, i)]);
    (&v * &rho.coefficients * v.adjoint(), ka, kb)
}

/// `log₂ ‖ρ^{T_B}‖₁` of the normalized operator.
pub fn log_negativity(rho: &WavepacketDensityOperator, cut: &Bipartition) -> Result<f64, RelationalError> {
    if cut.n_slots() != rho.n_slots() {
        return Err(RelationalError::InvalidCut(format!(
            "cut covers {} slots, operator has {}",
            cut.n_slots(),
            rho.n_slots()
        )));
    }
    let rho = rho.normalized()?;
    let (m, ka, kb) = bipartite_matrix(&rho, cut);
    let pt = CMatrix::from_fn(ka * kb, ka * kb, |r, c| {
        let (a, b) = (r / kb, r % kb);
        let (c_, d) = (c / kb, c % kb);
        m[(a * kb + d, c_ * kb + b)]
    });
    Ok(trace_norm(&pt).log2().max(0.0))
}

/// `½‖ρ − σ‖₁` of the normalized operators, evaluated in a frame of the
/// joint span.
pub fn trace_distance(
    rho: &WavepacketDensityOperator,
    sigma: &WavepacketDensityOperator,
) -> Result<f64, RelationalError> {
    if rho.n_slots() != sigma.n_slots() {
        return Err(RelationalError::DimensionMismatch(format!(
            "{} vs {} slots",
            rho.n_slots(),
            sigma.n_slots()
        )));
    }
    let (rho, sigma) = (rho.normalized()?, sigma.normalized()?);
    let (n, m) = (rho.basis.len(), sigma.basis.len());
    let basis: Vec<Vec<Wavepacket>> = rho.basis.iter().chain(&sigma.basis).cloned().collect();
    let mut coefficients = CMatrix::zeros(n + m, n + m);
    coefficients.view_mut((0, 0), (n, n)).copy_from(&rho.coefficients);
    coefficients.view_mut((n, n), (m, m)).copy_from(&(-&sigma.coefficients));
    let joint = WavepacketDensityOperator::new(rho.partition, rho.labels.clone(), basis, coefficients)?;
    let matrix = joint.orthonormal_matrix(Orthogonalization::Symmetric, DEFAULT_RANK_CUTOFF);
    Ok(0.5 * trace_norm(&matrix))
}
