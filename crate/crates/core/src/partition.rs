//! External and center-of-mass/relational partitions of an N-particle
//! system, and pure states written as superpositions of product
//! wavepackets.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::{overlap, overlap_general, GaussianError, Wavepacket};
use crate::linalg::{max_abs_real, real, CMatrix};

pub const SYMPLECTIC_TOLERANCE: f64 = 1e-13;
pub const COINCIDENCE_THRESHOLD: f64 = 1.0 - 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("mass {index} must be positive and finite, got {value}")]
    NonPositiveMass { index: usize, value: f64 },
    #[error("at least one particle is required")]
    NoParticles,
    #[error("reference particle {index} out of range for {n} particles")]
    InvalidReference { index: usize, n: usize },
    #[error("expected a state in the {expected:?} partition, found {found:?}")]
    PartitionMismatch { expected: Partition, found: Partition },
    #[error("term {term} has {found} factors, expected {expected}")]
    FactorCountMismatch { term: usize, expected: usize, found: usize },
    #[error("state has no terms")]
    EmptyState,
    #[error("particle {0} has no branches")]
    NoBranches(usize),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("{0} particles configured but {1} branch lists given")]
    ParticleCountMismatch(usize, usize),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    External,
    CmRelational,
    /// CM slot removed by the group average.
    Relational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotLabel {
    Particle(usize),
    CenterOfMass,
    Relative { particle: usize, reference: usize },
}

impl std::fmt::Display for SlotLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // 1-based particle numbers in user-facing labels
        match self {
            SlotLabel::Particle(k) => write!(f, "x{}", k + 1),
            SlotLabel::CenterOfMass => write!(f, "cm"),
            SlotLabel::Relative { particle, reference } => write!(f, "x{}|{}", particle + 1, reference + 1),
        }
    }
}

/// Linear symplectic map `T = diag(T_x, T_p)` from external `(x, p)` to
/// `(x_cm, x_{i|r}…, p_cm, p_{i|r}…)` in the blocked ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMap {
    masses: Vec<f64>,
    reference: usize,
    tx: DMatrix<f64>,
    tp: DMatrix<f64>,
    tx_inv: DMatrix<f64>,
    tp_inv: DMatrix<f64>,
}

fn validate_masses(masses: &[f64]) -> Result<(), PartitionError> {
    if masses.is_empty() {
        return Err(PartitionError::NoParticles);
    }
    for (index, &value) in masses.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(PartitionError::NonPositiveMass { index, value });
        }
    }
    Ok(())
}

/// Map with particle 1 (index 0) as the relational reference.
pub fn build_partition_map(masses: &[f64]) -> Result<PartitionMap, PartitionError> {
    PartitionMap::with_reference(masses, 0)
}

impl PartitionMap {
    pub fn with_reference(masses: &[f64], reference: usize) -> Result<Self, PartitionError> {
        validate_masses(masses)?;
        let n = masses.len();
        if reference >= n {
            return Err(PartitionError::InvalidReference { index: reference, n });
        }
        let total: f64 = masses.iter().sum();
        let fractions: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let mut tx = DMatrix::zeros(n, n);
        let mut tp = DMatrix::zeros(n, n);
        for k in 0..n {
            tx[(0, k)] = fractions[k];
            tp[(0, k)] = 1.0;
        }
        for (row, particle) in (0..n).filter(|&k| k != reference).enumerate() {
            let r = row + 1;
            tx[(r, particle)] = 1.0;
            tx[(r, reference)] = -1.0;
            for k in 0..n {
                tp[(r, k)] = -fractions[particle];
            }
            tp[(r, particle)] += 1.0;
        }
        Self::from_blocks(masses.to_vec(), reference, tx, tp)
    }

    /// Arbitrary block-diagonal map; no canonicity check is made here (see
    /// [`check_canonical`]).
    pub fn from_blocks(
        masses: Vec<f64>,
        reference: usize,
        tx: DMatrix<f64>,
        tp: DMatrix<f64>,
    ) -> Result<Self, PartitionError> {
        validate_masses(&masses)?;
        let n = masses.len();
        if tx.shape() != (n, n) || tp.shape() != (n, n) {
            return Err(PartitionError::ParticleCountMismatch(n, tx.nrows()));
        }
        let tx_inv = tx.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        let tp_inv = tp.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        Ok(Self { masses, reference, tx, tp, tx_inv, tp_inv })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass_fractions(&self) -> Vec<f64> {
        let total: f64 = self.masses.iter().sum();
        self.masses.iter().map(|m| m / total).collect()
    }

    pub fn n_particles(&self) -> usize {
        self.masses.len()
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn position_block(&self) -> &DMatrix<f64> {
        &self.tx
    }

    pub fn momentum_block(&self) -> &DMatrix<f64> {
        &self.tp
    }

    /// Full `2N×2N` matrix in the blocked ordering.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_particles();
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        t.view_mut((0, 0), (n, n)).copy_from(&self.tx);
        t.view_mut((n, n), (n, n)).copy_from(&self.tp);
        t
    }

    /// `‖T Ω Tᵀ − Ω‖_max`
    pub fn symplectic_residual(&self) -> f64 {
        let n = self.n_particles();
        let mut omega = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            omega[(k, n + k)] = 1.0;
            omega[(n + k, k)] = -1.0;
        }
        let t = self.matrix();
        max_abs_real(&(&t * &omega * t.transpose() - omega))
    }

    pub fn slot_labels(&self) -> Vec<SlotLabel> {
        let mut labels = vec![SlotLabel::CenterOfMass];
        labels.extend(
            (0..self.n_particles())
                .filter(|&k| k != self.reference)
                .map(|particle| SlotLabel::Relative { particle, reference: self.reference }),
        );
        labels
    }

    /// Position covariance `T_x Σ T_xᵀ` of the transformed slots for
    /// independent particles with variances `b_k²/2`.
    pub fn position_covariance(&self, widths: &[f64]) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            widths.len(),
            widths.iter().map(|b| 0.5 * b * b),
        ));
        &self.tx * sigma * self.tx.transpose()
    }

    /// Correlation matrix of the transformed slot positions; off-diagonal
    /// entries are what the product approximation discards.
    pub fn width_correlation(&self, widths: &[f64]) -> DMatrix<f64> {
        let cov = self.position_covariance(widths);
        let n = cov.nrows();
        DMatrix::from_fn(n, n, |i, j| cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt())
    }

    fn map_factors(
        &self,
        factors: &[Wavepacket],
        x: &DMatrix<f64>,
        p: &DMatrix<f64>,
    ) -> Result<Vec<Wavepacket>, PartitionError> {
        let n = self.n_particles();
        let centers = x * nalgebra::DVector::from_iterator(n, factors.iter().map(|w| w.center()));
        let kicks = p * nalgebra::DVector::from_iterator(n, factors.iter().map(|w| w.momentum_kick()));
        let variances: Vec<f64> = factors.iter().map(|w| 0.5 * w.width().powi(2)).collect();
        (0..n)
            .map(|s| {
                let var: f64 = (0..n).map(|k| x[(s, k)] * x[(s, k)] * variances[k]).sum();
                Ok(Wavepacket::with_width(centers[s], kicks[s], (2.0 * var).sqrt())?)
            })
            .collect()
    }
}

/// True iff `T Ω Tᵀ = Ω` to 1e-13.
pub fn check_canonical(map: &PartitionMap) -> bool {
    map.symplectic_residual() <= SYMPLECTIC_TOLERANCE
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub amplitude: Complex64,
    pub factors: Vec<Wavepacket>,
}

/// Pure state `Σ_i a_i ⊗_s |f_is⟩`, unit norm under the Gram metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductStateSuperposition {
    partition: Partition,
    labels: Vec<SlotLabel>,
    terms: Vec<Term>,
}

fn slot_overlap(a: &Wavepacket, b: &Wavepacket) -> Complex64 {
    overlap(a, b).unwrap_or_else(|_| overlap_general(a, b))
}

impl ProductStateSuperposition {
    /// Builds and normalizes the state.
    pub fn new(partition: Partition, labels: Vec<SlotLabel>, terms: Vec<Term>) -> Result<Self, PartitionError> {
        if terms.is_empty() {
            return Err(PartitionError::EmptyState);
        }
        for (term, t) in terms.iter().enumerate() {
            if t.factors.len() != labels.len() {
                return Err(PartitionError::FactorCountMismatch {
                    term,
                    expected: labels.len(),
                    found: t.factors.len(),
                });
            }
        }
        let mut state = Self { partition, labels, terms };
        let norm2 = state.norm_squared();
        if !(norm2 > 1e-300) {
            return Err(PartitionError::ZeroNorm);
        }
        let scale = norm2.sqrt().recip();
        for t in &mut state.terms {
            t.amplitude *= scale;
        }
        Ok(state)
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn labels(&self) -> &[SlotLabel] {
        &self.labels
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_slots(&self) -> usize {
        self.labels.len()
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.terms.iter().map(|t| t.amplitude).collect()
    }

    /// `S_ij = ⟨f_is|f_js⟩` for a single slot.
    pub fn slot_gram(&self, slot: usize) -> CMatrix {
        let n = self.terms.len();
        CMatrix::from_fn(n, n, |i, j| slot_overlap(&self.terms[i].factors[slot], &self.terms[j].factors[slot]))
    }

    /// Gram matrix of the product terms.
    pub fn gram(&self) -> CMatrix {
        let n = self.terms.len();
        let mut s = CMatrix::from_element(n, n, real(1.0));
        for slot in 0..self.n_slots() {
            s.component_mul_assign(&self.slot_gram(slot));
        }
        s
    }

    pub fn norm_squared(&self) -> f64 {
        let a = nalgebra::DVector::from_vec(self.amplitudes());
        a.dotc(&(self.gram() * &a)).re
    }
}

/// Per-particle branch superposition `Σ_j a_kj |χ_{x_kj}⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    masses: Vec<f64>,
    omega: f64,
    branches: Vec<Vec<(Complex64, f64)>>,
}

impl ParticleConfig {
    /// Amplitudes of every particle are normalized under its own Gram
    /// metric.
    pub fn new(masses: Vec<f64>, omega: f64, branches: Vec<Vec<(Complex64, f64)>>) -> Result<Self, PartitionError> {
        validate_masses(&masses)?;
        if masses.len() != branches.len() {
            return Err(PartitionError::ParticleCountMismatch(masses.len(), branches.len()));
        }
        let mut normalized = Vec::with_capacity(branches.len());
        for (k, list) in branches.into_iter().enumerate() {
            if list.is_empty() {
                return Err(PartitionError::NoBranches(k));
            }
            let packets = list
                .iter()
                .map(|&(_, x)| Wavepacket::new(x, 0.0, omega))
                .collect::<Result<Vec<_>, _>>()?;
            let mut norm2 = 0.0;
            for (i, (ai, _)) in list.iter().enumerate() {
                for (j, (aj, _)) in list.iter().enumerate() {
                    norm2 += (ai.conj() * aj * slot_overlap(&packets[i], &packets[j])).re;
                }
            }
            if !(norm2 > 1e-300) {
                return Err(PartitionError::ZeroNorm);
            }
            let scale = norm2.sqrt().recip();
            normalized.push(list.into_iter().map(|(a, x)| (a * scale, x)).collect());
        }
        Ok(Self { masses, omega, branches: normalized })
    }

    /// Equal-amplitude branches for every particle.
    pub fn equal_weights(masses: Vec<f64>, omega: f64, centers: Vec<Vec<f64>>) -> Result<Self, PartitionError> {
        let branches = centers
            .into_iter()
            .map(|list| list.into_iter().map(|x| (real(1.0), x)).collect())
            .collect();
        Self::new(masses, omega, branches)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n_particles(&self) -> usize {
        self.masses.len()
    }

    pub fn branches(&self) -> &[Vec<(Complex64, f64)>] {
        &self.branches
    }

    /// Expands the tensor product of per-particle superpositions; terms are
    /// ordered with particle 1's branch index most significant.
    pub fn external_state(&self) -> Result<ProductStateSuperposition, PartitionError> {
        let mut terms = vec![Term { amplitude: real(1.0), factors: Vec::new() }];
        for list in &self.branches {
            let mut next = Vec::with_capacity(terms.len() * list.len());
            for t in &terms {
                for &(a, x) in list {
                    let mut factors = t.factors.clone();
                    factors.push(Wavepacket::new(x, 0.0, self.omega)?);
                    next.push(Term { amplitude: t.amplitude * a, factors });
                }
            }
            terms = next;
        }
        let labels = (0..self.n_particles()).map(SlotLabel::Particle).collect();
        ProductStateSuperposition::new(Partition::External, labels, terms)
    }
}

/// Remap every branch through `T`. Centers and kicks transform exactly; each
/// slot gets the marginal width of the transformed covariance (product
/// approximation, see [`PartitionMap::width_correlation`]).
pub fn to_cm_relational(
    state: &ProductStateSuperposition,
    map: &PartitionMap,
) -> Result<ProductStateSuperposition, PartitionError> {
    expect_partition(state, Partition::External)?;
    check_slots(state, map)?;
    let terms = state
        .terms
        .iter()
        .map(|t| {
            Ok(Term { amplitude: t.amplitude, factors: map.map_factors(&t.factors, &map.tx, &map.tp)? })
        })
        .collect::<Result<Vec<_>, PartitionError>>()?;
    ProductStateSuperposition::new(Partition::CmRelational, map.slot_labels(), terms)
}

/// Inverse of [`to_cm_relational`] on centers and kicks.
pub fn to_external(
    state: &ProductStateSuperposition,
    map: &PartitionMap,
) -> Result<ProductStateSuperposition, PartitionError> {
    expect_partition(state, Partition::CmRelational)?;
    check_slots(state, map)?;
    let terms = state
        .terms
        .iter()
        .map(|t| {
            Ok(Term {
                amplitude: t.amplitude,
                factors: map.map_factors(&t.factors, &map.tx_inv, &map.tp_inv)?,
            })
        })
        .collect::<Result<Vec<_>, PartitionError>>()?;
    let labels = (0..map.n_particles()).map(SlotLabel::Particle).collect();
    ProductStateSuperposition::new(Partition::External, labels, terms)
}

fn expect_partition(state: &ProductStateSuperposition, expected: Partition) -> Result<(), PartitionError> {
    if state.partition != expected {
        return Err(PartitionError::PartitionMismatch { expected, found: state.partition });
    }
    Ok(())
}

fn check_slots(state: &ProductStateSuperposition, map: &PartitionMap) -> Result<(), PartitionError> {
    if state.n_slots() != map.n_particles() {
        return Err(PartitionError::FactorCountMismatch {
            term: 0,
            expected: map.n_particles(),
            found: state.n_slots(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotDistinctness {
    pub label: SlotLabel,
    /// `|⟨f_is|f_js⟩|` between branches.
    pub overlaps: DMatrix<f64>,
    pub coincident_pairs: Vec<(usize, usize)>,
}

impl SlotDistinctness {
    pub fn all_coincident(&self) -> bool {
        let n = self.overlaps.nrows();
        self.coincident_pairs.len() == n * (n - 1) / 2
    }

    pub fn all_distinct(&self) -> bool {
        self.coincident_pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistinctnessReport {
    pub slots: Vec<SlotDistinctness>,
}

impl DistinctnessReport {
    pub fn slot(&self, label: SlotLabel) -> Option<&SlotDistinctness> {
        self.slots.iter().find(|s| s.label == label)
    }
}

pub fn branch_distinctness(state: &ProductStateSuperposition) -> DistinctnessReport {
    let n = state.terms.len();
    let slots = (0..state.n_slots())
        .map(|slot| {
            let gram = state.slot_gram(slot);
            let overlaps = DMatrix::from_fn(n, n, |i, j| gram[(i, j)].norm());
            let coincident_pairs = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| overlaps[(i, j)] > COINCIDENCE_THRESHOLD)
                .collect();
            SlotDistinctness { label: state.labels[slot], overlaps, coincident_pairs }
        })
        .collect();
    DistinctnessReport { slots }
}
