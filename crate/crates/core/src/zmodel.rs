//! Capacitor Z-model coupling, swap-based entanglement extraction and its
//! source-side energy cost.
//!
//! Inside the plates the semiclassical coupling is `Ĥ_int = qσ(x̂_cm − x_left)`
//! with `x̂_cm = Σ m̃_k x̂_k`; the auxiliary field never appears as a quantum
//! slot. Reported energy costs are not minimized over partner modes.

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{FockError, FockRegister};
use crate::gaussian::position_matrix_element;
use crate::kahler::Statistics;
use crate::linalg::{max_abs, real, CMatrix};
use crate::partition::{ProductStateSuperposition, SlotLabel};
use crate::relational::{log_negativity, pure_to_density, Bipartition, RelationalError, WavepacketDensityOperator};

pub const EXTRACTION_NEGATIVITY_THRESHOLD: f64 = 1e-8;
pub const ALGEBRA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZModelError {
    #[error("plate separation must be positive and finite, got {0}")]
    NonPositiveSeparation(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("branch {branch} of slot {slot} sits at {center}, outside the field region [{lo}, {hi}]")]
    OutsideCapacitor { slot: String, branch: usize, center: f64, lo: f64, hi: f64 },
    #[error("no entanglement to extract across the cut (log-negativity {0:.3e}); the protocol cannot be performed")]
    NoEntanglement(f64),
    #[error("Hamiltonian acts on slot {0}, which is not part of the declared cut")]
    HamiltonianOutsideCut(String),
    #[error("operator has zero trace")]
    ZeroTrace,
    #[error("invalid mode pair: {0}")]
    InvalidModePair(String),
    #[error("statistics mismatch between source and target modes")]
    StatisticsMismatch,
    #[error("{0} particle masses given for a state with particle slots up to {1}")]
    MassCountMismatch(usize, usize),
    #[error(transparent)]
    Relational(#[from] RelationalError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitorZModel {
    charge: f64,
    charge_density: f64,
    plate_separation: f64,
    left_plate: f64,
}

impl CapacitorZModel {
    pub fn new(charge: f64, charge_density: f64, plate_separation: f64, left_plate: f64) -> Result<Self, ZModelError> {
        if !charge.is_finite() {
            return Err(ZModelError::NonFinite("charge"));
        }
        if !charge_density.is_finite() {
            return Err(ZModelError::NonFinite("charge density"));
        }
        if !left_plate.is_finite() {
            return Err(ZModelError::NonFinite("left plate position"));
        }
        if !(plate_separation.is_finite() && plate_separation > 0.0) {
            return Err(ZModelError::NonPositiveSeparation(plate_separation));
        }
        if !(charge * charge_density).is_finite() {
            return Err(ZModelError::NonFinite("coupling qσ"));
        }
        Ok(Self { charge, charge_density, plate_separation, left_plate })
    }

    /// `qσ`
    pub fn coupling(&self) -> f64 {
        self.charge * self.charge_density
    }

    pub fn left_plate(&self) -> f64 {
        self.left_plate
    }

    pub fn right_plate(&self) -> f64 {
        self.left_plate + self.plate_separation
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left_plate && x <= self.right_plate()
    }

    /// `qσ(x̂_cm − x_left)` acting on the CM slot.
    pub fn cm_hamiltonian(&self) -> PositionHamiltonian {
        PositionHamiltonian {
            terms: vec![(SlotLabel::CenterOfMass, self.coupling())],
            offset: -self.coupling() * self.left_plate,
        }
    }

    /// `qσ(Σ m̃_k x̂_k − x_left)` acting on external particle slots.
    pub fn external_hamiltonian(&self, masses: &[f64]) -> PositionHamiltonian {
        let total: f64 = masses.iter().sum();
        PositionHamiltonian {
            terms: masses
                .iter()
                .enumerate()
                .map(|(k, m)| (SlotLabel::Particle(k), self.coupling() * m / total))
                .collect(),
            offset: -self.coupling() * self.left_plate,
        }
    }

    /// Hamiltonian matching the slots of `labels`: CM coupling when a CM slot
    /// is present, otherwise the mass-weighted external coupling.
    pub fn hamiltonian_for(&self, labels: &[SlotLabel], masses: &[f64]) -> Result<PositionHamiltonian, ZModelError> {
        if labels.contains(&SlotLabel::CenterOfMass) {
            return Ok(self.cm_hamiltonian());
        }
        let highest = labels
            .iter()
            .filter_map(|l| match l {
                SlotLabel::Particle(k) => Some(*k),
                _ => None,
            })
            .max();
        if let Some(k) = highest {
            if k >= masses.len() {
                return Err(ZModelError::MassCountMismatch(masses.len(), k + 1));
            }
        }
        Ok(self.external_hamiltonian(masses))
    }

    /// Every branch center of a slot the Hamiltonian couples to must lie
    /// between the plates.
    pub fn check_inside(&self, rho: &WavepacketDensityOperator, h: &PositionHamiltonian) -> Result<(), ZModelError> {
        for &(label, weight) in &h.terms {
            if weight == 0.0 {
                continue;
            }
            let Some(slot) = rho.slot_index(label) else { continue };
            for (branch, term) in rho.basis().iter().enumerate() {
                let center = term[slot].center();
                if !self.contains(center) {
                    return Err(ZModelError::OutsideCapacitor {
                        slot: label.to_string(),
                        branch,
                        center,
                        lo: self.left_plate,
                        hi: self.right_plate(),
                    });
                }
            }
        }
        Ok(())
    }

    /// `⟨Ĥ_int⟩` of the normalized state, with Gram corrections.
    pub fn interaction_energy(&self, rho: &WavepacketDensityOperator, masses: &[f64]) -> Result<f64, ZModelError> {
        let h = self.hamiltonian_for(rho.labels(), masses)?;
        self.check_inside(rho, &h)?;
        h.expectation(rho)
    }

    pub fn interaction_energy_pure(&self, state: &ProductStateSuperposition, masses: &[f64]) -> Result<f64, ZModelError> {
        self.interaction_energy(&pure_to_density(state)?, masses)
    }

    /// Interaction energy of every branch term on its own.
    pub fn branch_energies(&self, state: &ProductStateSuperposition, masses: &[f64]) -> Result<Vec<f64>, ZModelError> {
        let h = self.hamiltonian_for(state.labels(), masses)?;
        self.check_inside(&pure_to_density(state)?, &h)?;
        (0..state.terms().len())
            .map(|k| h.expectation(&collapse_to_branch(state, k)?))
            .collect()
    }
}

/// `Ĥ = Σ_s w_s x̂_s + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionHamiltonian {
    pub terms: Vec<(SlotLabel, f64)>,
    pub offset: f64,
}

impl PositionHamiltonian {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), offset: 0.0 }
    }

    fn slot_indices(&self, rho: &WavepacketDensityOperator) -> Result<Vec<(usize, f64)>, ZModelError> {
        self.terms
            .iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|&(label, w)| {
                rho.slot_index(label)
                    .map(|s| (s, w))
                    .ok_or_else(|| ZModelError::HamiltonianOutsideCut(label.to_string()))
            })
            .collect()
    }

    /// `Tr(ρ Ĥ)` with `ρ` normalized to unit trace.
    pub fn expectation(&self, rho: &WavepacketDensityOperator) -> Result<f64, ZModelError> {
        let slots = self.slot_indices(rho)?;
        let rho = rho.normalized().map_err(|_| ZModelError::ZeroTrace)?;
        let mut total = Complex64::new(self.offset, 0.0);
        for (slot, w) in slots {
            total += rho.slot_expectation(slot, position_matrix_element) * w;
        }
        Ok(total.re)
    }
}

/// Pure single-branch state `|i⟩⟨i|`.
pub fn collapse_to_branch(state: &ProductStateSuperposition, branch: usize) -> Result<WavepacketDensityOperator, ZModelError> {
    let term = state
        .terms()
        .get(branch)
        .ok_or_else(|| ZModelError::Relational(RelationalError::InvalidCut(format!("no branch {branch}"))))?;
    Ok(WavepacketDensityOperator::new(
        state.partition(),
        state.labels().to_vec(),
        vec![term.factors.clone()],
        CMatrix::from_element(1, 1, real(1.0)),
    )?)
}

/// Dephased mixture `Σ_i |a_i|² |i⟩⟨i|`, normalized.
pub fn branch_mixture(state: &ProductStateSuperposition) -> Result<WavepacketDensityOperator, ZModelError> {
    let weights = state.amplitudes().iter().map(|a| real(a.norm_sqr())).collect::<Vec<_>>();
    let coefficients = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(weights));
    let basis = state.terms().iter().map(|t| t.factors.clone()).collect();
    Ok(WavepacketDensityOperator::new(state.partition(), state.labels().to_vec(), basis, coefficients)?.normalized()?)
}

/// `ΔE = Tr(ρ_F Ĥ) − Tr(ρ_I Ĥ)` with both operators normalized. Requires
/// `ρ_I` to be entangled across `cut`.
pub fn extraction_energy_cost(
    h: &PositionHamiltonian,
    cut: &Bipartition,
    rho_initial: &WavepacketDensityOperator,
    rho_final: &WavepacketDensityOperator,
) -> Result<f64, ZModelError> {
    if rho_initial.n_slots() < 2 {
        return Err(ZModelError::NoEntanglement(0.0));
    }
    if cut.n_slots() != rho_initial.n_slots() {
        return Err(ZModelError::Relational(RelationalError::InvalidCut(format!(
            "cut covers {} slots, state has {}",
            cut.n_slots(),
            rho_initial.n_slots()
        ))));
    }
    h.slot_indices(rho_initial)?;
    h.slot_indices(rho_final)?;
    let ln = log_negativity(rho_initial, cut)?;
    if ln <= EXTRACTION_NEGATIVITY_THRESHOLD {
        return Err(ZModelError::NoEntanglement(ln));
    }
    Ok(h.expectation(rho_final)? - h.expectation(rho_initial)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionReport {
    pub initial_energy: f64,
    pub branch_energies: Vec<f64>,
    pub log_negativity: f64,
    /// ΔE for the dephased branch mixture.
    pub delta_mixture: f64,
    /// ΔE for a collapse onto each branch, in term order.
    pub delta_per_branch: Vec<f64>,
}

/// Energy bookkeeping of the extraction protocol on a CM/relational state,
/// using the CM|relational cut.
pub fn extraction_report(state: &ProductStateSuperposition, z: &CapacitorZModel) -> Result<ExtractionReport, ZModelError> {
    let rho = pure_to_density(state)?;
    let cm = rho
        .slot_index(SlotLabel::CenterOfMass)
        .ok_or_else(|| ZModelError::HamiltonianOutsideCut(SlotLabel::CenterOfMass.to_string()))?;
    let cut = Bipartition::new(vec![cm], rho.n_slots())?;
    let h = z.cm_hamiltonian();
    z.check_inside(&rho, &h)?;
    let initial_energy = h.expectation(&rho)?;
    let log_negativity = log_negativity(&rho, &cut)?;
    let delta_mixture = extraction_energy_cost(&h, &cut, &rho, &branch_mixture(state)?)?;
    let mut branch_energies = Vec::new();
    let mut delta_per_branch = Vec::new();
    for k in 0..state.terms().len() {
        let collapsed = collapse_to_branch(state, k)?;
        branch_energies.push(h.expectation(&collapsed)?);
        delta_per_branch.push(extraction_energy_cost(&h, &cut, &rho, &collapsed)?);
    }
    Ok(ExtractionReport { initial_energy, branch_energies, log_negativity, delta_mixture, delta_per_branch })
}

/// A single Fock mode taking part in the swap protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSlot {
    pub id: usize,
    pub statistics: Statistics,
    pub truncation: usize,
}

/// Source modes `(A, B)` swapped into target modes `(1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModePair {
    pub source: (ModeSlot, ModeSlot),
    pub target: (ModeSlot, ModeSlot),
}

/// `U₁` exchanges `A ↔ 1` on the register `(A, 1)`; `U₂` exchanges
/// `B ↔ 2` on `(B, 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapProtocol {
    pub register: FockRegister,
    pub u1: CMatrix,
    pub u2: CMatrix,
}

pub fn build_swap_unitary(pair: &ModePair) -> Result<SwapProtocol, ZModelError> {
    let (a, b) = pair.source;
    let (t1, t2) = pair.target;
    let all = [a, b, t1, t2];
    for (i, x) in all.iter().enumerate() {
        for y in &all[i + 1..] {
            if x.id == y.id {
                return Err(ZModelError::InvalidModePair(format!("mode {} appears twice", x.id)));
            }
        }
    }
    let statistics = a.statistics;
    let truncation = a.truncation;
    if all.iter().any(|m| m.statistics != statistics) {
        return Err(ZModelError::StatisticsMismatch);
    }
    if all.iter().any(|m| m.truncation != truncation) {
        return Err(ZModelError::InvalidModePair("all modes must share one truncation".into()));
    }
    let register = FockRegister::new(statistics, 2, truncation)?;
    let u = register.swap_unitary(0, 1)?;
    Ok(SwapProtocol { register, u1: u.clone(), u2: u })
}

/// All four (anti)commutators of `â_A`, `â_B` and their adjoints vanish to
/// 1e-12: anticommutators for fermions, commutators for bosons.
pub fn check_extraction_condition(a: &CMatrix, b: &CMatrix, statistics: Statistics) -> bool {
    if a.shape() != b.shape() || !a.is_square() {
        return false;
    }
    let sign = match statistics {
        Statistics::Fermion => real(1.0),
        Statistics::Boson => real(-1.0),
    };
    let bracket = |x: &CMatrix, y: &CMatrix| x * y + (y * x) * sign;
    let (ad, bd) = (a.adjoint(), b.adjoint());
    [bracket(a, b), bracket(a, &bd), bracket(&ad, b), bracket(&ad, &bd)]
        .iter()
        .all(|m| max_abs(m) <= ALGEBRA_TOLERANCE)
}
