//! Binned center-of-mass position measurement on a CM/relational state.
//!
//! The bin effect is `Π = ∫_bin dx |χ_x⟩⟨χ_x|` with `χ_x` a wavepacket of
//! the CM width `b`. Measuring it leaves the relational slots in
//! `Σ C_ij ⟨c_j|Π|c_i⟩ |r_i⟩⟨r_j|`; its trace is the outcome probability up to
//! the normalization `Tr(Π_∞ ρ)` of the infinite bin. Kernels are divided by
//! `b√(2π)` so that the infinite-bin diagonal is 1.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::{erf, erfc};
use thiserror::Error;

use crate::gaussian::{overlap, GaussianError, Wavepacket};
use crate::linalg::{real, CMatrix};
use crate::partition::{
    to_cm_relational, Partition, PartitionError, ParticleConfig, ProductStateSuperposition,
    SlotLabel,
};
use crate::quadrature::integrate;
use crate::relational::{
    g_twirl, log_negativity, pure_to_density, trace_distance, Bipartition, RelationalError, WavepacketDensityOperator,
};

pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Integration windows extend this many CM widths beyond the pair midpoint.
const CLIP_WIDTHS: f64 = 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PovmError {
    #[error("malformed bin: {0}")]
    MalformedBin(String),
    #[error("state must be in the CM/relational partition with a CM slot and at least one relational slot")]
    NotCmRelational,
    #[error("closed form requires zero CM momentum kicks and a common CM width")]
    ClosedFormUnsupported,
    #[error("grid {0} is empty")]
    EmptyGrid(&'static str),
    #[error("grid {0} is not monotone")]
    NonMonotoneGrid(&'static str),
    #[error("invalid sweep setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Relational(#[from] RelationalError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinWidth {
    Finite(f64),
    Infinite,
}

/// Half-open bin `[origin, origin + Δx)`; boundary ties belong to the lower
/// bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorBinning {
    origin: f64,
    width: BinWidth,
}

impl DetectorBinning {
    pub fn new(origin: f64, width: BinWidth) -> Result<Self, PovmError> {
        if let BinWidth::Finite(w) = width {
            if !(w.is_finite() && w > 0.0) {
                return Err(PovmError::MalformedBin(format!("width must be positive and finite, got {w}")));
            }
            if !origin.is_finite() {
                return Err(PovmError::MalformedBin("origin must be finite".into()));
            }
        }
        Ok(Self { origin, width })
    }

    pub fn infinite() -> Self {
        Self { origin: f64::NEG_INFINITY, width: BinWidth::Infinite }
    }

    /// Bin of width `Δx` centered on `center`; an infinite width gives the
    /// whole line.
    pub fn centered(center: f64, width: BinWidth) -> Result<Self, PovmError> {
        match width {
            BinWidth::Infinite => Ok(Self::infinite()),
            BinWidth::Finite(w) => Self::new(center - 0.5 * w, width),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self.width {
            BinWidth::Infinite => (f64::NEG_INFINITY, f64::INFINITY),
            BinWidth::Finite(w) => (self.origin, self.origin + w),
        }
    }

    pub fn width(&self) -> BinWidth {
        self.width
    }

    /// Detector energy attached to the bin, `qσ (x_i + Δx/2)`; the whole
    /// line has no finite label.
    pub fn energy_label(&self, q_sigma: f64) -> Option<f64> {
        match self.width {
            BinWidth::Infinite => None,
            BinWidth::Finite(w) => Some(q_sigma * (self.origin + 0.5 * w)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalOutcome {
    pub probability: f64,
    /// Unit-trace relational operator; `None` when the bin has zero weight.
    pub state: Option<WavepacketDensityOperator>,
    /// `Tr(Π ρ)` with unit-normalized measurement wavepackets.
    pub raw_scale: f64,
}

struct Split {
    cm_slot: usize,
    cm: Vec<Wavepacket>,
    amplitudes: Vec<Complex64>,
    labels: Vec<SlotLabel>,
    basis: Vec<Vec<Wavepacket>>,
}

fn split(state: &ProductStateSuperposition) -> Result<Split, PovmError> {
    if state.partition() != Partition::CmRelational || state.n_slots() < 2 {
        return Err(PovmError::NotCmRelational);
    }
    let cm_slot =
        state.labels().iter().position(|&l| l == SlotLabel::CenterOfMass).ok_or(PovmError::NotCmRelational)?;
    let keep: Vec<usize> = (0..state.n_slots()).filter(|&s| s != cm_slot).collect();
    Ok(Split {
        cm_slot,
        cm: state.terms().iter().map(|t| t.factors[cm_slot]).collect(),
        amplitudes: state.amplitudes(),
        labels: keep.iter().map(|&s| state.labels()[s]).collect(),
        basis: state.terms().iter().map(|t| keep.iter().map(|&s| t.factors[s]).collect()).collect(),
    })
}

/// `erf(x) − erf(y)` without cancellation in the tails.
fn erf_diff(x: f64, y: f64) -> f64 {
    if x > 0.0 && y > 0.0 {
        erfc(y) - erfc(x)
    } else if x < 0.0 && y < 0.0 {
        erfc(-x) - erfc(-y)
    } else {
        erf(x) - erf(y)
    }
}

/// Kernel `⟨c_j|Π|c_i⟩/(b√2π)` by adaptive quadrature of the
/// wavepacket overlaps.
fn quadrature_kernel(cm: &[Wavepacket], bin: &DetectorBinning) -> Result<CMatrix, PovmError> {
    let n = cm.len();
    let b = cm[0].width();
    let omega = cm[0].omega();
    let norm = b * (2.0 * PI).sqrt();
    let (lo, hi) = bin.bounds();
    let mut k = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let mid = 0.5 * (cm[i].center() + cm[j].center());
            let reach = CLIP_WIDTHS * cm[i].width().max(cm[j].width());
            let (a, z) = (lo.max(mid - reach), hi.min(mid + reach));
            if a >= z {
                continue;
            }
            let f = |x: f64| {
                let chi = Wavepacket::new(x, 0.0, omega).expect("finite integration node");
                let left = overlap(&chi, &cm[j]).unwrap_or_default().conj();
                let right = overlap(&chi, &cm[i]).unwrap_or_default();
                left * right / norm
            };
            if cm.iter().any(|c| c.omega() != omega) {
                return Err(PovmError::ClosedFormUnsupported);
            }
            k[(j, i)] = integrate(f, a, z, QUADRATURE_TOLERANCE).value;
        }
    }
    Ok(k)
}

/// Same kernel from the erf closed form.
fn closed_form_kernel(cm: &[Wavepacket], bin: &DetectorBinning) -> Result<CMatrix, PovmError> {
    let n = cm.len();
    let b = cm[0].width();
    if cm.iter().any(|c| c.momentum_kick() != 0.0 || c.omega() != cm[0].omega()) {
        return Err(PovmError::ClosedFormUnsupported);
    }
    let (lo, hi) = bin.bounds();
    let scale = b * 2f64.sqrt();
    Ok(CMatrix::from_fn(n, n, |j, i| {
        let (xi, xj) = (cm[i].center(), cm[j].center());
        let d = xi - xj;
        let m = 0.5 * (xi + xj);
        let window = match bin.width {
            BinWidth::Infinite => 1.0,
            BinWidth::Finite(_) => 0.5 * erf_diff((hi - m) / scale, (lo - m) / scale),
        };
        real((-(d * d) / (8.0 * b * b)).exp() * window)
    }))
}

fn assemble(split: &Split, kernel: &CMatrix, infinite: &CMatrix) -> Result<ConditionalOutcome, PovmError> {
    let a = nalgebra::DVector::from_vec(split.amplitudes.clone());
    let c = &a * a.adjoint();
    let rel_gram = |basis: &[Vec<Wavepacket>]| {
        WavepacketDensityOperator::new(
            Partition::Relational,
            split.labels.clone(),
            basis.to_vec(),
            CMatrix::identity(basis.len(), basis.len()),
        )
        .map(|w| w.gram().clone())
    };
    let s_rel = rel_gram(&split.basis)?;
    let coefficients = c.component_mul(&kernel.transpose());
    let total = (c.component_mul(&infinite.transpose()) * &s_rel).trace().re;
    let trace = (&coefficients * &s_rel).trace().re;
    let b = split.cm[0].width();
    let raw_scale = trace * b * (2.0 * PI).sqrt();
    let probability = if total > 0.0 { (trace / total).clamp(0.0, 1.0) } else { 0.0 };
    let state = if trace > 0.0 {
        let coefficients = crate::linalg::hermitian_part(&coefficients);
        let op = WavepacketDensityOperator::new(Partition::Relational, split.labels.clone(), split.basis.clone(), coefficients)?;
        match op.normalized() {
            Ok(op) => Some(op),
            Err(RelationalError::ZeroTrace) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    Ok(ConditionalOutcome { probability, state, raw_scale })
}

/// Conditional relational state and probability of a bin, with every
/// kernel entry evaluated by adaptive quadrature.
pub fn conditional_relational_state(
    state: &ProductStateSuperposition,
    bin: &DetectorBinning,
) -> Result<ConditionalOutcome, PovmError> {
    let split = split(state)?;
    let kernel = quadrature_kernel(&split.cm, bin)?;
    let infinite = quadrature_kernel(&split.cm, &DetectorBinning::infinite())?;
    assemble(&split, &kernel, &infinite)
}

/// As [`conditional_relational_state`] but from the erf closed form; needs
/// zero CM kicks.
pub fn closed_form_probability(
    state: &ProductStateSuperposition,
    bin: &DetectorBinning,
) -> Result<ConditionalOutcome, PovmError> {
    let split = split(state)?;
    let kernel = closed_form_kernel(&split.cm, bin)?;
    let infinite = closed_form_kernel(&split.cm, &DetectorBinning::infinite())?;
    assemble(&split, &kernel, &infinite)
}

/// Relational coherence `|C'₀₁|/√(C'₀₀ C'₁₁)` between two branches of a
/// conditional operator.
pub fn branch_coherence(op: &WavepacketDensityOperator, i: usize, j: usize) -> f64 {
    let c = op.coefficients();
    c[(i, j)].norm() / (c[(i, i)].re * c[(j, j)].re).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Uncertainty {
    Finite(f64),
    Infinite,
}

impl Uncertainty {
    pub fn as_bin_width(self) -> BinWidth {
        match self {
            Uncertainty::Finite(w) if w > 0.0 && w.is_finite() => BinWidth::Finite(w),
            _ => BinWidth::Infinite,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Uncertainty::Finite(w) => w,
            Uncertainty::Infinite => f64::INFINITY,
        }
    }
}

/// `Δx ∼ ΔĤ/|qσ|`; a vanishing coupling gives an infinite uncertainty.
pub fn position_uncertainty(delta_h: f64, q_sigma: f64) -> Uncertainty {
    if q_sigma == 0.0 {
        return Uncertainty::Infinite;
    }
    let w = delta_h / q_sigma.abs();
    if w.is_finite() {
        Uncertainty::Finite(w)
    } else {
        Uncertainty::Infinite
    }
}

/// Inputs of [`limit_sweep`]; the state is rebuilt for every CM width.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSetup {
    pub masses: Vec<f64>,
    /// Per-particle `(amplitude, center)` branches.
    pub branches: Vec<Vec<(Complex64, f64)>>,
    pub reference: usize,
    /// Detector energy resolution `ΔĤ`.
    pub energy_resolution: f64,
    /// Term whose CM center the bin is centered on.
    pub measured_branch: usize,
}

impl SweepSetup {
    /// CM/relational state whose CM slot has width `b`.
    pub fn state_for_cm_width(&self, b: f64) -> Result<ProductStateSuperposition, PovmError> {
        let total: f64 = self.masses.iter().sum();
        let s2: f64 = self.masses.iter().map(|m| (m / total).powi(2)).sum();
        let particle_width = b / s2.sqrt();
        let omega = crate::gaussian::omega_for_width(particle_width);
        let cfg = ParticleConfig::new(self.masses.clone(), omega, self.branches.clone())?;
        let map = crate::partition::PartitionMap::with_reference(&self.masses, self.reference)?;
        Ok(to_cm_relational(&cfg.external_state()?, &map)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub q_sigma: f64,
    pub b: f64,
    pub delta_x: f64,
    pub p: f64,
    pub log_negativity: f64,
    pub dist_to_twirl: f64,
    pub dist_to_zmodel: f64,
}

pub const SWEEP_COLUMNS: [&str; 7] =
    ["q_sigma", "b", "delta_x", "p", "log_negativity", "dist_to_twirl", "dist_to_zmodel"];

fn check_grid(name: &'static str, grid: &[f64]) -> Result<(), PovmError> {
    if grid.is_empty() {
        return Err(PovmError::EmptyGrid(name));
    }
    let up = grid.windows(2).all(|w| w[0] <= w[1]);
    let down = grid.windows(2).all(|w| w[0] >= w[1]);
    if !(up || down) || grid.iter().any(|x| !x.is_finite()) {
        return Err(PovmError::NonMonotoneGrid(name));
    }
    Ok(())
}

/// Relational state left by an ideal CM measurement at the measured
/// branch's center: coherences survive only among terms sharing that center.
pub fn zmodel_endpoint(
    state: &ProductStateSuperposition,
    measured_branch: usize,
) -> Result<WavepacketDensityOperator, PovmError> {
    let split = split(state)?;
    let target = split
        .cm
        .get(measured_branch)
        .ok_or_else(|| PovmError::InvalidSetup(format!("no branch {measured_branch}")))?
        .center();
    let tol = 1e-12 * target.abs().max(1.0);
    let keep: Vec<usize> = (0..split.cm.len()).filter(|&i| (split.cm[i].center() - target).abs() <= tol).collect();
    let a = nalgebra::DVector::from_iterator(keep.len(), keep.iter().map(|&i| split.amplitudes[i]));
    let basis = keep.iter().map(|&i| split.basis[i].clone()).collect();
    let op = WavepacketDensityOperator::new(Partition::Relational, split.labels.clone(), basis, &a * a.adjoint())?;
    Ok(op.normalized()?)
}

fn max_log_negativity(op: &WavepacketDensityOperator) -> Result<f64, PovmError> {
    let mut best = 0.0f64;
    for cut in Bipartition::all_cuts(op.n_slots()) {
        best = best.max(log_negativity(op, &cut)?);
    }
    Ok(best)
}

/// For each `(b, qσ)`, in b-major order: bin width `ΔĤ/|qσ|` centered on the
/// measured branch, outcome probability, the largest log-negativity over
/// relational cuts (0 for a single relational slot), and trace distances to
/// the twirl and Z-model endpoints. Grid points run in parallel; row order
/// is fixed.
pub fn limit_sweep(setup: &SweepSetup, charges: &[f64], widths: &[f64]) -> Result<Vec<SweepRow>, PovmError> {
    check_grid("charges", charges)?;
    check_grid("widths", widths)?;
    if let Some(b) = widths.iter().find(|&&b| b <= 0.0) {
        return Err(PovmError::InvalidSetup(format!("width {b} must be positive")));
    }
    if !(setup.energy_resolution.is_finite() && setup.energy_resolution > 0.0) {
        return Err(PovmError::InvalidSetup("energy resolution must be positive".into()));
    }
    let per_width: Vec<_> = widths
        .par_iter()
        .map(|&b| -> Result<_, PovmError> {
            let state = setup.state_for_cm_width(b)?;
            let twirl = g_twirl(&pure_to_density(&state)?)?;
            let zmodel = zmodel_endpoint(&state, setup.measured_branch)?;
            let cm_slot = split(&state)?.cm_slot;
            let center = state.terms()[setup.measured_branch].factors[cm_slot].center();
            Ok((state, twirl, zmodel, center))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<(usize, f64)> =
        (0..widths.len()).flat_map(|w| charges.iter().map(move |&q| (w, q))).collect();
    points
        .par_iter()
        .map(|&(w, q_sigma)| {
            let (state, twirl, zmodel, center) = &per_width[w];
            let delta = position_uncertainty(setup.energy_resolution, q_sigma);
            let bin = DetectorBinning::centered(*center, delta.as_bin_width())?;
            let outcome = closed_form_probability(state, &bin)?;
            let (log_neg, d_twirl, d_z) = match &outcome.state {
                Some(op) => (max_log_negativity(op)?, trace_distance(op, twirl)?, trace_distance(op, zmodel)?),
                None => (0.0, f64::NAN, f64::NAN),
            };
            Ok(SweepRow {
                q_sigma,
                b: widths[w],
                delta_x: delta.value(),
                p: outcome.probability,
                log_negativity: log_neg,
                dist_to_twirl: d_twirl,
                dist_to_zmodel: d_z,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_branch(b: f64, separation: f64) -> ProductStateSuperposition {
        setup(separation).state_for_cm_width(b).unwrap()
    }

    /// Two equal-mass particles; particle 1 in two branches so the CM centers
    /// are 0 and `separation`.
    fn setup(separation: f64) -> SweepSetup {
        SweepSetup {
            masses: vec![1.0, 1.0],
            branches: vec![vec![(real(1.0), 0.0), (real(1.0), 2.0 * separation)], vec![(real(1.0), 0.0)]],
            reference: 0,
            energy_resolution: 0.1,
            measured_branch: 0,
        }
    }

    #[test]
    fn closed_form_matches_quadrature_on_grid() {
        for b in [0.01, 0.1, 0.5] {
            for sep in [0.5, 1.0, 5.0] {
                let state = two_branch(b, sep);
                for width in [BinWidth::Finite(0.1), BinWidth::Finite(1.0), BinWidth::Infinite] {
                    for origin in [-0.05, 0.2, 0.5 * sep] {
                        let bin = DetectorBinning::new(origin, width).unwrap();
                        let q = conditional_relational_state(&state, &bin).unwrap();
                        let c = closed_form_probability(&state, &bin).unwrap();
                        assert!((q.probability - c.probability).abs() < 1e-8, "b={b} sep={sep} {width:?}");
                        if let (Some(qs), Some(cs)) = (&q.state, &c.state) {
                            let diff = (qs.coefficients() * real(q.probability)) - (cs.coefficients() * real(c.probability));
                            assert!(crate::linalg::max_abs(&diff) < 1e-8);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn probabilities_over_a_tiling_sum_to_one() {
        let state = two_branch(0.1, 1.0);
        let width = 0.37;
        let total: f64 = (-20..20)
            .map(|k| {
                let bin = DetectorBinning::new(k as f64 * width, BinWidth::Finite(width)).unwrap();
                closed_form_probability(&state, &bin).unwrap().probability
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn empty_bin_has_negligible_probability() {
        let state = two_branch(0.01, 1.0);
        let bin = DetectorBinning::new(3.0, BinWidth::Finite(0.5)).unwrap();
        assert!(closed_form_probability(&state, &bin).unwrap().probability < 1e-10);
        assert!(conditional_relational_state(&state, &bin).unwrap().probability < 1e-10);
    }

    #[test]
    fn symmetric_bin_gives_equal_weights() {
        let state = two_branch(0.1, 1.0);
        let bin = DetectorBinning::centered(0.5, BinWidth::Finite(0.6)).unwrap();
        let op = closed_form_probability(&state, &bin).unwrap().state.unwrap();
        let c = op.coefficients();
        assert!((c[(0, 0)].re - c[(1, 1)].re).abs() < 1e-14);
    }

    #[test]
    fn wide_bin_recovers_infinite_bin() {
        let state = two_branch(0.1, 1.0);
        let wide = closed_form_probability(&state, &DetectorBinning::centered(0.5, BinWidth::Finite(1e3)).unwrap()).unwrap();
        let inf = closed_form_probability(&state, &DetectorBinning::infinite()).unwrap();
        assert!((wide.probability - 1.0).abs() < 1e-14 && (inf.probability - 1.0).abs() < 1e-14);
        let d = trace_distance(wide.state.as_ref().unwrap(), inf.state.as_ref().unwrap()).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn infinite_bin_cross_term_factor() {
        let b = 0.1;
        let state = two_branch(b, 0.2);
        let op = conditional_relational_state(&state, &DetectorBinning::infinite()).unwrap().state.unwrap();
        let expected = (-(0.2f64 * 0.2) / (8.0 * b * b)).exp();
        assert!((branch_coherence(&op, 0, 1) - expected).abs() < 1e-8);
    }

    #[test]
    fn intermediate_cross_term_with_erf_window() {
        let b = 0.1;
        let sep = 0.3;
        let state = two_branch(b, sep);
        let bin = DetectorBinning::new(0.05, BinWidth::Finite(0.2)).unwrap();
        let out = conditional_relational_state(&state, &bin).unwrap();
        let op = out.state.unwrap();
        // oracle: C'_01/C'_00 = exp(-d²/8b²)·window(m)/window(X_0)
        let window = |m: f64| 0.5 * (erf((0.25 - m) / (b * 2f64.sqrt())) - erf((0.05 - m) / (b * 2f64.sqrt())));
        let expected = (-(sep * sep) / (8.0 * b * b)).exp() * window(0.5 * sep) / window(0.0);
        let c = op.coefficients();
        assert!(out.probability > 0.0);
        assert!(((c[(0, 1)] / c[(0, 0)]).norm() - expected).abs() < 1e-8);
    }

    #[test]
    fn uncertainty_examples() {
        assert_eq!(position_uncertainty(1.0, 2.0), Uncertainty::Finite(0.5));
        assert_eq!(position_uncertainty(1.0, 0.0), Uncertainty::Infinite);
        assert!((position_uncertainty(0.1, 100.0).value() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn malformed_bins_rejected() {
        assert!(DetectorBinning::new(0.0, BinWidth::Finite(0.0)).is_err());
        assert!(DetectorBinning::new(0.0, BinWidth::Finite(-1.0)).is_err());
        assert!(DetectorBinning::new(f64::NAN, BinWidth::Finite(1.0)).is_err());
    }

    #[test]
    fn sweep_endpoints_and_monotonicity() {
        let charges = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0];
        let rows = limit_sweep(&setup(1.0), &charges, &[0.01]).unwrap();
        assert_eq!(rows.len(), charges.len());
        assert!(rows[0].delta_x.is_infinite());
        assert!(rows[0].dist_to_twirl <= 1e-6);
        assert!(rows.last().unwrap().dist_to_zmodel <= 1e-6);
        for w in rows.windows(2) {
            // larger charge, smaller bin, further from the twirl endpoint
            assert!(w[1].dist_to_twirl >= w[0].dist_to_twirl - 1e-12);
        }
        assert!(rows.iter().all(|r| r.log_negativity == 0.0));
    }

    #[test]
    fn sweep_is_b_major_and_rejects_bad_grids() {
        let rows = limit_sweep(&setup(1.0), &[0.0, 1.0], &[0.01, 0.1]).unwrap();
        let order: Vec<(f64, f64)> = rows.iter().map(|r| (r.b, r.q_sigma)).collect();
        assert_eq!(order, vec![(0.01, 0.0), (0.01, 1.0), (0.1, 0.0), (0.1, 1.0)]);
        assert!(matches!(limit_sweep(&setup(1.0), &[], &[0.1]), Err(PovmError::EmptyGrid(_))));
        assert!(matches!(limit_sweep(&setup(1.0), &[1.0, 0.0, 2.0], &[0.1]), Err(PovmError::NonMonotoneGrid(_))));
    }

    #[test]
    fn strong_charge_narrow_width_collapses_onto_measured_branch() {
        let state = two_branch(0.001, 1.0);
        let bin = DetectorBinning::centered(0.0, BinWidth::Finite(1e-3)).unwrap();
        let op = closed_form_probability(&state, &bin).unwrap().state.unwrap();
        let z = zmodel_endpoint(&state, 0).unwrap();
        assert!(trace_distance(&op, &z).unwrap() < 1e-6);
    }
}
