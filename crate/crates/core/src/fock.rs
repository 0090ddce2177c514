//! Truncated Fock-space states, squeeze and displacement, and multi-mode
//! registers with bosonic or Jordan–Wigner fermionic ladder operators.

use num_complex::Complex64;
use thiserror::Error;

use crate::gaussian::Wavepacket;
use crate::kahler::Statistics;
use crate::linalg::{c, expm, kron, real, CMatrix, CVector};

pub const DEFAULT_TRUNCATION: usize = 32;
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;
const NORM_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("truncation dimension {dim} too small: {leaked:.3e} of the norm leaked beyond it")]
    TruncationOverflow { dim: usize, leaked: f64 },
    #[error("fermionic Fock vectors have exactly 2 amplitudes, got {0}")]
    FermionDimension(usize),
    #[error("norm {0} exceeds 1")]
    NormTooLarge(f64),
    #[error("displacement is only defined for bosonic modes")]
    FermionicDisplacement,
    #[error("truncation dimension must be at least {min}, got {got}")]
    TruncationTooSmall { min: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid mode index {index} for a register of {n_modes} modes")]
    InvalidMode { index: usize, n_modes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: CVector,
    statistics: Statistics,
}

impl FockVector {
    pub fn new(amplitudes: CVector, statistics: Statistics) -> Result<Self, FockError> {
        if statistics == Statistics::Fermion && amplitudes.len() != 2 {
            return Err(FockError::FermionDimension(amplitudes.len()));
        }
        if amplitudes.is_empty() {
            return Err(FockError::DimensionMismatch("empty amplitude vector".into()));
        }
        let norm = amplitudes.norm();
        if norm > 1.0 + NORM_SLACK {
            return Err(FockError::NormTooLarge(norm));
        }
        Ok(Self { amplitudes, statistics })
    }

    pub fn vacuum(dim: usize, statistics: Statistics) -> Result<Self, FockError> {
        Self::number_state(0, dim, statistics)
    }

    pub fn number_state(n: usize, dim: usize, statistics: Statistics) -> Result<Self, FockError> {
        if n >= dim {
            return Err(FockError::DimensionMismatch(format!("level {n} outside dimension {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[n] = real(1.0);
        Self::new(v, statistics)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &FockVector) -> Result<Complex64, FockError> {
        if self.dim() != other.dim() {
            return Err(FockError::DimensionMismatch(format!("{} vs {}", self.dim(), other.dim())));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `⟨self|op|self⟩`
    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }
}

/// Single-mode annihilation operator `â` truncated to `dim` levels.
pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = real((n as f64).sqrt());
    }
    a
}

pub fn number_operator(dim: usize) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_fn(dim, |n, _| real(n as f64)))
}

/// `x̂ = (â + â†)/√(2Ω)` for ladder operators of frequency `Ω`.
pub fn position_operator(dim: usize, ladder_omega: f64) -> CMatrix {
    let a = annihilation(dim);
    (&a + a.adjoint()) * real((2.0 * ladder_omega).sqrt().recip())
}

fn padded_dim(dim: usize) -> usize {
    (2 * dim).max(dim + 32)
}

fn embed(v: &CVector, dim: usize) -> CVector {
    CVector::from_fn(dim, |i, _| if i < v.len() { v[i] } else { real(0.0) })
}

/// Truncate a padded vector back to `dim` levels, rejecting leakage above
/// the threshold and restoring the target norm.
fn truncate_checked(padded: &CVector, dim: usize, target_norm: f64) -> Result<CVector, FockError> {
    let leaked: f64 = padded.iter().skip(dim).map(|z| z.norm_sqr()).sum();
    if leaked > LEAKAGE_THRESHOLD {
        return Err(FockError::TruncationOverflow { dim, leaked });
    }
    let kept = CVector::from_fn(dim, |i, _| padded[i]);
    let norm = kept.norm();
    if norm == 0.0 {
        return Ok(kept);
    }
    Ok(kept * real(target_norm / norm))
}

fn evolve_bosonic(state: &FockVector, generator: impl Fn(&CMatrix) -> CMatrix) -> Result<FockVector, FockError> {
    let dim = state.dim();
    let pd = padded_dim(dim);
    let a = annihilation(pd);
    let u = expm(&generator(&a));
    let out = u * embed(&state.amplitudes, pd);
    let amplitudes = truncate_checked(&out, dim, state.norm())?;
    FockVector::new(amplitudes, Statistics::Boson)
}

/// `Ŝ(r) = exp[r(ââ − â†â†)]`. Fermionic states are left unchanged: the
/// generator annihilates both `|0⟩` and `|1⟩`.
pub fn squeeze(state: &FockVector, r: f64) -> Result<FockVector, FockError> {
    if state.statistics == Statistics::Fermion || r == 0.0 {
        return Ok(state.clone());
    }
    evolve_bosonic(state, |a| {
        let ad = a.adjoint();
        (a * a - &ad * &ad) * real(r)
    })
}

/// `D̂(γ) = exp(â†γ − γ*â)`.
pub fn displace(state: &FockVector, gamma: Complex64) -> Result<FockVector, FockError> {
    if state.statistics == Statistics::Fermion {
        return Err(FockError::FermionicDisplacement);
    }
    if gamma == real(0.0) {
        return Ok(state.clone());
    }
    evolve_bosonic(state, |a| a.adjoint() * gamma - a * gamma.conj())
}

/// Squeezed-vacuum parameter `t` such that `exp(-t â†²/2)|0⟩`, built from
/// ladder operators of frequency `Ω`, has the width of a wavepacket with
/// parameter `ω`.
pub fn squeezed_vacuum_parameter(omega: f64, ladder_omega: f64) -> f64 {
    (2.0 * omega - ladder_omega) / (2.0 * omega + ladder_omega)
}

/// Amplitudes of `c₀ exp(-t â†²/2)|0⟩`.
fn squeezed_amplitudes(t: f64, c0: f64, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut amp = c0;
    let mut n = 0usize;
    while 2 * n < dim {
        v[2 * n] = real(amp);
        let k = n as f64;
        amp *= -0.5 * t * ((2.0 * k + 1.0) * (2.0 * k + 2.0)).sqrt() / (k + 1.0);
        n += 1;
    }
    v
}

/// Unnormalizable δ-limit `exp(-½ â†²)|0⟩` with `c₀ = 1`.
pub fn position_eigenket_limit(dim: usize) -> CVector {
    squeezed_amplitudes(1.0, 1.0, dim)
}

/// Truncated Fock amplitudes of a wavepacket using ladder operators of the
/// wavepacket's own frequency.
pub fn fock_representation(w: &Wavepacket, dim: usize) -> Result<FockVector, FockError> {
    fock_representation_in(w, dim, w.omega())
}

/// `e^{ip₀x̂} e^{-ix₀p̂} exp(-t â†²/2)|0⟩`, normalized, with ladder operators
/// of frequency `ladder_omega`.
pub fn fock_representation_in(w: &Wavepacket, dim: usize, ladder_omega: f64) -> Result<FockVector, FockError> {
    if dim < 8 {
        return Err(FockError::TruncationTooSmall { min: 8, got: dim });
    }
    let pd = padded_dim(dim);
    let t = squeezed_vacuum_parameter(w.omega(), ladder_omega);
    let mut v = squeezed_amplitudes(t, (1.0 - t * t).powf(0.25), pd);
    let a = annihilation(pd);
    let ad = a.adjoint();
    let translate = real(w.center() * (0.5 * ladder_omega).sqrt());
    let kick = c(0.0, w.momentum_kick() / (2.0 * ladder_omega).sqrt());
    for gamma in [translate, kick] {
        if gamma != real(0.0) {
            v = expm(&(&ad * gamma - &a * gamma.conj())) * v;
        }
    }
    let amplitudes = truncate_checked(&v, dim, 1.0)?;
    FockVector::new(amplitudes, Statistics::Boson)
}

/// `N` modes of a common statistics; each mode has `dim` levels (2 for
/// fermions). Basis index is `Σ n_k dimᴺ⁻¹⁻ᵏ`, mode 0 most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockRegister {
    statistics: Statistics,
    n_modes: usize,
    mode_dim: usize,
}

impl FockRegister {
    pub fn new(statistics: Statistics, n_modes: usize, mode_dim: usize) -> Result<Self, FockError> {
        if n_modes == 0 {
            return Err(FockError::DimensionMismatch("register needs at least one mode".into()));
        }
        if statistics == Statistics::Fermion && mode_dim != 2 {
            return Err(FockError::FermionDimension(mode_dim));
        }
        if mode_dim < 2 {
            return Err(FockError::TruncationTooSmall { min: 2, got: mode_dim });
        }
        Ok(Self { statistics, n_modes, mode_dim })
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mode_dim(&self) -> usize {
        self.mode_dim
    }

    pub fn dim(&self) -> usize {
        self.mode_dim.pow(self.n_modes as u32)
    }

    fn check_mode(&self, index: usize) -> Result<(), FockError> {
        if index >= self.n_modes {
            return Err(FockError::InvalidMode { index, n_modes: self.n_modes });
        }
        Ok(())
    }

    /// `â_k` on the joint space; fermionic modes carry a Jordan–Wigner string
    /// of parity factors on modes `0..k`.
    pub fn annihilation(&self, mode: usize) -> Result<CMatrix, FockError> {
        self.check_mode(mode)?;
        let d = self.mode_dim;
        let identity = CMatrix::identity(d, d);
        let parity = CMatrix::from_diagonal(&CVector::from_fn(d, |n, _| real(if n % 2 == 0 { 1.0 } else { -1.0 })));
        let mut op = CMatrix::identity(1, 1);
        for k in 0..self.n_modes {
            let factor = if k == mode {
                annihilation(d)
            } else if k < mode && self.statistics == Statistics::Fermion {
                parity.clone()
            } else {
                identity.clone()
            };
            op = kron(&op, &factor);
        }
        Ok(op)
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes];
        let mut rest = index;
        for k in (0..self.n_modes).rev() {
            occ[k] = rest % self.mode_dim;
            rest /= self.mode_dim;
        }
        occ
    }

    pub fn index(&self, occupations: &[usize]) -> usize {
        occupations.iter().fold(0, |acc, &n| acc * self.mode_dim + n)
    }

    /// Unitary exchanging modes `i` and `j`: `U† â_i U = â_j` and vice
    /// versa. For fermions the permutation carries the sign
    /// `(-1)^{n_i n_j + (n_i + n_j) Σ_{i<k<j} n_k}`.
    pub fn swap_unitary(&self, i: usize, j: usize) -> Result<CMatrix, FockError> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(FockError::DimensionMismatch(format!("cannot swap mode {i} with itself")));
        }
        let (lo, hi) = (i.min(j), i.max(j));
        let dim = self.dim();
        let mut u = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut occ = self.occupations(col);
            let sign = match self.statistics {
                Statistics::Boson => 1.0,
                Statistics::Fermion => {
                    let between: usize = occ[lo + 1..hi].iter().sum();
                    let exponent = occ[lo] * occ[hi] + (occ[lo] + occ[hi]) * between;
                    if exponent.is_multiple_of(2) { 1.0 } else { -1.0 }
                }
            };
            occ.swap(lo, hi);
            u[(self.index(&occ), col)] = real(sign);
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{overlap, position_wavepacket};
    use crate::linalg::max_abs;

    fn boson_vacuum(dim: usize) -> FockVector {
        FockVector::vacuum(dim, Statistics::Boson).unwrap()
    }

    #[test]
    fn fermionic_squeeze_is_identity() {
        for n in 0..2 {
            let s = FockVector::number_state(n, 2, Statistics::Fermion).unwrap();
            assert_eq!(squeeze(&s, 0.8).unwrap(), s);
        }
        assert!(FockVector::vacuum(3, Statistics::Fermion).is_err());
    }

    #[test]
    fn zero_squeeze_and_zero_displacement_are_identity() {
        let v = boson_vacuum(16);
        assert_eq!(squeeze(&v, 0.0).unwrap(), v);
        assert_eq!(displace(&v, real(0.0)).unwrap(), v);
    }

    #[test]
    fn squeezed_vacuum_variance() {
        // exp[r(ââ − â†â†)] maps â → â cosh 2r − â† sinh 2r, so Var(x̂) = e^{−4r}/2
        let r = 0.5;
        // occupation tail decays as tanh(2r)^{2n}; 128 levels keep it below 1e-15
        let s = squeeze(&boson_vacuum(128), r).unwrap();
        let x = position_operator(128, 1.0);
        let var = s.expectation(&(&x * &x)).re - s.expectation(&x).re.powi(2);
        assert!((var - 0.5 * (-4.0 * r).exp()).abs() < 1e-10, "{var}");
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn squeeze_overflow_is_reported() {
        assert!(matches!(squeeze(&boson_vacuum(8), 1.5), Err(FockError::TruncationOverflow { .. })));
    }

    #[test]
    fn coherent_state_statistics() {
        let s = displace(&boson_vacuum(32), real(1.0)).unwrap();
        let n = s.expectation(&number_operator(32)).re;
        assert!((n - 1.0).abs() < 1e-8);
        let a = s.expectation(&annihilation(32));
        assert!((a - real(1.0)).norm() < 1e-8);
        // Poisson weights e^{-1}/k!
        let mut fact = 1.0;
        for k in 0..10 {
            if k > 0 {
                fact *= k as f64;
            }
            let p = s.amplitudes()[k].norm_sqr();
            assert!((p - (-1.0f64).exp() / fact).abs() < 1e-10);
        }
    }

    #[test]
    fn displacement_is_unitary() {
        for gamma in [c(2.0, 0.0), c(0.0, -2.0), c(1.2, 1.1), c(-0.5, 0.3)] {
            let s = displace(&boson_vacuum(64), gamma).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fermions_cannot_be_displaced() {
        let s = FockVector::vacuum(2, Statistics::Fermion).unwrap();
        assert_eq!(displace(&s, real(1.0)), Err(FockError::FermionicDisplacement));
    }

    #[test]
    fn centered_wavepacket_has_even_occupations_only() {
        let f = fock_representation(&position_wavepacket(0.0, 1.0).unwrap(), 32).unwrap();
        for n in (1..32).step_by(2) {
            assert_eq!(f.amplitudes()[n], real(0.0));
        }
    }

    #[test]
    fn fock_inner_product_matches_closed_form_overlap() {
        let a = position_wavepacket(0.0, 1.0).unwrap();
        let b = position_wavepacket(0.5, 1.0).unwrap();
        let fa = fock_representation(&a, 48).unwrap();
        let fb = fock_representation(&b, 48).unwrap();
        let s = fa.inner(&fb).unwrap();
        assert!((s - overlap(&a, &b).unwrap()).norm() < 1e-6);
    }

    #[test]
    fn kicked_wavepacket_fock_overlap() {
        let a = Wavepacket::new(0.3, 0.8, 1.0).unwrap();
        let b = Wavepacket::new(-0.2, -0.4, 1.0).unwrap();
        let s = fock_representation(&a, 48).unwrap().inner(&fock_representation(&b, 48).unwrap()).unwrap();
        assert!((s - overlap(&a, &b).unwrap()).norm() < 1e-6);
    }

    #[test]
    fn delta_limit_amplitude_ratio() {
        let v = position_eigenket_limit(16);
        assert!((v[2].re / v[0].re + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // finite width: ratio −t/√2 with t = 1/3
        let f = fock_representation(&position_wavepacket(0.0, 1.0).unwrap(), 32).unwrap();
        let ratio = f.amplitudes()[2].re / f.amplitudes()[0].re;
        assert!((ratio + (1.0 / 3.0) * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn fock_representation_requires_dimension() {
        assert!(matches!(
            fock_representation(&position_wavepacket(0.0, 1.0).unwrap(), 4),
            Err(FockError::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn fermionic_register_anticommutes() {
        let reg = FockRegister::new(Statistics::Fermion, 3, 2).unwrap();
        let ops: Vec<CMatrix> = (0..3).map(|k| reg.annihilation(k).unwrap()).collect();
        let id = CMatrix::identity(8, 8);
        for i in 0..3 {
            for j in 0..3 {
                let ac = &ops[i] * ops[j].adjoint() + ops[j].adjoint() * &ops[i];
                let expected = if i == j { id.clone() } else { CMatrix::zeros(8, 8) };
                assert!(max_abs(&(ac - expected)) < 1e-15);
                let aa = &ops[i] * &ops[j] + &ops[j] * &ops[i];
                assert!(max_abs(&aa) < 1e-15);
            }
        }
    }

    #[test]
    fn swap_conjugation_fermions_and_bosons() {
        for (stats, d) in [(Statistics::Fermion, 2), (Statistics::Boson, 4)] {
            let reg = FockRegister::new(stats, 3, d).unwrap();
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let u = reg.swap_unitary(i, j).unwrap();
                let ai = reg.annihilation(i).unwrap();
                let aj = reg.annihilation(j).unwrap();
                assert_eq!(u.adjoint() * &ai * &u, aj, "{stats:?} {i}{j}");
                assert_eq!(u.adjoint() * &aj * &u, ai, "{stats:?} {i}{j}");
                let spectator = reg.annihilation(3 - i - j).unwrap();
                assert_eq!(u.adjoint() * &spectator * &u, spectator);
                assert!(max_abs(&(u.adjoint() * &u - CMatrix::identity(reg.dim(), reg.dim()))) == 0.0);
            }
        }
    }

    #[test]
    fn self_swap_rejected() {
        let reg = FockRegister::new(Statistics::Fermion, 2, 2).unwrap();
        assert!(reg.swap_unitary(1, 1).is_err());
        assert!(reg.swap_unitary(0, 2).is_err());
    }
}
