//! Finite-width Gaussian wavepackets standing in for position and momentum
//! eigenkets.
//!
//! A wavepacket with parameter `ω` has width `b = (1/2ω)^{1/2}` and position
//! amplitude `ψ(y) = (πb²)^{-1/4} exp(-(y-x₀)²/2b²) e^{i p₀ y}`. Wavepackets
//! are unit normalized; the δ-normalized value `1/(b√π)` of the self-overlap
//! is available through [`raw_overlap`].

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::c;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("frequency must be positive and finite, got {0}")]
    NonPositiveOmega(f64),
    #[error("width must be positive and finite, got {0}")]
    NonPositiveWidth(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("overlap of wavepackets with different frequencies ({0} vs {1}) requires the general-frequency overlap")]
    MismatchedOmega(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavepacket {
    center: f64,
    momentum_kick: f64,
    omega: f64,
}

impl Wavepacket {
    pub fn new(center: f64, momentum_kick: f64, omega: f64) -> Result<Self, GaussianError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(GaussianError::NonPositiveOmega(omega));
        }
        if !center.is_finite() {
            return Err(GaussianError::NonFinite("center"));
        }
        if !momentum_kick.is_finite() {
            return Err(GaussianError::NonFinite("momentum kick"));
        }
        Ok(Self { center, momentum_kick, omega })
    }

    /// Construct from the width `b` instead of `ω`.
    pub fn with_width(center: f64, momentum_kick: f64, width: f64) -> Result<Self, GaussianError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(GaussianError::NonPositiveWidth(width));
        }
        Self::new(center, momentum_kick, omega_for_width(width))
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn momentum_kick(&self) -> f64 {
        self.momentum_kick
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn width(&self) -> f64 {
        width_for_omega(self.omega)
    }

    pub fn translated(&self, shift: f64) -> Self {
        Self { center: self.center + shift, ..*self }
    }

    fn norm_constant(&self) -> f64 {
        let b = self.width();
        (PI * b * b).powf(-0.25)
    }

    /// `⟨y|w⟩`
    pub fn position_amplitude(&self, y: f64) -> Complex64 {
        let b = self.width();
        let u = (y - self.center) / b;
        let phase = c(0.0, self.momentum_kick * y).exp();
        phase * (self.norm_constant() * (-0.5 * u * u).exp())
    }

    /// `⟨p|w⟩` with `⟨p|y⟩ = e^{-ipy}/√(2π)`.
    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        let b = self.width();
        let dp = p - self.momentum_kick;
        let phase = c(0.0, -dp * self.center).exp();
        phase * (self.norm_constant() * b * (-0.5 * dp * dp * b * b).exp())
    }
}

pub fn width_for_omega(omega: f64) -> f64 {
    (0.5 / omega).sqrt()
}

pub fn omega_for_width(width: f64) -> f64 {
    0.5 / (width * width)
}

/// Regularized position eigenket `|χ_{x'}⟩`.
pub fn position_wavepacket(x: f64, omega: f64) -> Result<Wavepacket, GaussianError> {
    Wavepacket::new(x, 0.0, omega)
}

/// Regularized momentum eigenket: the Fourier partner of
/// `position_wavepacket(·, ω)`, so its momentum-space width equals the
/// position-space width `(1/2ω)^{1/2}` of the latter.
pub fn momentum_wavepacket(p: f64, omega: f64) -> Result<Wavepacket, GaussianError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(GaussianError::NonPositiveOmega(omega));
    }
    Wavepacket::new(0.0, p, 0.25 / omega)
}

fn canonical_order(a: &Wavepacket, b: &Wavepacket) -> bool {
    let key = |w: &Wavepacket| (w.center, w.momentum_kick, w.omega);
    let (ka, kb) = (key(a), key(b));
    ka.0.total_cmp(&kb.0)
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.total_cmp(&kb.2))
        .is_le()
}

/// Shifted-coordinate Gaussian integral of `ψ_a*(y) ψ_b(y)` around the
/// midpoint `m`. Returns `(⟨a|b⟩, ⟨a|x̂|b⟩)`.
fn overlap_moments(a: &Wavepacket, b: &Wavepacket) -> (Complex64, Complex64) {
    let (ba2, bb2) = (a.width().powi(2), b.width().powi(2));
    let m = 0.5 * (a.center + b.center);
    let h = 0.5 * (b.center - a.center);
    let k = b.momentum_kick - a.momentum_kick;
    let alpha = 0.5 / ba2 + 0.5 / bb2;
    let beta = c(h * (1.0 / bb2 - 1.0 / ba2), k);
    let gamma = c(-alpha * h * h, k * m);
    let value = (beta * beta / (4.0 * alpha) + gamma).exp()
        * ((PI / alpha).sqrt() * a.norm_constant() * b.norm_constant());
    let position = value * (beta / (2.0 * alpha) + m);
    (value, position)
}

fn ordered_moments(a: &Wavepacket, b: &Wavepacket) -> (Complex64, Complex64) {
    if canonical_order(a, b) {
        overlap_moments(a, b)
    } else {
        let (v, x) = overlap_moments(b, a);
        (v.conj(), x.conj())
    }
}

/// Unit-normalized overlap `⟨a|b⟩` for equal frequencies.
pub fn overlap(a: &Wavepacket, b: &Wavepacket) -> Result<Complex64, GaussianError> {
    if a.omega != b.omega {
        return Err(GaussianError::MismatchedOmega(a.omega, b.omega));
    }
    Ok(ordered_moments(a, b).0)
}

/// `⟨a|b⟩` for arbitrary frequencies via the general two-Gaussian integral.
pub fn overlap_general(a: &Wavepacket, b: &Wavepacket) -> Complex64 {
    ordered_moments(a, b).0
}

/// Overlap in the δ-normalization of the ideal kets: the unit-normalized
/// overlap multiplied by `1/(b√π)`.
pub fn raw_overlap(a: &Wavepacket, b: &Wavepacket) -> Result<Complex64, GaussianError> {
    let s = overlap(a, b)?;
    Ok(s * raw_scale(a.width()))
}

/// `1/(b√π)`: the self-overlap of a δ-normalized wavepacket.
pub fn raw_scale(width: f64) -> f64 {
    1.0 / (width * PI.sqrt())
}

/// `⟨a|x̂|b⟩` for arbitrary frequencies.
pub fn position_matrix_element(a: &Wavepacket, b: &Wavepacket) -> Complex64 {
    ordered_moments(a, b).1
}

/// `⟨x̂²⟩ - ⟨x̂⟩²` of a single wavepacket.
pub fn position_variance(w: &Wavepacket) -> f64 {
    0.5 * w.width().powi(2)
}

/// Overlap of equal-width wavepackets with zero kicks, `exp(-(Δx)²/4b²)`.
pub fn centered_overlap(distance: f64, width: f64) -> f64 {
    (-(distance * distance) / (4.0 * width * width)).exp()
}
