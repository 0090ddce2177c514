//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.
//!
//! This is the numerical oracle path for the Gaussian overlap and binned
//! POVM integrals; the closed forms elsewhere are checked against it.

use num_complex::Complex64;

// Tabulated 15-point Gauss–Kronrod abscissae and weights, kept at full
// published precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 60;

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

fn kronrod15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += sum * WGK[j];
        if j % 2 == 1 {
            gauss += sum * WG[j / 2];
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).norm())
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol` by recursive
/// bisection.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: Complex64::new(0.0, 0.0), error_estimate: 0.0, evaluations: 0 };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut evaluations = 0;
    let (value, error_estimate) = recurse(&f, lo, hi, tol, 0, &mut evaluations);
    Quadrature { value: value * sign, error_estimate, evaluations }
}

fn recurse<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    evaluations: &mut usize,
) -> (Complex64, f64) {
    let (value, err) = kronrod15(f, a, b);
    *evaluations += 15;
    if err <= tol || depth >= MAX_DEPTH {
        return (value, err);
    }
    let mid = 0.5 * (a + b);
    let (left, el) = recurse(f, a, mid, 0.5 * tol, depth + 1, evaluations);
    let (right, er) = recurse(f, mid, b, 0.5 * tol, depth + 1, evaluations);
    (left + right, el + er)
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate(|x| Complex64::new(f(x), 0.0), a, b, tol).value.re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_high_degree_polynomials() {
        // K15 integrates degree 22 exactly on a single panel
        for k in 0..=22 {
            let (v, _) = kronrod15(&|x: f64| Complex64::new(x.powi(k), 0.0), -1.0, 1.0);
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((v.re - exact).abs() < 1e-14, "degree {k}: {} vs {exact}", v.re);
        }
    }

    #[test]
    fn gauss_subrule_is_exact_to_degree_13() {
        for k in [0, 2, 4, 10, 12] {
            let f = |x: f64| x.powi(k);
            let g: f64 = WG[3] * f(0.0)
                + (0..3).map(|j| WG[j] * (f(XGK[2 * j + 1]) + f(-XGK[2 * j + 1]))).sum::<f64>();
            assert!((g - 2.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_integral() {
        let v = integrate_real(|x| (-x * x).exp(), -12.0, 12.0, 1e-13);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integrand() {
        // ∫_0^π e^{ix} dx = 2i
        let q = integrate(|x| Complex64::new(0.0, x).exp(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((q.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate_real(|x| x * x, 0.0, 1.0, 1e-14);
        let b = integrate_real(|x| x * x, 1.0, 0.0, 1e-14);
        assert!((a + b).abs() < 1e-15);
    }
}
