//! The deterministic envelope `a(t) = (1 + t²)^(-α/2)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile {
    alpha: f64,
}

impl DecayProfile {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `a(t)`; even in `t`, equal to 1 at the origin.
    pub fn evaluate(&self, t: f64) -> f64 {
        (1.0 + t * t).powf(-self.alpha / 2.0)
    }

    fn a_squared(&self, s: f64) -> f64 {
        (1.0 + s * s).powf(-self.alpha)
    }

    /// `∫_lower^upper a(s)² ds` for `0 ≤ lower ≤ upper`.
    pub fn integral_a_squared(&self, lower: f64, upper: f64) -> Result<f64> {
        if !(lower >= 0.0) || !(lower <= upper) || !upper.is_finite() {
            return Err(Error::invalid(format!(
                "need 0 <= lower <= upper, got [{lower}, {upper}]"
            )));
        }
        if lower == upper {
            return Ok(0.0);
        }
        if self.alpha == 0.5 {
            return Ok(upper.asinh() - lower.asinh());
        }
        if self.alpha == 1.0 {
            return Ok(upper.atan() - lower.atan());
        }
        // Octave partition [0,1], [1,2], [2,4], ... keeps each piece close to
        // a power law, where Gauss-Kronrod converges fast.
        let mut breaks = vec![lower];
        let mut edge = 1.0f64;
        while edge < upper {
            if edge > lower {
                breaks.push(edge);
            }
            edge *= 2.0;
        }
        breaks.push(upper);
        let per_piece = 1e-12 / breaks.len() as f64;
        let f = |s: f64| self.a_squared(s);
        Ok(breaks
            .windows(2)
            .map(|w| adaptive_gauss_kronrod(&f, w[0], w[1], per_piece, 40))
            .sum())
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

pub(crate) fn adaptive_gauss_kronrod(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (value, err) = gauss_kronrod_15(f, a, b);
    if err <= tol || depth == 0 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive_gauss_kronrod(f, a, mid, tol / 2.0, depth - 1)
        + adaptive_gauss_kronrod(f, mid, b, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn envelope_values() {
        let p = DecayProfile::new(0.5).unwrap();
        assert_eq!(p.evaluate(0.0), 1.0);
        assert!((p.evaluate(1.0) - 2f64.powf(-0.25)).abs() < 1e-15);
        assert_eq!(p.evaluate(-3.0), p.evaluate(3.0));
        let scaled = p.evaluate(1e3) * 1e3f64.powf(0.5);
        assert!(scaled > 0.999 && scaled < 1.001);
        assert!(DecayProfile::new(0.0).is_err());
    }

    #[test]
    fn envelope_is_strictly_decreasing() {
        for alpha in [0.25, 0.5, 1.0, 2.0] {
            let p = DecayProfile::new(alpha).unwrap();
            let mut prev = p.evaluate(0.0);
            for i in 1..20_000 {
                let v = p.evaluate(i as f64 * 0.05);
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn closed_forms() {
        let p = DecayProfile::new(0.5).unwrap();
        for n in [1.0, 10.0, 2000.0] {
            let expected = (n + (1.0f64 + n * n).sqrt()).ln();
            assert!((p.integral_a_squared(0.0, n).unwrap() - expected).abs() < 1e-12);
        }
        let p1 = DecayProfile::new(1.0).unwrap();
        assert!((p1.integral_a_squared(0.0, 1e6).unwrap() - FRAC_PI_2).abs() < 1e-5);
        assert_eq!(p.integral_a_squared(3.0, 3.0).unwrap(), 0.0);
        assert!(p.integral_a_squared(2.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form_when_forced() {
        // α = 1/2 through the generic path
        let f = |s: f64| 1.0 / (1.0 + s * s).sqrt();
        let v = adaptive_gauss_kronrod(&f, 0.0, 50.0, 1e-13, 40);
        assert!((v - 50f64.asinh()).abs() < 1e-10);
    }

    #[test]
    fn generic_alpha_is_additive() {
        for alpha in [0.25, 0.75, 1.5] {
            let p = DecayProfile::new(alpha).unwrap();
            let (a, b, c) = (0.3, 7.7, 1234.5);
            let lhs = p.integral_a_squared(a, b).unwrap() + p.integral_a_squared(b, c).unwrap();
            let rhs = p.integral_a_squared(a, c).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-12 * rhs.max(1.0),
                "alpha {alpha}: {lhs} vs {rhs}"
            );
        }
    }
}
