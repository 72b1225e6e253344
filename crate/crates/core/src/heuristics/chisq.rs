//! Chi-square uniformity test and the regularized incomplete gamma function
//! behind its p-values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation with reflection below 0.5).
pub fn ln_gamma<S: Scalar>(x: S) -> S {
    let xf = x.to_f64_lossy();
    if xf < 0.5 {
        let pi = std::f64::consts::PI;
        let v = (pi / (pi * xf).sin()).abs().ln() - ln_gamma(1.0 - xf);
        return S::lit(v);
    }
    let z = xf - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    S::lit(0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln())
}

const MAX_TERMS: usize = 1000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Lower series for `P(a, x)`, valid for `x < a + 1`.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_TERMS {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Continued fraction for `Q(a, x)` (modified Lentz), valid for `x ≥ a + 1`.
fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn regularized_gamma_q<S: Scalar>(a: S, x: S) -> S {
    let (a, x) = (a.to_f64_lossy(), x.to_f64_lossy());
    if x <= 0.0 {
        return S::one();
    }
    let q = if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    };
    S::lit(q.clamp(0.0, 1.0))
}

/// Upper tail `P(X ≥ stat)` for a chi-square variable with `df` degrees of freedom.
pub fn chi_square_sf<S: Scalar>(stat: S, df: usize) -> S {
    regularized_gamma_q(S::lit(df as f64 / 2.0), stat / S::lit(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare<S: Scalar = f64> {
    pub stat: S,
    pub df: usize,
    pub p_value: S,
}

/// Goodness-of-fit against equal expected counts in every category.
///
/// With two degrees of freedom the tail is `exp(−stat/2)` exactly, and that
/// closed form is what gets reported.
pub fn chi_square_uniform<S: Scalar>(counts: &[u64]) -> Result<ChiSquare<S>> {
    if counts.len() < 2 {
        return Err(Error::invalid("need at least two categories"));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::data("test inapplicable: all counts are zero"));
    }
    // Σ(o−e)²/e with e = N/k equals (k·Σo² − N²)/N; the numerator is exact
    // in integers, so the statistic is rounded once.
    let k = counts.len() as u128;
    let n = total as u128;
    let squares: u128 = counts.iter().map(|&o| (o as u128) * (o as u128)).sum();
    let stat = S::lit((k * squares - n * n) as f64) / S::lit(total as f64);
    let df = counts.len() - 1;
    let p_value = if df == 2 {
        (-stat / S::lit(2.0)).exp()
    } else {
        chi_square_sf(stat, df)
    };
    Ok(ChiSquare { stat, df, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn statistic_is_exact_for_integer_cases() {
        let t = chi_square_uniform::<f64>(&[100, 0, 0]).unwrap();
        assert_eq!(t.stat, 200.0);
        let t = chi_square_uniform::<f64>(&[3, 5, 7, 9]).unwrap();
        // Direct sum with e = 6: (9 + 1 + 1 + 9) / 6.
        assert_eq!(t.stat, 20.0 / 6.0);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0f64)).abs() < 1e-13);
        assert!((ln_gamma(5.0f64) - 24.0f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
        assert!((ln_gamma(0.25f64) - 1.288_022_524_698_077_4).abs() < 1e-12);
    }

    #[test]
    fn uniform_counts() {
        let r = chi_square_uniform::<f64>(&[10, 10, 10]).unwrap();
        assert_eq!(r.stat, 0.0);
        assert_eq!(r.df, 2);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn degenerate_counts() {
        let r = chi_square_uniform::<f64>(&[100, 0, 0]).unwrap();
        // E = 100/3: (200/3)^2/(100/3) + 2 * (100/3) = 400/3 + 200/3 = 200.
        assert!((r.stat - 200.0).abs() < 1e-12);
        assert!((r.p_value / (-100.0f64).exp() - 1.0).abs() < 1e-12);
        let general = chi_square_sf(r.stat, 2);
        assert!((general / (-100.0f64).exp() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inapplicable() {
        let err = chi_square_uniform::<f64>(&[0, 0, 0]).unwrap_err();
        assert!(err.to_string().contains("test inapplicable"));
        assert!(chi_square_uniform::<f64>(&[3]).is_err());
    }

    #[test]
    fn table_statistics_map_to_reported_p_values() {
        // Two degrees of freedom: p = exp(-stat / 2).
        for (stat, p) in [(59.15f64, 1.4e-13), (111.05, 7.7e-25), (874.71, 1.1e-190)] {
            let got = chi_square_sf(stat, 2);
            assert!((got / p - 1.0).abs() < 0.05, "{stat}: {got:e}");
        }
    }

    #[test]
    fn other_degrees_of_freedom() {
        // Reference values: scipy.stats.chi2.sf.
        assert!((chi_square_sf(3.0f64, 1) - 0.083_264_516_663_550_42).abs() < 1e-12);
        assert!(
            (chi_square_sf(10.083333333333334f64, 3) - 0.017_870_892_893_625_56).abs() < 1e-10
        );
        assert!((chi_square_sf(0.5f64, 4) - 0.973_500_978_839_256_1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut counts in proptest::collection::vec(0u64..500, 3..6), seed in any::<u64>()) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let base = chi_square_uniform::<f64>(&counts).unwrap();
            let n = counts.len();
            counts.rotate_left((seed % n as u64) as usize);
            let rotated = chi_square_uniform::<f64>(&counts).unwrap();
            prop_assert!((base.stat - rotated.stat).abs() < 1e-9);
            let all_equal = counts.iter().all(|&c| c == counts[0]);
            prop_assert_eq!(base.stat == 0.0, all_equal);
        }
    }
}
