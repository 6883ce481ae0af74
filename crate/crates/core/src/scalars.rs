//! Ball volumes, sphere areas and the slicing constant `c_n`.
//!
//! Everything volume-like is kept as a natural logarithm; `|B_2^n|` underflows
//! an `f64` somewhere past `n = 350`, while its logarithm stays tame for any
//! dimension we care about.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the Gamma function for `x > 0`.
///
/// Stirling's series with seven correction terms, applied after shifting the
/// argument up to at least 15 with the recurrence `Γ(x+1) = xΓ(x)`. The
/// truncation error at the shifted argument is below `1e-17`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("ln_gamma needs a positive finite argument, got {x}")));
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < 15.0 {
        prod *= shifted;
        shifted += 1.0;
    }
    let z = shifted;
    let z2 = z * z;
    // Bernoulli-number coefficients B_{2k} / (2k (2k-1)).
    let series = (1.0 / 12.0
        + (-1.0 / 360.0
            + (1.0 / 1260.0
                + (-1.0 / 1680.0 + (1.0 / 1188.0 + (-691.0 / 360_360.0 + (1.0 / 156.0) / z2) / z2) / z2) / z2)
                / z2)
            / z2)
        / z;
    Ok((z - 0.5) * z.ln() - z + LN_SQRT_2PI + series - prod.ln())
}

fn check_dim(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::domain(format!("dimension must be at least {min}, got {n}")))
    } else {
        Ok(())
    }
}

/// `ln |B_2^n| = (n/2) ln π − ln Γ(1 + n/2)`.
pub fn log_unit_ball_volume(n: usize) -> Result<f64> {
    check_dim(n, 1)?;
    let half = n as f64 / 2.0;
    Ok(half * PI.ln() - ln_gamma(1.0 + half)?)
}

/// `ln |S^{n-1}| = ln n + ln |B_2^n|`.
pub fn log_sphere_area(n: usize) -> Result<f64> {
    Ok((n as f64).ln() + log_unit_ball_volume(n)?)
}

/// Surface area `|S^{n-1}|` of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> Result<f64> {
    Ok(log_sphere_area(n)?.exp())
}

/// `ln c_n = ((n-1)/n) ln |B_2^n| − ln |B_2^{n-1}|`.
pub fn log_slicing_constant(n: usize) -> Result<f64> {
    check_dim(n, 2)?;
    let nf = n as f64;
    Ok((nf - 1.0) / nf * log_unit_ball_volume(n)? - log_unit_ball_volume(n - 1)?)
}

/// The sharp slicing constant for intersection bodies, `c_n < 1`.
pub fn slicing_constant(n: usize) -> Result<f64> {
    Ok(log_slicing_constant(n)?.exp())
}

/// Per-dimension constants, all derived from the same log-gamma evaluations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionConstants {
    pub n: usize,
    pub ln_ball_vol: f64,
    pub sphere_area: f64,
    pub ln_ball_vol_prev: f64,
    pub slicing_const: f64,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Result<Self> {
        check_dim(n, 2)?;
        let ln_ball_vol = log_unit_ball_volume(n)?;
        let ln_ball_vol_prev = log_unit_ball_volume(n - 1)?;
        let nf = n as f64;
        Ok(Self {
            n,
            ln_ball_vol,
            sphere_area: nf * ln_ball_vol.exp(),
            ln_ball_vol_prev,
            slicing_const: ((nf - 1.0) / nf * ln_ball_vol - ln_ball_vol_prev).exp(),
        })
    }

    pub fn ball_volume(&self) -> f64 {
        self.ln_ball_vol.exp()
    }

    pub fn prev_ball_volume(&self) -> f64 {
        self.ln_ball_vol_prev.exp()
    }

    /// `|S^{n-2}| = (n-1) |B_2^{n-1}|`.
    pub fn subsphere_area(&self) -> f64 {
        (self.n as f64 - 1.0) * self.ln_ball_vol_prev.exp()
    }
}

/// Formats a constant with 12 significant digits, as used in reports.
pub fn format_sig12(x: f64) -> String {
    format!("{:.11e}", x).parse::<f64>().map(|v| format!("{v}")).unwrap_or_else(|_| x.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // ln|B_2^n| from mpmath at 40 digits.
    const LN_BALL: [(usize, f64); 11] = [
        (1, std::f64::consts::LN_2),
        (2, 1.144_729_885_849_400_2),
        (3, 1.432_411_958_301_181_1),
        (4, 1.596_312_591_138_855),
        (10, 0.936_157_686_464_954_9),
        (51, -30.437_234_006_724_626),
        (100, -91.241_272_659_303_02),
        (101, -92.632_369_591_607_23),
        (200, -249.266_386_970_623_47),
        (1000, -2_038.965_515_535_456),
        (10000, -31_867.494_079_629_766),
    ];

    #[test]
    fn log_ball_volume_matches_high_precision_oracle() {
        for &(n, expected) in &LN_BALL {
            let got = log_unit_ball_volume(n).unwrap();
            // relative error of exp(got) is |got - expected| to first order
            assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0), "n={n}: {got} vs {expected}");
        }
    }

    #[test]
    fn small_dimensions_closed_form() {
        assert!((log_unit_ball_volume(2).unwrap() - PI.ln()).abs() < 1e-14);
        assert!((log_unit_ball_volume(3).unwrap() - (4.0 * PI / 3.0).ln()).abs() < 1e-14);
        assert_relative_eq!(sphere_area(2).unwrap(), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3).unwrap(), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(1).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn slicing_constant_values() {
        assert_relative_eq!(slicing_constant(2).unwrap(), PI.sqrt() / 2.0, max_relative = 1e-14);
        assert!((slicing_constant(3).unwrap() - 0.827_133_987_865_866_7).abs() < 1e-12);
        assert!((slicing_constant(10).unwrap() - 0.704_034_019_466_971_2).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(log_unit_ball_volume(0).is_err());
        assert!(slicing_constant(1).is_err());
        assert!(DimensionConstants::new(1).is_err());
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-2.5).is_err());
    }

    #[test]
    fn ln_gamma_integer_and_half_integer() {
        let mut ln_fact = 0.0_f64;
        for k in 1..60 {
            ln_fact += (k as f64).ln();
            // Γ(k+1) = k!
            assert!((ln_gamma(k as f64 + 1.0).unwrap() - ln_fact).abs() < 1e-14 * ln_fact.max(1.0));
        }
        assert_relative_eq!(ln_gamma(0.5).unwrap(), PI.sqrt().ln(), max_relative = 1e-14);
        assert_relative_eq!(ln_gamma(2.5).unwrap(), (0.75 * PI.sqrt()).ln(), max_relative = 1e-14);
    }

    #[test]
    fn constants_invariants() {
        for n in 2..=200 {
            let c = DimensionConstants::new(n).unwrap();
            let nf = n as f64;
            assert_relative_eq!(c.sphere_area, nf * c.ln_ball_vol.exp(), max_relative = 1e-12);
            let lhs = c.slicing_const * c.ln_ball_vol_prev.exp();
            let rhs = (c.ln_ball_vol * (nf - 1.0) / nf).exp();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            assert!(c.slicing_const < 1.0);
        }
    }

    #[test]
    fn sphere_area_gamma_recursion() {
        // |S^{n-1}| / |S^{n-2}| = √π Γ((n-1)/2) / Γ(n/2)
        for n in 3..=200 {
            let ratio = sphere_area(n).unwrap() / sphere_area(n - 1).unwrap();
            let nf = n as f64;
            let expected = (0.5 * PI.ln() + ln_gamma((nf - 1.0) / 2.0).unwrap() - ln_gamma(nf / 2.0).unwrap()).exp();
            assert_relative_eq!(ratio, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn slicing_constant_below_one_and_non_increasing() {
        let mut prev = f64::INFINITY;
        for n in 2..=10_000 {
            let ln_c = log_slicing_constant(n).unwrap();
            assert!(ln_c < 0.0, "c_{n} >= 1");
            assert!(ln_c <= prev + 1e-12, "c_n increased at n={n}");
            prev = ln_c;
        }
        // limit is e^{-1/2}
        assert!((prev + 0.5).abs() < 1e-3);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(PI), "3.14159265359");
        assert_eq!(format_sig12(0.886_226_925_452_758), "0.886226925453");
    }
}
