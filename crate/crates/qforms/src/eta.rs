//! The concrete modular-form expansions everything else is built from:
//! Dedekind eta quotients, the level Hauptmoduls, the Eisenstein series
//! E_2, E_2^{(p)}, E_4, the discriminant Δ and the j-function.
//!
//! Eta products are expanded through the pentagonal-number expansion of
//! `∏ (1 − q^n)`; divisor sums are computed by trial division, which is
//! plenty at the scales this crate works at.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::qseries::QSeries;
use crate::{Error, Result};

/// A level whose genus-zero structure this crate knows how to exploit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Level(u32);

impl Level {
    /// Every supported level.
    pub const ALL: [Level; 7] = [
        Level(1),
        Level(2),
        Level(3),
        Level(4),
        Level(5),
        Level(7),
        Level(13),
    ];

    /// The prime levels, for which `(η(z)/η(pz))^{24/(p−1)}` is a Hauptmodul.
    pub const PRIMES: [Level; 5] = [Level(2), Level(3), Level(5), Level(7), Level(13)];

    pub fn new(n: u32) -> Result<Level> {
        match n {
            1 | 2 | 3 | 4 | 5 | 7 | 13 => Ok(Level(n)),
            other => Err(Error::UnsupportedLevel(other)),
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// True for the prime levels 2, 3, 5, 7, 13.
    pub fn is_prime(self) -> bool {
        self.0 != 1 && self.0 != 4
    }

    /// The eta-quotient exponent 24/(p−1) for prime levels.
    pub fn eta_exponent(self) -> Option<u32> {
        if self.is_prime() {
            Some(24 / (self.0 - 1))
        } else {
            None
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A formal product `∏ η(d_i z)^{r_i}`, tracked by its factor list.
///
/// The fractional q-power in front is `Σ d_i·r_i / 24`; every quotient this
/// crate instantiates has an integral leading exponent, and expansion
/// rejects anything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtaQuotient {
    factors: Vec<(u32, i64)>,
}

impl EtaQuotient {
    pub fn new(factors: Vec<(u32, i64)>) -> Self {
        assert!(factors.iter().all(|&(d, _)| d > 0), "eta multipliers are positive");
        EtaQuotient { factors }
    }

    pub fn factors(&self) -> &[(u32, i64)] {
        &self.factors
    }

    /// Leading q-exponent `Σ d·r / 24`, or an error when it is fractional.
    pub fn leading_exponent(&self) -> Result<i64> {
        let s24: i64 = self.factors.iter().map(|&(d, r)| d as i64 * r).sum();
        if s24.rem_euclid(24) != 0 {
            return Err(Error::FractionalLeadingExponent { twentyfourths: s24 });
        }
        Ok(s24.div_euclid(24))
    }

    /// Exact expansion `q^s · ∏ P(q^d)^r` on the window `[s, precision]`,
    /// where `P` is the pentagonal expansion of `∏ (1 − q^n)`.
    pub fn expand(&self, precision: i64) -> Result<QSeries> {
        let s = self.leading_exponent()?;
        if precision < s {
            return Ok(QSeries::zero(precision));
        }
        let unit_prec = precision - s;
        let mut unit = QSeries::one(unit_prec);
        for &(d, r) in &self.factors {
            if r == 0 {
                continue;
            }
            let base = euler_product(unit_prec / d as i64).dilate(d);
            let factor = if r > 0 {
                base.pow(r as u32)
            } else {
                base.invert()?.pow((-r) as u32)
            };
            unit = unit.mul(&factor);
        }
        unit.shift(s).truncate(precision)
    }
}

/// `∏_{n≥1} (1 − q^n) = Σ_{k∈ℤ} (−1)^k q^{k(3k−1)/2}` on `[0, precision]`.
pub fn euler_product(precision: i64) -> QSeries {
    assert!(precision >= 0);
    let mut coeffs = vec![BigInt::ZERO; precision as usize + 1];
    coeffs[0] = BigInt::one();
    for k in 1i64.. {
        let g1 = k * (3 * k - 1) / 2;
        let g2 = k * (3 * k + 1) / 2; // the k < 0 branch
        if g1 > precision && g2 > precision {
            break;
        }
        let sign = if k % 2 == 0 { 1 } else { -1 };
        for g in [g1, g2] {
            if g <= precision {
                coeffs[g as usize] = BigInt::from(sign);
            }
        }
    }
    QSeries::from_integer_coeffs(0, coeffs)
}

/// The Hauptmodul with expansion `q^{-1} + O(1)`: `(η(z)/η(Nz))^{24/(N−1)}`
/// for prime levels, `η(z)^8/η(4z)^8` for level 4, and `j = E_4^3/Δ` for
/// level 1.
pub fn hauptmodul(level: Level, precision: i64) -> Result<QSeries> {
    match level.get() {
        1 => {
            let e4_cubed = eisenstein_e4(precision + 1).pow(3);
            let delta_inv = delta(precision + 2)?.invert()?;
            e4_cubed.mul(&delta_inv).truncate(precision)
        }
        4 => EtaQuotient::new(vec![(1, 8), (4, -8)]).expand(precision),
        p => {
            let e = level.eta_exponent().expect("prime level") as i64;
            EtaQuotient::new(vec![(1, e), (p, -e)]).expand(precision)
        }
    }
}

/// `Δ = η(z)^{24} = q·∏(1 − q^n)^{24}` on `[1, precision]`.
pub fn delta(precision: i64) -> Result<QSeries> {
    EtaQuotient::new(vec![(1, 24)]).expand(precision)
}

/// The j-function `q^{-1} + 744 + 196884q + …`.
pub fn j_invariant(precision: i64) -> Result<QSeries> {
    hauptmodul(Level::new(1)?, precision)
}

fn sigma(n: u64, k: u32) -> u64 {
    let mut total = 0u64;
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            total += d.pow(k);
            let e = n / d;
            if e != d {
                total += e.pow(k);
            }
        }
        d += 1;
    }
    total
}

/// `E_2 = 1 − 24 Σ σ_1(n) q^n` (quasi-modular, weight 2, level 1).
pub fn eisenstein_e2(precision: i64) -> QSeries {
    assert!(precision >= 0);
    let mut coeffs = Vec::with_capacity(precision as usize + 1);
    coeffs.push(BigInt::one());
    for n in 1..=precision {
        coeffs.push(BigInt::from(-24i64 * sigma(n as u64, 1) as i64));
    }
    QSeries::from_integer_coeffs(0, coeffs)
}

/// The holomorphic weight-2 level-p combination
/// `E_2^{(p)} = (p·E_2(pz) − E_2(z)) / (p − 1)`, normalized so the constant
/// term is exactly 1.
pub fn eisenstein_e2_level(p: Level, precision: i64) -> Result<QSeries> {
    if !p.is_prime() {
        return Err(Error::UnsupportedLevel(p.get()));
    }
    let pv = p.get() as i64;
    let dilated = eisenstein_e2(precision / pv).dilate(p.get());
    let combined = dilated
        .scale_int(&BigInt::from(pv))
        .sub(&eisenstein_e2(precision));
    combined
        .scale(&BigRational::new(BigInt::one(), BigInt::from(pv - 1)))
        .truncate(precision)
}

/// `E_4 = 1 + 240 Σ σ_3(n) q^n`.
pub fn eisenstein_e4(precision: i64) -> QSeries {
    assert!(precision >= 0);
    let mut coeffs = Vec::with_capacity(precision as usize + 1);
    coeffs.push(BigInt::one());
    for n in 1..=precision {
        coeffs.push(BigInt::from(240i64) * BigInt::from(sigma(n as u64, 3)));
    }
    QSeries::from_integer_coeffs(0, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{Signed, Zero};

    fn int(c: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(c))
    }

    /// Direct-product oracle over plain i64 vectors, independent of QSeries:
    /// expand ∏_{n=1..limit} (1 − q^n) by explicit factor-by-factor
    /// multiplication.
    fn oracle_euler(prec: usize) -> Vec<i64> {
        let mut c = vec![0i64; prec + 1];
        c[0] = 1;
        for n in 1..=prec {
            for k in (n..=prec).rev() {
                c[k] -= c[k - n];
            }
        }
        c
    }

    fn assert_coeffs(series: &QSeries, v: i64, expected: &[i64]) {
        for (i, &want) in expected.iter().enumerate() {
            let e = v + i as i64;
            assert_eq!(
                series.coefficient(e).unwrap(),
                int(want),
                "coefficient of q^{}",
                e
            );
        }
    }

    #[test]
    fn euler_product_matches_direct_factor_multiplication() {
        let prec = 60;
        let fast = euler_product(prec);
        let direct = oracle_euler(prec as usize);
        for (n, &want) in direct.iter().enumerate() {
            assert_eq!(fast.coefficient(n as i64).unwrap(), int(want));
        }
    }

    #[test]
    fn euler_product_small_windows() {
        assert_coeffs(&euler_product(7), 0, &[1, -1, -1, 0, 0, 1, 0, 1]);
        let one = euler_product(0);
        assert_eq!(one.coefficient(0).unwrap(), int(1));
        assert_eq!(euler_product(12).coefficient(12).unwrap(), int(-1));
    }

    #[test]
    fn euler_product_is_pentagonally_sparse() {
        let prec = 500;
        let p = euler_product(prec);
        let nonzero: Vec<_> = p.iter().filter(|(_, c)| !c.is_zero()).collect();
        for (_, c) in &nonzero {
            assert!(c.clone().abs() == int(1));
        }
        let bound = 2.0 * (prec as f64).sqrt().ceil() + 3.0;
        assert!((nonzero.len() as f64) < bound, "{} terms", nonzero.len());
    }

    #[test]
    fn delta_expansion_and_tau_values() {
        let d = delta(8).unwrap();
        assert_eq!(d.valuation(), 1);
        assert_coeffs(&d, 1, &[1, -24, 252, -1472, 4830, -6048, -16744, 84480]);
        // τ(2) = −24 by direct i64 convolution of the euler factors
        let euler = oracle_euler(8);
        let mut acc = vec![0i64; 9];
        acc[0] = 1;
        for _ in 0..24 {
            let mut next = vec![0i64; 9];
            for i in 0..9 {
                for j in 0..9 - i {
                    next[i + j] += acc[i] * euler[j];
                }
            }
            acc = next;
        }
        assert_eq!(acc[1], -24);
        assert_eq!(d.coefficient(2).unwrap(), int(acc[1]));
    }

    #[test]
    fn eta_quotient_rejects_fractional_exponent() {
        let err = EtaQuotient::new(vec![(1, 1)]).expand(5).unwrap_err();
        assert!(matches!(
            err,
            Error::FractionalLeadingExponent { twentyfourths: 1 }
        ));
    }

    #[test]
    fn level2_hauptmodul_expansion() {
        let psi = hauptmodul(Level::new(2).unwrap(), 5).unwrap();
        assert_eq!(psi.valuation(), -1);
        assert_coeffs(&psi, -1, &[1, -24, 276, -2048, 11202, -49152, 184024]);
    }

    #[test]
    fn level13_hauptmodul_expansion() {
        let psi = hauptmodul(Level::new(13).unwrap(), 8).unwrap();
        assert_coeffs(&psi, -1, &[1, -2, -1, 2, 1, 2, -2, 0, -2, -2]);
    }

    #[test]
    fn level4_hauptmodul_has_odd_support_above_the_constant() {
        let psi = hauptmodul(Level::new(4).unwrap(), 40).unwrap();
        assert_coeffs(&psi, -1, &[1, -8, 20, 0, -62, 0, 216, 0, -641]);
        let shifted = psi.add(&QSeries::monomial_int(BigInt::from(8), 0, 40));
        for n in 0..=40i64 {
            if n % 2 == 0 {
                assert!(
                    shifted.coefficient(n).unwrap().is_zero(),
                    "even exponent {} should vanish",
                    n
                );
            }
        }
    }

    #[test]
    fn level1_hauptmodul_is_j() {
        let j = hauptmodul(Level::new(1).unwrap(), 3).unwrap();
        assert_coeffs(&j, -1, &[1, 744, 196884, 21493760, 864299970]);
        // independent route: j·Δ = E_4^3 coefficient-for-coefficient
        let prec = 20;
        let j = j_invariant(prec).unwrap();
        let lhs = j.mul(&delta(prec + 2).unwrap());
        let rhs = eisenstein_e4(prec).pow(3);
        let hi = std::cmp::min(lhs.precision(), rhs.precision());
        assert!(lhs.agrees_through(&rhs, hi).unwrap());
    }

    #[test]
    fn j_minus_pole_and_constant_starts_at_q() {
        let j = j_invariant(6).unwrap();
        let pole = QSeries::monomial_int(BigInt::one(), -1, 6);
        let c = QSeries::monomial_int(BigInt::from(744), 0, 6);
        let tail = j.sub(&pole).sub(&c);
        assert!(tail.valuation() >= 1);
        assert!(tail.coefficient(0).unwrap().is_zero());
    }

    #[test]
    fn hauptmoduls_are_integral_at_every_level() {
        for level in Level::ALL {
            let psi = hauptmodul(level, 50).unwrap();
            assert!(psi.assert_integral().is_ok(), "level {}", level);
            assert_eq!(psi.valuation(), -1, "level {}", level);
            assert_eq!(psi.coefficient(-1).unwrap(), int(1), "level {}", level);
        }
    }

    #[test]
    fn eisenstein_series_small_windows() {
        assert_coeffs(&eisenstein_e2(6), 0, &[1, -24, -72, -96, -168, -144, -288]);
        assert_coeffs(&eisenstein_e4(4), 0, &[1, 240, 2160, 6720, 17520]);
        let e22 = eisenstein_e2_level(Level::new(2).unwrap(), 6).unwrap();
        assert_coeffs(&e22, 0, &[1, 24, 24, 96, 24, 144, 96]);
        let e213 = eisenstein_e2_level(Level::new(13).unwrap(), 6).unwrap();
        assert_coeffs(&e213, 0, &[1, 2, 6, 8, 14, 12, 24]);
        assert!(e22.is_integral() && e213.is_integral());
    }

    #[test]
    fn e2_level_rejects_composite_levels() {
        assert!(eisenstein_e2_level(Level::new(4).unwrap(), 5).is_err());
        assert!(eisenstein_e2_level(Level::new(1).unwrap(), 5).is_err());
    }

    #[test]
    fn sigma_by_trial_division() {
        // σ against a transparent full scan
        for n in 1..200u64 {
            let direct: u64 = (1..=n).filter(|d| n % d == 0).sum();
            assert_eq!(sigma(n, 1), direct);
            let direct3: u64 = (1..=n).filter(|d| n % d == 0).map(|d| d.pow(3)).sum();
            assert_eq!(sigma(n, 3), direct3);
        }
        assert_eq!(sigma(1, 3), 1);
    }

    #[test]
    fn delta_equals_shifted_euler_power() {
        let prec = 30;
        let d = delta(prec).unwrap();
        let alt = euler_product(prec - 1).pow(24).shift(1);
        assert!(d.agrees_through(&alt, prec).unwrap());
    }
}
