//! Truncated Laurent series in `q` with exact rational coefficients.
//!
//! A [`QSeries`] stores coefficients for the exponent window `[v, P]`
//! together with the guarantee that every coefficient in that window is
//! exact. `P = v − 1` encodes a series that is zero to the stated
//! precision. Reading past `P` is a hard error, never a silent zero:
//! silently padding a truncated q-expansion with zeros is the classic
//! q-series bug, so the window is enforced at the API boundary.
//!
//! Internally the window is held as one shared denominator and a dense
//! vector of integer numerators. Almost every series in this crate is
//! integral, so the shared denominator is almost always 1 and the ring
//! operations run on plain big integers; rationals only show up when an
//! operator such as weight-0 T_p divides by p.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::min;
use std::fmt;

use crate::{Error, Result};

/// Version tag for the on-disk series record.
pub const SERIES_FORMAT_VERSION: u32 = 1;

/// Pair-operation count above which multiplication fans out to rayon.
const PARALLEL_MUL_THRESHOLD: usize = 1 << 14;

/// A truncated Laurent series `Σ_{n=v}^{P} c_n q^n` with exact rational
/// coefficients, reliable exactly on the window `[v, P]`.
#[derive(Clone, PartialEq, Eq)]
pub struct QSeries {
    /// Lowest exponent with a stored coefficient. For the zero series this
    /// is `prec + 1` and `num` is empty.
    v: i64,
    /// Highest exponent the series is reliable for.
    prec: i64,
    /// Shared positive denominator, reduced against the numerator content.
    den: BigInt,
    /// Numerators for exponents `v..=prec`; `num[0]` is nonzero.
    num: Vec<BigInt>,
}

impl QSeries {
    /// The zero series, reliable through `q^prec`.
    pub fn zero(prec: i64) -> Self {
        QSeries {
            v: prec + 1,
            prec,
            den: BigInt::one(),
            num: Vec::new(),
        }
    }

    /// The constant series 1 on the window `[0, prec]`.
    pub fn one(prec: i64) -> Self {
        Self::monomial_int(BigInt::one(), 0, prec)
    }

    /// `c · q^e` on the window `[e, prec]` (`prec ≥ e − 1`).
    pub fn monomial_int(c: BigInt, e: i64, prec: i64) -> Self {
        assert!(prec >= e - 1, "window must contain the monomial exponent");
        if c.is_zero() || prec < e {
            return Self::zero(prec);
        }
        let mut num = vec![BigInt::zero(); (prec - e + 1) as usize];
        num[0] = c;
        QSeries {
            v: e,
            prec,
            den: BigInt::one(),
            num,
        }
    }

    /// Build from integer coefficients for the window `[v, v + coeffs.len() − 1]`.
    pub fn from_integer_coeffs(v: i64, coeffs: Vec<BigInt>) -> Self {
        let prec = v + coeffs.len() as i64 - 1;
        Self::normalized(v, prec, BigInt::one(), coeffs)
    }

    /// Build from rational coefficients for the window `[v, v + coeffs.len() − 1]`.
    pub fn from_rational_coeffs(v: i64, coeffs: Vec<BigRational>) -> Self {
        let prec = v + coeffs.len() as i64 - 1;
        let mut den = BigInt::one();
        for c in &coeffs {
            den = den.lcm(c.denom());
        }
        let num = coeffs
            .into_iter()
            .map(|c| c.numer() * (&den / c.denom()))
            .collect();
        Self::normalized(v, prec, den, num)
    }

    /// Canonicalize: trim leading zeros, reduce the shared denominator.
    fn normalized(v: i64, prec: i64, den: BigInt, mut num: Vec<BigInt>) -> Self {
        debug_assert!(den.is_positive());
        debug_assert_eq!(num.len() as i64, (prec - v + 1).max(0));
        let lead = num.iter().take_while(|c| c.is_zero()).count();
        if lead == num.len() {
            return Self::zero(prec);
        }
        let v = v + lead as i64;
        if lead > 0 {
            num.drain(..lead);
        }
        let den = if den.is_one() {
            den
        } else {
            let mut g = den.clone();
            for c in &num {
                if g.is_one() {
                    break;
                }
                if !c.is_zero() {
                    g = g.gcd(c);
                }
            }
            if !g.is_one() {
                for c in num.iter_mut() {
                    *c /= &g;
                }
            }
            den / g
        };
        QSeries { v, prec, den, num }
    }

    /// Lowest exponent with a stored coefficient (`prec + 1` for the zero series).
    pub fn valuation(&self) -> i64 {
        self.v
    }

    /// Highest exponent the series is reliable for.
    pub fn precision(&self) -> i64 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    /// True when every coefficient in the window is an integer.
    pub fn is_integral(&self) -> bool {
        self.den.is_one()
    }

    /// Fails with the first offending exponent if any coefficient has a
    /// denominator other than 1.
    pub fn assert_integral(&self) -> Result<()> {
        if self.den.is_one() {
            return Ok(());
        }
        for (i, c) in self.num.iter().enumerate() {
            if !(c % &self.den).is_zero() {
                let e = self.v + i as i64;
                return Err(Error::NonIntegral {
                    exponent: e,
                    value: format!("{}/{}", c, self.den),
                });
            }
        }
        unreachable!("shared denominator is reduced against the content");
    }

    /// Exact coefficient of `q^n`. Exponents below the valuation are exactly
    /// zero; exponents above the precision window are an error.
    pub fn coefficient(&self, n: i64) -> Result<BigRational> {
        if n > self.prec {
            return Err(Error::InsufficientPrecision {
                requested: n,
                available: self.prec,
            });
        }
        if n < self.v {
            return Ok(BigRational::zero());
        }
        let idx = (n - self.v) as usize;
        Ok(BigRational::new(self.num[idx].clone(), self.den.clone()))
    }

    /// Coefficient of `q^n` as an integer; fails if it is not one.
    pub fn integer_coefficient(&self, n: i64) -> Result<BigInt> {
        if n > self.prec {
            return Err(Error::InsufficientPrecision {
                requested: n,
                available: self.prec,
            });
        }
        if n < self.v {
            return Ok(BigInt::zero());
        }
        let c = &self.num[(n - self.v) as usize];
        if self.den.is_one() {
            return Ok(c.clone());
        }
        let (q, r) = c.div_rem(&self.den);
        if r.is_zero() {
            Ok(q)
        } else {
            Err(Error::NonIntegral {
                exponent: n,
                value: format!("{}/{}", c, self.den),
            })
        }
    }

    /// Iterate `(exponent, coefficient)` over the window, zeros included.
    pub fn iter(&self) -> impl Iterator<Item = (i64, BigRational)> + '_ {
        self.num
            .iter()
            .enumerate()
            .map(|(i, c)| (self.v + i as i64, BigRational::new(c.clone(), self.den.clone())))
    }

    fn num_at(&self, e: i64) -> BigInt {
        self.num_ref(e).cloned().unwrap_or_default()
    }

    fn num_ref(&self, e: i64) -> Option<&BigInt> {
        if e < self.v || e > self.prec {
            None
        } else {
            Some(&self.num[(e - self.v) as usize])
        }
    }

    /// Coefficientwise sum. The result is reliable through
    /// `min(P_f, P_g)`.
    pub fn add(&self, g: &Self) -> Self {
        let prec = min(self.prec, g.prec);
        let v = min(self.v, g.v);
        if v > prec {
            return Self::zero(prec);
        }
        let den = self.den.lcm(&g.den);
        let sf = &den / &self.den;
        let sg = &den / &g.den;
        let num = (v..=prec)
            .map(|e| self.num_at(e) * &sf + g.num_at(e) * &sg)
            .collect();
        Self::normalized(v, prec, den, num)
    }

    pub fn sub(&self, g: &Self) -> Self {
        self.add(&g.neg())
    }

    /// `self − c·g` in a single pass; reliable through `min(P_f, P_g)`.
    /// The workhorse of basis elimination, where building each intermediate
    /// scaled series separately would double the allocation traffic.
    pub fn sub_scaled(&self, g: &Self, c: &BigRational) -> Self {
        let prec = min(self.prec, g.prec);
        if c.is_zero() {
            return self.truncate(prec).expect("narrowing truncation");
        }
        let v = min(self.v, g.v);
        if v > prec {
            return Self::zero(prec);
        }
        let dg = &g.den * c.denom();
        let den = self.den.lcm(&dg);
        let sf = &den / &self.den;
        let sg = (&den / &dg) * c.numer();
        let num = (v..=prec)
            .map(|e| {
                let a = self.num_ref(e);
                let b = g.num_ref(e);
                match (a, b) {
                    (Some(a), Some(b)) => a * &sf - b * &sg,
                    (Some(a), None) => a * &sf,
                    (None, Some(b)) => -(b * &sg),
                    (None, None) => BigInt::zero(),
                }
            })
            .collect();
        Self::normalized(v, prec, den, num)
    }

    pub fn neg(&self) -> Self {
        QSeries {
            v: self.v,
            prec: self.prec,
            den: self.den.clone(),
            num: self.num.iter().map(|c| -c).collect(),
        }
    }

    /// Multiply every coefficient by an exact rational.
    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.prec);
        }
        let num = self.num.iter().map(|a| a * c.numer()).collect();
        Self::normalized(self.v, self.prec, &self.den * c.denom(), num)
    }

    pub fn scale_int(&self, c: &BigInt) -> Self {
        if c.is_zero() {
            return Self::zero(self.prec);
        }
        let num = self.num.iter().map(|a| a * c).collect();
        Self::normalized(self.v, self.prec, self.den.clone(), num)
    }

    /// Multiply by `q^k`.
    pub fn shift(&self, k: i64) -> Self {
        QSeries {
            v: self.v + k,
            prec: self.prec + k,
            den: self.den.clone(),
            num: self.num.clone(),
        }
    }

    /// Keep only exponents divisible by `d` and divide them by `d`
    /// (the index map behind U_d). The result is reliable through
    /// `⌊P/d⌋` and its window starts at `⌈v/d⌉`.
    pub(crate) fn decimate(&self, d: u32) -> Self {
        assert!(d > 0);
        let d = d as i64;
        let prec = self.prec.div_euclid(d);
        if self.is_zero() {
            return Self::zero(prec);
        }
        let v = (self.v + d - 1).div_euclid(d);
        if v > prec {
            return Self::zero(prec);
        }
        let num = (v..=prec).map(|n| self.num_at(n * d)).collect();
        Self::normalized(v, prec, self.den.clone(), num)
    }

    /// Substitute `q → q^d`. Knowing `f` through `q^P` pins the result
    /// through `q^{dP + d − 1}`, since the in-between exponents are zero.
    pub fn dilate(&self, d: u32) -> Self {
        assert!(d > 0);
        let d = d as i64;
        let prec = self.prec * d + (d - 1);
        if self.is_zero() {
            return Self::zero(prec);
        }
        let v = self.v * d;
        let mut num = vec![BigInt::zero(); (prec - v + 1) as usize];
        for (i, c) in self.num.iter().enumerate() {
            num[i * d as usize] = c.clone();
        }
        QSeries {
            v,
            prec,
            den: self.den.clone(),
            num,
        }
    }

    /// Cauchy product. The result valuation is `v_f + v_g` and the result
    /// is reliable through `min(P_f + v_g, P_g + v_f)`: terms of `f` beyond
    /// its window would feed exponents above that bound, and no lower ones.
    pub fn mul(&self, g: &Self) -> Self {
        let prec = min(self.prec + g.v, g.prec + self.v);
        if self.is_zero() || g.is_zero() {
            return Self::zero(prec);
        }
        let v = self.v + g.v;
        if prec < v {
            return Self::zero(prec);
        }
        let len = (prec - v + 1) as usize;
        let pair_ops = len * min(self.num.len(), g.num.len());
        let kernel = |k: usize| -> BigInt {
            // c_{v+k} = Σ_i f_i · g_{k−i} over the valid index range
            let lo = (k as i64 + 1 - g.num.len() as i64).max(0) as usize;
            let hi = min(k, self.num.len() - 1);
            let mut acc = BigInt::zero();
            for i in lo..=hi {
                let a = &self.num[i];
                if a.is_zero() {
                    continue;
                }
                let b = &g.num[k - i];
                if b.is_zero() {
                    continue;
                }
                acc += a * b;
            }
            acc
        };
        let num: Vec<BigInt> = if pair_ops >= PARALLEL_MUL_THRESHOLD {
            (0..len).into_par_iter().with_min_len(8).map(kernel).collect()
        } else {
            (0..len).map(kernel).collect()
        };
        Self::normalized(v, prec, &self.den * &g.den, num)
    }

    /// `f^e` by repeated squaring, with the multiplication precision rule
    /// applied at each step. `f^0` is 1 on the window `[0, P − v]`.
    pub fn pow(&self, e: u32) -> Self {
        if e == 0 {
            return Self::one(self.prec - self.v);
        }
        let mut result: Option<QSeries> = None;
        let mut base = self.clone();
        let mut e = e;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.mul(&base),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base);
        }
        result.expect("e > 0")
    }

    /// Multiplicative inverse: `g` with `f · g = 1` on the shared window.
    /// The result has valuation `−v` and the same window length as `f`.
    pub fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NonInvertible);
        }
        let len = self.num.len();
        let lead = &self.num[0];
        if self.den.is_one() && (lead.is_one() || (-lead).is_one()) {
            // unit leading coefficient: the triangular solve stays integral
            let sign_neg = lead.is_negative();
            let mut out: Vec<BigInt> = Vec::with_capacity(len);
            out.push(lead.clone());
            for k in 1..len {
                let mut acc = BigInt::zero();
                for i in 1..=k {
                    let a = &self.num[i];
                    if a.is_zero() {
                        continue;
                    }
                    acc += a * &out[k - i];
                }
                out.push(if sign_neg { acc } else { -acc });
            }
            Ok(Self::normalized(
                -self.v,
                self.prec - 2 * self.v,
                BigInt::one(),
                out,
            ))
        } else {
            let lead = BigRational::new(lead.clone(), self.den.clone());
            let inv_lead = lead.recip();
            let mut out: Vec<BigRational> = Vec::with_capacity(len);
            out.push(inv_lead.clone());
            for k in 1..len {
                let mut acc = BigRational::zero();
                for i in 1..=k {
                    let a = &self.num[i];
                    if a.is_zero() {
                        continue;
                    }
                    acc += BigRational::new(a.clone(), self.den.clone()) * &out[k - i];
                }
                out.push(-acc * &inv_lead);
            }
            Ok(Self::from_rational_coeffs(-self.v, out))
        }
    }

    /// The Ramanujan theta operator `q·d/dq`: the coefficient of `q^n` is
    /// multiplied by `n`. Precision is unchanged; the valuation rises if
    /// the leading term was the constant.
    pub fn theta(&self) -> Self {
        let num = self
            .num
            .iter()
            .enumerate()
            .map(|(i, c)| c * BigInt::from(self.v + i as i64))
            .collect();
        Self::normalized(self.v, self.prec, self.den.clone(), num)
    }

    /// Restrict the reliable window to `[v, new_prec]`. Fails if the series
    /// is not reliable that far in the first place.
    pub fn truncate(&self, new_prec: i64) -> Result<Self> {
        if new_prec > self.prec {
            return Err(Error::InsufficientPrecision {
                requested: new_prec,
                available: self.prec,
            });
        }
        if new_prec < self.v {
            return Ok(Self::zero(new_prec));
        }
        let keep = (new_prec - self.v + 1) as usize;
        Ok(Self::normalized(
            self.v,
            new_prec,
            self.den.clone(),
            self.num[..keep].to_vec(),
        ))
    }

    /// True when the two series agree coefficient-for-coefficient through
    /// `q^hi`. Fails if either window stops short of `hi`.
    pub fn agrees_through(&self, other: &Self, hi: i64) -> Result<bool> {
        let lo = min(self.v, other.v);
        for e in lo..=hi {
            if self.coefficient(e)? != other.coefficient(e)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Serialize into the versioned exchange record.
    pub fn to_record(&self) -> SeriesRecord {
        SeriesRecord {
            format_version: SERIES_FORMAT_VERSION,
            v: self.v,
            p: self.prec,
            coeffs: self
                .iter()
                .map(|(_, c)| {
                    if c.denom().is_one() {
                        c.numer().to_string()
                    } else {
                        format!("{}/{}", c.numer(), c.denom())
                    }
                })
                .collect(),
        }
    }

    /// Rebuild from the exchange record, checking the version tag.
    pub fn from_record(record: &SeriesRecord) -> Result<Self> {
        if record.format_version != SERIES_FORMAT_VERSION {
            return Err(Error::CacheFormat(format!(
                "series record version {} (expected {})",
                record.format_version, SERIES_FORMAT_VERSION
            )));
        }
        if record.coeffs.len() as i64 != (record.p - record.v + 1).max(0) {
            return Err(Error::CacheFormat(format!(
                "series record window [{}, {}] holds {} coefficients",
                record.v,
                record.p,
                record.coeffs.len()
            )));
        }
        let coeffs = record
            .coeffs
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let mut series = Self::from_rational_coeffs(record.v, coeffs);
        series.prec = record.p;
        Ok(series)
    }
}

/// Parse `"num"` or `"num/den"` in decimal.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::CacheFormat(format!("malformed rational {:?}", s));
    match s.split_once('/') {
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(n))
        }
        Some((num, den)) => {
            let n: BigInt = num.parse().map_err(|_| bad())?;
            let d: BigInt = den.parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
    }
}

/// Versioned exchange record for a [`QSeries`]: decimal coefficient strings
/// `"num"` or `"num/den"` for the window `[v, p]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub format_version: u32,
    pub v: i64,
    pub p: i64,
    pub coeffs: Vec<String>,
}

impl fmt::Display for QSeries {
    /// Paper-style rendering: terms in increasing exponent order with
    /// explicit signs, e.g. `q^-1 + 276q - 2048q^2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.iter() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = c.abs();
            let coeff_str = if mag.denom().is_one() {
                mag.numer().to_string()
            } else {
                format!("({}/{})", mag.numer(), mag.denom())
            };
            match e {
                0 => write!(f, "{}", coeff_str)?,
                1 if mag.is_one() => write!(f, "q")?,
                1 => write!(f, "{}q", coeff_str)?,
                _ if mag.is_one() => write!(f, "q^{}", e)?,
                _ => write!(f, "{}q^{}", coeff_str, e)?,
            }
        }
        if first {
            // nonempty window but every coefficient zero cannot happen after
            // normalization; still, render something sensible
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QSeries[{}, {}]({})", self.v, self.prec, self)
    }
}
