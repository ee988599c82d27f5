//! The operator algebra on q-expansions: `U_p`, `V_p`, the weight-0 Hecke
//! operator `T_p = U_p + p^{-1}V_p`, and the θ-relation between the
//! weight-0 and weight-2 canonical bases.
//!
//! The operators act on raw [`QSeries`] values and are purely formal;
//! which spaces their outputs land in is the business of the verifiers
//! that call them, and is established there by expansion identities.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::basis::BasisBuilder;
use crate::eta::Level;
use crate::qseries::QSeries;
use crate::{Error, Result};

/// `U_p`: the coefficient of `q^n` in the result is the coefficient of
/// `q^{pn}` in `f`. The result is reliable through `⌊P/p⌋`.
pub fn u_operator(p: u32, f: &QSeries) -> QSeries {
    f.decimate(p)
}

/// `V_p`: replaces `q` by `q^p`, sending the coefficient of `q^n` to
/// `q^{pn}`. The result is reliable through `pP + p − 1`.
pub fn v_operator(p: u32, f: &QSeries) -> QSeries {
    f.dilate(p)
}

/// The weight-0 Hecke operator `T_p f = U_p f + p^{-1} V_p f`.
///
/// Meaningful for forms whose level is prime to `p`; the caller is
/// responsible for that, the operation itself is formal.
pub fn hecke_t_weight0(p: u32, f: &QSeries) -> QSeries {
    let u = u_operator(p, f);
    let v = v_operator(p, f).scale(&BigRational::new(BigInt::one(), BigInt::from(p)));
    u.add(&v)
}

/// Outcome of checking `θ(f_{0,m}^{(p)}) + m·f_{2,m}^{(p)} = 0` on a window.
#[derive(Debug, Clone)]
pub struct ThetaRelation {
    pub level: u32,
    pub m: u32,
    /// `(exponent, residual)` for every exponent in the checked window;
    /// all residuals are zero exactly when the relation holds.
    pub residuals: Vec<(i64, BigRational)>,
    pub pass: bool,
}

/// Verify the θ-relation for `f_{0,m}^{(p)}` through `q^precision`. The
/// two sides come from independent constructions: ψ-power elimination on
/// the left, `E_2^{(p)}`-elimination on the right.
pub fn theta_relation_check(
    builder: &mut BasisBuilder,
    level: Level,
    m: u32,
    precision: i64,
) -> Result<ThetaRelation> {
    if m < 1 {
        return Err(Error::TheoremPrecondition(
            "theta relation needs a pole order m >= 1".into(),
        ));
    }
    let f0 = builder.build_f0(level, m, precision)?;
    let f2 = builder.build_f2(level, m, precision)?;
    let lhs = f0.expansion().theta();
    let residual = lhs.add(&f2.expansion().scale_int(&BigInt::from(m)));
    let mut residuals = Vec::new();
    let mut pass = true;
    for e in -(m as i64)..=precision {
        let r = residual.coefficient(e)?;
        if !r.is_zero() {
            pass = false;
        }
        residuals.push((e, r));
    }
    Ok(ThetaRelation {
        level: level.get(),
        m,
        residuals,
        pass,
    })
}
