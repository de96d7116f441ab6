//! Closed-form broadcast-time bounds, concentration inequalities and the
//! constants of the lazy/busy phase construction.
//!
//! Everything here returns reals; rounding to whole rounds happens only where
//! a schedule consumes a length.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_n(n: f64) -> Result<()> {
    if n >= 2.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::param("n", n, "need at least two vertices"))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("p", p, "success probability must lie in (0, 1]"))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::param("eps", eps, "must be positive"))
    }
}

fn check_eps_unit(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::param("eps", eps, "must lie in (0, 1)"))
    }
}

/// `log_{1+p} n + ln(n) / p`.
pub fn lossy_bound(n: f64, p: f64) -> Result<f64> {
    check_n(n)?;
    check_p(p)?;
    Ok(n.ln() / p.ln_1p() + n.ln() / p)
}

/// Lossless law `log_2 n + ln n`.
pub fn baseline(n: f64) -> Result<f64> {
    lossy_bound(n, 1.0)
}

/// `(1 - eps)` times the lossy bound.
pub fn lower_bound(n: f64, p: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok((1.0 - eps) * lossy_bound(n, p)?)
}

/// `(1 + eps)` times the lossy bound.
pub fn upper_bound(n: f64, p: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok((1.0 + eps) * lossy_bound(n, p)?)
}

/// `1 - n^(-p eps / 40)`. Taken literally; at small `n` this is close to zero.
pub fn success_prob(n: f64, p: f64, eps: f64) -> Result<f64> {
    check_n(n)?;
    check_p(p)?;
    check_eps(eps)?;
    Ok(-(-(p * eps / 40.0) * n.ln()).exp_m1())
}

/// Asymptotic ratio of the lossy bound to the lossless one:
/// `(1/log_2(1+p) + ln 2 / p) / (1 + ln 2)`.
pub fn slowdown_factor(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok((LN_2 / p.ln_1p() + LN_2 / p) / (1.0 + LN_2))
}

fn check_tail(expectation: f64, delta: f64) -> Result<()> {
    if !(expectation >= 0.0 && expectation.is_finite()) {
        return Err(Error::param("expectation", expectation, "must be a finite non-negative number"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0, 1]"));
    }
    Ok(())
}

/// Bound on `P(X <= (1 - delta) E[X])`: `exp(-delta^2 E / 2)`.
pub fn chernoff_lower(expectation: f64, delta: f64) -> Result<f64> {
    check_tail(expectation, delta)?;
    Ok((-delta * delta * expectation / 2.0).exp())
}

/// Bound on `P(X >= (1 + delta) E[X])`: `exp(-delta^2 E / 3)`.
pub fn chernoff_upper(expectation: f64, delta: f64) -> Result<f64> {
    check_tail(expectation, delta)?;
    Ok((-delta * delta * expectation / 3.0).exp())
}

/// Bounded-differences bound on `P(|Y - E[Y]| >= t)`:
/// `2 exp(-2 t^2 / sum c_i^2)`.
pub fn azuma_bound(t: f64, effects: &[f64]) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("t", t, "must be positive"));
    }
    if let Some(c) = effects.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(Error::param("effect bound", c, "must be finite and non-negative"));
    }
    let sum_sq: f64 = effects.iter().map(|c| c * c).sum();
    if sum_sq <= 0.0 {
        return Err(Error::param("effect bounds", format!("{effects:?}"), "need a positive sum of squares"));
    }
    Ok(2.0 * (-2.0 * t * t / sum_sq).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: f64,
    pub p: f64,
    pub eps: f64,
    pub lower: f64,
    pub upper: f64,
    pub baseline: f64,
    pub success_prob_lower: f64,
    pub slowdown: f64,
}

impl BoundReport {
    pub fn new(n: f64, p: f64, eps: f64) -> Result<Self> {
        Ok(Self {
            n,
            p,
            eps,
            lower: lower_bound(n, p, eps)?,
            upper: upper_bound(n, p, eps)?,
            baseline: baseline(n)?,
            success_prob_lower: success_prob(n, p, eps)?,
            slowdown: slowdown_factor(p)?,
        })
    }

    /// The probability guarantee says nothing useful at this size.
    pub fn guarantee_is_vacuous(&self) -> bool {
        self.success_prob_lower < 0.5
    }
}

/// Constants of the phase construction. Values that under- or overflow
/// doubles are also given as natural logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// `(1+eps)/eps * (log_{1+p}(1/p) + 2)` before rounding.
    pub k_real: f64,
    /// Busy phase length actually used (`ceil(k_real)`); all constants below use it.
    pub k: u64,
    pub zeta: f64,
    pub ln_zeta: f64,
    /// `2^-k * zeta`.
    pub zeta_prime: f64,
    pub ln_zeta_prime: f64,
    /// `2^k ln(1/zeta) / (p zeta')`.
    pub s: f64,
    pub ln_s: f64,
    /// `(1+eps) log_{1+p}(n) / k`.
    pub ell_max: f64,
}

pub fn theorem_constants(n: f64, p: f64, eps: f64) -> Result<TheoremConstants> {
    check_n(n)?;
    check_p(p)?;
    check_eps_unit(eps)?;
    let ln1p = p.ln_1p();
    let k_real = (1.0 + eps) / eps * ((1.0 / p).ln() / ln1p + 2.0);
    // guard against 6.000000000001 style round-off before the ceiling
    let k = ((k_real - 1e-9).ceil() as u64).max(2);
    let kf = k as f64;

    // 2^(k-1) / (p^3 (1+p)^(k-3)), via logs
    let ln_ratio = (kf - 1.0) * LN_2 - 3.0 * p.ln() - (kf - 3.0) * ln1p;
    let exponent = -ln_ratio.exp() - kf - 1.0;
    let ln_zeta_tiny = -kf.ln() + exponent * (2.0 * E).ln();
    let ln_zeta = ln_zeta_tiny.min((eps / 12.0).ln());
    let ln_zeta_prime = ln_zeta - kf * LN_2;
    let ln_s = kf * LN_2 + (-ln_zeta).ln() - p.ln() - ln_zeta_prime;

    Ok(TheoremConstants {
        k_real,
        k,
        zeta: ln_zeta.exp(),
        ln_zeta,
        zeta_prime: ln_zeta_prime.exp(),
        ln_zeta_prime,
        s: ln_s.exp(),
        ln_s,
        ell_max: (1.0 + eps) * n.ln() / ln1p / kf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lossy_bound_values() {
        let n: f64 = 4096.0;
        assert!(close(lossy_bound(n, 1.0).unwrap(), n.log2() + n.ln(), 1e-12));
        // 20.5139 + 16.6355
        assert!(close(lossy_bound(n, 0.5).unwrap(), 37.1494, 1e-3));
        assert!(close(lossy_bound(2.0, 1.0).unwrap(), 1.0 + LN_2, 1e-12));
        assert!(lossy_bound(1.0, 0.5).is_err());
        assert!(lossy_bound(16.0, 0.0).is_err());
    }

    #[test]
    fn lower_upper_success() {
        let b = lossy_bound(4096.0, 0.5).unwrap();
        assert!(close(upper_bound(4096.0, 0.5, 0.2).unwrap(), 44.579, 1e-2));
        assert!(close(success_prob(4096.0, 0.5, 0.2).unwrap(), 0.0206, 1e-4));
        assert!(close(lower_bound(4096.0, 1.0, 0.2).unwrap(), 16.254, 1e-2));
        let tiny = 1e-12;
        assert!(close(lower_bound(4096.0, 0.5, tiny).unwrap(), b, 1e-9));
        assert!(close(upper_bound(4096.0, 0.5, tiny).unwrap(), b, 1e-9));
        assert!(lower_bound(16.0, 0.5, 0.0).is_err());
        let r = BoundReport::new(4096.0, 0.5, 0.2).unwrap();
        assert!(r.guarantee_is_vacuous());
        assert!(r.lower <= r.upper);
    }

    #[test]
    fn slowdown_values() {
        assert!(close(slowdown_factor(0.5).unwrap(), 1.828, 1e-3));
        assert!(close(slowdown_factor(1.0).unwrap(), 1.0, 1e-12));
        // (7.2725 + 6.9315) / 1.6931
        assert!(close(slowdown_factor(0.1).unwrap(), 8.389, 1e-3));
        for i in 1..20 {
            let p = i as f64 * 0.05;
            assert!(slowdown_factor(p).unwrap() < 1.0 / p, "p={p}");
        }
    }

    #[test]
    fn concentration_values() {
        assert_eq!(chernoff_lower(0.0, 0.5).unwrap(), 1.0);
        assert_eq!(chernoff_upper(0.0, 0.5).unwrap(), 1.0);
        assert!(close(chernoff_lower(18.0, 1.0).unwrap(), (-9.0f64).exp(), 1e-15));
        assert!(close(chernoff_lower(18.0, 1.0).unwrap(), 1.234e-4, 1e-7));
        assert!(close(chernoff_upper(30.0, 0.5).unwrap(), 0.0821, 1e-4));
        assert!(chernoff_lower(1.0, 0.0).is_err());
        assert!(chernoff_lower(1.0, 1.5).is_err());
        assert!(chernoff_upper(-1.0, 0.5).is_err());

        let two_e2 = 2.0 * (-2.0f64).exp();
        assert!(close(azuma_bound(1.0, &[1.0]).unwrap(), 0.2707, 1e-4));
        assert!(close(azuma_bound(10.0, &[1.0; 100]).unwrap(), two_e2, 1e-12));
        let c = [0.5, 2.0, 3.0];
        let c2: Vec<f64> = c.iter().map(|x| 2.0 * x).collect();
        assert!(close(azuma_bound(1.7, &c).unwrap(), azuma_bound(3.4, &c2).unwrap(), 1e-15));
        assert!(azuma_bound(1.0, &[0.0, 0.0]).is_err());
        assert!(azuma_bound(1.0, &[]).is_err());
        assert!(azuma_bound(0.0, &[1.0]).is_err());
        assert!(azuma_bound(1.0, &[-1.0]).is_err());
    }

    #[test]
    fn constants_eps_half_p_one() {
        let c = theorem_constants(1e6, 1.0, 0.5).unwrap();
        assert!(close(c.k_real, 6.0, 1e-12));
        assert_eq!(c.k, 6);
        // (1/6) (2e)^(-(32/8) - 7) = (1/6) (2e)^-11
        let expected = (2.0 * E).powi(-11) / 6.0;
        assert!(close(c.zeta, expected, expected * 1e-9));
        assert!(close(c.zeta, 1.359e-9, 1e-12));
        assert!(close(c.zeta_prime, c.zeta / 64.0, 1e-20));
        assert!(close(c.ell_max, 1.5 * 1e6f64.log2() / 6.0, 1e-12));
        assert!(close(c.ell_max, 4.98, 5e-3));
        let s = 64.0 * (1.0 / c.zeta).ln() / c.zeta_prime;
        assert!(close(c.s / s, 1.0, 1e-9));
    }

    #[test]
    fn constants_k_for_half_loss() {
        let c = theorem_constants(1e4, 0.5, 0.5).unwrap();
        // 3 * (log_1.5 2 + 2) = 3 * 3.7095
        assert!(close(c.k_real, 11.1285, 1e-3));
        assert_eq!(c.k, 12);
        assert!(c.zeta > 0.0 || c.ln_zeta.is_finite());
        assert!(close(c.ln_zeta_prime, c.ln_zeta - 12.0 * LN_2, 1e-9));
    }

    #[test]
    fn constants_survive_extreme_parameters() {
        let c = theorem_constants(1e6, 0.1, 0.05).unwrap();
        assert!(c.k > 64);
        assert_eq!(c.zeta, 0.0);
        assert!(c.s.is_infinite());
        assert!(theorem_constants(100.0, 0.5, 1.0).is_err());
        assert!(theorem_constants(100.0, 0.5, 0.0).is_err());
    }
}
