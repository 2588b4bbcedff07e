//! Named constants of the theory at arbitrary precision.
//!
//! The golden ratio marks the threshold below which the hole reaches the
//! right end of [0,1); multinacci roots are the standard family of test
//! bases; the Komornik–Loreti constant β_* is the smallest base with a
//! nontrivial univoque point and is the root of 1 = Σ τ_n x^(−n) with
//! (τ_n) the Thue–Morse sequence.

use crate::real::{poly_eval, poly_root_bisect, Ctx, Real};
use crate::{Error, Result};
use rug::Float;

/// A named constant together with the relation that pins it down.
#[derive(Clone, Debug)]
pub struct NamedConstant {
    pub name: String,
    pub value: Real,
    pub defining_relation: String,
}

/// Root of x² − x − 1 in (1, 2).
pub fn golden_ratio(precision: u32) -> Real {
    let ctx = Ctx::new(precision);
    poly_root_bisect(&[-1, -1, 1], &ctx.int(1), &ctx.int(2), ctx.prec)
        .expect("x^2 - x - 1 changes sign on (1,2)")
}

/// Thue–Morse bit τ_n for n ≥ 1: parity of the ones in the binary
/// expansion of n. τ₁ = 1.
pub fn thue_morse(n: u64) -> u8 {
    (n.count_ones() % 2) as u8
}

/// Root in (1, 2) of x^k = x^(k−1) + … + x + 1. k = 2 is the golden
/// ratio, k = 3 the tribonacci root; the family increases toward 2.
pub fn multinacci(k: u32, precision: u32) -> Result<Real> {
    if k < 2 {
        return Err(Error::BadDescriptor(
            format!("multinacci:{k}"),
            "order must be at least 2".into(),
        ));
    }
    let ctx = Ctx::new(precision);
    let mut coeffs = vec![-1i64; k as usize];
    coeffs.push(1); // x^k - x^(k-1) - ... - 1
    poly_root_bisect(&coeffs, &ctx.int(1), &ctx.int(2), ctx.prec)
}

/// The Komornik–Loreti constant: unique root in (1, 2) of
/// 1 = Σ_{n≥1} τ_n x^(−n), by bisection on a rigorously truncated series.
pub fn komornik_loreti(precision: u32) -> Result<Real> {
    let prec = precision.max(40);
    let wp = prec + 64;
    // Series truncation: on x ≥ 3/2 the tail past L terms is at most
    // (3/2)^(−L)/(1/2); pick L so that bound is below 2^(−prec−16).
    let needed = ((prec as f64 + 24.0) / 1.5f64.log2()).ceil() as u64;
    let cap = 4 * prec as u64 + 64;
    if needed > cap {
        return Err(Error::Internal(format!(
            "series truncation {needed} exceeds cap {cap} for precision {prec}"
        )));
    }
    let terms = needed;
    let tail_bound = Float::with_val(wp, Float::u_exp(1, -(prec as i32) - 16));

    // f(x) = Σ τ_n x^(−n) − 1, strictly decreasing in x on (1, 2).
    let eval = |x: &Real| -> Real {
        let inv = Float::with_val(wp, x.recip_ref());
        let mut pw = Float::with_val(wp, 1);
        let mut acc = Float::with_val(wp, -1);
        for n in 1..=terms {
            pw *= &inv;
            if thue_morse(n) == 1 {
                acc += &pw;
            }
        }
        acc
    };

    let mut lo = Float::with_val(wp, 1.5f64);
    let mut hi = Float::with_val(wp, 2);
    // f(3/2) > 0 > f(2); bisect until the bracket is 2^(−prec) wide.
    let target = Float::with_val(wp, Float::u_exp(1, -(prec as i32) - 8));
    loop {
        let width = Float::with_val(wp, &hi - &lo);
        if width < target {
            break;
        }
        let mid = Float::with_val(wp, &lo + &hi) / 2u32;
        let fm = eval(&mid);
        if fm.clone().abs() <= tail_bound {
            // Cannot decide the sign against the truncation error; the
            // bracket midpoint is already within that bound of the root.
            return Ok(Float::with_val(prec + 32, &mid));
        }
        if fm.cmp0() == std::cmp::Ordering::Greater {
            lo = mid; // still left of the root (series too big)
        } else {
            hi = mid;
        }
    }
    let mid = Float::with_val(wp, &lo + &hi) / 2u32;
    Ok(Float::with_val(prec + 32, &mid))
}

/// Look up a named constant by CLI name: `golden`, `kl`, `multinacci:k`.
pub fn named(name: &str, precision: u32) -> Result<NamedConstant> {
    if name == "golden" {
        return Ok(NamedConstant {
            name: name.into(),
            value: golden_ratio(precision),
            defining_relation: "x^2 = x + 1, x in (1,2)".into(),
        });
    }
    if name == "kl" {
        return Ok(NamedConstant {
            name: name.into(),
            value: komornik_loreti(precision)?,
            defining_relation: "1 = sum_{n>=1} tau_n x^-n (Thue-Morse tau)".into(),
        });
    }
    if let Some(kstr) = name.strip_prefix("multinacci:") {
        let k: u32 = kstr
            .parse()
            .map_err(|_| Error::BadDescriptor(name.into(), "bad multinacci order".into()))?;
        return Ok(NamedConstant {
            name: name.into(),
            value: multinacci(k, precision)?,
            defining_relation: format!("x^{k} = x^{} + ... + x + 1, x in (1,2)", k - 1),
        });
    }
    Err(Error::BadDescriptor(
        name.into(),
        "expected golden | kl | multinacci:k".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_digits_and_relation() {
        let g = golden_ratio(64);
        assert!((g.to_f64() - 1.6180339887498949).abs() < 1e-15);
        let resid = poly_eval(&[-1, -1, 1], &g).abs();
        assert!(resid.to_f64() < 2f64.powi(-56));
        // beta (beta - 1) = 1 at the golden ratio
        let g = golden_ratio(128);
        let prod = Float::with_val(160, &g * &g) - Float::with_val(160, &g);
        assert!((prod - 1u32).abs().to_f64() < 2f64.powi(-120));
    }

    #[test]
    fn thue_morse_first_values_and_recurrences() {
        assert_eq!(
            (1..=4).map(thue_morse).collect::<Vec<_>>(),
            vec![1, 1, 0, 1]
        );
        for n in 1..500u64 {
            assert_eq!(thue_morse(2 * n), thue_morse(n));
            assert_eq!(thue_morse(2 * n + 1), 1 - thue_morse(n));
        }
    }

    #[test]
    fn komornik_loreti_digits() {
        let kl = komornik_loreti(128).unwrap();
        let s = kl.to_string_radix(10, Some(12));
        assert!(
            s.starts_with("1.787231650"),
            "got {s}, want prefix 1.787231650"
        );
        let g = golden_ratio(128);
        assert!(kl > g && kl < 2u32);
    }

    #[test]
    fn komornik_loreti_stable_under_more_terms() {
        // Doubling the working precision more than doubles the series
        // truncation; the value must not move at the original tolerance.
        let a = komornik_loreti(64).unwrap();
        let b = komornik_loreti(160).unwrap();
        let diff = Float::with_val(200, &a - &b).abs();
        assert!(diff.to_f64() < 2f64.powi(-60));
    }

    #[test]
    fn multinacci_family() {
        let g = multinacci(2, 128).unwrap();
        let gold = golden_ratio(128);
        assert!(Float::with_val(192, &g - &gold).abs().to_f64() < 2f64.powi(-120));
        let t = multinacci(3, 128).unwrap();
        assert!(t
            .to_string_radix(10, Some(11))
            .starts_with("1.839286755"));
        let mut prev = g.to_f64();
        for k in 3..=8 {
            let v = multinacci(k, 96).unwrap().to_f64();
            assert!(v > prev && v < 2.0, "k={k}: {v} not increasing toward 2");
            prev = v;
        }
    }

    #[test]
    fn named_lookup() {
        assert!(named("golden", 64).is_ok());
        assert!(named("kl", 64).is_ok());
        assert!(named("multinacci:4", 64).is_ok());
        assert!(named("nope", 64).is_err());
    }
}
