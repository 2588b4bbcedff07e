//! Precision context and numeric helpers on top of MPFR floats.
//!
//! Every quantity in the crate is an arbitrary-precision binary float
//! ([`rug::Float`]). A [`Ctx`] carries the working precision in bits
//! together with the two derived thresholds used throughout:
//!
//! * `margin` = 2^(−prec/2) — the boundary margin for classifying a
//!   point against an interval endpoint. Anything closer than this to a
//!   boundary is reported as undetermined instead of silently binned.
//! * `tiny` = 2^(−prec−32) — the exact-coincidence threshold. Two values
//!   closer than this are treated as equal; honest arithmetic error in
//!   this crate stays well below it (iterations run at elevated working
//!   precision).

use crate::{Error, Result};
use rug::Float;

pub type Real = Float;

pub const DEFAULT_PRECISION: u32 = 128;
pub const MIN_PRECISION: u32 = 64;

/// Arithmetic context: a precision in significant bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ctx {
    pub prec: u32,
}

impl Ctx {
    pub fn new(prec: u32) -> Self {
        Ctx {
            prec: prec.max(MIN_PRECISION),
        }
    }

    pub fn real(&self, v: f64) -> Real {
        Float::with_val(self.prec, v)
    }

    pub fn int(&self, v: i64) -> Real {
        Float::with_val(self.prec, v)
    }

    pub fn parse(&self, s: &str) -> Result<Real> {
        let inc = Float::parse(s)
            .map_err(|e| Error::BadDescriptor(s.to_string(), e.to_string()))?;
        Ok(Float::with_val(self.prec, inc))
    }

    /// 2^e at this precision.
    pub fn pow2(&self, e: i32) -> Real {
        Float::with_val(self.prec, Float::u_exp(1, e))
    }

    /// Boundary classification margin, 2^(−prec/2).
    pub fn margin(&self) -> Real {
        self.pow2(-((self.prec / 2) as i32))
    }

    /// Exact-coincidence threshold, 2^(−prec−32).
    pub fn tiny(&self) -> Real {
        self.pow2(-(self.prec as i32) - 32)
    }

    /// Context at double the precision (for escalation retries).
    pub fn doubled(&self) -> Ctx {
        Ctx::new(self.prec * 2)
    }
}

pub fn ln_f64(x: &Real) -> f64 {
    x.clone().ln().to_f64()
}

/// Evaluate Σ coeffs[k]·x^k by Horner's rule at the precision of `x`.
pub fn poly_eval(coeffs: &[i64], x: &Real) -> Real {
    let prec = x.prec();
    let mut acc = Float::with_val(prec, 0);
    for &c in coeffs.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

/// Root of an integer-coefficient polynomial inside (lo, hi) by bisection.
///
/// Requires a sign change across the interval; bisects until the bracket
/// is narrower than 2^(−prec−16), evaluating at prec+64 working bits, and
/// returns the midpoint at prec+32 bits. Deterministic for fixed inputs.
pub fn poly_root_bisect(coeffs: &[i64], lo: &Real, hi: &Real, prec: u32) -> Result<Real> {
    let wp = prec + 64;
    let mut lo = Float::with_val(wp, lo);
    let mut hi = Float::with_val(wp, hi);
    let flo = poly_eval(coeffs, &lo);
    let fhi = poly_eval(coeffs, &hi);
    let slo = flo.cmp0();
    let shi = fhi.cmp0();
    if slo == std::cmp::Ordering::Equal {
        return Ok(Float::with_val(prec + 32, &lo));
    }
    if shi == std::cmp::Ordering::Equal {
        return Ok(Float::with_val(prec + 32, &hi));
    }
    if slo == shi {
        return Err(Error::NoRootInInterval {
            lo: lo.to_f64().to_string(),
            hi: hi.to_f64().to_string(),
        });
    }
    let target = Float::with_val(wp, Float::u_exp(1, -(prec as i32) - 16));
    loop {
        let width = Float::with_val(wp, &hi - &lo);
        if width < target {
            break;
        }
        let mid = Float::with_val(wp, &lo + &hi) / 2u32;
        let fmid = poly_eval(coeffs, &mid);
        match fmid.cmp0() {
            std::cmp::Ordering::Equal => return Ok(Float::with_val(prec + 32, &mid)),
            s if s == slo => lo = mid,
            _ => hi = mid,
        }
    }
    let mid = Float::with_val(wp, &lo + &hi) / 2u32;
    Ok(Float::with_val(prec + 32, &mid))
}

/// Ordinary least squares of y against x.
#[derive(Clone, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// ‖residual‖₂
    pub residual_norm: f64,
    pub r_squared: f64,
    pub stderr_slope: f64,
    pub n_points: usize,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let m = xs.len();
    if m < 2 || m != ys.len() {
        return None;
    }
    let mf = m as f64;
    let xbar = xs.iter().sum::<f64>() / mf;
    let ybar = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - ybar) * (y - ybar);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let stderr_slope = if m > 2 {
        (ss_res / (mf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        residual_norm: ss_res.sqrt(),
        r_squared,
        stderr_slope,
        n_points: m,
    })
}

/// Format at 20 significant decimal digits, exponent notation, for CSV.
pub fn fmt20(x: &Real) -> String {
    let s = x.to_string_radix(10, Some(20));
    normalize_exp(&s)
}

pub fn fmt20_f64(v: f64) -> String {
    format!("{:.19e}", v)
}

// MPFR prints e.g. "5.0000000000000000000e-1"; keep that shape but make
// sure an exponent marker is always present so columns parse uniformly.
fn normalize_exp(s: &str) -> String {
    if s.contains('e') || s.contains("@") || s == "0.0" || s.contains("inf") || s.contains("nan") {
        s.replace('@', "e")
    } else {
        format!("{}e0", s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_and_thresholds() {
        let ctx = Ctx::new(128);
        assert_eq!(ctx.pow2(-1).to_f64(), 0.5);
        assert!(ctx.margin().to_f64() > 0.0);
        assert!(ctx.tiny() < ctx.margin());
    }

    #[test]
    fn bisect_finds_golden() {
        let ctx = Ctx::new(128);
        // x^2 - x - 1
        let r = poly_root_bisect(&[-1, -1, 1], &ctx.int(1), &ctx.int(2), 128).unwrap();
        let resid = poly_eval(&[-1, -1, 1], &r);
        assert!(resid.abs().to_f64() < 2f64.powi(-120));
        assert!((r.to_f64() - 1.618033988749895).abs() < 1e-15);
    }

    #[test]
    fn bisect_rejects_rootless_interval() {
        let ctx = Ctx::new(64);
        let err = poly_root_bisect(&[1, 0, 1], &ctx.int(1), &ctx.int(2), 64); // x^2+1
        assert!(matches!(err, Err(Error::NoRootInInterval { .. })));
    }

    #[test]
    fn least_squares_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = least_squares(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fmt20_has_exponent() {
        let ctx = Ctx::new(128);
        assert!(fmt20(&ctx.real(0.5)).contains('e'));
        assert!(fmt20_f64(1.9).contains('e'));
    }
}
