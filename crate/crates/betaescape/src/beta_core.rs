//! Bases β, hole geometry, the greedy/lazy/stuck maps, codings, and the
//! projection back from digit words.
//!
//! The base interval is J_β = [0, 1/(β−1)], split by the two branch maps
//! into I₀ = [0, 1/β), the hole Δ_β = (1/β, 1/(β(β−1))) where both digits
//! are admissible, and I₁ to the right. The hole is kept open: endpoint
//! orbits are classified against its boundary with an explicit margin and
//! near-misses surface as "undetermined" instead of being binned.

use crate::constants;
use crate::real::{poly_eval, poly_root_bisect, Ctx, Real};
use crate::{Error, Result};
use rug::Float;
use std::fmt;

/// How a base was specified. Keeping the descriptor allows the value to
/// be re-derived at any precision (used by escalation retries).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BetaSpec {
    Decimal(String),
    Golden,
    KomornikLoreti,
    Multinacci(u32),
    Poly {
        text: String,
        coeffs: Vec<i64>,
        lo: String,
        hi: String,
    },
}

impl BetaSpec {
    pub fn descriptor(&self) -> String {
        match self {
            BetaSpec::Decimal(s) => s.clone(),
            BetaSpec::Golden => "golden".into(),
            BetaSpec::KomornikLoreti => "kl".into(),
            BetaSpec::Multinacci(k) => format!("multinacci:{k}"),
            BetaSpec::Poly { text, lo, hi, .. } => format!("poly:{text} in ({lo},{hi})"),
        }
    }
}

/// A base 1 < β ≤ 2 at a stated precision. The value is stored with 32
/// guard bits beyond `precision` so that defining relations hold with
/// slack.
#[derive(Clone, Debug)]
pub struct BetaParam {
    pub value: Real,
    pub spec: BetaSpec,
    pub precision: u32,
}

impl BetaParam {
    pub fn ctx(&self) -> Ctx {
        Ctx::new(self.precision)
    }

    pub fn descriptor(&self) -> String {
        self.spec.descriptor()
    }

    /// True iff β = 2 exactly (empty hole).
    pub fn is_two(&self) -> bool {
        self.value == 2u32
    }

    /// Re-derive the same base at a different precision.
    pub fn at_precision(&self, precision: u32) -> Result<BetaParam> {
        make_beta_spec(self.spec.clone(), precision)
    }
}

/// Parse a β descriptor:
/// decimal literal | `golden` | `kl` | `multinacci:k` |
/// `poly:<integer polynomial in x> in (lo,hi)`.
pub fn make_beta(descriptor: &str, precision: u32) -> Result<BetaParam> {
    let d = descriptor.trim();
    let spec = if d == "golden" {
        BetaSpec::Golden
    } else if d == "kl" {
        BetaSpec::KomornikLoreti
    } else if let Some(k) = d.strip_prefix("multinacci:") {
        let k: u32 = k
            .parse()
            .map_err(|_| Error::BadDescriptor(d.into(), "bad multinacci order".into()))?;
        BetaSpec::Multinacci(k)
    } else if let Some(rest) = d.strip_prefix("poly:") {
        parse_poly_descriptor(rest)?
    } else {
        BetaSpec::Decimal(d.to_string())
    };
    make_beta_spec(spec, precision)
}

/// Build a [`BetaParam`] from an already-parsed spec.
pub fn make_beta_spec(spec: BetaSpec, precision: u32) -> Result<BetaParam> {
    let ctx = Ctx::new(precision);
    let wp = ctx.prec + 32;
    let value = match &spec {
        BetaSpec::Decimal(s) => {
            let inc = Float::parse(s.as_str())
                .map_err(|e| Error::BadDescriptor(s.clone(), e.to_string()))?;
            Float::with_val(wp, inc)
        }
        BetaSpec::Golden => constants::golden_ratio(ctx.prec),
        BetaSpec::KomornikLoreti => constants::komornik_loreti(ctx.prec)?,
        BetaSpec::Multinacci(k) => constants::multinacci(*k, ctx.prec)?,
        BetaSpec::Poly { coeffs, lo, hi, .. } => {
            let lo = Float::with_val(
                wp,
                Float::parse(lo.as_str())
                    .map_err(|e| Error::BadDescriptor(lo.clone(), e.to_string()))?,
            );
            let hi = Float::with_val(
                wp,
                Float::parse(hi.as_str())
                    .map_err(|e| Error::BadDescriptor(hi.clone(), e.to_string()))?,
            );
            poly_root_bisect(coeffs, &lo, &hi, ctx.prec)?
        }
    };
    if !(value > 1u32 && value <= 2u32) {
        return Err(Error::BetaOutOfRange(spec.descriptor()));
    }
    if let BetaSpec::Poly { coeffs, .. } = &spec {
        let resid = poly_eval(coeffs, &value).abs();
        let bound = Float::with_val(64, Float::u_exp(1, -(ctx.prec as i32) + 8));
        if resid > bound {
            return Err(Error::Internal(format!(
                "polynomial residual {} above tolerance",
                resid.to_f64()
            )));
        }
    }
    Ok(BetaParam {
        value,
        spec,
        precision: ctx.prec,
    })
}

fn parse_poly_descriptor(rest: &str) -> Result<BetaSpec> {
    let full = format!("poly:{rest}");
    let (poly_text, bounds) = rest
        .split_once(" in ")
        .ok_or_else(|| Error::BadDescriptor(full.clone(), "missing ' in (lo,hi)'".into()))?;
    let bounds = bounds.trim();
    let inner = bounds
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::BadDescriptor(full.clone(), "bounds must look like (lo,hi)".into()))?;
    let (lo, hi) = inner
        .split_once(',')
        .ok_or_else(|| Error::BadDescriptor(full.clone(), "bounds must look like (lo,hi)".into()))?;
    let coeffs = parse_poly(poly_text)
        .map_err(|msg| Error::BadDescriptor(full.clone(), msg))?;
    Ok(BetaSpec::Poly {
        text: poly_text.trim().to_string(),
        coeffs,
        lo: lo.trim().to_string(),
        hi: hi.trim().to_string(),
    })
}

/// Parse an integer polynomial in x, e.g. `x^3-x^2-x-1` or `2x^2 - 3`.
/// Returns ascending coefficients.
fn parse_poly(text: &str) -> std::result::Result<Vec<i64>, String> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err("empty polynomial".into());
    }
    let mut terms: Vec<(i64, usize)> = Vec::new();
    let mut rest = compact.as_str();
    let mut sign = 1i64;
    if let Some(r) = rest.strip_prefix('-') {
        sign = -1;
        rest = r;
    } else if let Some(r) = rest.strip_prefix('+') {
        rest = r;
    }
    while !rest.is_empty() {
        let end = rest
            .find(['+', '-'])
            .unwrap_or(rest.len());
        let (term, tail) = rest.split_at(end);
        if term.is_empty() {
            return Err("dangling sign".into());
        }
        terms.push(parse_term(term, sign)?);
        rest = tail;
        if let Some(r) = rest.strip_prefix('-') {
            sign = -1;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            sign = 1;
            rest = r;
        } else if !rest.is_empty() {
            return Err(format!("unexpected {rest:?}"));
        } else {
            break;
        }
        if rest.is_empty() {
            return Err("dangling sign".into());
        }
    }
    let deg = terms.iter().map(|&(_, e)| e).max().unwrap_or(0);
    let mut coeffs = vec![0i64; deg + 1];
    for (c, e) in terms {
        coeffs[e] += c;
    }
    if coeffs.iter().all(|&c| c == 0) {
        return Err("zero polynomial".into());
    }
    Ok(coeffs)
}

fn parse_term(term: &str, sign: i64) -> std::result::Result<(i64, usize), String> {
    if let Some(xpos) = term.find('x') {
        let (coef_str, xpart) = term.split_at(xpos);
        let coef: i64 = if coef_str.is_empty() {
            1
        } else {
            let c = coef_str.trim_end_matches('*');
            c.parse().map_err(|_| format!("bad coefficient {c:?}"))?
        };
        let exp: usize = match xpart.strip_prefix('x') {
            Some("") => 1,
            Some(e) => {
                let e = e
                    .strip_prefix('^')
                    .ok_or_else(|| format!("bad exponent in {term:?}"))?;
                e.parse().map_err(|_| format!("bad exponent {e:?}"))?
            }
            None => unreachable!(),
        };
        Ok((sign * coef, exp))
    } else {
        let c: i64 = term.parse().map_err(|_| format!("bad constant {term:?}"))?;
        Ok((sign * c, 0))
    }
}

/// The three-part split of J_β induced by the two branch maps.
#[derive(Clone, Debug)]
pub struct HoleGeometry {
    /// 1/β — left hole endpoint and the branch point of the greedy map.
    pub a: Real,
    /// 1/(β(β−1)) — right hole endpoint.
    pub b: Real,
    /// Open hole (a, b); empty exactly when β = 2.
    pub delta: (Real, Real),
    /// Hole clipped to I = [0,1): (a, min(b, 1)).
    pub delta_in_i: (Real, Real),
    /// [0, a)
    pub i0: (Real, Real),
    /// (b, 1/(β−1)]
    pub i1: (Real, Real),
}

impl HoleGeometry {
    pub fn is_empty(&self) -> bool {
        self.a >= self.b
    }
}

pub fn hole(beta: &BetaParam) -> HoleGeometry {
    let wp = beta.value.prec();
    let v = &beta.value;
    let a = Float::with_val(wp, v.recip_ref());
    let denom = Float::with_val(wp, v * v) - v;
    let b = Float::with_val(wp, denom.recip_ref());
    let one = Float::with_val(wp, 1);
    let zero = Float::with_val(wp, 0);
    let bm1 = Float::with_val(wp, v - &one);
    let j_sup = Float::with_val(wp, bm1.recip_ref());
    let b_in_i = if b > one { one.clone() } else { b.clone() };
    HoleGeometry {
        delta: (a.clone(), b.clone()),
        delta_in_i: (a.clone(), b_in_i),
        i0: (zero, a.clone()),
        i1: (b.clone(), j_sup),
        a,
        b,
    }
}

/// Where a point sits relative to an open interval (lo, hi), with an
/// exact-coincidence threshold `tiny` and a classification `margin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HoleSide {
    /// Strictly inside with clearance above the margin.
    Inside,
    /// Strictly outside with clearance above the margin.
    Outside,
    /// Coincides with an endpoint to within `tiny`; an open hole does
    /// not contain it.
    Boundary,
    /// Within the margin of an endpoint but not coincident: refuse to
    /// classify.
    NearBoundary,
}

pub(crate) fn classify_against(
    x: &Real,
    lo: &Real,
    hi: &Real,
    tiny: &Real,
    margin: &Real,
) -> HoleSide {
    if lo >= hi {
        return HoleSide::Outside; // empty hole
    }
    let wp = x.prec().max(lo.prec()).max(hi.prec());
    let d_lo = Float::with_val(wp, x - lo);
    let d_hi = Float::with_val(wp, hi - x);
    let near = Float::with_val(wp, d_lo.clone().abs()).min(&Float::with_val(wp, d_hi.clone().abs()));
    if near <= *tiny {
        return HoleSide::Boundary;
    }
    if near <= *margin {
        return HoleSide::NearBoundary;
    }
    if d_lo.cmp0() == std::cmp::Ordering::Greater && d_hi.cmp0() == std::cmp::Ordering::Greater {
        HoleSide::Inside
    } else {
        HoleSide::Outside
    }
}

fn check_in_j(x: &Real, beta: &BetaParam, what: &'static str) -> Result<Real> {
    let wp = beta.value.prec();
    let j_sup = Float::with_val(wp, &beta.value - 1u32).recip();
    if x.cmp0() == std::cmp::Ordering::Less || *x > j_sup {
        return Err(Error::OutOfDomain {
            what,
            value: x.to_f64().to_string(),
            domain: "[0, 1/(beta-1)]",
        });
    }
    Ok(j_sup)
}

/// One greedy step: βx on [0, 1/β), βx − 1 on [1/β, 1/(β−1)].
/// The branch tie at x = 1/β takes the second branch.
pub fn greedy_step(x: &Real, beta: &BetaParam) -> Result<Real> {
    check_in_j(x, beta, "greedy_step input")?;
    let wp = x.prec().max(beta.value.prec());
    let a = Float::with_val(wp, beta.value.recip_ref());
    Ok(greedy_step_raw(x, &beta.value, &a, wp).0)
}

pub(crate) fn greedy_step_raw(x: &Real, beta_val: &Real, a: &Real, wp: u32) -> (Real, u8) {
    let digit = u8::from(*x >= *a);
    let mut y = Float::with_val(wp, beta_val * x);
    if digit == 1 {
        y -= 1u32;
    }
    (y, digit)
}

/// One lazy step: βx on [0, 1/(β(β−1))], βx − 1 above.
pub fn lazy_step(x: &Real, beta: &BetaParam) -> Result<Real> {
    check_in_j(x, beta, "lazy_step input")?;
    let wp = x.prec().max(beta.value.prec());
    let geom = hole(beta);
    let mut y = Float::with_val(wp, &beta.value * x);
    if *x > geom.b {
        y -= 1u32;
    }
    Ok(y)
}

/// The stuck map on I = [0,1): identity on the open hole Δ_β ∩ I, the
/// greedy step elsewhere.
pub fn stuck_step(x: &Real, beta: &BetaParam) -> Result<Real> {
    let one = Float::with_val(32, 1);
    if x.cmp0() == std::cmp::Ordering::Less || *x >= one {
        return Err(Error::OutOfDomain {
            what: "stuck_step input",
            value: x.to_f64().to_string(),
            domain: "[0, 1)",
        });
    }
    let geom = hole(beta);
    let (lo, hi) = &geom.delta_in_i;
    if *x > *lo && *x < *hi {
        return Ok(x.clone());
    }
    greedy_step(x, beta)
}

/// A finite word over {0, 1}.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct DigitWord(Vec<u8>);

impl DigitWord {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(&d) = digits.iter().find(|&&d| d > 1) {
            return Err(Error::OutOfDomain {
                what: "digit",
                value: d.to_string(),
                domain: "{0, 1}",
            });
        }
        Ok(DigitWord(digits))
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for DigitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for DigitWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(Error::BadDescriptor(
                    s.into(),
                    format!("digit {c:?} not in {{0,1}}"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        DigitWord::new(digits)
    }
}

/// First n digits of the greedy β-expansion of x ∈ J_β.
///
/// Iterates at elevated working precision (one extra bit per step) so the
/// recorded digits are those of the exact orbit except within an
/// untestably thin band around branch ties.
pub fn greedy_coding(x: &Real, beta: &BetaParam, n: usize) -> Result<DigitWord> {
    check_in_j(x, beta, "greedy_coding input")?;
    let wp = beta.value.prec() + n as u32 + 64;
    let bv = Float::with_val(wp, &beta.value);
    let a = Float::with_val(wp, bv.recip_ref());
    let mut cur = Float::with_val(wp, x);
    let mut digits = Vec::with_capacity(n);
    for _ in 0..n {
        let (next, d) = greedy_step_raw(&cur, &bv, &a, wp);
        digits.push(d);
        cur = next;
    }
    DigitWord::new(digits)
}

/// Value of a finite word under π_β, with the tail bound β^(−n)/(β−1)
/// valid for any infinite extension.
pub fn project(w: &DigitWord, beta: &BetaParam) -> (Real, Real) {
    let n = w.len() as u32;
    let wp = beta.value.prec() + n + 64;
    let bv = Float::with_val(wp, &beta.value);
    let mut acc = Float::with_val(wp, 0);
    for &d in w.digits().iter().rev() {
        acc += d;
        acc /= &bv;
    }
    let tail = Float::with_val(wp, bv.pow_ref(-(n as i32)))
        / Float::with_val(wp, &bv - 1u32);
    let prec = beta.value.prec();
    (Float::with_val(prec, acc), Float::with_val(prec, tail))
}

/// Finite-depth univoque certificate for one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnivoqueOutcome {
    /// No iterate up to the depth lies in the open hole. Necessary, not
    /// sufficient, for membership in the univoque set.
    Survives { depth: usize },
    /// First iterate inside the open hole (step 0 = the point itself).
    Escapes { step: usize },
    /// An iterate fell within the boundary margin of ∂Δ_β.
    Undetermined { step: usize },
}

/// Track the greedy orbit of x for n steps against the open hole Δ_β.
pub fn univoque_test(x: &Real, beta: &BetaParam, n: usize) -> Result<UnivoqueOutcome> {
    check_in_j(x, beta, "univoque_test input")?;
    let ctx = beta.ctx();
    let wp = beta.value.prec() + n as u32 + 64;
    let bv = Float::with_val(wp, &beta.value);
    let a = Float::with_val(wp, bv.recip_ref());
    let geom = hole(beta);
    if geom.is_empty() {
        return Ok(UnivoqueOutcome::Survives { depth: n });
    }
    let lo = Float::with_val(wp, &geom.delta.0);
    let hi = Float::with_val(wp, &geom.delta.1);
    let tiny = ctx.tiny();
    let margin = ctx.margin();
    let mut cur = Float::with_val(wp, x);
    for k in 0..=n {
        match classify_against(&cur, &lo, &hi, &tiny, &margin) {
            HoleSide::Inside => return Ok(UnivoqueOutcome::Escapes { step: k }),
            HoleSide::NearBoundary => return Ok(UnivoqueOutcome::Undetermined { step: k }),
            HoleSide::Boundary | HoleSide::Outside => {}
        }
        if k < n {
            cur = greedy_step_raw(&cur, &bv, &a, wp).0;
        }
    }
    Ok(UnivoqueOutcome::Survives { depth: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::DEFAULT_PRECISION;

    fn beta(d: &str) -> BetaParam {
        make_beta(d, DEFAULT_PRECISION).unwrap()
    }

    fn r(beta: &BetaParam, v: f64) -> Real {
        Float::with_val(beta.value.prec(), v)
    }

    #[test]
    fn make_beta_two_is_exact() {
        let b = beta("2");
        assert!(b.is_two());
        assert_eq!(b.value.to_f64(), 2.0);
    }

    #[test]
    fn make_beta_golden() {
        let b = beta("golden");
        assert!((b.value.to_f64() - 1.6180339887498949).abs() < 1e-15);
        let sq = Float::with_val(200, &b.value * &b.value);
        let resid = sq - &b.value - 1u32;
        assert!(resid.abs().to_f64() < 2f64.powi(-120));
    }

    #[test]
    fn make_beta_poly_tribonacci() {
        let b = beta("poly:x^3-x^2-x-1 in (1,2)");
        assert!(b
            .value
            .to_string_radix(10, Some(17))
            .starts_with("1.839286755214161"));
        let resid = poly_eval(&[-1, -1, -1, 1], &b.value).abs();
        assert!(resid.to_f64() < 2f64.powi(-56));
        // deterministic for identical inputs
        let b2 = beta("poly:x^3-x^2-x-1 in (1,2)");
        assert_eq!(b.value, b2.value);
    }

    #[test]
    fn make_beta_rejects_out_of_range_and_malformed() {
        assert!(matches!(
            make_beta("0.9", 128),
            Err(Error::BetaOutOfRange(_))
        ));
        assert!(matches!(
            make_beta("2.5", 128),
            Err(Error::BetaOutOfRange(_))
        ));
        assert!(make_beta("poly:x^2+1 in (1,2)", 128).is_err());
        assert!(make_beta("poly:x^2-x-1 in 1,2", 128).is_err());
        assert!(make_beta("abc", 128).is_err());
    }

    #[test]
    fn hole_examples() {
        let b = beta("1.5");
        let g = hole(&b);
        assert!((g.a.to_f64() - 2.0 / 3.0).abs() < 1e-30);
        assert!((g.b.to_f64() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.delta_in_i.1.to_f64(), 1.0); // clipped at 1

        let b = beta("golden");
        let g = hole(&b);
        let diff = Float::with_val(200, &g.b - 1u32).abs();
        assert!(diff.to_f64() < 2f64.powi(-120)); // b = 1 at the golden ratio

        let b = beta("2");
        let g = hole(&b);
        assert_eq!(g.a, g.b);
        assert!(g.is_empty());
    }

    #[test]
    fn greedy_step_examples() {
        let b = beta("1.8");
        assert_eq!(greedy_step(&r(&b, 0.0), &b).unwrap().to_f64(), 0.0);
        let a = hole(&b).a;
        let img = greedy_step(&a, &b).unwrap();
        assert!(img.clone().abs().to_f64() < 1e-35); // second branch at the tie
        let y = greedy_step(&r(&b, 0.7), &b).unwrap();
        assert!((y.to_f64() - 0.26).abs() < 1e-15);
        assert!(greedy_step(&r(&b, 2.0), &b).is_err());
    }

    #[test]
    fn lazy_step_examples() {
        let b = beta("golden");
        let a = hole(&b).a;
        let y = lazy_step(&a, &b).unwrap();
        assert!((y.to_f64() - 1.0).abs() < 1e-30); // first branch: 1/β ≤ b = 1

        let b = beta("1.8");
        let y = lazy_step(&r(&b, 1.3), &b).unwrap();
        assert!((y.to_f64() - 1.34).abs() < 1e-15);
        assert_eq!(lazy_step(&r(&b, 0.0), &b).unwrap().to_f64(), 0.0);
    }

    #[test]
    fn stuck_step_examples() {
        let b = beta("1.9");
        let x = r(&b, 0.55); // inside (0.5263..., 0.5847...)
        assert_eq!(stuck_step(&x, &b).unwrap(), x);
        assert!((stuck_step(&r(&b, 0.3), &b).unwrap().to_f64() - 0.57).abs() < 1e-15);
        assert!((stuck_step(&r(&b, 0.9), &b).unwrap().to_f64() - 0.71).abs() < 1e-15);
        assert!(stuck_step(&r(&b, 1.0), &b).is_err());
    }

    #[test]
    fn stuck_fixes_exactly_the_open_hole() {
        let b = beta("1.9");
        let g = hole(&b);
        let (lo, hi) = (&g.delta_in_i.0, &g.delta_in_i.1);
        // strictly inside: fixed; endpoints and outside: greedy
        let eps = Float::with_val(160, Float::u_exp(1, -50));
        let inside = Float::with_val(160, lo + &eps);
        assert_eq!(stuck_step(&inside, &b).unwrap(), inside);
        let at_lo = lo.clone();
        assert_ne!(stuck_step(&at_lo, &b).unwrap(), at_lo);
        let below = Float::with_val(160, lo - &eps);
        assert_eq!(
            stuck_step(&below, &b).unwrap(),
            greedy_step(&below, &b).unwrap()
        );
        let above = Float::with_val(160, hi + &eps);
        assert_eq!(
            stuck_step(&above, &b).unwrap(),
            greedy_step(&above, &b).unwrap()
        );
    }

    #[test]
    fn coding_examples() {
        let b = beta("1.8");
        assert_eq!(
            greedy_coding(&r(&b, 0.0), &b, 4).unwrap().to_string(),
            "0000"
        );
        let a = hole(&b).a;
        assert_eq!(greedy_coding(&a, &b, 3).unwrap().to_string(), "100");
        assert_eq!(
            greedy_coding(&r(&b, 0.7), &b, 5).unwrap().to_string(),
            "10010"
        );
    }

    #[test]
    fn project_examples_and_round_trip() {
        let b = beta("1.8");
        let zeros = DigitWord::new(vec![0; 8]).unwrap();
        assert_eq!(project(&zeros, &b).0.to_f64(), 0.0);
        let one = DigitWord::new(vec![1]).unwrap();
        assert!((project(&one, &b).0.to_f64() - 1.0 / 1.8).abs() < 1e-30);

        let x = r(&b, 0.7);
        let w = greedy_coding(&x, &b, 20).unwrap();
        let (val, tail) = project(&w, &b);
        let err = Float::with_val(160, &x - &val);
        assert!(err >= 0u32, "projection must not exceed x");
        assert!(err <= tail, "round trip outside tail bound");
        assert!(tail.to_f64() <= 1.8f64.powi(-20) / 0.8 * 1.0000001);
    }

    #[test]
    fn univoque_examples() {
        let b = beta("1.9");
        let zero = r(&b, 0.0);
        assert_eq!(
            univoque_test(&zero, &b, 100).unwrap(),
            UnivoqueOutcome::Survives { depth: 100 }
        );
        let g = hole(&b);
        let mid = Float::with_val(160, &g.a + &g.b) / 2u32;
        assert_eq!(
            univoque_test(&mid, &b, 10).unwrap(),
            UnivoqueOutcome::Escapes { step: 0 }
        );
        // frozen from a high-precision oracle run: 0.9 first enters the
        // hole at step 50 (clearance ~2.5e-2, far beyond the margin)
        assert_eq!(
            univoque_test(&r(&b, 0.9), &b, 50).unwrap(),
            UnivoqueOutcome::Escapes { step: 50 }
        );
        assert_eq!(
            univoque_test(&r(&b, 0.9), &b, 49).unwrap(),
            UnivoqueOutcome::Survives { depth: 49 }
        );

        let b2 = beta("2");
        assert_eq!(
            univoque_test(&r(&b2, 0.3), &b2, 64).unwrap(),
            UnivoqueOutcome::Survives { depth: 64 }
        );
    }

    #[test]
    fn branch_agreement_off_the_hole() {
        // greedy and lazy agree off [1/β, 1/(β(β−1))] and differ by
        // exactly 1 on it
        let betas = ["1.3", "1.7", "1.95"];
        for d in betas {
            let b = beta(d);
            let g = hole(&b);
            let mut k = 1u64;
            for _ in 0..200 {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (k >> 11) as f64 / (1u64 << 53) as f64;
                let x = Float::with_val(160, u * (1.0 / (b.value.to_f64() - 1.0)));
                let gs = greedy_step(&x, &b).unwrap();
                let ls = lazy_step(&x, &b).unwrap();
                let diff = Float::with_val(160, &gs - &ls).abs();
                if x < g.a || x > g.b {
                    assert!(diff.to_f64() < 1e-30, "beta {d}: disagree off hole at {x}");
                } else {
                    assert!(
                        (diff.to_f64() - 1.0).abs() < 1e-30,
                        "beta {d}: not unit gap on hole at {x}"
                    );
                }
            }
        }
    }

    #[test]
    fn coding_monotone_at_finite_depth() {
        let b = beta("1.8");
        let mut k = 7u64;
        let mut xs: Vec<f64> = Vec::new();
        for _ in 0..60 {
            k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.push((k >> 11) as f64 / (1u64 << 53) as f64 * 1.2);
        }
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut prev: Option<DigitWord> = None;
        for x in xs {
            let w = greedy_coding(&r(&b, x), &b, 16).unwrap();
            if let Some(p) = &prev {
                assert!(
                    p.digits() <= w.digits(),
                    "lexicographic order broken: {p} vs {w}"
                );
            }
            prev = Some(w);
        }
    }

    #[test]
    fn trapping_region() {
        // iterates of points of I stay in I: 10^4 points, 10^3 steps
        let b = beta("1.9");
        let wp = b.value.prec();
        let bv = b.value.clone();
        let a = Float::with_val(wp, bv.recip_ref());
        let mut k = 42u64;
        for _ in 0..10_000 {
            k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (k >> 11) as f64 / (1u64 << 53) as f64;
            let mut x = Float::with_val(wp, u);
            for step in 0..1_000 {
                x = greedy_step_raw(&x, &bv, &a, wp).0;
                assert!(
                    x.cmp0() != std::cmp::Ordering::Less && x < 1u32,
                    "left [0,1) at step {step}"
                );
            }
        }
    }

    #[test]
    fn digit_word_parse_display() {
        let w: DigitWord = "10010".parse().unwrap();
        assert_eq!(w.to_string(), "10010");
        assert!("10201".parse::<DigitWord>().is_err());
        assert!(DigitWord::new(vec![0, 2]).is_err());
    }
}
