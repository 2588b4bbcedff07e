//! Exact Lebesgue bookkeeping of survivor sets and the empirical escape
//! rate.
//!
//! W_0 is [0,1) minus the open hole; W_{n+1} = W_0 ∩ T_β^{−1}(W_n). Both
//! inverse branches of T_β are affine contractions, so endpoint error
//! stays bounded by a few ulps of the working precision and the measure
//! column is good far beyond anything the regression needs. The escape
//! rate is the slope of −log λ(W_n): with a single hole the prefactor of
//! the decay law is a constant, so a straight-line fit with intercept is
//! the right model.

use crate::beta_core::{hole, BetaParam};
use crate::real::{least_squares, LineFit, Real};
use crate::{Error, Result};
use rug::Float;

/// Sorted disjoint subintervals of [0, 1], positive length each.
#[derive(Clone, Debug)]
pub struct IntervalSet {
    intervals: Vec<(Real, Real)>,
    merge_tolerance: Real,
    prec: u32,
}

impl IntervalSet {
    pub fn empty(prec: u32, merge_tolerance: Real) -> Self {
        IntervalSet {
            intervals: Vec::new(),
            merge_tolerance,
            prec,
        }
    }

    /// Normalise a list of candidate intervals: sort, merge anything
    /// closer than the tolerance (each merge changes measure by less
    /// than the tolerance), drop nonpositive lengths.
    pub fn from_intervals(mut raw: Vec<(Real, Real)>, prec: u32, merge_tolerance: Real) -> Self {
        raw.retain(|(lo, hi)| hi > lo);
        raw.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("interval endpoints are finite"));
        let mut merged: Vec<(Real, Real)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match merged.last_mut() {
                Some(last) if {
                    let gap = Float::with_val(prec, &lo - &last.1);
                    gap <= merge_tolerance
                } =>
                {
                    if hi > last.1 {
                        last.1 = hi;
                    }
                }
                _ => merged.push((lo, hi)),
            }
        }
        IntervalSet {
            intervals: merged,
            merge_tolerance,
            prec,
        }
    }

    pub fn intervals(&self) -> &[(Real, Real)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total length Σ (hi − lo).
    pub fn measure(&self) -> Real {
        let mut acc = Float::with_val(self.prec, 0);
        for (lo, hi) in &self.intervals {
            acc += Float::with_val(self.prec, hi - lo);
        }
        acc
    }

    /// Intersection with another sorted disjoint set.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0usize, 0usize);
        let a = &self.intervals;
        let b = &other.intervals;
        while i < a.len() && j < b.len() {
            let lo = if a[i].0 >= b[j].0 { a[i].0.clone() } else { b[j].0.clone() };
            let hi = if a[i].1 <= b[j].1 { a[i].1.clone() } else { b[j].1.clone() };
            if hi > lo {
                out.push((lo, hi));
            }
            if a[i].1 <= b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::from_intervals(out, self.prec, self.merge_tolerance.clone())
    }
}

/// Inverse image T_β^(−1)(J) ∩ [0, 1): the contraction J/β joined with
/// ((J ∩ [0, β−1]) + 1)/β on the second branch.
pub fn preimage(j: &IntervalSet, beta: &BetaParam) -> IntervalSet {
    let wp = beta.value.prec();
    let bv = &beta.value;
    let bm1 = Float::with_val(wp, bv - 1u32);
    let mut out: Vec<(Real, Real)> = Vec::with_capacity(2 * j.len());
    for (lo, hi) in j.intervals() {
        out.push((
            Float::with_val(wp, lo / bv),
            Float::with_val(wp, hi / bv),
        ));
    }
    for (lo, hi) in j.intervals() {
        if *lo >= bm1 {
            break; // sorted: nothing further intersects [0, β−1]
        }
        let hi_cl = if *hi <= bm1 { hi.clone() } else { bm1.clone() };
        if hi_cl > *lo {
            out.push((
                (Float::with_val(wp, lo + 1u32)) / bv,
                (Float::with_val(wp, &hi_cl + 1u32)) / bv,
            ));
        }
    }
    IntervalSet::from_intervals(out, j.prec, j.merge_tolerance.clone())
}

/// One row of the survival table.
#[derive(Clone, Debug)]
pub struct SurvivorRow {
    pub n: usize,
    pub measure_w: Real,
    pub measure_gamma: Real,
    pub interval_count: usize,
}

#[derive(Clone, Debug)]
pub struct SurvivorTable {
    pub beta: BetaParam,
    pub hole: (Real, Real),
    pub rows: Vec<SurvivorRow>,
    /// True when the interval cap stopped the recurrence early.
    pub truncated: bool,
}

impl SurvivorTable {
    pub fn last_n(&self) -> usize {
        self.rows.last().map(|r| r.n).unwrap_or(0)
    }

    /// `n,measure_W,measure_Gamma,interval_count` at 20 significant
    /// digits, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,measure_W,measure_Gamma,interval_count\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.n,
                crate::real::fmt20(&r.measure_w),
                crate::real::fmt20(&r.measure_gamma),
                r.interval_count
            ));
        }
        s
    }
}

/// Resource limits for the interval recurrence.
#[derive(Clone, Debug)]
pub struct SurvivorCaps {
    pub max_intervals: usize,
    /// Defaults to 2^(−precision+16) when absent.
    pub merge_tolerance: Option<Real>,
}

impl Default for SurvivorCaps {
    fn default() -> Self {
        SurvivorCaps {
            max_intervals: 2_000_000,
            merge_tolerance: None,
        }
    }
}

/// Survival table for the canonical hole Δ_β ∩ I.
pub fn survivor_iterate(beta: &BetaParam, depth: usize, caps: &SurvivorCaps) -> SurvivorTable {
    let g = hole(beta);
    survivor_iterate_with_hole(beta, (g.delta_in_i.0, g.delta_in_i.1), depth, caps)
}

/// Survival table for an arbitrary open hole inside [0, 1). The engine
/// is shared with enlarged-hole bracketing and artificial-hole checks.
pub fn survivor_iterate_with_hole(
    beta: &BetaParam,
    hole: (Real, Real),
    depth: usize,
    caps: &SurvivorCaps,
) -> SurvivorTable {
    let wp = beta.value.prec();
    let tol = caps.merge_tolerance.clone().unwrap_or_else(|| {
        Float::with_val(wp, Float::u_exp(1, -(beta.precision as i32) + 16))
    });
    let zero = Float::with_val(wp, 0);
    let one = Float::with_val(wp, 1);
    let (hlo, hhi) = (&hole.0, &hole.1);
    let mut w0_raw: Vec<(Real, Real)> = Vec::new();
    if hlo >= hhi {
        w0_raw.push((zero.clone(), one.clone())); // empty hole
    } else {
        if *hlo > zero {
            let cap = if *hlo < one { hlo.clone() } else { one.clone() };
            w0_raw.push((zero.clone(), cap));
        }
        if *hhi < one {
            w0_raw.push((hhi.clone(), one.clone()));
        }
    }
    let w0 = IntervalSet::from_intervals(w0_raw, wp, tol.clone());

    let mut rows = Vec::with_capacity(depth + 1);
    let mut truncated = false;
    let m0 = w0.measure();
    rows.push(SurvivorRow {
        n: 0,
        measure_w: m0.clone(),
        measure_gamma: Float::with_val(wp, 0),
        interval_count: w0.len(),
    });
    let mut w = w0.clone();
    let mut prev_measure = m0;
    for n in 1..=depth {
        let next = w0.intersect(&preimage(&w, beta));
        let m = next.measure();
        let gamma = Float::with_val(wp, &prev_measure - &m);
        rows.push(SurvivorRow {
            n,
            measure_w: m.clone(),
            measure_gamma: gamma,
            interval_count: next.len(),
        });
        prev_measure = m;
        w = next;
        if w.len() > caps.max_intervals {
            truncated = n < depth;
            break;
        }
    }
    SurvivorTable {
        beta: beta.clone(),
        hole,
        rows,
        truncated,
    }
}

/// Regression output of the escape-rate fit.
#[derive(Clone, Debug)]
pub struct EmpiricalEscape {
    /// Slope of −log λ(W_n): the raw escape rate e.
    pub e_hat: f64,
    /// e / log β.
    pub big_e_hat: f64,
    pub stderr_big_e: f64,
    pub window: (usize, usize),
    pub fit: LineFit,
    /// Same fit on the first-entry measures λ(Γ_n), where positive.
    pub gamma_fit: Option<LineFit>,
}

/// Least-squares slope of −log λ(W_n) on an inclusive window of rows.
pub fn escape_rate_empirical(
    table: &SurvivorTable,
    window: (usize, usize),
) -> Result<EmpiricalEscape> {
    let (n_lo, n_hi) = window;
    let last = table.last_n();
    if n_lo >= n_hi || n_hi > last {
        return Err(Error::OutOfDomain {
            what: "fit window",
            value: format!("[{n_lo}, {n_hi}]"),
            domain: "within table rows, n_lo < n_hi",
        });
    }
    let rows = &table.rows[n_lo..=n_hi];
    if rows.iter().any(|r| r.measure_w.cmp0() != std::cmp::Ordering::Greater) {
        return Err(Error::NoDecay(
            "zero survivor measure inside the fit window".into(),
        ));
    }
    if rows.first().unwrap().measure_w == rows.last().unwrap().measure_w {
        return Err(Error::NoDecay(
            "survivor measure constant on the fit window (empty hole?)".into(),
        ));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| -r.measure_w.clone().ln().to_f64())
        .collect();
    let fit = least_squares(&xs, &ys).ok_or_else(|| Error::NoDecay("degenerate window".into()))?;
    let log_beta = table.beta.value.clone().ln().to_f64();
    let gamma_pts: (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.measure_gamma.cmp0() == std::cmp::Ordering::Greater)
        .map(|r| (r.n as f64, -r.measure_gamma.clone().ln().to_f64()))
        .unzip();
    let gamma_fit = if gamma_pts.0.len() >= 3 {
        least_squares(&gamma_pts.0, &gamma_pts.1)
    } else {
        None
    };
    Ok(EmpiricalEscape {
        e_hat: fit.slope,
        big_e_hat: fit.slope / log_beta,
        stderr_big_e: fit.stderr_slope / log_beta,
        window,
        fit,
        gamma_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta_core::make_beta;
    use crate::real::DEFAULT_PRECISION;

    fn beta(d: &str) -> BetaParam {
        make_beta(d, DEFAULT_PRECISION).unwrap()
    }

    fn set(beta: &BetaParam, ivs: &[(f64, f64)]) -> IntervalSet {
        let wp = beta.value.prec();
        IntervalSet::from_intervals(
            ivs.iter()
                .map(|&(l, h)| (Float::with_val(wp, l), Float::with_val(wp, h)))
                .collect(),
            wp,
            Float::with_val(wp, Float::u_exp(1, -(beta.precision as i32) + 16)),
        )
    }

    #[test]
    fn preimage_dyadic_branches() {
        let b = beta("2");
        let j = set(&b, &[(0.0, 0.5)]);
        let pre = preimage(&j, &b);
        let ivs = pre.intervals();
        assert_eq!(ivs.len(), 2);
        assert_eq!(ivs[0].0.to_f64(), 0.0);
        assert_eq!(ivs[0].1.to_f64(), 0.25);
        assert_eq!(ivs[1].0.to_f64(), 0.5);
        assert_eq!(ivs[1].1.to_f64(), 0.75);
    }

    #[test]
    fn preimage_empty_and_full() {
        let b = beta("1.8");
        let empty = set(&b, &[]);
        assert!(preimage(&empty, &b).is_empty());
        let full = set(&b, &[(0.0, 1.0)]);
        let pre = preimage(&full, &b);
        assert_eq!(pre.len(), 1);
        assert_eq!(pre.intervals()[0].0.to_f64(), 0.0);
        assert!((pre.measure().to_f64() - 1.0).abs() < 1e-30);
    }

    #[test]
    fn survivor_below_golden_closed_form() {
        // below the golden ratio the hole reaches 1, so W_n is a single
        // interval [0, β^−(n+1)]
        let b = beta("1.5");
        let t = survivor_iterate(&b, 5, &SurvivorCaps::default());
        for (n, row) in t.rows.iter().enumerate() {
            let expect = Float::with_val(160, 1.5f64).pow(-(n as i32) - 1);
            let diff = Float::with_val(160, &row.measure_w - &expect).abs();
            assert!(diff.to_f64() < 1e-30, "n={n}");
        }
        assert!(!t.truncated);
    }

    #[test]
    fn survivor_beta_two_constant_one() {
        let b = beta("2");
        let t = survivor_iterate(&b, 10, &SurvivorCaps::default());
        for row in &t.rows {
            assert_eq!(row.measure_w.to_f64(), 1.0);
            assert_eq!(row.measure_gamma.to_f64(), 0.0);
        }
    }

    #[test]
    fn survivor_matches_independent_computation() {
        // frozen from an 80-digit independent interval-arithmetic run
        let b = beta("1.9");
        let t = survivor_iterate(&b, 12, &SurvivorCaps::default());
        let expected = [
            "0.9415204678362573099415205",
            "0.8799630655586334256694367",
            "0.8151658000032398632777697",
            "0.7554841080443247400222868",
            "0.6971486196634302586447472",
            "0.6428281244099657618154593",
            "0.5931068472900897921776672",
            "0.546656706822837241594993",
            "0.5039597652517526139281909",
            "0.4646336348573325621298206",
            "0.4282929710681643842613289",
            "0.3948589579674791978261646",
            "0.3640248396740545000469353",
        ];
        for (n, want) in expected.iter().enumerate() {
            let w = Float::with_val(160, Float::parse(want).unwrap());
            let diff = Float::with_val(160, &t.rows[n].measure_w - &w).abs();
            assert!(diff.to_f64() < 1e-20, "n={n}: {diff}");
        }
        // strictly decreasing measures
        for pair in t.rows.windows(2) {
            assert!(pair[1].measure_w < pair[0].measure_w);
        }
    }

    #[test]
    fn conservation_and_monotonicity() {
        for d in ["1.5", "golden", "1.9", "1.99"] {
            let b = beta(d);
            let t = survivor_iterate(&b, 30, &SurvivorCaps::default());
            let wp = b.value.prec();
            let mut gamma_sum = Float::with_val(wp, 0);
            for row in &t.rows[1..] {
                assert!(row.measure_gamma.cmp0() != std::cmp::Ordering::Less);
                gamma_sum += &row.measure_gamma;
            }
            let last = &t.rows.last().unwrap().measure_w;
            let w0 = &t.rows[0].measure_w;
            let resid = Float::with_val(wp, &gamma_sum + last) - w0;
            assert!(resid.abs().to_f64() < 1e-25, "beta {d}");
            // W_0 = 1 − λ(Δ_β ∩ I)
            let g = hole(&b);
            let mut hole_len = Float::with_val(wp, &g.delta_in_i.1 - &g.delta_in_i.0);
            if hole_len.cmp0() == std::cmp::Ordering::Less {
                hole_len = Float::with_val(wp, 0);
            }
            let anchor = Float::with_val(wp, 1) - hole_len;
            let d0 = Float::with_val(wp, w0 - &anchor).abs();
            assert!(d0.to_f64() < 1e-30, "beta {d}");
        }
    }

    #[test]
    fn truncation_flag_on_tiny_cap() {
        let b = beta("1.9");
        let caps = SurvivorCaps {
            max_intervals: 50,
            merge_tolerance: None,
        };
        let t = survivor_iterate(&b, 30, &caps);
        assert!(t.truncated);
        assert!(t.last_n() < 30);
    }

    #[test]
    fn escape_rate_geometric_decay() {
        let b = beta("1.5");
        let t = survivor_iterate(&b, 12, &SurvivorCaps::default());
        let emp = escape_rate_empirical(&t, (6, 12)).unwrap();
        assert!((emp.e_hat - 1.5f64.ln()).abs() < 1e-6);
        assert!((emp.big_e_hat - 1.0).abs() < 1e-6);

        let b = beta("golden");
        let t = survivor_iterate(&b, 20, &SurvivorCaps::default());
        let emp = escape_rate_empirical(&t, (10, 20)).unwrap();
        assert!((emp.big_e_hat - 1.0).abs() < 1e-3);
    }

    #[test]
    fn escape_rate_no_decay_for_beta_two() {
        let b = beta("2");
        let t = survivor_iterate(&b, 10, &SurvivorCaps::default());
        assert!(matches!(
            escape_rate_empirical(&t, (5, 10)),
            Err(Error::NoDecay(_))
        ));
    }

    #[test]
    fn gamma_and_w_slopes_agree() {
        let b = beta("1.9");
        let t = survivor_iterate(&b, 24, &SurvivorCaps::default());
        let emp = escape_rate_empirical(&t, (12, 24)).unwrap();
        let gf = emp.gamma_fit.expect("gamma measures positive here");
        let tol = 3.0 * (emp.fit.stderr_slope + gf.stderr_slope) + 1e-9;
        assert!(
            (emp.fit.slope - gf.slope).abs() <= tol,
            "slopes {} vs {} tol {}",
            emp.fit.slope,
            gf.slope,
            tol
        );
    }

    #[test]
    fn artificial_dyadic_hole_matches_brute_force() {
        // β = 2 with hole (1/2, 3/4): exact interval bookkeeping vs
        // survival frequencies over 2^20 equispaced points
        let b = beta("2");
        let wp = b.value.prec();
        let hole = (
            Float::with_val(wp, 0.5),
            Float::with_val(wp, 0.75),
        );
        let t = survivor_iterate_with_hole(&b, hole, 8, &SurvivorCaps::default());
        let total = 1u32 << 20;
        let mut xs: Vec<f64> = (0..total)
            .map(|i| (i as f64 + 0.5) / total as f64)
            .collect();
        for row in &t.rows {
            xs.retain(|&x| !(x > 0.5 && x < 0.75));
            let surviving = xs.len() as f64 / total as f64;
            assert!(
                (surviving - row.measure_w.to_f64()).abs() < 2f64.powi(-18),
                "n={}: {} vs {}",
                row.n,
                surviving,
                row.measure_w.to_f64()
            );
            for x in xs.iter_mut() {
                let y = 2.0 * *x;
                *x = if y >= 1.0 { y - 1.0 } else { y };
            }
        }
    }

    #[test]
    fn csv_shape() {
        let b = beta("1.5");
        let t = survivor_iterate(&b, 3, &SurvivorCaps::default());
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,measure_W,measure_Gamma,interval_count");
        assert_eq!(csv.lines().count(), 5);
        assert!(!csv.contains('\r'));
    }
}
