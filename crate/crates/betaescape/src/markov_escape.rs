//! Matching detection, Markov partitions from hole-endpoint orbits,
//! transition matrices, and the escape-rate dispatcher.
//!
//! When both hole-endpoint orbits fall into the open hole after finitely
//! many steps (a *matching* base), the orbit points cut [0,1] into a
//! finite Markov partition for the stuck map. Deleting the hole cells
//! from its transition matrix leaves the survivor shift; its Perron root
//! ρ gives the survivor entropy log ρ, the dimension log ρ / log β, and
//! the escape rate E = 1 − log ρ / log β.
//!
//! The left hole endpoint a = 1/β is also the branch point, and its
//! literal image is 0. Orbit tracing therefore starts the left endpoint
//! with its left-branch limit a ↦ βa = 1 and continues through J_β; this
//! is the itinerary that the cells immediately left of a actually follow,
//! and the only reading under which matching can occur at all. Enlarged
//! holes used for bracketing have a' < a strictly inside the first
//! branch, so their endpoints iterate literally; the orbit of 1 is then
//! traced separately because cells abutting 1 map onto (·, β−1).
//!
//! Orbits run at a working precision that grows with the step budget
//! (one bit per step of expansion plus guard bits), so classifications
//! against the hole boundary are reliable down to the stated margin at
//! any step. Boundary recurrences and undetermined classifications are
//! retried once at doubled precision before being reported.

use crate::beta_core::{
    classify_against, greedy_step_raw, hole, BetaParam, HoleSide,
};
use crate::constants::golden_ratio;
use crate::real::{ln_f64, Ctx, Real};
use crate::survivor::{
    escape_rate_empirical, survivor_iterate, EmpiricalEscape, SurvivorCaps,
};
use crate::{Error, Result};
use rug::Float;
use serde::Serialize;

// ---------------------------------------------------------------------------
// transition matrices and spectral radius
// ---------------------------------------------------------------------------

/// A labelled 0–1 matrix in sparse row form, with an optional uniform
/// scaling factor applied multiplicatively to every entry.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub labels: Vec<String>,
    rows: Vec<Vec<usize>>,
    pub scaling: Option<f64>,
}

impl TransitionMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(labels.len(), rows.len());
        TransitionMatrix {
            labels,
            rows,
            scaling: None,
        }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows_raw(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    /// The same 0–1 structure scaled by a uniform factor.
    pub fn scaled(&self, factor: f64) -> TransitionMatrix {
        TransitionMatrix {
            labels: self.labels.clone(),
            rows: self.rows.clone(),
            scaling: Some(factor * self.scaling.unwrap_or(1.0)),
        }
    }

    /// Strongly connected, with cycle lengths of gcd 1.
    pub fn is_primitive(&self) -> bool {
        let n = self.size();
        if n == 0 {
            return false;
        }
        let comps = strongly_connected_components(&self.rows);
        if comps.len() != 1 {
            return false;
        }
        if n == 1 {
            return self.rows[0].contains(&0);
        }
        // period = gcd over edges of (level[u] + 1 − level[v]) on a BFS tree
        let mut level = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        level[0] = 0;
        queue.push_back(0usize);
        while let Some(u) = queue.pop_front() {
            for &v in &self.rows[u] {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g: u64 = 0;
        for u in 0..n {
            for &v in &self.rows[u] {
                let d = level[u] as i64 + 1 - level[v] as i64;
                g = gcd(g, d.unsigned_abs());
            }
        }
        g == 1
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn strongly_connected_components(rows: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    let mut frames: Vec<(usize, usize)> = Vec::new();

    let mut visit = |v: usize,
                     frames: &mut Vec<(usize, usize)>,
                     index: &mut Vec<usize>,
                     low: &mut Vec<usize>,
                     stack: &mut Vec<usize>,
                     on_stack: &mut Vec<bool>,
                     counter: &mut usize| {
        index[v] = *counter;
        low[v] = *counter;
        *counter += 1;
        stack.push(v);
        on_stack[v] = true;
        frames.push((v, 0));
    };

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        visit(
            root, &mut frames, &mut index, &mut low, &mut stack, &mut on_stack, &mut counter,
        );
        while let Some(&(v, ei)) = frames.last() {
            if let Some(&w) = rows[v].get(ei) {
                frames.last_mut().unwrap().1 += 1;
                if index[w] == usize::MAX {
                    visit(
                        w, &mut frames, &mut index, &mut low, &mut stack, &mut on_stack,
                        &mut counter,
                    );
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(u, _)) = frames.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Spectral radius of a nonnegative matrix, per strongly connected
/// component: power iteration on (block + I) with an all-ones start,
/// stopping when the Collatz–Wielandt ratio gap closes below `tol`.
pub fn perron_root(m: &TransitionMatrix, tol: f64) -> Result<f64> {
    let n = m.size();
    if n == 0 {
        return Ok(0.0);
    }
    let scale = m.scaling.unwrap_or(1.0);
    let comps = strongly_connected_components(&m.rows);
    let mut rho: f64 = 0.0;
    let mut pos = vec![usize::MAX; n];
    for comp in &comps {
        if comp.len() == 1 {
            let v = comp[0];
            if m.rows[v].binary_search(&v).is_ok() || m.rows[v].contains(&v) {
                rho = rho.max(scale);
            }
            continue;
        }
        for p in pos.iter_mut() {
            *p = usize::MAX;
        }
        for (li, &v) in comp.iter().enumerate() {
            pos[v] = li;
        }
        let k = comp.len();
        let ladj: Vec<Vec<usize>> = comp
            .iter()
            .map(|&v| {
                m.rows[v]
                    .iter()
                    .filter_map(|&w| (pos[w] != usize::MAX).then(|| pos[w]))
                    .collect()
            })
            .collect();
        let mut vvec = vec![1.0f64; k];
        let mut wvec = vec![0.0f64; k];
        let cap = 200_000usize;
        let mut gap = f64::INFINITY;
        let mut comp_rho = None;
        for _ in 0..cap {
            let mut rmin = f64::INFINITY;
            let mut rmax = 0.0f64;
            for i in 0..k {
                let mut s = 0.0;
                for &j in &ladj[i] {
                    s += vvec[j];
                }
                let w = vvec[i] + scale * s;
                wvec[i] = w;
                let r = w / vvec[i];
                if r < rmin {
                    rmin = r;
                }
                if r > rmax {
                    rmax = r;
                }
            }
            gap = rmax - rmin;
            if gap <= tol * rmax {
                comp_rho = Some((rmax + rmin) / 2.0 - 1.0);
                break;
            }
            let mx = wvec.iter().cloned().fold(0.0f64, f64::max);
            for (v, w) in vvec.iter_mut().zip(&wvec) {
                *v = w / mx;
            }
        }
        match comp_rho {
            Some(r) => rho = rho.max(r),
            None => return Err(Error::NonConvergence { gap }),
        }
    }
    Ok(rho)
}

// ---------------------------------------------------------------------------
// orbit tracing
// ---------------------------------------------------------------------------

/// Which boundary point an orbit starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitEndpoint {
    /// Left hole endpoint (a = 1/β for the canonical hole).
    Left,
    /// Right hole endpoint (b = 1/(β(β−1)) for the canonical hole).
    Right,
    /// The point 1: its forward orbit bounds the images of cells at the
    /// right end of I. Used by enlarged-hole partitions.
    UnitPoint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrbitStatus {
    /// First strict entry into the open hole at this step.
    Entered { step: usize },
    /// The orbit returned exactly to an earlier point without entering.
    BoundaryPeriodic { period: usize },
    /// Neither entered nor recurred within the step budget.
    Open { steps: usize },
    /// An iterate fell within the margin of the hole boundary without
    /// coinciding with it.
    Undetermined { step: usize },
}

#[derive(Clone, Debug)]
pub struct OrbitRecord {
    pub endpoint: OrbitEndpoint,
    /// Orbit points from the start; when the status is `Entered` the
    /// final point is the one inside the hole.
    pub points: Vec<Real>,
    pub status: OrbitStatus,
    pub margin_used: Real,
    /// The dyadic β value actually iterated (stage precision).
    pub beta_used: Real,
    /// The hole the orbit was classified against, at the same precision.
    pub hole_used: (Real, Real),
    /// Whether the hole's left endpoint is the branch point 1/β.
    pub branch_point_hole: bool,
}

/// Hole selector for orbit tracing and partition building.
#[derive(Clone, Debug)]
pub(crate) enum HoleKind {
    /// Δ_β ∩ I = (1/β, min(b, 1)).
    Canonical,
    /// (a − dl, b + dr) with dyadic outward offsets; requires b + dr < 1.
    Enlarged { dl: Real, dr: Real },
}

struct StageEnv {
    beta: BetaParam,
    a: Real,
    hole_lo: Real,
    hole_hi: Real,
    lo_is_branch: bool,
    tiny: Real,
    margin: Real,
    wp: u32,
}

fn make_stage(
    beta0: &BetaParam,
    kind: &HoleKind,
    stage_steps: usize,
    base_prec: u32,
    margin: Option<&Real>,
) -> Result<StageEnv> {
    let wp = base_prec + stage_steps as u32 + 96;
    let beta = beta0.at_precision(wp)?;
    let wq = beta.value.prec();
    let bv = &beta.value;
    let a = Float::with_val(wq, 1u32) / bv;
    let b2 = Float::with_val(wq, bv * bv) - bv;
    let b = Float::with_val(wq, 1u32) / &b2;
    let one = Float::with_val(wq, 1u32);
    let b_in_i = if b > one { one.clone() } else { b.clone() };
    let (hole_lo, hole_hi, lo_is_branch) = match kind {
        HoleKind::Canonical => (a.clone(), b_in_i, true),
        HoleKind::Enlarged { dl, dr } => {
            let lo = Float::with_val(wq, &a - dl);
            let hi = Float::with_val(wq, &b + dr);
            if hi >= one {
                return Err(Error::OutOfDomain {
                    what: "enlarged hole right endpoint",
                    value: hi.to_f64().to_string(),
                    domain: "(0, 1)",
                });
            }
            let branch = dl.cmp0() == std::cmp::Ordering::Equal;
            (lo, hi, branch)
        }
    };
    let ctx = Ctx::new(base_prec);
    Ok(StageEnv {
        beta,
        a,
        hole_lo,
        hole_hi,
        lo_is_branch,
        tiny: ctx.tiny(),
        margin: margin.cloned().unwrap_or_else(|| ctx.margin()),
        wp: wq,
    })
}

fn trace_in_stage(env: &StageEnv, who: OrbitEndpoint, max_steps: usize) -> (Vec<Real>, OrbitStatus) {
    let (start, first) = match who {
        OrbitEndpoint::Left => (
            env.hole_lo.clone(),
            env.lo_is_branch
                .then(|| Float::with_val(env.wp, 1u32)),
        ),
        OrbitEndpoint::Right => (env.hole_hi.clone(), None),
        OrbitEndpoint::UnitPoint => (Float::with_val(env.wp, 1u32), None),
    };
    let bv = &env.beta.value;
    let mut points = vec![start.clone()];
    // previous points sorted by value, carrying their step index
    let mut sorted: Vec<(Real, usize)> = vec![(start, 0)];
    let mut status = OrbitStatus::Open { steps: max_steps };
    for k in 1..=max_steps {
        let next = match (&first, k) {
            (Some(f), 1) => f.clone(),
            _ => greedy_step_raw(points.last().unwrap(), bv, &env.a, env.wp).0,
        };
        match classify_against(&next, &env.hole_lo, &env.hole_hi, &env.tiny, &env.margin) {
            HoleSide::Inside => {
                points.push(next);
                status = OrbitStatus::Entered { step: k };
                break;
            }
            HoleSide::NearBoundary => {
                points.push(next);
                status = OrbitStatus::Undetermined { step: k };
                break;
            }
            HoleSide::Boundary | HoleSide::Outside => {}
        }
        if let Some(j) = find_close(&sorted, &next, &env.tiny) {
            status = OrbitStatus::BoundaryPeriodic { period: k - j };
            break;
        }
        let at = sorted
            .binary_search_by(|(p, _)| p.partial_cmp(&next).unwrap())
            .unwrap_or_else(|e| e);
        sorted.insert(at, (next.clone(), k));
        points.push(next);
    }
    (points, status)
}

fn find_close(sorted: &[(Real, usize)], x: &Real, tiny: &Real) -> Option<usize> {
    let at = sorted
        .binary_search_by(|(p, _)| p.partial_cmp(x).unwrap())
        .unwrap_or_else(|e| e);
    for idx in [at.wrapping_sub(1), at] {
        if let Some((p, j)) = sorted.get(idx) {
            let d = Float::with_val(p.prec(), p - x).abs();
            if d <= *tiny {
                return Some(*j);
            }
        }
    }
    None
}

/// Trace several orbits against the same hole in one shared stage
/// environment, growing the step budget (and with it the working
/// precision) until every orbit resolves or the budget is exhausted.
fn trace_group_staged(
    beta0: &BetaParam,
    kind: &HoleKind,
    whos: &[OrbitEndpoint],
    max_steps: usize,
    base_prec: u32,
    margin: Option<&Real>,
) -> Result<Vec<OrbitRecord>> {
    let mut stages: Vec<usize> = [256usize, 1024, 4096]
        .into_iter()
        .filter(|&s| s < max_steps)
        .collect();
    stages.push(max_steps);
    let last_idx = stages.len() - 1;
    for (si, &n) in stages.iter().enumerate() {
        let env = make_stage(beta0, kind, n, base_prec, margin)?;
        let traced: Vec<(Vec<Real>, OrbitStatus)> = whos
            .iter()
            .map(|&w| trace_in_stage(&env, w, n))
            .collect();
        let unresolved = traced
            .iter()
            .any(|(_, st)| matches!(st, OrbitStatus::Open { .. }));
        if unresolved && si < last_idx {
            continue;
        }
        return Ok(whos
            .iter()
            .zip(traced)
            .map(|(&endpoint, (points, status))| OrbitRecord {
                endpoint,
                points,
                status,
                margin_used: env.margin.clone(),
                beta_used: env.beta.value.clone(),
                hole_used: (env.hole_lo.clone(), env.hole_hi.clone()),
                branch_point_hole: env.lo_is_branch,
            })
            .collect());
    }
    unreachable!("stage list is never empty")
}

/// Staged tracing with one automatic retry at doubled precision when a
/// boundary recurrence or an undetermined classification shows up.
fn trace_group(
    beta0: &BetaParam,
    kind: &HoleKind,
    whos: &[OrbitEndpoint],
    max_steps: usize,
    base_prec: u32,
    margin: Option<&Real>,
) -> Result<Vec<OrbitRecord>> {
    let first = trace_group_staged(beta0, kind, whos, max_steps, base_prec, margin)?;
    let needs_retry = first.iter().any(|r| {
        matches!(
            r.status,
            OrbitStatus::BoundaryPeriodic { .. } | OrbitStatus::Undetermined { .. }
        )
    });
    if !needs_retry {
        return Ok(first);
    }
    match trace_group_staged(beta0, kind, whos, max_steps, base_prec * 2, margin) {
        Ok(second) => Ok(second),
        Err(_) => Ok(first),
    }
}

/// Trace one hole-endpoint orbit of the canonical hole until it strictly
/// enters, recurs to an earlier point, or exhausts the step budget.
pub fn orbit_until_hole(
    endpoint: OrbitEndpoint,
    beta: &BetaParam,
    max_steps: usize,
    margin: Option<Real>,
) -> Result<OrbitRecord> {
    let recs = trace_group(
        beta,
        &HoleKind::Canonical,
        &[endpoint],
        max_steps,
        beta.precision,
        margin.as_ref(),
    )?;
    Ok(recs.into_iter().next().unwrap())
}

/// Outcome of testing whether both hole-endpoint orbits enter the hole.
#[derive(Clone, Debug)]
pub enum Matching {
    /// Both endpoint orbits entered: the survivor shift is a finite-type
    /// shift and the matrix route applies.
    InF {
        i_a: usize,
        i_b: usize,
        rec_a: Box<OrbitRecord>,
        rec_b: Box<OrbitRecord>,
    },
    /// At least one orbit recurred or stayed out for the whole budget.
    /// Evidence, not proof, of non-matching.
    InN {
        evidence: String,
        rec_a: Box<OrbitRecord>,
        rec_b: Box<OrbitRecord>,
    },
}

/// Decide matching for golden < β < 2 within a step budget.
pub fn detect_matching(
    beta: &BetaParam,
    max_steps: usize,
    margin: Option<Real>,
) -> Result<Matching> {
    if beta.is_two() {
        return Err(Error::OutOfDomain {
            what: "beta",
            value: "2".into(),
            domain: "(golden, 2): the hole is empty at beta = 2",
        });
    }
    let golden = golden_ratio(beta.precision);
    if beta.value <= golden {
        return Err(Error::OutOfDomain {
            what: "beta",
            value: beta.value.to_f64().to_string(),
            domain: "(golden, 2): below the golden ratio the analysis is analytic",
        });
    }
    let recs = trace_group(
        beta,
        &HoleKind::Canonical,
        &[OrbitEndpoint::Left, OrbitEndpoint::Right],
        max_steps,
        beta.precision,
        margin.as_ref(),
    )?;
    let mut it = recs.into_iter();
    let rec_a = it.next().unwrap();
    let rec_b = it.next().unwrap();
    for rec in [&rec_a, &rec_b] {
        if let OrbitStatus::Undetermined { step } = rec.status {
            return Err(Error::Undetermined {
                step,
                hint: format!(
                    "{:?} hole-endpoint orbit within the boundary margin; raise precision",
                    rec.endpoint
                ),
            });
        }
    }
    match (&rec_a.status, &rec_b.status) {
        (OrbitStatus::Entered { step: ia }, OrbitStatus::Entered { step: ib }) => Ok(Matching::InF {
            i_a: *ia,
            i_b: *ib,
            rec_a: Box::new(rec_a),
            rec_b: Box::new(rec_b),
        }),
        (sa, sb) => {
            let evidence = format!("left orbit {:?}, right orbit {:?}", sa, sb);
            Ok(Matching::InN {
                evidence,
                rec_a: Box::new(rec_a),
                rec_b: Box::new(rec_b),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Markov partition
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Cell {
    pub hole: bool,
    /// Branch digit for non-hole cells: 0 left of the hole, 1 right.
    pub digit: Option<u8>,
}

#[derive(Clone, Debug)]
pub struct MarkovPartition {
    /// Ascending cut points; first is 0, last is 1. Cell i spans
    /// (cuts[i], cuts[i+1]).
    pub cuts: Vec<Real>,
    pub cells: Vec<Cell>,
    pub beta_value: Real,
    pub hole: (Real, Real),
    pub lo_is_branch: bool,
    pub precision: u32,
}

impl MarkovPartition {
    /// Tolerance for matching a computed image against a stored cut.
    fn cut_tol(&self) -> Real {
        Float::with_val(64, Float::u_exp(1, -(self.precision as i32) - 24))
    }

    fn find_cut(&self, x: &Real, tol: &Real) -> Option<usize> {
        let at = self
            .cuts
            .binary_search_by(|c| c.partial_cmp(x).unwrap())
            .unwrap_or_else(|e| e);
        for idx in [at.wrapping_sub(1), at, at + 1] {
            if let Some(c) = self.cuts.get(idx) {
                let d = Float::with_val(c.prec(), c - x).abs();
                if d <= *tol {
                    return Some(idx);
                }
            }
        }
        None
    }
}

/// Build the cut-point partition from the two endpoint orbit records.
pub fn build_partition(
    rec_a: &OrbitRecord,
    rec_b: &OrbitRecord,
    beta: &BetaParam,
) -> Result<MarkovPartition> {
    build_partition_from(&[rec_a, rec_b], beta)
}

pub(crate) fn build_partition_from(
    records: &[&OrbitRecord],
    beta: &BetaParam,
) -> Result<MarkovPartition> {
    let r0 = records
        .first()
        .ok_or_else(|| Error::Internal("no orbit records".into()))?;
    for r in records {
        if r.beta_used != r0.beta_used {
            return Err(Error::Internal(
                "orbit records come from different precision stages".into(),
            ));
        }
        match r.status {
            OrbitStatus::Entered { .. } | OrbitStatus::BoundaryPeriodic { .. } => {}
            _ => {
                return Err(Error::Internal(format!(
                    "{:?} orbit did not resolve: {:?}",
                    r.endpoint, r.status
                )))
            }
        }
    }
    let wq = r0.beta_used.prec();
    let ctx = Ctx::new(beta.precision);
    let tol = Float::with_val(64, Float::u_exp(1, -(beta.precision as i32) - 24));
    let margin = ctx.margin();

    let mut cuts: Vec<Real> = vec![Float::with_val(wq, 0), Float::with_val(wq, 1)];
    for r in records {
        cuts.extend(r.points.iter().cloned());
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut dedup: Vec<Real> = Vec::with_capacity(cuts.len());
    for c in cuts {
        if let Some(last) = dedup.last() {
            let d = Float::with_val(wq, &c - last);
            if d <= tol {
                continue;
            }
            if d <= margin {
                return Err(Error::Undetermined {
                    step: 0,
                    hint: "distinct cut points closer than the margin; raise precision".into(),
                });
            }
        }
        dedup.push(c);
    }
    let zero = Float::with_val(wq, 0);
    let one = Float::with_val(wq, 1);
    if *dedup.first().unwrap() < zero || *dedup.last().unwrap() > one {
        return Err(Error::Internal("cut point outside [0, 1]".into()));
    }

    let (hlo, hhi) = &r0.hole_used;
    let mut cells = Vec::with_capacity(dedup.len() - 1);
    for w in dedup.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let in_hole = Float::with_val(wq, lo - hlo) >= -tol.clone()
            && Float::with_val(wq, hi - hhi) <= tol;
        let digit = if in_hole {
            None
        } else if Float::with_val(wq, hi - hlo) <= tol {
            Some(0)
        } else if Float::with_val(wq, lo - hhi) >= -tol.clone() {
            Some(1)
        } else {
            return Err(Error::Internal(format!(
                "cell ({}, {}) straddles the hole",
                lo.to_f64(),
                hi.to_f64()
            )));
        };
        cells.push(Cell {
            hole: in_hole,
            digit,
        });
    }
    Ok(MarkovPartition {
        cuts: dedup,
        cells,
        beta_value: r0.beta_used.clone(),
        hole: r0.hole_used.clone(),
        lo_is_branch: r0.branch_point_hole,
        precision: beta.precision,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MarkovCheck {
    Pass,
    Fail { witness: String },
}

/// Check the Markov property: every cut's stuck-map image is again a
/// cut, every non-hole cell sits in a single branch, and its two
/// branch-image endpoints are cuts.
pub fn verify_markov(p: &MarkovPartition, _beta: &BetaParam) -> MarkovCheck {
    let wq = p.beta_value.prec();
    let bv = &p.beta_value;
    let a = Float::with_val(wq, 1u32) / bv;
    let tol = p.cut_tol();
    let (hlo, hhi) = &p.hole;

    for (i, pair) in p.cuts.windows(2).enumerate() {
        if pair[0] >= pair[1] {
            return MarkovCheck::Fail {
                witness: format!("cuts {i},{} out of order", i + 1),
            };
        }
    }

    for (i, z) in p.cuts.iter().enumerate() {
        let strictly_inside = Float::with_val(wq, z - hlo) > tol.clone()
            && Float::with_val(wq, hhi - z) > tol.clone();
        if strictly_inside {
            continue; // stuck map fixes it
        }
        let digit = u8::from(*z >= a);
        let mut img = Float::with_val(wq, bv * z);
        if digit == 1 {
            img -= 1u32;
        }
        if p.find_cut(&img, &tol).is_none() {
            return MarkovCheck::Fail {
                witness: format!(
                    "image of cut {i} ({}) is not a cut",
                    z.to_f64()
                ),
            };
        }
    }

    for (i, cell) in p.cells.iter().enumerate() {
        if cell.hole {
            continue;
        }
        let d = match cell.digit {
            Some(d) => d,
            None => {
                return MarkovCheck::Fail {
                    witness: format!("non-hole cell {i} without a branch digit"),
                }
            }
        };
        let (lo, hi) = (&p.cuts[i], &p.cuts[i + 1]);
        let single_branch = if d == 0 {
            Float::with_val(wq, hi - &a) <= tol
        } else {
            Float::with_val(wq, lo - &a) >= -tol.clone()
        };
        if !single_branch {
            return MarkovCheck::Fail {
                witness: format!("cell {i} straddles the branch point"),
            };
        }
        for endpoint in [lo, hi] {
            let mut img = Float::with_val(wq, bv * endpoint);
            if d == 1 {
                img -= 1u32;
            }
            if p.find_cut(&img, &tol).is_none() {
                return MarkovCheck::Fail {
                    witness: format!(
                        "cell {i} image endpoint {} is not a cut",
                        img.to_f64()
                    ),
                };
            }
        }
    }
    MarkovCheck::Pass
}

/// Transition matrix of the stuck map over all cells (hole cells are
/// fixed points) and the reduced matrix with hole rows/columns deleted.
pub fn build_transition(
    p: &MarkovPartition,
    _beta: &BetaParam,
) -> Result<(TransitionMatrix, TransitionMatrix)> {
    let wq = p.beta_value.prec();
    let bv = &p.beta_value;
    let tol = p.cut_tol();
    let m = p.cells.len();
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(m);
    for (i, cell) in p.cells.iter().enumerate() {
        if cell.hole {
            rows.push(vec![i]);
            continue;
        }
        let d = cell.digit.expect("non-hole cells carry a digit");
        let mut ylo = Float::with_val(wq, bv * &p.cuts[i]);
        let mut yhi = Float::with_val(wq, bv * &p.cuts[i + 1]);
        if d == 1 {
            ylo -= 1u32;
            yhi -= 1u32;
        }
        let jlo = p.find_cut(&ylo, &tol).ok_or_else(|| {
            Error::Internal(format!("cell {i}: lower image endpoint straddles cuts"))
        })?;
        let jhi = p.find_cut(&yhi, &tol).ok_or_else(|| {
            Error::Internal(format!("cell {i}: upper image endpoint straddles cuts"))
        })?;
        if jhi <= jlo {
            return Err(Error::Internal(format!("cell {i}: empty image span")));
        }
        rows.push((jlo..jhi).collect());
    }
    let labels: Vec<String> = (0..m).map(|i| format!("c{i}")).collect();
    let full = TransitionMatrix::new(labels, rows.clone());

    let keep: Vec<usize> = (0..m).filter(|&i| !p.cells[i].hole).collect();
    let mut remap = vec![usize::MAX; m];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let red_rows: Vec<Vec<usize>> = keep
        .iter()
        .map(|&i| {
            rows[i]
                .iter()
                .filter_map(|&j| (remap[j] != usize::MAX).then(|| remap[j]))
                .collect()
        })
        .collect();
    let red_labels: Vec<String> = keep.iter().map(|&i| format!("c{i}")).collect();
    let reduced = TransitionMatrix::new(red_labels, red_rows);
    Ok((full, reduced))
}

/// Escape rate, dimension, and survivor entropy from the reduced matrix.
#[derive(Clone, Copy, Debug)]
pub struct EscapeValues {
    pub rho: f64,
    pub entropy: f64,
    pub e: f64,
    pub big_e: f64,
    pub dim: f64,
}

pub fn escape_from_matrix(a_minus: &TransitionMatrix, beta: &BetaParam) -> Result<EscapeValues> {
    let rho = perron_root(a_minus, 1e-13)?;
    let bf = beta.value.to_f64();
    if !(1.0 - 1e-9..=bf + 1e-9).contains(&rho) {
        return Err(Error::Internal(format!(
            "spectral radius {rho} outside [1, {bf}]: partition construction error"
        )));
    }
    let rho = rho.clamp(1.0, bf);
    let log_beta = ln_f64(&beta.value);
    let entropy = rho.ln();
    let dim = entropy / log_beta;
    let big_e = 1.0 - dim;
    let e = log_beta - entropy;
    Ok(EscapeValues {
        rho,
        entropy,
        e,
        big_e,
        dim,
    })
}

// ---------------------------------------------------------------------------
// bracketing for non-matching bases
// ---------------------------------------------------------------------------

/// A two-sided enclosure of the escape rate with its certificates.
#[derive(Clone, Debug)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// Upper leg came from an enlarged-hole shift and the width met the
    /// target.
    pub converged: bool,
    /// Outward offsets (left, right) of the successful enlargement.
    pub delta_used: Option<(f64, f64)>,
    /// Entry steps of the enlarged hole's endpoints, when both entered.
    pub i_values: Option<(usize, usize)>,
    pub depth_used: usize,
    pub emp_big_e: f64,
    pub emp_window: (usize, usize),
    pub emp_residual: f64,
}

struct EnlargedOutcome {
    big_e: f64,
    i_values: Option<(usize, usize)>,
}

fn analyze_enlarged(
    beta: &BetaParam,
    dl: &Real,
    dr: &Real,
    cfg: &AnalyzeConfig,
) -> Option<EnlargedOutcome> {
    let kind = HoleKind::Enlarged {
        dl: dl.clone(),
        dr: dr.clone(),
    };
    let recs = trace_group(
        beta,
        &kind,
        &[
            OrbitEndpoint::Left,
            OrbitEndpoint::Right,
            OrbitEndpoint::UnitPoint,
        ],
        cfg.max_orbit,
        beta.precision,
        None,
    )
    .ok()?;
    if !recs.iter().all(|r| {
        matches!(
            r.status,
            OrbitStatus::Entered { .. } | OrbitStatus::BoundaryPeriodic { .. }
        )
    }) {
        return None;
    }
    let refs: Vec<&OrbitRecord> = recs.iter().collect();
    let p = build_partition_from(&refs, beta).ok()?;
    if verify_markov(&p, beta) != MarkovCheck::Pass {
        return None;
    }
    let (_, a_minus) = build_transition(&p, beta).ok()?;
    let vals = escape_from_matrix(&a_minus, beta).ok()?;
    let i_values = match (&recs[0].status, &recs[1].status) {
        (OrbitStatus::Entered { step: il }, OrbitStatus::Entered { step: ir }) => {
            Some((*il, *ir))
        }
        _ => None,
    };
    Some(EnlargedOutcome {
        big_e: vals.big_e,
        i_values,
    })
}

/// Bracket the escape rate of a (presumed non-matching) base.
///
/// Upper leg: enlarge the hole outward on a shrinking dyadic grid until
/// all boundary orbits of the enlarged hole resolve; the enlarged
/// system's survivor set is smaller, so its exact matrix escape rate
/// bounds E from above. Lower leg: the empirical fit minus a guard of
/// max(10⁻³, 3·stderr, 2·split-window drift).
pub fn approx_bracket(
    beta: &BetaParam,
    depth: usize,
    target_width: f64,
    cfg: &AnalyzeConfig,
) -> Result<Bracket> {
    let caps = SurvivorCaps {
        max_intervals: cfg.max_intervals,
        merge_tolerance: None,
    };
    let table = survivor_iterate(beta, depth, &caps);
    let last = table.last_n();
    if last < 4 {
        return Err(Error::NoDecay("survivor table too short to fit".into()));
    }
    let window = (last / 2, last);
    let emp = escape_rate_empirical(&table, window)?;
    let mid = (window.0 + window.1) / 2;
    let drift = if mid >= window.0 + 2 && window.1 >= mid + 2 {
        let first = escape_rate_empirical(&table, (window.0, mid)).ok();
        let second = escape_rate_empirical(&table, (mid, window.1)).ok();
        match (first, second) {
            (Some(f), Some(s)) => (f.big_e_hat - s.big_e_hat).abs(),
            _ => 0.0,
        }
    } else {
        0.0
    };
    let guard = (3.0 * emp.stderr_big_e).max(2.0 * drift).max(1e-3);
    let e_lo = (emp.big_e_hat - guard).clamp(0.0, 1.0);

    let g = hole(beta);
    let wq = beta.value.prec();
    let lam = Float::with_val(wq, &g.delta_in_i.1 - &g.delta_in_i.0);
    let head_room = Float::with_val(wq, 1u32) - &g.delta_in_i.1;
    let zero = Float::with_val(wq, 0);
    let kmax = (beta.precision / 2).min(40) as i32;
    let mut best: Option<(f64, (f64, f64), Option<(usize, usize)>)> = None;
    'search: for k in 4..=kmax {
        let delta = Float::with_val(wq, &lam * &Float::with_val(wq, Float::u_exp(1, -k)));
        let candidates = [
            (delta.clone(), delta.clone()),
            (delta.clone(), zero.clone()),
            (zero.clone(), delta.clone()),
        ];
        for (dl, dr) in candidates {
            if dr.cmp0() == std::cmp::Ordering::Greater && dr >= head_room {
                continue;
            }
            if let Some(out) = analyze_enlarged(beta, &dl, &dr, cfg) {
                let cand = out.big_e.clamp(0.0, 1.0);
                if best.as_ref().map_or(true, |(b, ..)| cand < *b) {
                    best = Some((cand, (dl.to_f64(), dr.to_f64()), out.i_values));
                }
                if let Some((b, ..)) = &best {
                    if b - e_lo <= target_width {
                        break 'search;
                    }
                }
            }
        }
    }

    let (hi, delta_used, i_values, enlarged_ok) = match best {
        Some((h, d, iv)) => (h, Some(d), iv, true),
        None => ((emp.big_e_hat + guard).clamp(0.0, 1.0), None, None, false),
    };
    let lo = if hi < e_lo { hi } else { e_lo };
    Ok(Bracket {
        lo,
        hi,
        converged: enlarged_ok && hi - lo <= target_width,
        delta_used,
        i_values,
        depth_used: last,
        emp_big_e: emp.big_e_hat,
        emp_window: window,
        emp_residual: emp.fit.residual_norm,
    })
}

// ---------------------------------------------------------------------------
// dispatcher and report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct AnalyzeConfig {
    /// Depth of the survivor recurrence backing empirical fits.
    pub depth: usize,
    /// Step budget for hole-endpoint orbits.
    pub max_orbit: usize,
    /// Interval cap for the survivor recurrence.
    pub max_intervals: usize,
    /// Attach the empirical cross-check when the depth permits.
    pub cross_check: bool,
    /// Bracket refinement stops at this width.
    pub target_width: f64,
    pub spectral_tol: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            depth: 40,
            max_orbit: 10_000,
            max_intervals: 2_000_000,
            cross_check: true,
            target_width: 0.02,
            spectral_tol: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Analytic,
    Matching,
    Bracketed,
    Beta2,
}

impl Classification {
    /// Method label used in sweep CSV rows.
    pub fn method(&self) -> &'static str {
        match self {
            Classification::Analytic => "analytic",
            Classification::Matching => "matrix",
            Classification::Bracketed => "bracket",
            Classification::Beta2 => "beta2",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BracketOut {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EmpiricalOut {
    #[serde(rename = "E_hat")]
    pub e_hat: f64,
    pub window: (usize, usize),
    pub residual: f64,
}

/// Per-base analysis result.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub beta: f64,
    pub spec: String,
    pub classification: Classification,
    pub i_a: Option<usize>,
    pub i_b: Option<usize>,
    pub rho: Option<f64>,
    pub entropy: Option<f64>,
    pub dim: f64,
    #[serde(rename = "E")]
    pub big_e: f64,
    pub e: f64,
    pub bracket: Option<BracketOut>,
    pub empirical: Option<EmpiricalOut>,
    pub precision_bits: u32,
    pub depth: usize,
}

fn empirical_out(beta: &BetaParam, cfg: &AnalyzeConfig) -> Option<(EmpiricalOut, EmpiricalEscape)> {
    if !cfg.cross_check || cfg.depth < 8 {
        return None;
    }
    let caps = SurvivorCaps {
        max_intervals: cfg.max_intervals,
        merge_tolerance: None,
    };
    let table = survivor_iterate(beta, cfg.depth, &caps);
    let last = table.last_n();
    if last < 4 {
        return None;
    }
    let window = (last / 2, last);
    let emp = escape_rate_empirical(&table, window).ok()?;
    Some((
        EmpiricalOut {
            e_hat: emp.big_e_hat,
            window,
            residual: emp.fit.residual_norm,
        },
        emp,
    ))
}

/// Classify a base and compute its escape rate:
/// β = 2 (empty hole), β ≤ golden (analytic, E = 1), matching (matrix
/// route), otherwise bracketed.
pub fn decide_escape(beta: &BetaParam, cfg: &AnalyzeConfig) -> Result<AnalysisReport> {
    let log_beta = ln_f64(&beta.value);
    let base = AnalysisReport {
        beta: beta.value.to_f64(),
        spec: beta.descriptor(),
        classification: Classification::Analytic,
        i_a: None,
        i_b: None,
        rho: None,
        entropy: None,
        dim: 0.0,
        big_e: 1.0,
        e: log_beta,
        bracket: None,
        empirical: None,
        precision_bits: beta.precision,
        depth: cfg.depth,
    };

    if beta.is_two() {
        return Ok(AnalysisReport {
            classification: Classification::Beta2,
            rho: Some(2.0),
            entropy: Some(std::f64::consts::LN_2),
            dim: 1.0,
            big_e: 0.0,
            e: 0.0,
            ..base
        });
    }

    let golden = golden_ratio(beta.precision);
    let tiny = Ctx::new(beta.precision).tiny();
    let near_golden = Float::with_val(beta.value.prec(), &beta.value - &golden) <= tiny;
    if beta.value <= golden || near_golden {
        // single shrinking survivor interval: λ(W_n) = β^−(n+1)
        let empirical = empirical_out(beta, cfg).map(|(out, _)| out);
        return Ok(AnalysisReport {
            classification: Classification::Analytic,
            rho: Some(1.0),
            entropy: Some(0.0),
            dim: 0.0,
            big_e: 1.0,
            e: log_beta,
            empirical,
            ..base
        });
    }

    match detect_matching(beta, cfg.max_orbit, None)? {
        Matching::InF {
            i_a,
            i_b,
            rec_a,
            rec_b,
        } => {
            let p = build_partition(&rec_a, &rec_b, beta)?;
            if let MarkovCheck::Fail { witness } = verify_markov(&p, beta) {
                return Err(Error::Internal(format!(
                    "partition failed verification: {witness}"
                )));
            }
            let (_, a_minus) = build_transition(&p, beta)?;
            let vals = escape_from_matrix(&a_minus, beta)?;
            let empirical = empirical_out(beta, cfg).map(|(out, _)| out);
            Ok(AnalysisReport {
                classification: Classification::Matching,
                i_a: Some(i_a),
                i_b: Some(i_b),
                rho: Some(vals.rho),
                entropy: Some(vals.entropy),
                dim: vals.dim,
                big_e: vals.big_e,
                e: vals.e,
                empirical,
                ..base
            })
        }
        Matching::InN { .. } => {
            let br = approx_bracket(beta, cfg.depth, cfg.target_width, cfg)?;
            let mid = 0.5 * (br.lo + br.hi);
            Ok(AnalysisReport {
                classification: Classification::Bracketed,
                dim: 1.0 - mid,
                big_e: mid,
                e: mid * log_beta,
                bracket: Some(BracketOut {
                    lo: br.lo,
                    hi: br.hi,
                }),
                empirical: cfg.cross_check.then_some(EmpiricalOut {
                    e_hat: br.emp_big_e,
                    window: br.emp_window,
                    residual: br.emp_residual,
                }),
                ..base
            })
        }
    }
}
