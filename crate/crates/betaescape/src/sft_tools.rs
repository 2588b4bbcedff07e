//! Lexicographic window subshifts and their entropy.
//!
//! A block t = t₁⋯t_p with t₁ = 1 defines the shift Z_t of all binary
//! sequences whose every length-p window w satisfies t̄ ⪯ w ⪯ t, where t̄
//! is the bitwise complement. The entropy comes from the Perron root of
//! the de Bruijn-style transfer graph on (p−1)-words, trimmed to its
//! essential part; an exhaustive word count provides the independent
//! growth-rate oracle.

use crate::beta_core::{BetaParam, DigitWord};
use crate::markov_escape::{perron_root, TransitionMatrix};
use crate::{Error, Result};

/// Hard cap for exhaustive counting: 2^24 candidate words.
pub const COUNT_CAP: usize = 24;

/// A window block: a binary word with leading digit 1 (equivalently,
/// t ⪰ t̄ in lexicographic order, so the constraint is satisfiable).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    word: DigitWord,
}

impl Block {
    pub fn new(word: DigitWord) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::BadDescriptor(
                String::new(),
                "block must have length at least 1".into(),
            ));
        }
        if word.digits()[0] != 1 {
            return Err(Error::BadDescriptor(
                word.to_string(),
                "block must dominate its complement (leading digit 1)".into(),
            ));
        }
        Ok(Block { word })
    }

    pub fn parse(s: &str) -> Result<Self> {
        Block::new(s.parse()?)
    }

    pub fn word(&self) -> &DigitWord {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    /// Numeric value of the block, most significant digit first.
    fn as_bits(&self) -> u32 {
        word_bits(self.word.digits())
    }
}

fn word_bits(digits: &[u8]) -> u32 {
    digits.iter().fold(0u32, |acc, &d| (acc << 1) | d as u32)
}

/// Bitwise complement 1 − ℓ of every digit.
pub fn complement(w: &DigitWord) -> DigitWord {
    DigitWord::new(w.digits().iter().map(|&d| 1 - d).collect()).expect("digits stay binary")
}

/// Whether t̄ ⪯ w ⪯ t in lexicographic order. Requires |w| = |t|.
pub fn window_allowed(w: &DigitWord, t: &Block) -> Result<bool> {
    if w.len() != t.len() {
        return Err(Error::LengthMismatch {
            want: t.len(),
            got: w.len(),
        });
    }
    let wv = word_bits(w.digits());
    let tv = t.as_bits();
    let cv = word_bits(complement(t.word()).digits());
    Ok(cv <= wv && wv <= tv)
}

fn window_allowed_bits(wv: u32, tv: u32, cv: u32) -> bool {
    cv <= wv && wv <= tv
}

/// Transfer graph of Z_t, trimmed to vertices on bi-infinite paths.
#[derive(Clone, Debug)]
pub struct TransferShift {
    pub matrix: TransitionMatrix,
    /// True when no bi-infinite path survives trimming: the shift is
    /// empty and its entropy is 0.
    pub empty: bool,
}

/// Build the vertex shift on (p−1)-words: u → v when they overlap in
/// p−2 symbols and the fused p-window is allowed. For p = 1 the vertices
/// are the two symbols themselves.
pub fn build_transfer(t: &Block) -> TransferShift {
    let p = t.len();
    let tv = t.as_bits();
    let cv = word_bits(complement(t.word()).digits());
    let (nv, rows) = if p == 1 {
        let mut rows = vec![Vec::new(), Vec::new()];
        for u in 0..2usize {
            for v in 0..2u32 {
                if window_allowed_bits(v, tv, cv) {
                    rows[u].push(v as usize);
                }
            }
        }
        (2usize, rows)
    } else {
        let nv = 1usize << (p - 1);
        let suffix_mask = (1u32 << (p - 2)) - 1; // of u
        let mut rows = vec![Vec::new(); nv];
        for u in 0..nv as u32 {
            for last in 0..2u32 {
                let fused = (u << 1) | last;
                let v = ((u & suffix_mask) << 1) | last;
                if window_allowed_bits(fused, tv, cv) {
                    rows[u as usize].push(v as usize);
                }
            }
        }
        (nv, rows)
    };

    // Trim to the essential subgraph: drop vertices with no successor or
    // no predecessor until stable.
    let mut alive = vec![true; nv];
    loop {
        let mut changed = false;
        let mut has_in = vec![false; nv];
        for u in 0..nv {
            if !alive[u] {
                continue;
            }
            for &v in &rows[u] {
                if alive[v] {
                    has_in[v] = true;
                }
            }
        }
        for u in 0..nv {
            if !alive[u] {
                continue;
            }
            let has_out = rows[u].iter().any(|&v| alive[v]);
            if !has_out || !has_in[u] {
                alive[u] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let index: Vec<Option<usize>> = {
        let mut idx = vec![None; nv];
        let mut next = 0usize;
        for (u, slot) in idx.iter_mut().enumerate() {
            if alive[u] {
                *slot = Some(next);
                next += 1;
            }
        }
        idx
    };
    let kept = index.iter().filter(|i| i.is_some()).count();
    let mut labels = Vec::with_capacity(kept);
    let mut out_rows = Vec::with_capacity(kept);
    let width = p.saturating_sub(1).max(1);
    for u in 0..nv {
        if let Some(_) = index[u] {
            labels.push(format!("{:0width$b}", u, width = width));
            out_rows.push(
                rows[u]
                    .iter()
                    .filter_map(|&v| index[v])
                    .collect::<Vec<_>>(),
            );
        }
    }
    let matrix = TransitionMatrix::new(labels, out_rows);
    TransferShift {
        empty: kept == 0,
        matrix,
    }
}

/// Topological entropy h = log ρ of the transfer graph, in [0, log 2].
pub fn sft_entropy(t: &Block) -> Result<f64> {
    let shift = build_transfer(t);
    if shift.empty {
        return Ok(0.0);
    }
    let rho = perron_root(&shift.matrix, 1e-13)?;
    if rho < 1.0 {
        // an essential graph always carries a cycle
        return Err(Error::Internal(format!(
            "essential transfer graph with spectral radius {rho} < 1"
        )));
    }
    let h = rho.ln();
    if h > std::f64::consts::LN_2 + 1e-9 {
        return Err(Error::Internal(format!(
            "binary shift entropy {h} above log 2"
        )));
    }
    Ok(h.min(std::f64::consts::LN_2))
}

/// Number of length-n binary words all of whose length-p windows are
/// allowed, by exhaustive enumeration. The independent oracle for
/// [`sft_entropy`]; capped at n = 24.
pub fn count_words(t: &Block, n: usize) -> Result<u64> {
    if n > COUNT_CAP {
        return Err(Error::CountCap { n, cap: COUNT_CAP });
    }
    if n == 0 {
        return Ok(1);
    }
    let p = t.len();
    let tv = t.as_bits();
    let cv = word_bits(complement(t.word()).digits());
    if n < p {
        return Ok(1u64 << n);
    }
    let windows = n - p + 1;
    let mask = (1u32 << p) - 1;
    let mut count = 0u64;
    for w in 0..(1u64 << n) {
        let mut ok = true;
        for i in 0..windows {
            let shift = n - p - i;
            let win = ((w >> shift) as u32) & mask;
            if !window_allowed_bits(win, tv, cv) {
                ok = false;
                break;
            }
        }
        if ok {
            count += 1;
        }
    }
    Ok(count)
}

/// Escape rate for a base inside the admissible region of a block:
/// E = 1 − h_top(Z_t)/log β. Admissibility of the (β, t) pairing is the
/// caller's responsibility; values outside [0, 1] are rejected.
pub fn escape_for_admissible(beta: &BetaParam, t: &Block) -> Result<f64> {
    let h = sft_entropy(t)?;
    let log_beta = beta.value.clone().ln().to_f64();
    let e = 1.0 - h / log_beta;
    if !(-1e-9..=1.0 + 1e-9).contains(&e) {
        return Err(Error::BlockBetaMismatch(e));
    }
    Ok(e.clamp(0.0, 1.0))
}
