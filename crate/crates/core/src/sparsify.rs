//! Weight sparsifiers for Boolean codes.
//!
//! A code is a set of supports over {0,…,n−1}. An ε-sparsifier is a weighted
//! coordinate subset (T, α) whose weighted partial sums reproduce every
//! codeword's Hamming weight within a factor 1±ε. The builder runs
//! R = ⌈log₂n⌉ rounds; per round it captures low-residual supports exactly,
//! punctures medium dyadic layers to shrink their trace counts, and halves
//! the remaining universe by independent coin flips. Coordinates picked in
//! round r carry weight 2^r; leftovers carry 2^R. Build success is checked,
//! not assumed: every attempt is verified and retried on failure.
//!
//! The module also houses non-redundancy (NRD) — computed through the
//! moonflower search on the support family — and the nested-chain code whose
//! certifier shows small sparsifiers must confuse two chain weights.
//!
//! All logarithms here are base 2.

use crate::bits::CoordSet;
use crate::puncture::{weight_scale_puncture, PunctureError};
use crate::setfam::{mf_exact, mf_greedy, SetFamError, SetFamily};
use num::{BigInt, BigRational, FromPrimitive, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparsifyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid code: {0}")]
    BadCode(String),
    #[error("build failed after {attempts} attempts; best max relative error {best_err}")]
    RetriesExhausted {
        attempts: u32,
        best_err: f64,
        best: Box<(Sparsifier, BuildLog)>,
    },
    #[error(transparent)]
    Family(#[from] SetFamError),
    #[error(transparent)]
    Puncture(#[from] PunctureError),
}

// ---------------------------------------------------------------------------
// Codes

/// A Boolean code stored as the supports of its words, deduplicated with the
/// first-occurrence order preserved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Code {
    n: usize,
    words: Vec<CoordSet>,
}

impl Code {
    pub fn from_supports<I>(n: usize, supports: I) -> Result<Code, SparsifyError>
    where
        I: IntoIterator<Item = Vec<usize>>,
    {
        let mut words = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for sup in supports {
            for &c in &sup {
                if c >= n {
                    return Err(SparsifyError::BadCode(format!(
                        "coordinate {c} outside block length {n}"
                    )));
                }
            }
            let set = CoordSet::from_indices(n, sup.iter().copied());
            if seen.insert(set.clone()) {
                words.push(set);
            }
        }
        Ok(Code { n, words })
    }

    pub fn from_sets(n: usize, sets: Vec<CoordSet>) -> Code {
        let mut words = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for set in sets {
            if seen.insert(set.clone()) {
                words.push(set);
            }
        }
        Code { n, words }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn words(&self) -> &[CoordSet] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_weight(&self) -> usize {
        self.words.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    /// The family of supports, in canonical order.
    pub fn support_family(&self) -> SetFamily {
        SetFamily::from_sets(self.n, self.words.iter().cloned())
    }
}

/// Parse a code file: header `n <int>`, then one word per line, either a
/// whitespace-separated sorted coordinate list or a dense 0/1 string of
/// length exactly n (detected per line). A blank line is the all-zero word.
pub fn parse_code(text: &str) -> Result<Code, SparsifyError> {
    let mut lines = text.lines().enumerate();
    let (first_no, first) = lines
        .next()
        .ok_or(SparsifyError::Parse { line: 1, msg: "empty input".into() })?;
    let mut head = first.split_whitespace();
    let n = match (head.next(), head.next(), head.next()) {
        (Some("n"), Some(v), None) => v.parse::<usize>().map_err(|_| SparsifyError::Parse {
            line: first_no + 1,
            msg: format!("bad block length {v:?}"),
        })?,
        _ => {
            return Err(SparsifyError::Parse {
                line: first_no + 1,
                msg: "expected header `n <int>`".into(),
            })
        }
    };

    let mut supports = Vec::new();
    for (no, line) in lines {
        let line = line.trim();
        let dense = n > 0
            && line.len() == n
            && !line.contains(char::is_whitespace)
            && line.bytes().all(|b| b == b'0' || b == b'1');
        let sup: Vec<usize> = if dense {
            line.bytes()
                .enumerate()
                .filter(|(_, b)| *b == b'1')
                .map(|(i, _)| i)
                .collect()
        } else {
            let mut sup = Vec::new();
            for tok in line.split_whitespace() {
                let c = tok.parse::<usize>().map_err(|_| SparsifyError::Parse {
                    line: no + 1,
                    msg: format!("bad coordinate {tok:?}"),
                })?;
                if c >= n {
                    return Err(SparsifyError::Parse {
                        line: no + 1,
                        msg: format!("coordinate {c} outside block length {n}"),
                    });
                }
                sup.push(c);
            }
            sup
        };
        supports.push(sup);
    }
    Code::from_supports(n, supports)
}

/// Inverse of [`parse_code`]. Words are written sparse, except at n = 1
/// where a sparse singleton would be indistinguishable from a dense digit;
/// there every word is written dense.
pub fn write_code(code: &Code) -> String {
    let mut out = format!("n {}\n", code.n);
    for w in &code.words {
        if code.n == 1 {
            out.push(if w.is_empty() { '0' } else { '1' });
        } else {
            let coords: Vec<String> = w.iter().map(|c| c.to_string()).collect();
            out.push_str(&coords.join(" "));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Non-redundancy

/// Largest coordinate set on which some subset of codewords restricts to a
/// permutation matrix; equals the moonflower number of the support family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NrdResult {
    pub value: usize,
    /// One private coordinate per petal of the witnessing moonflower.
    pub witness_coords: Vec<usize>,
    /// False when the search budget ran out and the value is only the best
    /// lower bound found (branch-and-bound incumbent vs. greedy, whichever
    /// is larger).
    pub exact: bool,
}

pub fn nrd(code: &Code, budget: u64) -> Result<NrdResult, SparsifyError> {
    let fam = code.support_family();
    let (value, witness, exact) = match mf_exact(&fam, budget) {
        Ok((v, w)) => (v, w, true),
        Err(SetFamError::NodeBudget { best, witness }) => {
            let (gv, gw) = mf_greedy(&fam);
            if gv > best {
                (gv, gw, false)
            } else {
                (best, witness, false)
            }
        }
        Err(e) => return Err(e.into()),
    };
    let mut coords = Vec::with_capacity(value);
    for &pi in &witness.petal_indices {
        let private = fam.members()[pi].difference(&witness.core);
        coords.push(private.iter().next().expect("petals keep a private element"));
    }
    coords.sort_unstable();
    Ok(NrdResult { value, witness_coords: coords, exact })
}

// ---------------------------------------------------------------------------
// Sparsifier representation

/// One kept coordinate. `round < rounds` means it was picked by puncturing
/// in that round; `round == rounds` marks a residual coordinate. The weight
/// is always 2^round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsifierEntry {
    pub coord: usize,
    pub weight: u64,
    pub round: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sparsifier {
    pub n: usize,
    pub rounds: u32,
    /// Sorted by coordinate.
    pub entries: Vec<SparsifierEntry>,
    pub seed: u64,
    pub config: Option<SparsifierConfig>,
}

impl Sparsifier {
    /// Build from (coordinate, round) pairs; weights follow as 2^round.
    pub fn from_rounds(
        n: usize,
        rounds: u32,
        picks: impl IntoIterator<Item = (usize, u32)>,
    ) -> Result<Sparsifier, SparsifyError> {
        let mut map: BTreeMap<usize, u32> = BTreeMap::new();
        for (coord, round) in picks {
            if coord >= n {
                return Err(SparsifyError::BadCode(format!(
                    "sparsifier coordinate {coord} outside block length {n}"
                )));
            }
            if round > rounds {
                return Err(SparsifyError::BadCode(format!(
                    "entry round {round} above round count {rounds}"
                )));
            }
            if map.insert(coord, round).is_some() {
                return Err(SparsifyError::BadCode(format!("duplicate coordinate {coord}")));
            }
        }
        let entries = map
            .into_iter()
            .map(|(coord, round)| SparsifierEntry { coord, weight: 1u64 << round, round })
            .collect();
        Ok(Sparsifier { n, rounds, entries, seed: 0, config: None })
    }

    /// T = all coordinates, α ≡ 1.
    pub fn identity(n: usize) -> Sparsifier {
        Sparsifier::from_rounds(n, 0, (0..n).map(|c| (c, 0))).expect("identity is valid")
    }

    pub fn empty(n: usize) -> Sparsifier {
        Sparsifier::from_rounds(n, 0, []).expect("empty is valid")
    }

    pub fn t_size(&self) -> usize {
        self.entries.len()
    }

    pub fn weight_of(&self, coord: usize) -> Option<u64> {
        self.entries
            .binary_search_by_key(&coord, |e| e.coord)
            .ok()
            .map(|i| self.entries[i].weight)
    }

    /// Validate the power-of-two weight invariant (for hand-edited files).
    pub fn check(&self) -> Result<(), SparsifyError> {
        let mut prev: Option<usize> = None;
        for e in &self.entries {
            if e.coord >= self.n {
                return Err(SparsifyError::BadCode(format!(
                    "coordinate {} outside block length {}",
                    e.coord, self.n
                )));
            }
            if e.round > self.rounds || e.weight != 1u64 << e.round {
                return Err(SparsifyError::BadCode(format!(
                    "entry at {} has weight {} ≠ 2^{}",
                    e.coord, e.weight, e.round
                )));
            }
            if prev.is_some_and(|p| p >= e.coord) {
                return Err(SparsifyError::BadCode("entries not sorted by coordinate".into()));
            }
            prev = Some(e.coord);
        }
        Ok(())
    }
}

/// Weighted partial sum Σ_{i ∈ support ∩ T} α(i), exact in integers.
pub fn estimate(sp: &Sparsifier, support: &CoordSet) -> u128 {
    support
        .iter()
        .filter_map(|c| sp.weight_of(c))
        .map(|w| w as u128)
        .sum()
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerError {
    /// Dyadic layer ⌊log₂ weight⌋ of the true weight.
    pub layer: u32,
    pub count: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    /// Worst |ŵ − wt|/wt over nonzero-weight words (infinite when a
    /// zero-weight word gets a nonzero estimate).
    pub max_rel_err: f64,
    pub violations: Vec<usize>,
    pub histogram: Vec<LayerError>,
    pub epsilon: f64,
    pub checked: usize,
}

/// Evaluate ŵ exactly for every codeword and compare against the true
/// weights; the pass decision `|ŵ − wt| ≤ ε·wt` is made in exact rational
/// arithmetic, the reported errors are f64.
pub fn verify_sparsifier(code: &Code, sp: &Sparsifier, epsilon: f64) -> VerifyReport {
    let eps = BigRational::from_float(epsilon).unwrap_or_else(|| BigRational::from_integer(0.into()));
    let mut max_rel = 0.0f64;
    let mut violations = Vec::new();
    let mut layers: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    for (idx, word) in code.words.iter().enumerate() {
        let wt = word.len();
        let est = estimate(sp, word);
        if wt == 0 {
            if est != 0 {
                violations.push(idx);
                max_rel = f64::INFINITY;
            }
            continue;
        }
        let diff = (BigRational::from_integer(BigInt::from(est))
            - BigRational::from_integer(BigInt::from(wt)))
        .abs();
        let ok = diff <= eps.clone() * BigRational::from_integer(BigInt::from(wt));
        if !ok {
            violations.push(idx);
        }
        let rel = (est as f64 - wt as f64).abs() / wt as f64;
        max_rel = max_rel.max(rel);
        let layer = (wt as u64).ilog2();
        let slot = layers.entry(layer).or_insert((0, 0.0));
        slot.0 += 1;
        slot.1 = slot.1.max(rel);
    }
    VerifyReport {
        pass: violations.is_empty(),
        max_rel_err: max_rel,
        violations,
        histogram: layers
            .into_iter()
            .map(|(layer, (count, max_rel_err))| LayerError { layer, count, max_rel_err })
            .collect(),
        epsilon,
        checked: code.len(),
    }
}

// ---------------------------------------------------------------------------
// Builder

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparsifierConfig {
    /// Accuracy target, accepted in (0, 1/4].
    pub epsilon: f64,
    /// The analysis' large constant C; sizes are reported, never asserted.
    pub c_big: f64,
    /// Smoothness constant B forwarded to layer puncturing.
    pub b: f64,
    /// Exponent fraction θ forwarded to layer puncturing.
    pub theta: f64,
    pub max_build_retries: u32,
    pub seed: u64,
}

impl SparsifierConfig {
    pub fn new(epsilon: f64) -> Self {
        SparsifierConfig {
            epsilon,
            c_big: 4.0,
            b: 1.0,
            theta: 0.01,
            max_build_retries: 10,
            seed: crate::puncture::DEFAULT_SEED,
        }
    }

    fn validate(&self) -> Result<(), SparsifyError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.25) {
            return Err(SparsifyError::InvalidConfig(format!(
                "epsilon={} outside (0, 1/4]",
                self.epsilon
            )));
        }
        if !(self.c_big > 0.0) || !(self.b > 0.0) || !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(SparsifyError::InvalidConfig(
                "constants must satisfy C > 0, B > 0, θ ∈ (0,1)".into(),
            ));
        }
        if self.max_build_retries < 1 {
            return Err(SparsifyError::InvalidConfig("max_build_retries must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Round-schedule parameters derived from (n, k, ε, C).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivedParams {
    /// R = ⌈log₂ n⌉.
    pub rounds: u32,
    /// Transition threshold between punctured and coin-flip-only weights.
    pub w_star: usize,
    /// Per-round medium-weight error target.
    pub eta0: f64,
    /// Residual weight below which supports are captured exactly.
    pub w_min: usize,
}

pub fn derive_params(n: usize, k: usize, cfg: &SparsifierConfig) -> DerivedParams {
    let rounds = if n <= 1 { 0 } else { (n as f64).log2().ceil() as u32 };
    let log_r = (rounds.max(1) as f64).log2();
    let log_ke = (k as f64 / cfg.epsilon).log2();
    let eps2 = cfg.epsilon * cfg.epsilon;
    let w_star = (cfg.c_big * (k as f64 * log_ke + log_r) / eps2).ceil().max(1.0) as usize;
    let eta0 = cfg.epsilon / (100.0 * (2.0 * w_star as f64).log2());
    let w_min = ((cfg.c_big / (eta0 * eta0)) * (log_ke + log_r)).ceil().max(1.0) as usize;
    DerivedParams { rounds, w_star, eta0, w_min }
}

/// Per-round error target for residual weights above the transition
/// threshold: min{1/4, √(C(k·log₂(w/k) + log₂R)/w)}.
pub fn eta_large(w: usize, k: usize, c_big: f64, rounds: u32) -> f64 {
    let inner = c_big
        * (k as f64 * (w as f64 / k as f64).log2().max(0.0) + (rounds.max(1) as f64).log2())
        / w as f64;
    inner.max(0.0).sqrt().min(0.25)
}

/// Dyadic medium scales w = 2^j·w_min within [w_min, w_star]; empty whenever
/// the tiny cutoff already exceeds the transition threshold.
pub fn medium_scales(w_min: usize, w_star: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut w = w_min.max(1);
    while w <= w_star {
        out.push(w);
        match w.checked_mul(2) {
            Some(next) => w = next,
            None => break,
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerLog {
    pub w: usize,
    /// Distinct residual supports in the (w, 2w] layer.
    pub members: usize,
    pub picked: usize,
    pub residual_traces: usize,
    pub success: bool,
    /// Chernoff mass predicted for this layer's surviving traces.
    pub predicted_failure: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: u32,
    pub universe_size: usize,
    pub tiny_captured: usize,
    pub layers: Vec<LayerLog>,
    /// |I_r| in total.
    pub picked_total: usize,
    /// |U_{r+1}| after the coin flips.
    pub kept_after_sampling: usize,
    /// |S ∩ U_r| per codeword, aligned with the code.
    pub residual_weights: Vec<usize>,
    /// |S ∩ I_r| per codeword.
    pub captured_weights: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildLog {
    pub k: usize,
    pub k_from_nrd: bool,
    pub params: DerivedParams,
    pub config: SparsifierConfig,
    pub attempts: u32,
    pub attempt_seed: u64,
    pub rounds: Vec<RoundLog>,
    pub final_residual_size: usize,
    /// |S ∩ U_R| per codeword.
    pub final_residual_weights: Vec<usize>,
    pub t_size: usize,
    /// |T| divided by k·log₂n/ε² — the fitted leading constant, reported
    /// only (the analysis does not pin it down).
    pub t_fitted_constant: f64,
    pub verify: VerifyReport,
}

/// Build an ε-sparsifier. `k_override` supplies the moonflower-freeness
/// parameter; otherwise it is computed as NRD+1 within a fixed search
/// budget. Each attempt is verified (`verify_sparsifier` plus the residual
/// cap |U_R| ≤ 50) and retried with a derived seed on failure; exhausting
/// retries returns the best failed attempt inside the error.
pub fn build_sparsifier(
    code: &Code,
    cfg: &SparsifierConfig,
    k_override: Option<usize>,
) -> Result<(Sparsifier, BuildLog), SparsifyError> {
    cfg.validate()?;
    if code.is_empty() {
        return Err(SparsifyError::BadCode("cannot sparsify an empty code".into()));
    }
    let n = code.n;

    let (k, k_from_nrd) = match k_override {
        Some(k) => {
            if k < 2 {
                return Err(SparsifyError::InvalidConfig(format!(
                    "k must be ≥ 2, got {k}"
                )));
            }
            (k, false)
        }
        None => (nrd(code, 1 << 22)?.value + 1, true),
    };

    // A code of all-zero words needs no coordinates at all.
    if code.max_weight() == 0 {
        let sp = Sparsifier::empty(n);
        let verify = verify_sparsifier(code, &sp, cfg.epsilon);
        let log = BuildLog {
            k,
            k_from_nrd,
            params: derive_params(n, k.max(2), cfg),
            config: cfg.clone(),
            attempts: 0,
            attempt_seed: cfg.seed,
            rounds: Vec::new(),
            final_residual_size: 0,
            final_residual_weights: vec![0; code.len()],
            t_size: 0,
            t_fitted_constant: 0.0,
            verify,
        };
        return Ok((sp, log));
    }

    let k = k.max(2);
    let params = derive_params(n, k, cfg);
    let scales = medium_scales(params.w_min, params.w_star);

    let mut best: Option<(f64, Sparsifier, BuildLog)> = None;
    for attempt in 0..cfg.max_build_retries {
        let attempt_seed = cfg.seed.wrapping_add(attempt as u64);
        let (sp, mut log) = build_attempt(code, cfg, k, &params, &scales, attempt_seed)?;
        log.k_from_nrd = k_from_nrd;
        log.attempts = attempt + 1;
        let ok = log.verify.pass && log.final_residual_size <= 50;
        let err = log.verify.max_rel_err;
        if ok {
            return Ok((sp, log));
        }
        if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
            best = Some((err, sp, log));
        }
    }
    let (best_err, sp, log) = best.expect("at least one attempt ran");
    Err(SparsifyError::RetriesExhausted {
        attempts: cfg.max_build_retries,
        best_err,
        best: Box::new((sp, log)),
    })
}

fn build_attempt(
    code: &Code,
    cfg: &SparsifierConfig,
    k: usize,
    params: &DerivedParams,
    scales: &[usize],
    seed: u64,
) -> Result<(Sparsifier, BuildLog), SparsifyError> {
    let n = code.n;
    let mut coin_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc01f_f11b_5eed_0001);
    let mut universe = CoordSet::from_indices(n, 0..n);
    let mut picks: BTreeMap<usize, u32> = BTreeMap::new();
    let mut rounds_log = Vec::with_capacity(params.rounds as usize);

    for r in 0..params.rounds {
        let residuals: Vec<CoordSet> =
            code.words.iter().map(|w| w.intersect(&universe)).collect();
        let residual_weights: Vec<usize> = residuals.iter().map(|s| s.len()).collect();

        let mut picked = CoordSet::new(n);
        let mut tiny_captured = 0usize;
        for s in &residuals {
            if !s.is_empty() && s.len() <= params.w_min {
                picked.union_with(s);
            }
        }
        tiny_captured += picked.len();

        let mut layer_logs = Vec::with_capacity(scales.len());
        for (j, &w) in scales.iter().enumerate() {
            let layer_fam = SetFamily::from_sets(
                n,
                residuals
                    .iter()
                    .filter(|s| s.len() > w && s.len() <= 2 * w)
                    .cloned(),
            );
            if layer_fam.is_empty() {
                layer_logs.push(LayerLog {
                    w,
                    members: 0,
                    picked: 0,
                    residual_traces: 0,
                    success: true,
                    predicted_failure: 0.0,
                });
                continue;
            }
            let layer_seed = seed
                ^ (r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
                ^ (j as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            let res = weight_scale_puncture(
                &layer_fam,
                k,
                w,
                params.eta0,
                cfg.theta,
                cfg.b,
                10,
                layer_seed,
            )?;
            picked.union_with(&CoordSet::from_indices(n, res.i_set.iter().copied()));
            layer_logs.push(LayerLog {
                w,
                members: layer_fam.len(),
                picked: res.i_set.len(),
                residual_traces: res.residual_traces,
                success: res.success,
                predicted_failure: (res.residual_traces as f64
                    * chernoff_bound(2.0 * w as f64, params.eta0 * w as f64))
                .min(1.0),
            });
        }

        let captured_weights: Vec<usize> =
            code.words.iter().map(|w| w.intersection_len(&picked)).collect();
        for c in picked.iter() {
            picks.insert(c, r);
        }

        let remaining = universe.difference(&picked);
        let mut kept = CoordSet::new(n);
        for c in remaining.iter() {
            if coin_rng.gen_bool(0.5) {
                kept.insert(c);
            }
        }
        rounds_log.push(RoundLog {
            round: r,
            universe_size: universe.len(),
            tiny_captured,
            layers: layer_logs,
            picked_total: picked.len(),
            kept_after_sampling: kept.len(),
            residual_weights,
            captured_weights,
        });
        universe = kept;
    }

    for c in universe.iter() {
        picks.insert(c, params.rounds);
    }
    let final_residual_weights: Vec<usize> = code
        .words
        .iter()
        .map(|w| w.intersection_len(&universe))
        .collect();

    let mut sp = Sparsifier::from_rounds(n, params.rounds, picks)?;
    sp.seed = seed;
    sp.config = Some(cfg.clone());
    let verify = verify_sparsifier(code, &sp, cfg.epsilon);
    let denom = k as f64 * (n.max(2) as f64).log2() / (cfg.epsilon * cfg.epsilon);
    let log = BuildLog {
        k,
        k_from_nrd: false,
        params: params.clone(),
        config: cfg.clone(),
        attempts: 0,
        attempt_seed: seed,
        rounds: rounds_log,
        final_residual_size: universe.len(),
        final_residual_weights,
        t_size: sp.t_size(),
        t_fitted_constant: sp.t_size() as f64 / denom,
        verify,
    };
    Ok((sp, log))
}

// ---------------------------------------------------------------------------
// Error-budget audit

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodewordAudit {
    pub index: usize,
    /// Σ_r ε_r accumulated over rounds where the word still had residual
    /// weight.
    pub eps_sum: f64,
    /// Every per-round estimate move stayed within its ε_r band.
    pub steps_ok: bool,
    /// eps_sum ≤ ε/25.
    pub budget_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub ok: bool,
    pub per_codeword: Vec<CodewordAudit>,
    pub worst_eps_sum: f64,
}

/// Reconstruct the per-round weight estimates N̂_r from a build log and check
/// the accuracy recursion: |N̂_{r+1} − N̂_r| ≤ ε_r·N̂_r with ε_r = 0 for tiny
/// residuals, η₀ for medium ones, and η(w) above the transition threshold;
/// and Σ_r ε_r ≤ ε/25 per codeword.
pub fn audit_error_budget(log: &BuildLog) -> AuditReport {
    let words = log.final_residual_weights.len();
    let r_total = log.rounds.len();
    let mut per = Vec::with_capacity(words);
    let mut all_ok = true;
    let mut worst = 0.0f64;
    for idx in 0..words {
        let mut eps_sum = 0.0f64;
        let mut steps_ok = true;
        // N̂_r = Σ_{i<r} 2^i·cap_i + 2^r·res_r, via running capture prefix.
        let mut captured_prefix = 0.0f64;
        for r in 0..r_total {
            let res_r = log.rounds[r].residual_weights[idx] as f64;
            let cap_r = log.rounds[r].captured_weights[idx] as f64;
            let res_next = if r + 1 < r_total {
                log.rounds[r + 1].residual_weights[idx] as f64
            } else {
                log.final_residual_weights[idx] as f64
            };
            let n_r = captured_prefix + (r as f64).exp2() * res_r;
            let n_next = captured_prefix + (r as f64).exp2() * (cap_r + 2.0 * res_next);
            let w_r = log.rounds[r].residual_weights[idx];
            let eps_r = if w_r <= log.params.w_min {
                0.0
            } else if w_r <= log.params.w_star {
                log.params.eta0
            } else {
                // Dyadic scale with w_r ∈ (w, 2w].
                let scale = 1usize << ((w_r as u64).ilog2().saturating_sub(
                    u32::from((w_r as u64).is_power_of_two()),
                ));
                eta_large(scale.max(1), log.k, log.config.c_big, log.params.rounds)
            };
            if w_r > 0 {
                eps_sum += eps_r;
            }
            if (n_next - n_r).abs() > eps_r * n_r + 1e-9 {
                steps_ok = false;
            }
            captured_prefix += (r as f64).exp2() * cap_r;
        }
        let budget_ok = eps_sum <= log.config.epsilon / 25.0 + 1e-12;
        all_ok &= steps_ok && budget_ok;
        worst = worst.max(eps_sum);
        per.push(CodewordAudit { index: idx, eps_sum, steps_ok, budget_ok });
    }
    AuditReport { ok: all_ok, per_codeword: per, worst_eps_sum: worst }
}

// ---------------------------------------------------------------------------
// Chain-code lower bound

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainCodeSpec {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    /// Block width n/k.
    pub m: usize,
    /// Strictly growing chain lengths with a_{j+1} > (1+ε)·a_j.
    pub a: Vec<usize>,
    pub s: usize,
}

impl ChainCodeSpec {
    /// The j-th set of block i (both 1-based): [(i−1)m, (i−1)m + a_j).
    pub fn block_set(&self, i: usize, j: usize) -> CoordSet {
        assert!(i >= 1 && i <= self.k && j >= 1 && j <= self.s);
        let start = (i - 1) * self.m;
        CoordSet::from_indices(self.n, start..start + self.a[j - 1])
    }
}

/// Generate the nested-chain lower-bound code: k disjoint blocks of width
/// m = n/k, each carrying the prefixes of lengths a₁ < a₂ < … < a_s, where
/// the lengths grow greedily by a factor strictly above 1+ε. Intervals are
/// half-open so |S_{i,j}| = a_j exactly.
pub fn gen_chain_code(
    n: usize,
    k: usize,
    epsilon: f64,
) -> Result<(Code, ChainCodeSpec), SparsifyError> {
    if k == 0 || n == 0 || n % k != 0 {
        return Err(SparsifyError::BadCode(format!(
            "block count {k} must divide block length {n}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SparsifyError::InvalidConfig(format!(
            "chain gap epsilon={epsilon} must be positive and finite"
        )));
    }
    let m = n / k;
    let growth = BigRational::from_float(1.0 + epsilon)
        .ok_or_else(|| SparsifyError::InvalidConfig("epsilon must be a finite float".into()))?;
    let mut a = Vec::new();
    let mut cur = 1usize;
    while cur < m {
        a.push(cur);
        let scaled = growth.clone() * BigRational::from_usize(cur).unwrap();
        cur = scaled.floor().to_integer().to_usize().expect("chain length fits usize") + 1;
    }
    if a.is_empty() {
        return Err(SparsifyError::BadCode(format!(
            "n={n} too small: block width {m} leaves no valid chain length"
        )));
    }
    let s = a.len();
    let spec = ChainCodeSpec { n, k, epsilon, m, a, s };
    let mut sets = Vec::with_capacity(k * s);
    for i in 1..=k {
        for j in 1..=s {
            sets.push(spec.block_set(i, j));
        }
    }
    Ok((Code::from_sets(n, sets), spec))
}

/// Witness that a sparsifier cannot distinguish two chain weights: the kept
/// coordinates trace identically on two nested chain sets whose true weights
/// differ by a factor above 1+ε, so the single shared estimate cannot track
/// both. `lower_index` 0 compares against the empty baseline (the traced
/// set meets T nowhere, forcing estimate 0 for a positive weight).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainWitness {
    pub block: usize,
    pub lower_index: usize,
    pub common_trace: Vec<usize>,
    pub weight_low: usize,
    pub weight_high: usize,
    pub estimate_low: u64,
    pub estimate_high: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ChainVerdict {
    /// No trace collision found; |T| must be at least k·s.
    Consistent { t_size: usize },
    Invalid { witness: ChainWitness },
}

/// Search every block for two consecutive chain sets with identical traces
/// under the sparsifier's key set (real pairs first, then the empty
/// baseline) and report the collision with both estimates evaluated.
pub fn certify_lower_bound(
    spec: &ChainCodeSpec,
    sp: &Sparsifier,
    _epsilon: f64,
) -> ChainVerdict {
    let t_set = CoordSet::from_indices(
        spec.n,
        sp.entries.iter().map(|e| e.coord).filter(|&c| c < spec.n),
    );
    let witness = |i: usize, j: usize| {
        let low = if j == 0 { CoordSet::new(spec.n) } else { spec.block_set(i, j) };
        let high = spec.block_set(i, j + 1);
        let trace = high.intersect(&t_set);
        ChainWitness {
            block: i,
            lower_index: j,
            common_trace: trace.to_vec(),
            weight_low: if j == 0 { 0 } else { spec.a[j - 1] },
            weight_high: spec.a[j],
            estimate_low: u64::try_from(estimate(sp, &low)).unwrap_or(u64::MAX),
            estimate_high: u64::try_from(estimate(sp, &high)).unwrap_or(u64::MAX),
        }
    };
    for i in 1..=spec.k {
        for j in 1..spec.s {
            if spec.block_set(i, j).intersect(&t_set) == spec.block_set(i, j + 1).intersect(&t_set)
            {
                return ChainVerdict::Invalid { witness: witness(i, j) };
            }
        }
    }
    for i in 1..=spec.k {
        if spec.block_set(i, 1).is_disjoint(&t_set) {
            return ChainVerdict::Invalid { witness: witness(i, 0) };
        }
    }
    ChainVerdict::Consistent { t_size: sp.t_size() }
}

// ---------------------------------------------------------------------------
// Tail bound

/// Two-sided binomial tail bound 2·exp(−Δ²/(3t)) for Pr[|2X − t| > Δ] with
/// X ~ Bin(t, 1/2). Caller contract: t ≥ 1, delta > 0.
pub fn chernoff_bound(t: f64, delta: f64) -> f64 {
    2.0 * (-(delta * delta) / (3.0 * t)).exp()
}
