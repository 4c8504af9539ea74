//! Randomized universe puncturing.
//!
//! The shared engine is a potential process over the trace family: maintain
//! the distinct nonempty traces `{S \ I}` of the surviving members, and per
//! step peel the exceptional traces at cover level p, sample one coordinate
//! from the certifying cover distribution Q, add it to I, and reproject. The
//! potential `Φ_j = Σ_A 2^{|A∩J_j|}` drops by an expected factor `1 − p/2`
//! per step, which yields three front ends:
//!
//! * [`one_step_reduce`]: run a fixed step budget t and report how many
//!   members ended fully inside I.
//! * [`trace_puncture_to_empty`]: run until the trace family dies and bound
//!   the residual trace count by t·M.
//! * [`weight_scale_puncture`]: the dyadic-layer variant used by the
//!   sparsifier, with the cover level derived from (η, θ, w).
//!
//! [`iterated_puncture`] chains one-step reductions with per-round parameter
//! schedules for the two regimes (w ≤ k and w ≥ k) and reports which stopping
//! rule fired. Success of any single run is probabilistic; every front end
//! retries over derived seeds and returns the best run, flagged rather than
//! silently accepted.
//!
//! Potentials are tracked in f64: a trace of size s contributes 2^s, which
//! saturates to infinity past s ≈ 1024. All intended workloads stay far
//! below that.

use crate::bits::CoordSet;
use crate::cover::{choose_p, peel_exceptional, CoverError};
use crate::setfam::SetFamily;
use num::{BigRational, FromPrimitive};
use rand::distributions::{Distribution as _, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Fixed default seed (ASCII "moon"); all CLI entry points use it unless
/// overridden, so default runs are reproducible.
pub const DEFAULT_SEED: u64 = 0x6d6f_6f6e;

#[derive(Debug, Error)]
pub enum PunctureError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// Parameters for the reduction drivers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionConfig {
    /// Cover level p ∈ (0,1).
    pub p: f64,
    /// Failure budget δ ∈ (0,1/2).
    pub delta: f64,
    /// Smoothness constant B ≥ 1 in the entropy budget.
    pub b: f64,
    /// Exponent fraction θ ∈ (0,1) for weight-scale puncturing.
    pub theta: f64,
    pub max_retries: u32,
    pub seed: u64,
}

impl ReductionConfig {
    pub fn new(p: f64, delta: f64) -> Self {
        ReductionConfig {
            p,
            delta,
            b: 1.0,
            theta: 0.01,
            max_retries: 50,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.max_retries = retries;
        self
    }

    fn validate(&self) -> Result<(), PunctureError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(PunctureError::InvalidConfig(format!("p={} not in (0,1)", self.p)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(PunctureError::InvalidConfig(format!(
                "delta={} not in (0,1/2)",
                self.delta
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(PunctureError::InvalidConfig(format!(
                "theta={} not in (0,1)",
                self.theta
            )));
        }
        if self.max_retries < 1 {
            return Err(PunctureError::InvalidConfig("max_retries must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Record of one puncturing run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PunctureTrace {
    /// Chosen coordinates, ascending.
    pub i_set: Vec<usize>,
    /// Members of the input family fully inside I at the end.
    pub covered_count: usize,
    /// Input members removed because their trace was peeled as exceptional.
    pub removed_count: usize,
    /// Distinct trace sets peeled across all steps.
    pub removed_trace_count: usize,
    /// Φ_j before each step, plus the final value. Pathwise nonincreasing.
    pub potential_history: Vec<f64>,
    /// Live distinct-trace counts aligned with `potential_history`.
    pub trace_counts: Vec<usize>,
    /// Sampling steps executed (= |I|).
    pub steps: usize,
    pub seed: u64,
    /// Step budget t computed at entry.
    pub t_budget: usize,
    /// Exception budget M supplied by the caller (theoretical 2^h).
    pub m_budget: f64,
    /// Largest exceptional-trace batch actually peeled in one step.
    pub m_measured: usize,
    /// Whether covered_count ≥ (1−δ)|F| − t·max(m_measured, 1). The measured
    /// batch size is what the residual accounting actually consumed, so the
    /// flag uses it rather than the theoretical budget; both are recorded.
    pub attained_bound: bool,
    pub family_size: usize,
    pub p: f64,
    pub delta: f64,
}

impl PunctureTrace {
    /// Copy with the potential history clamped to 1000 entries for output.
    pub fn truncated_for_output(&self) -> PunctureTrace {
        let mut out = self.clone();
        out.potential_history.truncate(1000);
        out.trace_counts.truncate(1000);
        out
    }
}

/// Outcome of one raw potential-process run.
struct RawRun {
    i_set: CoordSet,
    covered_count: usize,
    removed_count: usize,
    removed_trace_count: usize,
    potential_history: Vec<f64>,
    trace_counts: Vec<usize>,
    steps: usize,
    m_measured: usize,
}

/// Run the potential process for at most `t` steps, stopping early once the
/// trace family empties.
fn run_process(fam: &SetFamily, p: f64, t: usize, seed: u64) -> Result<RawRun, PunctureError> {
    let n = fam.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut i_set = CoordSet::new(n);
    let mut alive: Vec<usize> = (0..fam.len()).collect();
    let mut removed_count = 0usize;
    let mut removed_trace_count = 0usize;
    let mut m_measured = 0usize;
    let mut history = Vec::new();
    let mut trace_counts = Vec::new();
    let mut steps = 0usize;

    loop {
        // Current distinct nonempty traces; members with empty trace are
        // covered and leave the working set.
        let mut groups: HashMap<CoordSet, Vec<usize>> = HashMap::new();
        let mut still = Vec::with_capacity(alive.len());
        for &idx in &alive {
            let trace = fam.members()[idx].difference(&i_set);
            if trace.is_empty() {
                continue;
            }
            groups.entry(trace).or_default().push(idx);
            still.push(idx);
        }
        alive = still;

        let phi: f64 = groups.keys().map(|tr| (tr.len() as f64).exp2()).sum();
        history.push(phi);
        trace_counts.push(groups.len());
        if groups.is_empty() || steps >= t {
            break;
        }

        let trace_fam = SetFamily::from_sets(n, groups.keys().cloned());
        let peel = peel_exceptional::<f64>(&trace_fam, p)?;
        if !peel.exceptional.is_empty() {
            removed_trace_count += peel.exceptional.len();
            m_measured = m_measured.max(peel.exceptional.len());
            let mut drop = std::collections::HashSet::new();
            for &ti in &peel.exceptional {
                let trace = &trace_fam.members()[ti];
                for &orig in &groups[trace] {
                    drop.insert(orig);
                }
            }
            removed_count += drop.len();
            alive.retain(|idx| !drop.contains(idx));
        }
        if alive.is_empty() {
            history.push(0.0);
            trace_counts.push(0);
            break;
        }

        let weights: Vec<f64> = peel.cover.weights.iter().map(|(_, w)| *w).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| PunctureError::InvalidConfig(format!("cover sampling: {e}")))?;
        let coord = peel.cover.weights[dist.sample(&mut rng)].0;
        debug_assert!(!i_set.contains(coord), "cover mass stays inside J");
        i_set.insert(coord);
        steps += 1;
    }

    let covered_count = fam
        .members()
        .iter()
        .filter(|m| m.is_subset(&i_set))
        .count();
    Ok(RawRun {
        i_set,
        covered_count,
        removed_count,
        removed_trace_count,
        potential_history: history,
        trace_counts,
        steps,
        m_measured,
    })
}

fn make_trace(fam: &SetFamily, run: RawRun, cfg: &ReductionConfig, t: usize, m_budget: f64, seed: u64) -> PunctureTrace {
    let m_eff = run.m_measured.max(1) as f64;
    let target = (1.0 - cfg.delta) * fam.len() as f64 - t as f64 * m_eff;
    PunctureTrace {
        i_set: run.i_set.to_vec(),
        covered_count: run.covered_count,
        removed_count: run.removed_count,
        removed_trace_count: run.removed_trace_count,
        potential_history: run.potential_history,
        trace_counts: run.trace_counts,
        steps: run.steps,
        seed,
        t_budget: t,
        m_budget,
        m_measured: run.m_measured,
        attained_bound: run.covered_count as f64 >= target,
        family_size: fam.len(),
        p: cfg.p,
        delta: cfg.delta,
    }
}

/// Step budget `t = min{n, ⌈(2/p)(w·ln2 + ln(1/δ))⌉}`.
pub fn step_budget(n: usize, w: usize, p: f64, delta: f64) -> usize {
    let raw = (2.0 / p) * (w as f64 * std::f64::consts::LN_2 + (1.0 / delta).ln());
    n.min(raw.ceil().max(0.0) as usize)
}

/// Run the one-step universe reduction and report the best trace across
/// retries.
///
/// `m_budget` is the exception budget M the caller believes holds (usually a
/// 2^h entropy bound); the measured per-step maximum is recorded alongside
/// it. Retries use seeds `cfg.seed + r`; the best trace is the first one
/// attaining the coverage bound, else the one with the highest covered count.
pub fn one_step_reduce(
    fam: &SetFamily,
    cfg: &ReductionConfig,
    m_budget: f64,
) -> Result<PunctureTrace, PunctureError> {
    cfg.validate()?;
    let w = fam.max_set_size();
    let t = step_budget(fam.n(), w, cfg.p, cfg.delta);
    let mut best: Option<PunctureTrace> = None;
    for r in 0..cfg.max_retries {
        let seed = cfg.seed.wrapping_add(r as u64);
        let run = run_process(fam, cfg.p, t, seed)?;
        let trace = make_trace(fam, run, cfg, t, m_budget, seed);
        let better = match &best {
            None => true,
            Some(b) => {
                (trace.attained_bound, trace.covered_count) > (b.attained_bound, b.covered_count)
            }
        };
        let done = trace.attained_bound;
        if better {
            best = Some(trace);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one retry ran"))
}

/// Result of running the process until the trace family empties.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceToEmpty {
    pub trace: PunctureTrace,
    /// Whether the trace family emptied within the step budget.
    pub emptied: bool,
    /// Distinct nonempty traces of the whole input family on the complement
    /// of I.
    pub residual_traces: usize,
    /// Whether residual_traces ≤ t·M for the supplied budget M.
    pub certified: bool,
}

/// Run the potential process until the trace family becomes empty (or the
/// budget `t = min{n, ⌈(2/p)·ln(|F|·2^w)⌉}` runs out), certifying that the
/// input family has at most t·M distinct nonempty traces outside I.
pub fn trace_puncture_to_empty(
    fam: &SetFamily,
    p: f64,
    m_budget: f64,
    max_retries: u32,
    seed: u64,
) -> Result<TraceToEmpty, PunctureError> {
    let mut cfg = ReductionConfig::new(p, 0.25);
    cfg.max_retries = max_retries;
    cfg.seed = seed;
    cfg.validate()?;
    let w = fam.max_set_size();
    let t = if fam.is_empty() {
        0
    } else {
        let raw = (2.0 / p) * ((fam.len() as f64).ln() + w as f64 * std::f64::consts::LN_2);
        fam.n().min(raw.ceil().max(1.0) as usize)
    };

    let mut best: Option<TraceToEmpty> = None;
    for r in 0..max_retries {
        let run_seed = seed.wrapping_add(r as u64);
        let run = run_process(fam, p, t, run_seed)?;
        let i_set = run.i_set.clone();
        let trace = make_trace(fam, run, &cfg, t, m_budget, run_seed);
        let residual = residual_trace_count(fam, &i_set);
        let emptied = trace.trace_counts.last() == Some(&0);
        let out = TraceToEmpty {
            certified: (residual as f64) <= t as f64 * m_budget,
            emptied,
            residual_traces: residual,
            trace,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                (out.emptied, std::cmp::Reverse(out.residual_traces))
                    > (b.emptied, std::cmp::Reverse(b.residual_traces))
            }
        };
        let done = out.emptied;
        if better {
            best = Some(out);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one retry ran"))
}

/// Distinct nonempty traces of the whole family outside `i_set`.
pub fn residual_trace_count(fam: &SetFamily, i_set: &CoordSet) -> usize {
    let mut seen = std::collections::HashSet::new();
    for m in fam.members() {
        let tr = m.difference(i_set);
        if !tr.is_empty() {
            seen.insert(tr);
        }
    }
    seen.len()
}

/// Result of weight-scale puncturing a dyadic layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightScaleResult {
    pub i_set: Vec<usize>,
    pub residual_traces: usize,
    /// Residual target `max(|I|,1)·exp(θη²w)`.
    pub residual_bound: f64,
    pub success: bool,
    pub a_used: f64,
    pub p_used: f64,
    pub t_budget: usize,
    pub steps: usize,
    /// Reported size shape `(k·log₂w/(θη²))·(1+log₂|F|/w)·max(1, log of the
    /// same)`; informational only, the constants are not pinned down.
    pub size_shape: f64,
    pub trace: PunctureTrace,
}

/// Puncture a layer whose member sizes lie in (w, 2w], choosing the cover
/// level from (η, θ, w) so the residual trace count is at most
/// `|I|·exp(θη²w)`.
///
/// When the process empties the layer without sampling (everything peeled in
/// the first step), the certificate uses |I| padded to 1: that peel consumed
/// one step of the t·M budget.
pub fn weight_scale_puncture(
    fam: &SetFamily,
    k: usize,
    w: usize,
    eta: f64,
    theta: f64,
    b: f64,
    max_retries: u32,
    seed: u64,
) -> Result<WeightScaleResult, PunctureError> {
    if !(eta > 0.0 && eta < 0.25) {
        return Err(PunctureError::InvalidConfig(format!("eta={eta} not in (0,1/4)")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(PunctureError::InvalidConfig(format!("theta={theta} not in (0,1)")));
    }
    if k < 2 || w < 1 {
        return Err(PunctureError::InvalidConfig(format!("need k ≥ 2 and w ≥ 1, got k={k}, w={w}")));
    }
    for m in fam.members() {
        if m.len() <= w || m.len() > 2 * w {
            return Err(PunctureError::InvalidConfig(format!(
                "member size {} outside layer range ({w}, {}]",
                m.len(),
                2 * w
            )));
        }
    }

    let exponent = theta * eta * eta * w as f64;
    if fam.is_empty() {
        let cfg = ReductionConfig::new(0.5, 0.25).with_seed(seed);
        let run = run_process(fam, 0.5, 0, seed)?;
        let trace = make_trace(fam, run, &cfg, 0, exponent.exp(), seed);
        return Ok(WeightScaleResult {
            i_set: Vec::new(),
            residual_traces: 0,
            residual_bound: exponent.exp(),
            success: true,
            a_used: 0.25,
            p_used: 0.5,
            t_budget: 0,
            steps: 0,
            size_shape: 0.0,
            trace,
        });
    }

    let n0 = fam.support_size();
    let log_nk = (n0 as f64 / k as f64).log2();
    let a = if log_nk > 0.0 {
        (exponent / (b * k as f64 * log_nk)).min(0.25)
    } else {
        0.25
    };
    let p = choose_p(a)?;
    // Step budget via the trace-puncturing formula with the layer's true
    // maximum size 2w.
    let raw_t = (2.0 / p) * ((fam.len() as f64).ln() + 2.0 * w as f64 * std::f64::consts::LN_2);
    let t = fam.n().min(raw_t.ceil().max(1.0) as usize);
    let m_budget = exponent.exp2().min(f64::MAX);

    let cfg = ReductionConfig::new(p, 0.25).with_seed(seed).with_retries(max_retries);
    let kl = k as f64 * (w.max(2) as f64).log2() / (theta * eta * eta);
    let size_shape = kl * (1.0 + (fam.len() as f64).log2() / w as f64) * (kl / w as f64).log2().max(1.0);

    let mut best: Option<WeightScaleResult> = None;
    for r in 0..max_retries {
        let run_seed = seed.wrapping_add(r as u64);
        let run = run_process(fam, p, t, run_seed)?;
        let i_set = run.i_set.clone();
        let steps = run.steps;
        let trace = make_trace(fam, run, &cfg, t, m_budget, run_seed);
        let residual = residual_trace_count(fam, &i_set);
        let bound = (i_set.len().max(1) as f64) * exponent.exp();
        let out = WeightScaleResult {
            i_set: i_set.to_vec(),
            residual_traces: residual,
            residual_bound: bound,
            success: (residual as f64) <= bound,
            a_used: a,
            p_used: p,
            t_budget: t,
            steps,
            size_shape,
            trace,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                (out.success, std::cmp::Reverse(out.residual_traces))
                    > (b.success, std::cmp::Reverse(b.residual_traces))
            }
        };
        let done = out.success;
        if better {
            best = Some(out);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one retry ran"))
}

/// Which rule ended an iterated-puncturing run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// w = 1 needs no process: k distinct singletons would be a k-moonflower.
    TrivialSingleton,
    /// t·M exceeded δ|F|: the size bound holds outright.
    SizeBound,
    /// Universe shrank to O(k); the terminal state of the w ≤ k analysis.
    UniverseSmall,
    /// Survival dropped below the configured floor (w ≤ k regime).
    SurvivalFloor,
    /// Entropy parameter L_r reached the stall threshold (w ≥ k regime).
    Stalled,
    /// Round cap reached.
    RoundCap,
    /// No members survived.
    Emptied,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterRound {
    pub round: usize,
    pub universe_size: usize,
    pub family_size: usize,
    pub a: f64,
    pub p: f64,
    pub t: usize,
    pub m_theory: f64,
    pub covered: usize,
    pub next_universe_size: usize,
}

/// Constants for [`iterated_puncture`]; every value mirrors an abstract
/// constant the analysis leaves free.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterConfig {
    pub b: f64,
    /// Denominator constant in the w ≥ k level choice.
    pub c_prime: f64,
    /// Stall-threshold multiplier in the w ≥ k regime.
    pub c1: f64,
    /// Constant C used only in the reported extremal bound.
    pub bound_c: f64,
    pub survival_floor: f64,
    pub step_retries: u32,
    pub seed: u64,
}

impl Default for IterConfig {
    fn default() -> Self {
        IterConfig {
            b: 1.0,
            c_prime: 64.0,
            c1: 1.0,
            bound_c: 4.0,
            survival_floor: 0.3,
            step_retries: 10,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterReport {
    /// True when the driver ran the w ≤ k schedule.
    pub small_regime: bool,
    pub rounds: Vec<IterRound>,
    pub stop: StopReason,
    pub final_universe: Vec<usize>,
    pub final_family_size: usize,
    pub survival_fraction: f64,
    /// `(C·k/w)^w` or `(C·w/k)^k` at the configured constant, as f64.
    pub implied_bound: f64,
    pub bound_constant: f64,
    /// Whether |F| ≤ implied_bound; informational (C is configuration).
    pub bound_holds: bool,
}

/// Iterated universe reduction for a k-moonflower-free family of w-sets.
///
/// Regime w ≤ k: per round, level from `a = w·log₂(4k/w)/(32·B·k·log₂(n/k))`
/// capped at 1/4, δ = 2^{−w−4}, theoretical M = (4k/w)^{w/32}; stops are
/// checked in the order size bound, then small universe (n ≤ 2k, where the
/// level formula degenerates), then survival floor; round cap 2^w.
///
/// Regime w ≥ k: level from `a = min{1/4, log₂(4w/k)/(C'·log₂(n/k))}`,
/// δ = 1/4, theoretical M = (4w/k)^{k/64}; stops on the size bound or when
/// `L = log₂(n/k)` falls to `max(C₁·log₂(w/k), 1)`; round cap
/// `1 + ⌈log₂(L₀/threshold)⌉`.
pub fn iterated_puncture(
    fam: &SetFamily,
    k: usize,
    cfg: &IterConfig,
) -> Result<IterReport, PunctureError> {
    if k < 2 {
        return Err(PunctureError::InvalidConfig(format!("k must be ≥ 2, got {k}")));
    }
    let w = fam.max_set_size();
    let small = w <= k;
    let bound = extremal_bound_f64(k, w.max(1), cfg.bound_c);

    let report = |rounds: Vec<IterRound>, stop, cur: &SetFamily, orig: usize| IterReport {
        small_regime: small,
        rounds,
        stop,
        final_universe: cur.support().to_vec(),
        final_family_size: cur.len(),
        survival_fraction: if orig == 0 {
            1.0
        } else {
            cur.len() as f64 / orig as f64
        },
        implied_bound: bound,
        bound_constant: cfg.bound_c,
        bound_holds: (fam.len() as f64) <= bound,
    };

    if fam.is_empty() {
        return Ok(report(Vec::new(), StopReason::Emptied, fam, 0));
    }
    if w <= 1 {
        // Any k distinct singletons form a k-moonflower, so freeness alone
        // caps the family size at k−1.
        return Ok(report(Vec::new(), StopReason::TrivialSingleton, fam, fam.len()));
    }

    let orig_len = fam.len();
    let mut cur = fam.clone();
    let mut rounds: Vec<IterRound> = Vec::new();

    let (round_cap, stall_threshold) = if small {
        let cap = if w >= 63 { u64::MAX } else { 1u64 << w };
        (cap, 0.0)
    } else {
        let n0 = cur.support_size().max(1);
        let l0 = (n0 as f64 / k as f64).log2();
        let thr = (cfg.c1 * (w as f64 / k as f64).log2()).max(1.0);
        let cap = if l0 <= thr {
            0
        } else {
            1 + (l0 / thr).log2().ceil() as u64
        };
        (cap, thr)
    };

    loop {
        let round = rounds.len();
        if round as u64 >= round_cap {
            return Ok(report(rounds, StopReason::RoundCap, &cur, orig_len));
        }
        if cur.is_empty() {
            return Ok(report(rounds, StopReason::Emptied, &cur, orig_len));
        }
        let n_r = cur.support_size();
        let log_nk = (n_r as f64 / k as f64).log2();

        let (a, delta, m_theory, t_cap_extra) = if small {
            if n_r <= 2 * k {
                return Ok(report(rounds, StopReason::UniverseSmall, &cur, orig_len));
            }
            let a = (w as f64 * (4.0 * k as f64 / w as f64).log2()
                / (32.0 * cfg.b * k as f64 * log_nk))
                .min(0.25);
            let delta = (-(w as f64) - 4.0).exp2();
            let m = (4.0 * k as f64 / w as f64).powf(w as f64 / 32.0);
            (a, delta, m, (k - 1) * w)
        } else {
            if log_nk <= stall_threshold {
                return Ok(report(rounds, StopReason::Stalled, &cur, orig_len));
            }
            let a = ((4.0 * w as f64 / k as f64).log2() / (cfg.c_prime * log_nk)).min(0.25);
            let m = (4.0 * w as f64 / k as f64).powf(k as f64 / 64.0);
            (a, 0.25, m, (k - 1) * w)
        };
        let p = choose_p(a)?;
        let t = step_budget(n_r, w, p, delta).min(t_cap_extra);

        if t as f64 * m_theory > delta * cur.len() as f64 {
            return Ok(report(rounds, StopReason::SizeBound, &cur, orig_len));
        }

        let step_cfg = ReductionConfig {
            p,
            delta,
            b: cfg.b,
            theta: 0.01,
            max_retries: cfg.step_retries,
            seed: cfg.seed.wrapping_add((round as u64) << 32),
        };
        let trace = one_step_reduce(&cur, &step_cfg, m_theory)?;
        let i_set = CoordSet::from_indices(cur.n(), trace.i_set.iter().copied());
        let next = SetFamily::from_sets(
            cur.n(),
            cur.members()
                .iter()
                .filter(|m| m.is_subset(&i_set))
                .cloned(),
        );
        rounds.push(IterRound {
            round,
            universe_size: n_r,
            family_size: cur.len(),
            a,
            p,
            t,
            m_theory,
            covered: trace.covered_count,
            next_universe_size: i_set.len(),
        });
        cur = next;

        if small && (cur.len() as f64) < cfg.survival_floor * orig_len as f64 {
            return Ok(report(rounds, StopReason::SurvivalFloor, &cur, orig_len));
        }
    }
}

/// `(C·k/w)^w` when w ≤ k, else `(C·w/k)^k`, in exact rational arithmetic.
pub fn extremal_bound(k: usize, w: usize, c: f64) -> BigRational {
    assert!(k >= 1 && w >= 1, "k and w must be positive");
    let c = BigRational::from_f64(c).expect("finite constant");
    if w <= k {
        let base = c * BigRational::from_usize(k).unwrap() / BigRational::from_usize(w).unwrap();
        num::pow::pow(base, w)
    } else {
        let base = c * BigRational::from_usize(w).unwrap() / BigRational::from_usize(k).unwrap();
        num::pow::pow(base, k)
    }
}

fn extremal_bound_f64(k: usize, w: usize, c: f64) -> f64 {
    use num::ToPrimitive;
    extremal_bound(k, w, c).to_f64().unwrap_or(f64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfam::gen_lower_bound_family;
    use num::{BigInt, ToPrimitive};

    fn fam(n: usize, sets: &[&[usize]]) -> SetFamily {
        SetFamily::from_index_sets(n, &sets.iter().map(|s| s.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn one_step_on_empty_family() {
        let cfg = ReductionConfig::new(0.5, 0.25);
        let tr = one_step_reduce(&SetFamily::empty(4), &cfg, 1.0).unwrap();
        assert!(tr.i_set.is_empty());
        assert_eq!(tr.covered_count, 0);
        assert!(tr.attained_bound);
    }

    #[test]
    fn one_step_single_member_gets_covered() {
        let f = fam(1, &[&[0]]);
        let cfg = ReductionConfig::new(0.5, 0.25);
        let tr = one_step_reduce(&f, &cfg, 1.0).unwrap();
        assert_eq!(tr.covered_count, 1);
        assert_eq!(tr.i_set, vec![0]);
        assert!(tr.steps <= tr.t_budget);
    }

    #[test]
    fn one_step_trace_invariants() {
        let f = gen_lower_bound_family(4, 3, 100).unwrap();
        let cfg = ReductionConfig::new(choose_p(0.25).unwrap(), 1.0 / 16.0);
        let tr = one_step_reduce(&f, &cfg, 4.0).unwrap();
        assert!(tr.i_set.len() <= tr.t_budget);
        for pair in tr.potential_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "potential must not increase");
        }
        for (phi, count) in tr.potential_history.iter().zip(&tr.trace_counts) {
            assert!(*phi >= 2.0 * *count as f64 - 1e-9);
        }
    }

    #[test]
    fn one_step_rejects_bad_config() {
        let f = fam(1, &[&[0]]);
        assert!(one_step_reduce(&f, &ReductionConfig::new(0.0, 0.25), 1.0).is_err());
        assert!(one_step_reduce(&f, &ReductionConfig::new(0.5, 0.7), 1.0).is_err());
    }

    #[test]
    fn trace_to_empty_single_member() {
        let f = fam(1, &[&[0]]);
        let r = trace_puncture_to_empty(&f, 0.9, 1.0, 5, 7).unwrap();
        assert!(r.emptied);
        assert_eq!(r.residual_traces, 0);
        assert!(r.certified);
    }

    #[test]
    fn trace_to_empty_residual_bound() {
        let f = gen_lower_bound_family(3, 2, 100).unwrap();
        let r = trace_puncture_to_empty(&f, 0.3, 3.0, 20, 11).unwrap();
        assert!(r.emptied, "small family should empty within budget");
        let t = r.trace.t_budget as f64;
        assert!(r.residual_traces as f64 <= t * 3.0);
        assert!(r.certified);
    }

    #[test]
    fn trace_to_empty_empty_family() {
        let r = trace_puncture_to_empty(&SetFamily::empty(3), 0.5, 1.0, 3, 0).unwrap();
        assert!(r.emptied);
        assert_eq!(r.residual_traces, 0);
    }

    #[test]
    fn weight_scale_empty_layer() {
        let r = weight_scale_puncture(&SetFamily::empty(6), 3, 2, 0.1, 0.01, 1.0, 5, 0).unwrap();
        assert!(r.success);
        assert!(r.i_set.is_empty());
    }

    #[test]
    fn weight_scale_disjoint_layer() {
        // Two disjoint 3-sets: sizes in (2,4], 3-moonflower-free.
        let f = fam(6, &[&[0, 1, 2], &[3, 4, 5]]);
        let r = weight_scale_puncture(&f, 3, 2, 0.2, 0.5, 1.0, 30, 5).unwrap();
        assert!(r.success, "residual {} above bound {}", r.residual_traces, r.residual_bound);
        assert!(r.residual_traces as f64 <= r.residual_bound);
    }

    #[test]
    fn weight_scale_validates_layer_sizes() {
        let f = fam(4, &[&[0]]);
        assert!(weight_scale_puncture(&f, 3, 2, 0.1, 0.01, 1.0, 5, 0).is_err());
        assert!(weight_scale_puncture(&fam(4, &[&[0, 1, 2]]), 3, 2, 0.3, 0.5, 1.0, 5, 0).is_err());
    }

    #[test]
    fn iterated_w1_is_immediate() {
        let f = fam(3, &[&[0], &[1]]);
        let r = iterated_puncture(&f, 3, &IterConfig::default()).unwrap();
        assert_eq!(r.stop, StopReason::TrivialSingleton);
        assert!(r.bound_holds); // |F| = 2 ≤ (C·3)¹ for C = 4.
    }

    #[test]
    fn iterated_small_regime_runs() {
        let f = gen_lower_bound_family(4, 2, 1000).unwrap();
        let r = iterated_puncture(&f, 4, &IterConfig::default()).unwrap();
        assert!(r.small_regime);
        assert!(r.final_family_size <= f.len());
        // The surviving family stays k-moonflower-free.
        let (mf, _) = crate::setfam::mf_exact(&f, 1 << 22).unwrap();
        assert!(mf < 4);
    }

    #[test]
    fn iterated_large_regime_runs() {
        let f = gen_lower_bound_family(2, 4, 1000).unwrap();
        let r = iterated_puncture(&f, 2, &IterConfig::default()).unwrap();
        assert!(!r.small_regime);
        assert!(matches!(
            r.stop,
            StopReason::SizeBound | StopReason::Stalled | StopReason::RoundCap | StopReason::Emptied
        ));
    }

    #[test]
    fn iterated_empty_family() {
        let r = iterated_puncture(&SetFamily::empty(4), 3, &IterConfig::default()).unwrap();
        assert_eq!(r.stop, StopReason::Emptied);
        assert!(r.bound_holds);
    }

    #[test]
    fn extremal_bound_values() {
        let rat = |n: i64| BigRational::from(BigInt::from(n));
        assert_eq!(extremal_bound(3, 3, 2.0), rat(8));
        assert_eq!(extremal_bound(8, 2, 1.0), rat(16));
        // w ≥ k side: (2·4/2)² = 16.
        assert_eq!(extremal_bound(2, 4, 2.0), rat(16));
    }

    #[test]
    fn extremal_bound_dominates_generator_sizes() {
        for k in 2..=5usize {
            for w in 1..=4usize {
                let f = gen_lower_bound_family(k, w, 10_000).unwrap();
                let bound = extremal_bound(k, w, 4.0).to_f64().unwrap();
                assert!(
                    f.len() as f64 <= bound,
                    "size {} above bound {} for ({k},{w})",
                    f.len(),
                    bound
                );
            }
        }
    }

    #[test]
    fn puncture_trace_serializes_truncated() {
        let f = gen_lower_bound_family(3, 2, 100).unwrap();
        let cfg = ReductionConfig::new(0.25, 0.25);
        let tr = one_step_reduce(&f, &cfg, 2.0).unwrap();
        let out = tr.truncated_for_output();
        assert!(out.potential_history.len() <= 1000);
        let json = serde_json::to_string(&out).unwrap();
        let back: PunctureTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back.i_set, out.i_set);
        assert_eq!(back.covered_count, out.covered_count);
    }
}
