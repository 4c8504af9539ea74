//! Independent brute-force ground truth.
//!
//! Everything in this module re-derives answers from first principles with
//! its own machinery — packed u64 masks, a separate exact-rational packing
//! simplex, Fourier–Motzkin feasibility — sharing only the public data types
//! with the fast paths it cross-checks. Oracles are deterministic and fail
//! closed: when an enumeration or tableau would exceed its budget they
//! refuse with an error instead of approximating.

use crate::bits::CoordSet;
use crate::setfam::SetFamily;
use crate::sparsify::Code;
use num::{BigRational, FromPrimitive, One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("budget exceeded in {what}")]
    Budget { what: String },
    #[error("instance too large for oracle: {what}")]
    TooLarge { what: String },
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Enumeration and tableau caps; oracles error rather than degrade when hit.
#[derive(Clone, Debug)]
pub struct OracleBudget {
    pub max_subsets: u64,
    pub max_lp_vars: usize,
    pub time_cap: Duration,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_subsets: 1 << 24,
            max_lp_vars: 64,
            time_cap: Duration::from_secs(60),
        }
    }
}

struct Meter<'a> {
    budget: &'a OracleBudget,
    start: Instant,
    used: u64,
    what: &'static str,
}

impl<'a> Meter<'a> {
    fn new(budget: &'a OracleBudget, what: &'static str) -> Self {
        Meter { budget, start: Instant::now(), used: 0, what }
    }

    fn tick(&mut self) -> Result<(), OracleError> {
        self.used += 1;
        if self.used > self.budget.max_subsets {
            return Err(OracleError::Budget { what: format!("{} (subset cap)", self.what) });
        }
        if self.used % 4096 == 0 && self.start.elapsed() > self.budget.time_cap {
            return Err(OracleError::Budget { what: format!("{} (time cap)", self.what) });
        }
        Ok(())
    }
}

fn mask_of(set: &CoordSet, what: &str) -> Result<u64, OracleError> {
    let mut m = 0u64;
    for c in set.iter() {
        if c >= 64 {
            return Err(OracleError::TooLarge {
                what: format!("{what}: coordinate {c} beyond 64-bit mask"),
            });
        }
        m |= 1 << c;
    }
    Ok(m)
}

/// Visit all t-subsets of 0..m in lexicographic order; the callback returns
/// true to stop early.
fn combinations(m: usize, t: usize, mut f: impl FnMut(&[usize]) -> Result<bool, OracleError>) -> Result<bool, OracleError> {
    if t > m {
        return Ok(false);
    }
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        if f(&idx)? {
            return Ok(true);
        }
        // Advance to the next combination.
        let mut i = t;
        loop {
            if i == 0 {
                return Ok(false);
            }
            i -= 1;
            if idx[i] != i + m - t {
                break;
            }
            if i == 0 {
                return Ok(false);
            }
        }
        idx[i] += 1;
        for j in i + 1..t {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Moonflower number by exhaustion

#[derive(Clone, Debug)]
pub struct MfOracle {
    pub value: usize,
    /// Indices into the family's canonical member list.
    pub petals: Vec<usize>,
    pub subsets_examined: u64,
}

impl MfOracle {
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "value": self.value, "witness": self.petals, "budget_used": self.subsets_examined })
    }
}

/// Largest subfamily in which every chosen set keeps an element of its own,
/// found by checking subfamilies in increasing size. Since dropping petals
/// never destroys the private-element property, the first size with no
/// witness bounds all larger sizes, so the search can stop there.
pub fn mf_bruteforce(fam: &SetFamily, budget: &OracleBudget) -> Result<MfOracle, OracleError> {
    let mut masks = Vec::new();
    let mut origin = Vec::new();
    for (i, s) in fam.members().iter().enumerate() {
        if !s.is_empty() {
            masks.push(mask_of(s, "mf_bruteforce")?);
            origin.push(i);
        }
    }
    let m = masks.len();
    let mut meter = Meter::new(budget, "mf_bruteforce");
    let mut best = 0usize;
    let mut petals: Vec<usize> = Vec::new();
    for t in 1..=m {
        let mut found: Option<Vec<usize>> = None;
        combinations(m, t, |chosen| {
            meter.tick()?;
            let all_private = chosen.iter().all(|&j| {
                let mut others = 0u64;
                for &o in chosen {
                    if o != j {
                        others |= masks[o];
                    }
                }
                masks[j] & !others != 0
            });
            if all_private {
                found = Some(chosen.to_vec());
                return Ok(true);
            }
            Ok(false)
        })?;
        match found {
            Some(chosen) => {
                best = t;
                petals = chosen.iter().map(|&j| origin[j]).collect();
            }
            None => break,
        }
    }
    Ok(MfOracle { value: best, petals, subsets_examined: meter.used })
}

// ---------------------------------------------------------------------------
// Non-redundancy by exhaustion

#[derive(Clone, Debug)]
pub struct NrdOracle {
    pub value: usize,
    pub coords: Vec<usize>,
    pub subsets_examined: u64,
}

impl NrdOracle {
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "value": self.value, "witness": self.coords, "budget_used": self.subsets_examined })
    }
}

/// Largest coordinate set I such that every i ∈ I is the sole I-coordinate
/// of some codeword, checked over every subset of the code's support.
pub fn nrd_bruteforce(code: &Code, budget: &OracleBudget) -> Result<NrdOracle, OracleError> {
    let mut support = CoordSet::new(code.n());
    for w in code.words() {
        support.union_with(w);
    }
    let coords: Vec<usize> = support.to_vec();
    let s = coords.len();
    if s >= 64 || (1u64 << s) > budget.max_subsets {
        return Err(OracleError::Budget {
            what: format!("nrd_bruteforce over 2^{s} support subsets"),
        });
    }
    // Word masks in compact support positions.
    let word_masks: Vec<u64> = code
        .words()
        .iter()
        .map(|w| {
            let mut m = 0u64;
            for (pos, &c) in coords.iter().enumerate() {
                if w.contains(c) {
                    m |= 1 << pos;
                }
            }
            m
        })
        .collect();
    let mut meter = Meter::new(budget, "nrd_bruteforce");
    let mut best = 0usize;
    let mut best_mask = 0u64;
    for im in 0u64..(1u64 << s) {
        meter.tick()?;
        if (im.count_ones() as usize) <= best {
            continue;
        }
        let mut ok = true;
        let mut bits = im;
        while bits != 0 {
            let unit = bits & bits.wrapping_neg();
            if !word_masks.iter().any(|&w| w & im == unit) {
                ok = false;
                break;
            }
            bits ^= unit;
        }
        if ok {
            best = im.count_ones() as usize;
            best_mask = im;
        }
    }
    let picked = (0..s).filter(|&p| best_mask >> p & 1 == 1).map(|p| coords[p]).collect();
    Ok(NrdOracle { value: best, coords: picked, subsets_examined: meter.used })
}

// ---------------------------------------------------------------------------
// Exact covering game value

#[derive(Clone, Debug)]
pub struct PhiOracle {
    pub value: BigRational,
    /// Coordinate distribution certifying every member gets mass ≥ value.
    pub cover: Vec<(usize, BigRational)>,
    /// Member distribution certifying every coordinate gets mass ≤ value.
    pub smooth: Vec<(usize, BigRational)>,
    pub degenerate: bool,
}

impl PhiOracle {
    pub fn to_json(&self) -> serde_json::Value {
        let rat = |r: &BigRational| format!("{}/{}", r.numer(), r.denom());
        json!({
            "value": rat(&self.value),
            "witness": {
                "cover": self.cover.iter().map(|(i, q)| json!([i, rat(q)])).collect::<Vec<_>>(),
                "smooth": self.smooth.iter().map(|(i, d)| json!([i, rat(d)])).collect::<Vec<_>>(),
            },
            "budget_used": 0,
        })
    }
}

/// Exact game value via the reciprocal fractional-cover transform: the
/// packing program max Σy over members with per-coordinate load ≤ 1 starts
/// feasible from the slack basis, so a single-phase rational simplex
/// suffices; its solution and reduced costs give both certificates, which
/// are then revalidated by direct arithmetic (the two sides can only meet
/// at the optimum, so passing the equality check proves the value).
pub fn phi_exact(fam: &SetFamily, budget: &OracleBudget) -> Result<PhiOracle, OracleError> {
    let one = BigRational::one;
    let zero = BigRational::zero;
    if fam.is_empty() {
        let cover = if fam.n() > 0 { vec![(0, one())] } else { Vec::new() };
        return Ok(PhiOracle { value: one(), cover, smooth: Vec::new(), degenerate: true });
    }
    if let Some(idx) = fam.members().iter().position(|s| s.is_empty()) {
        return Ok(PhiOracle {
            value: zero(),
            cover: Vec::new(),
            smooth: vec![(idx, one())],
            degenerate: true,
        });
    }

    let coords: Vec<usize> = fam.support().to_vec();
    let m = fam.len();
    let r = coords.len();
    if m + r > budget.max_lp_vars {
        return Err(OracleError::Budget {
            what: format!("phi_exact tableau with {} variables", m + r),
        });
    }

    // Tableau rows: one per support coordinate; columns: members, slacks, rhs.
    let cols = m + r + 1;
    let mut tab: Vec<Vec<BigRational>> = Vec::with_capacity(r);
    for (row, &c) in coords.iter().enumerate() {
        let mut v = vec![zero(); cols];
        for (j, member) in fam.members().iter().enumerate() {
            if member.contains(c) {
                v[j] = one();
            }
        }
        v[m + row] = one();
        v[cols - 1] = one();
        tab.push(v);
    }
    let mut zrow = vec![zero(); cols];
    for j in 0..m {
        zrow[j] = -one();
    }
    let mut basis: Vec<usize> = (0..r).map(|i| m + i).collect();

    let mut steps = 0u64;
    loop {
        steps += 1;
        if steps > budget.max_subsets {
            return Err(OracleError::Budget { what: "phi_exact pivot cap".into() });
        }
        // Bland's rule: lowest negative reduced cost enters.
        let Some(enter) = (0..cols - 1).find(|&j| zrow[j] < zero()) else {
            break;
        };
        let mut leave: Option<usize> = None;
        for i in 0..r {
            if tab[i][enter] > zero() {
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let cur = &tab[i][cols - 1] / &tab[i][enter];
                        let old = &tab[l][cols - 1] / &tab[l][enter];
                        cur < old || (cur == old && basis[i] < basis[l])
                    }
                };
                if better {
                    leave = Some(i);
                }
            }
        }
        let Some(prow) = leave else {
            return Err(OracleError::Certification(
                "packing program unbounded; coordinate constraints missing".into(),
            ));
        };
        let pivot = tab[prow][enter].clone();
        for v in tab[prow].iter_mut() {
            *v /= pivot.clone();
        }
        for i in 0..r {
            if i != prow && !tab[i][enter].is_zero() {
                let f = tab[i][enter].clone();
                for j in 0..cols {
                    let delta = &f * &tab[prow][j];
                    tab[i][j] -= delta;
                }
            }
        }
        if !zrow[enter].is_zero() {
            let f = zrow[enter].clone();
            for j in 0..cols {
                let delta = &f * &tab[prow][j];
                zrow[j] -= delta;
            }
        }
        basis[prow] = enter;
    }

    // Primal packing solution and covering duals from the final tableau.
    let mut y = vec![zero(); m];
    for (i, &b) in basis.iter().enumerate() {
        if b < m {
            y[b] = tab[i][cols - 1].clone();
        }
    }
    let x: Vec<BigRational> = (0..r).map(|i| zrow[m + i].clone()).collect();
    let total: BigRational = y.iter().cloned().sum();
    if total <= zero() {
        return Err(OracleError::Certification("packing optimum not positive".into()));
    }

    let smooth: Vec<(usize, BigRational)> = y
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(j, v)| (j, v / &total))
        .collect();
    let cover: Vec<(usize, BigRational)> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, v)| (coords[i], v / &total))
        .collect();

    // Direct certification, no trust in the tableau: the minimum member mass
    // under the cover must equal the maximum coordinate load under the
    // smooth side; weak duality sandwiches the true value between them.
    let cover_sum: BigRational = cover.iter().map(|(_, q)| q.clone()).sum();
    let smooth_sum: BigRational = smooth.iter().map(|(_, d)| d.clone()).sum();
    if cover_sum != one() || smooth_sum != one() {
        return Err(OracleError::Certification("certificates are not distributions".into()));
    }
    let member_mass = |s: &CoordSet| -> BigRational {
        cover.iter().filter(|(i, _)| s.contains(*i)).map(|(_, q)| q.clone()).sum()
    };
    let q_min = fam.members().iter().map(member_mass).min().expect("nonempty family");
    let d_max = coords
        .iter()
        .map(|&c| {
            smooth
                .iter()
                .filter(|(j, _)| fam.members()[*j].contains(c))
                .map(|(_, d)| d.clone())
                .sum::<BigRational>()
        })
        .max()
        .expect("nonempty support");
    if q_min != d_max {
        return Err(OracleError::Certification(format!(
            "duality gap: cover side {q_min}, smooth side {d_max}"
        )));
    }
    Ok(PhiOracle { value: q_min, cover, smooth, degenerate: false })
}

// ---------------------------------------------------------------------------
// Minimum sparsifier by exhaustion

#[derive(Clone, Debug)]
pub struct MinSparsifier {
    pub size: usize,
    pub coords: Vec<usize>,
    /// Feasible nonnegative weights aligned with `coords`.
    pub alpha: Vec<BigRational>,
    pub subsets_examined: u64,
}

impl MinSparsifier {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "value": self.size,
            "witness": {
                "coords": self.coords,
                "alpha": self.alpha.iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect::<Vec<_>>(),
            },
            "budget_used": self.subsets_examined,
        })
    }
}

/// One linear constraint Σ coeffs·α ≤ rhs.
#[derive(Clone, PartialEq, Eq, Hash)]
struct Row {
    coeffs: Vec<BigRational>,
    rhs: BigRational,
}

impl Row {
    fn normalized(mut self) -> Row {
        if let Some(lead) = self.coeffs.iter().find(|c| !c.is_zero()).cloned() {
            let scale = lead.abs();
            for c in self.coeffs.iter_mut() {
                *c /= scale.clone();
            }
            self.rhs /= scale;
        }
        self
    }
}

/// Fourier–Motzkin feasibility over nonnegative variables, returning a
/// witness point when the system Σ c·α ≤ rhs is solvable.
fn fm_feasible(
    rows: Vec<Row>,
    nvars: usize,
    meter: &mut Meter,
) -> Result<Option<Vec<BigRational>>, OracleError> {
    let zero = BigRational::zero;
    let mut system = rows;
    // Nonnegativity as explicit rows so elimination and reconstruction see it.
    for v in 0..nvars {
        let mut coeffs = vec![zero(); nvars];
        coeffs[v] = -BigRational::one();
        system.push(Row { coeffs, rhs: zero() });
    }

    let mut levels: Vec<Vec<Row>> = Vec::with_capacity(nvars);
    for v in (0..nvars).rev() {
        levels.push(system.clone());
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut rest = Vec::new();
        for row in system {
            if row.coeffs[v] > zero() {
                pos.push(row);
            } else if row.coeffs[v] < zero() {
                neg.push(row);
            } else {
                rest.push(row);
            }
        }
        let mut next: Vec<Row> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for row in rest {
            if row.coeffs.iter().all(|c| c.is_zero()) {
                if row.rhs < zero() {
                    return Ok(None);
                }
                continue;
            }
            if seen.insert(row.clone().normalized()) {
                next.push(row);
            }
        }
        for p in &pos {
            for n in &neg {
                meter.tick()?;
                // (−c_n)·p + c_p·n cancels variable v, keeping ≤ direction.
                let cp = p.coeffs[v].clone();
                let cn = n.coeffs[v].clone();
                let coeffs: Vec<BigRational> = (0..nvars)
                    .map(|j| -&cn * &p.coeffs[j] + &cp * &n.coeffs[j])
                    .collect();
                let rhs = -&cn * &p.rhs + &cp * &n.rhs;
                let row = Row { coeffs, rhs };
                if row.coeffs.iter().all(|c| c.is_zero()) {
                    if row.rhs < zero() {
                        return Ok(None);
                    }
                    continue;
                }
                if seen.insert(row.clone().normalized()) {
                    next.push(row);
                }
            }
        }
        system = next;
    }
    for row in &system {
        if row.rhs < zero() {
            return Ok(None);
        }
    }

    // Back-substitute in reverse elimination order: variable v was
    // eliminated from levels[nvars-1-v], which mentions only 0..=v, so by
    // the time v is reached all other variables in it are fixed. Picking
    // the largest lower bound stays below every upper bound because the
    // level's positive/negative pairings survived elimination.
    let mut values = vec![zero(); nvars];
    for v in 0..nvars {
        let level = &levels[nvars - 1 - v];
        let mut lower = zero();
        let mut upper: Option<BigRational> = None;
        for row in level {
            let cv = &row.coeffs[v];
            if cv.is_zero() {
                continue;
            }
            let mut rest = row.rhs.clone();
            for j in 0..nvars {
                if j != v {
                    rest -= &row.coeffs[j] * &values[j];
                }
            }
            let bound = rest / cv.clone();
            if cv > &zero() {
                upper = Some(match upper {
                    None => bound,
                    Some(u) => u.min(bound),
                });
            } else {
                lower = lower.max(bound);
            }
        }
        if let Some(u) = &upper {
            if *u < lower {
                return Err(OracleError::Certification(
                    "inconsistent bounds during back-substitution".into(),
                ));
            }
        }
        values[v] = lower;
    }
    Ok(Some(values))
}

/// Smallest coordinate set carrying nonnegative weights whose partial sums
/// land within 1±ε of every codeword's weight, by exhausting key sets in
/// increasing size; the first feasible size is minimal by construction.
pub fn min_sparsifier_bruteforce(
    code: &Code,
    epsilon: f64,
    budget: &OracleBudget,
) -> Result<MinSparsifier, OracleError> {
    let eps = BigRational::from_float(epsilon)
        .ok_or_else(|| OracleError::InvalidInput(format!("epsilon={epsilon} is not finite")))?;
    let one = BigRational::one();
    let lo_f = &one - &eps;
    let hi_f = &one + &eps;

    let mut support = CoordSet::new(code.n());
    for w in code.words() {
        support.union_with(w);
    }
    let coords: Vec<usize> = support.to_vec();
    let s = coords.len();
    if s >= 64 || (1u64 << s) > budget.max_subsets {
        return Err(OracleError::Budget {
            what: format!("min_sparsifier over 2^{s} key sets"),
        });
    }
    let mut meter = Meter::new(budget, "min_sparsifier_bruteforce");

    for t in 0..=s {
        let mut found: Option<(Vec<usize>, Vec<BigRational>)> = None;
        combinations(s, t, |chosen| {
            meter.tick()?;
            let picked: Vec<usize> = chosen.iter().map(|&p| coords[p]).collect();
            let mut rows = Vec::with_capacity(2 * code.len());
            for word in code.words() {
                let wt = BigRational::from_usize(word.len()).unwrap();
                let mut coeffs = vec![BigRational::zero(); t];
                for (slot, &c) in picked.iter().enumerate() {
                    if word.contains(c) {
                        coeffs[slot] = BigRational::one();
                    }
                }
                // Σα ≤ (1+ε)wt  and  Σα ≥ (1−ε)wt.
                rows.push(Row { coeffs: coeffs.clone(), rhs: &hi_f * &wt });
                rows.push(Row {
                    coeffs: coeffs.iter().map(|c| -c).collect(),
                    rhs: -(&lo_f * &wt),
                });
            }
            if let Some(alpha) = fm_feasible(rows, t, &mut meter)? {
                found = Some((picked, alpha));
                return Ok(true);
            }
            Ok(false)
        })?;
        if let Some((picked, alpha)) = found {
            return Ok(MinSparsifier {
                size: t,
                coords: picked,
                alpha,
                subsets_examined: meter.used,
            });
        }
    }
    unreachable!("the full support with unit weights is always feasible");
}

// ---------------------------------------------------------------------------
// Monte Carlo tail measurement

#[derive(Clone, Debug)]
pub struct TailEstimate {
    pub empirical: f64,
    /// Three-standard-error half width of the estimate.
    pub sigma3: f64,
    pub trials: u64,
    pub exceed: u64,
}

impl TailEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "value": self.empirical,
            "witness": { "exceed": self.exceed, "trials": self.trials, "sigma3": self.sigma3 },
            "budget_used": self.trials,
        })
    }
}

/// Measure Pr[|2X − t| > Δ] for X ~ Bin(t, 1/2) by popcounting seeded
/// random bit blocks. The event is strict, matching the bound it checks.
pub fn chernoff_montecarlo(t: u64, delta: f64, trials: u64, seed: u64) -> TailEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0u64;
    for _ in 0..trials {
        let mut heads = 0u64;
        let mut rem = t;
        while rem > 0 {
            let take = rem.min(64);
            let bits: u64 = rng.gen();
            let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
            heads += (bits & mask).count_ones() as u64;
            rem -= take;
        }
        let dev = (2.0 * heads as f64 - t as f64).abs();
        if dev > delta {
            exceed += 1;
        }
    }
    let empirical = exceed as f64 / trials as f64;
    let sigma3 = 3.0 * (empirical * (1.0 - empirical) / trials as f64).sqrt();
    TailEstimate { empirical, sigma3, trials, exceed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfam::{gen_lower_bound_family, mf_exact};
    use crate::sparsify::gen_chain_code;
    use num::ToPrimitive;

    fn fam(n: usize, sets: &[&[usize]]) -> SetFamily {
        SetFamily::from_index_sets(n, &sets.iter().map(|s| s.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn mf_oracle_examples() {
        let b = OracleBudget::default();
        // All 2-subsets of a 3-point universe: any two share an element with
        // the third, so three petals never keep privates simultaneously.
        let pairs = fam(3, &[&[0, 1], &[0, 2], &[1, 2]]);
        assert_eq!(mf_bruteforce(&pairs, &b).unwrap().value, 2);
        let singles = fam(4, &[&[0], &[1], &[2], &[3]]);
        assert_eq!(mf_bruteforce(&singles, &b).unwrap().value, 4);
        // The far-off singleton joins any two triangle edges:
        // {0,1},{1,2},{3} keep privates 0, 2, 3.
        let tri_plus = fam(4, &[&[0, 1], &[1, 2], &[0, 2], &[3]]);
        assert_eq!(mf_bruteforce(&tri_plus, &b).unwrap().value, 3);
        assert_eq!(mf_bruteforce(&SetFamily::empty(3), &b).unwrap().value, 0);
    }

    #[test]
    fn mf_oracle_matches_fast_path() {
        let b = OracleBudget::default();
        for (k, w) in [(3usize, 2usize), (4, 2), (3, 3), (2, 4)] {
            let f = gen_lower_bound_family(k, w, 1000).unwrap();
            let slow = mf_bruteforce(&f, &b).unwrap().value;
            let (fast, _) = mf_exact(&f, 1 << 22).unwrap();
            assert_eq!(slow, fast, "disagreement at ({k},{w})");
            assert_eq!(slow, k - 1);
        }
    }

    #[test]
    fn mf_oracle_budget_refusal() {
        let f = gen_lower_bound_family(4, 3, 1000).unwrap();
        let tight = OracleBudget { max_subsets: 3, ..OracleBudget::default() };
        assert!(matches!(mf_bruteforce(&f, &tight), Err(OracleError::Budget { .. })));
    }

    #[test]
    fn nrd_oracle_examples() {
        let b = OracleBudget::default();
        let id = Code::from_supports(5, (0..5).map(|i| vec![i]).collect::<Vec<_>>()).unwrap();
        let r = nrd_bruteforce(&id, &b).unwrap();
        assert_eq!(r.value, 5);
        assert_eq!(r.coords, vec![0, 1, 2, 3, 4]);

        let (chain, _) = gen_chain_code(8, 2, 0.5).unwrap();
        assert_eq!(nrd_bruteforce(&chain, &b).unwrap().value, 2);
    }

    #[test]
    fn nrd_oracle_equals_mf_of_supports() {
        let b = OracleBudget::default();
        let code = Code::from_supports(
            6,
            vec![vec![0, 1], vec![1, 2], vec![3], vec![3, 4, 5], vec![]],
        )
        .unwrap();
        let n = nrd_bruteforce(&code, &b).unwrap().value;
        let m = mf_bruteforce(&code.support_family(), &b).unwrap().value;
        assert_eq!(n, m);
    }

    #[test]
    fn phi_oracle_examples() {
        let b = OracleBudget::default();
        let half = phi_exact(&fam(2, &[&[0], &[1]]), &b).unwrap();
        assert_eq!(half.value, BigRational::new(1.into(), 2.into()));
        let full = phi_exact(&fam(2, &[&[0, 1]]), &b).unwrap();
        assert_eq!(full.value, BigRational::one());
        let fifth = phi_exact(&fam(5, &[&[0], &[1], &[2], &[3], &[4]]), &b).unwrap();
        assert_eq!(fifth.value, BigRational::new(1.into(), 5.into()));
    }

    #[test]
    fn phi_oracle_degenerate_cases() {
        let b = OracleBudget::default();
        let empty_fam = phi_exact(&SetFamily::empty(3), &b).unwrap();
        assert!(empty_fam.degenerate);
        assert_eq!(empty_fam.value, BigRational::one());
        let with_empty = phi_exact(&fam(3, &[&[], &[0, 1]]), &b).unwrap();
        assert!(with_empty.degenerate);
        assert!(with_empty.value.is_zero());
    }

    #[test]
    fn phi_oracle_matches_rational_fast_path() {
        let b = OracleBudget::default();
        for sets in [
            vec![vec![0, 1], vec![1, 2], vec![2, 0]],
            vec![vec![0], vec![0, 1], vec![1, 2, 3]],
            vec![vec![0, 1, 2], vec![3]],
        ] {
            let f = SetFamily::from_index_sets(5, &sets);
            let slow = phi_exact(&f, &b).unwrap();
            let fast = crate::cover::phi_value::<BigRational>(&f);
            assert_eq!(slow.value, fast.value, "mismatch on {sets:?}");
        }
    }

    #[test]
    fn phi_oracle_budget_refusal() {
        let tight = OracleBudget { max_lp_vars: 3, ..OracleBudget::default() };
        assert!(matches!(
            phi_exact(&fam(3, &[&[0], &[1], &[2]]), &tight),
            Err(OracleError::Budget { .. })
        ));
    }

    #[test]
    fn min_sparsifier_single_word() {
        let b = OracleBudget::default();
        let ones = Code::from_supports(6, vec![(0..6).collect::<Vec<_>>()]).unwrap();
        let r = min_sparsifier_bruteforce(&ones, 0.25, &b).unwrap();
        assert_eq!(r.size, 1);
        // The single kept weight must be within 1±ε of 6.
        let a = r.alpha[0].to_f64().unwrap();
        assert!((4.5..=7.5).contains(&a));
    }

    #[test]
    fn min_sparsifier_unit_vectors() {
        let b = OracleBudget::default();
        let id = Code::from_supports(4, (0..3).map(|i| vec![i]).collect::<Vec<_>>()).unwrap();
        let r = min_sparsifier_bruteforce(&id, 0.2, &b).unwrap();
        assert_eq!(r.size, 3);
    }

    #[test]
    fn min_sparsifier_chain_code_value() {
        // Hand check of the 8-coordinate nested-chain code at ε = 1/2: the
        // words are {0}, {0,1}, {4}, {4,5}. Keeping T = {0,4} with weight
        // 5/4 each gives estimates 5/4 for every word, and 5/4 lies inside
        // both [1/2, 3/2] (weight 1) and [1, 3] (weight 2), so two
        // coordinates suffice; one per block is also necessary, since a
        // block with no kept coordinate estimates its weight-1 word as 0.
        let b = OracleBudget::default();
        let (chain, _) = gen_chain_code(8, 2, 0.5).unwrap();
        let r = min_sparsifier_bruteforce(&chain, 0.5, &b).unwrap();
        assert_eq!(r.size, 2);
        // Re-validate the witness against every codeword exactly.
        for word in chain.words() {
            let est: BigRational = r
                .coords
                .iter()
                .zip(&r.alpha)
                .filter(|(c, _)| word.contains(**c))
                .map(|(_, a)| a.clone())
                .sum();
            let wt = BigRational::from_usize(word.len()).unwrap();
            let eps = BigRational::new(1.into(), 2.into());
            assert!(est >= (BigRational::one() - eps.clone()) * wt.clone());
            assert!(est <= (BigRational::one() + eps) * wt);
        }
    }

    #[test]
    fn min_sparsifier_zero_code() {
        let b = OracleBudget::default();
        let zero = Code::from_supports(4, vec![vec![]]).unwrap();
        let r = min_sparsifier_bruteforce(&zero, 0.25, &b).unwrap();
        assert_eq!(r.size, 0);
    }

    #[test]
    fn min_sparsifier_budget_refusal() {
        let wide = Code::from_supports(40, vec![(0..40).collect::<Vec<_>>()]).unwrap();
        let tight = OracleBudget { max_subsets: 1 << 10, ..OracleBudget::default() };
        assert!(matches!(
            min_sparsifier_bruteforce(&wide, 0.25, &tight),
            Err(OracleError::Budget { .. })
        ));
    }

    #[test]
    fn tail_estimate_degenerate_flip() {
        // One flip: |2X − 1| = 1 always exceeds Δ = 1/2.
        let e = chernoff_montecarlo(1, 0.5, 20_000, 1);
        assert_eq!(e.empirical, 1.0);
    }

    #[test]
    fn tail_estimate_matches_exact_binomial() {
        // Pr[|2X − 4| > 3.9] = Pr[X ∈ {0, 4}] = 2/16 for X ~ Bin(4, 1/2);
        // at Δ = 4 the strict event is empty.
        let e = chernoff_montecarlo(4, 3.9, 100_000, 7);
        assert!((e.empirical - 0.125).abs() < e.sigma3 + 0.005, "got {}", e.empirical);
        let boundary = chernoff_montecarlo(4, 4.0, 10_000, 7);
        assert_eq!(boundary.empirical, 0.0);
    }

    #[test]
    fn tail_estimate_deterministic() {
        let a = chernoff_montecarlo(16, 4.0, 10_000, 42);
        let b = chernoff_montecarlo(16, 4.0, 10_000, 42);
        assert_eq!(a.exceed, b.exceed);
    }

    #[test]
    fn oracle_json_shapes() {
        let b = OracleBudget::default();
        let mf = mf_bruteforce(&fam(2, &[&[0], &[1]]), &b).unwrap().to_json();
        assert_eq!(mf["value"], 2);
        assert!(mf["budget_used"].as_u64().is_some());
        let phi = phi_exact(&fam(2, &[&[0], &[1]]), &b).unwrap().to_json();
        assert_eq!(phi["value"], "1/2");
    }
}
