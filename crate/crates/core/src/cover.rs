//! The minimax covering layer.
//!
//! For a family F over coordinates, the covering game value
//! `Φ(F) = max_Q min_{T∈F} Q(T) = min_D max_i Pr_{T~D}[i ∈ T]`
//! is computed by a primal/dual LP pair, returning both certificates: a
//! coordinate distribution Q (the cover side) and a member distribution D
//! (the smooth side). A family is p-covered when Φ ≥ p; otherwise a p-smooth
//! D exists. Peeling removes a small exceptional set of members, chosen as
//! the maximizers of the min-ℓ∞ smooth distribution, after which the
//! remainder is certified p-covered.
//!
//! Everything is generic over the arithmetic mode: `BigRational` for exact
//! certificates and `f64` for speed. Levels arrive as `f64` and are converted
//! losslessly, so exact-mode contracts are exact with respect to the given
//! binary value.

use crate::bits::CoordSet;
use crate::lp::{Cmp, LinearProgram, LpOutcome, LpScalar};
use crate::setfam::SetFamily;
use num::{BigRational, ToPrimitive};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("level {0} outside the open interval (0,1)")]
    InvalidLevel(f64),
    #[error("target {0} outside (0, 1/4]")]
    InvalidTarget(f64),
    #[error("expected n ≥ k ≥ 1 and B > 0, got n={n}, k={k}, B={b}")]
    InvalidBudgetArgs { n: usize, k: usize, b: f64 },
    #[error(transparent)]
    Family(#[from] crate::setfam::SetFamError),
}

/// Scalar usable for covering computations: an LP scalar plus lossless
/// conversion from the `f64` levels supplied by callers.
pub trait CoverScalar: LpScalar {
    fn from_f64_lossless(x: f64) -> Self;
    fn to_f64(&self) -> f64;
}

impl CoverScalar for f64 {
    fn from_f64_lossless(x: f64) -> f64 {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl CoverScalar for BigRational {
    fn from_f64_lossless(x: f64) -> BigRational {
        BigRational::from_float(x).expect("finite level")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).expect("rational fits in f64 range")
    }
}

/// A probability vector over coordinates (the cover certificate Q).
/// Entries are sorted by coordinate; zero-mass coordinates are omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T> {
    pub weights: Vec<(usize, T)>,
}

impl<T: CoverScalar> Distribution<T> {
    pub fn point_mass(coord: usize) -> Self {
        Distribution {
            weights: vec![(coord, T::one())],
        }
    }

    pub fn total(&self) -> T {
        self.weights
            .iter()
            .fold(T::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// Mass placed inside `set`.
    pub fn mass_on(&self, set: &CoordSet) -> T {
        self.weights
            .iter()
            .filter(|(i, _)| set.contains(*i))
            .fold(T::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// True when every member of `fam` carries mass at least `p`.
    pub fn covers(&self, fam: &SetFamily, p: &T) -> bool {
        fam.members().iter().all(|m| self.mass_on(m) >= *p)
    }
}

/// A probability vector over family-member indices (the smooth certificate D).
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyDistribution<T> {
    pub weights: Vec<(usize, T)>,
}

impl<T: CoverScalar> FamilyDistribution<T> {
    pub fn total(&self) -> T {
        self.weights
            .iter()
            .fold(T::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// `max_i Pr_{T~D}[i ∈ T]`: the largest probability any coordinate is hit.
    pub fn max_coordinate_hit(&self, fam: &SetFamily) -> T {
        let mut best = T::zero();
        for i in fam.support().iter() {
            let hit = self
                .weights
                .iter()
                .filter(|(t, _)| fam.members()[*t].contains(i))
                .fold(T::zero(), |acc, (_, w)| acc + w.clone());
            if hit > best {
                best = hit;
            }
        }
        best
    }

    /// Shannon entropy in bits; zero-mass terms contribute zero.
    pub fn entropy_bits(&self) -> f64 {
        self.weights
            .iter()
            .map(|(_, w)| w.to_f64())
            .filter(|&w| w > 0.0)
            .map(|w| -w * w.log2())
            .sum()
    }

    /// Sample a member index with probability proportional to the weights.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> usize {
        use rand::distributions::{Distribution as _, WeightedIndex};
        let w: Vec<f64> = self.weights.iter().map(|(_, v)| v.to_f64()).collect();
        let idx = WeightedIndex::new(&w).expect("nonempty distribution");
        self.weights[idx.sample(rng)].0
    }
}

/// Free-function form of [`FamilyDistribution::entropy_bits`].
pub fn entropy_bits<T: CoverScalar>(d: &FamilyDistribution<T>) -> f64 {
    d.entropy_bits()
}

/// Why a game value was produced without a meaningful LP solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiDegeneracy {
    /// No members: the minimum over members is vacuous and Φ is set to 1.
    EmptyFamily,
    /// Some member is ∅, so no distribution can give it positive mass; Φ = 0.
    ContainsEmptySet,
}

/// Game value with both optimal certificates.
#[derive(Clone, Debug)]
pub struct PhiResult<T> {
    pub value: T,
    /// Cover-side optimum Q: every member has mass ≥ value.
    pub cover: Distribution<T>,
    /// Smooth-side optimum D: every coordinate is hit with probability ≤ value.
    pub smooth: FamilyDistribution<T>,
    pub degeneracy: Option<PhiDegeneracy>,
}

/// Compute `Φ(fam)` with optimal certificates on both sides.
///
/// The primal and dual LPs are solved separately and their values checked
/// against each other (exactly in rational mode, to 1e-9 in float mode).
pub fn phi_value<T: CoverScalar>(fam: &SetFamily) -> PhiResult<T> {
    if fam.is_empty() {
        let cover = if fam.n() > 0 {
            Distribution::point_mass(0)
        } else {
            Distribution { weights: Vec::new() }
        };
        return PhiResult {
            value: T::one(),
            cover,
            smooth: FamilyDistribution { weights: Vec::new() },
            degeneracy: Some(PhiDegeneracy::EmptyFamily),
        };
    }
    if let Some(pos) = fam.members().iter().position(|m| m.is_empty()) {
        return PhiResult {
            value: T::zero(),
            cover: Distribution::point_mass(0),
            smooth: FamilyDistribution {
                weights: vec![(pos, T::one())],
            },
            degeneracy: Some(PhiDegeneracy::ContainsEmptySet),
        };
    }

    let supp: Vec<usize> = fam.support().to_vec();
    let s = supp.len();
    let m = fam.len();

    // Primal (cover side): variables q over supp plus the value v.
    // maximize v  s.t.  Σ_{i∈T} q_i − v ≥ 0 for each member, Σ q = 1.
    let mut obj = vec![T::zero(); s + 1];
    obj[s] = T::one();
    let mut primal = LinearProgram::maximize(obj);
    for member in fam.members() {
        let mut row = vec![T::zero(); s + 1];
        for (j, &i) in supp.iter().enumerate() {
            if member.contains(i) {
                row[j] = T::one();
            }
        }
        row[s] = -T::one();
        primal.constraint(row, Cmp::Ge, T::zero());
    }
    let mut norm = vec![T::one(); s + 1];
    norm[s] = T::zero();
    primal.constraint(norm, Cmp::Eq, T::one());
    let (pval, psol) = primal.solve().expect_optimal("cover-side LP");

    // Dual (smooth side): variables d over members plus the ceiling u.
    // minimize u  s.t.  Σ_{T∋i} d_T − u ≤ 0 for each coordinate, Σ d = 1.
    let mut obj = vec![T::zero(); m + 1];
    obj[m] = T::one();
    let mut dual = LinearProgram::minimize(obj);
    for &i in &supp {
        let mut row = vec![T::zero(); m + 1];
        for (t, member) in fam.members().iter().enumerate() {
            if member.contains(i) {
                row[t] = T::one();
            }
        }
        row[m] = -T::one();
        dual.constraint(row, Cmp::Le, T::zero());
    }
    let mut norm = vec![T::one(); m + 1];
    norm[m] = T::zero();
    dual.constraint(norm, Cmp::Eq, T::one());
    let (dval, dsol) = dual.solve().expect_optimal("smooth-side LP");

    let gap = (pval.to_f64() - dval.to_f64()).abs();
    debug_assert!(
        gap < 1e-9,
        "primal/dual gap {gap} between {pval:?} and {dval:?}"
    );

    let cover = Distribution {
        weights: supp
            .iter()
            .enumerate()
            .filter(|(j, _)| !psol[*j].is_zero())
            .map(|(j, &i)| (i, psol[j].clone()))
            .collect(),
    };
    let smooth = FamilyDistribution {
        weights: (0..m)
            .filter(|&t| !dsol[t].is_zero())
            .map(|t| (t, dsol[t].clone()))
            .collect(),
    };
    PhiResult {
        value: pval,
        cover,
        smooth,
        degeneracy: None,
    }
}

/// Return a p-smooth member distribution when one exists (`Φ < p`), or `None`
/// when the family is already p-covered (`Φ ≥ p`).
pub fn smooth_distribution<T: CoverScalar>(
    fam: &SetFamily,
    p: f64,
) -> Result<Option<FamilyDistribution<T>>, CoverError> {
    let pt = validated_level::<T>(p)?;
    let phi = phi_value::<T>(fam);
    if phi.value >= pt {
        Ok(None)
    } else {
        Ok(Some(phi.smooth))
    }
}

/// Result of peeling the exceptional set at level p.
#[derive(Clone, Debug)]
pub struct PeelResult<T> {
    /// Removed member indices (into the input family), ascending.
    pub exceptional: Vec<usize>,
    /// Certificate that the remaining members are p-covered.
    pub cover: Distribution<T>,
    /// ℓ∞ value of the first min-ℓ∞ smooth distribution; `None` when the
    /// family was already p-covered and nothing was peeled.
    pub tau_star: Option<T>,
    /// Entropy of that first smooth distribution, in bits.
    pub entropy_bits: f64,
    pub p: T,
    /// LP rounds executed; the theory needs one, ties can force more.
    pub rounds: usize,
}

/// Peel members until the remainder is p-covered.
///
/// Each round solves for the p-smooth distribution ν* with the smallest
/// maximum mass τ* and removes the members attaining τ*. In exact arithmetic
/// one round suffices for families of nonempty sets; float ties and empty
/// members are handled by iterating until the cover certificate verifies.
pub fn peel_exceptional<T: CoverScalar>(fam: &SetFamily, p: f64) -> Result<PeelResult<T>, CoverError> {
    let pt = validated_level::<T>(p)?;
    let mut alive: Vec<usize> = (0..fam.len()).collect();
    let mut exceptional: Vec<usize> = Vec::new();
    let mut first_tau: Option<T> = None;
    let mut first_entropy = 0.0;
    let mut rounds = 0usize;

    loop {
        let sub = subfamily(fam, &alive);
        let phi = phi_value::<T>(&sub);
        if phi.value >= pt {
            exceptional.sort_unstable();
            debug_assert!(phi.cover.covers(&sub, &pt));
            return Ok(PeelResult {
                exceptional,
                cover: phi.cover,
                tau_star: first_tau,
                entropy_bits: first_entropy,
                p: pt,
                rounds,
            });
        }
        let Some((tau, nu)) = min_linf_smooth::<T>(&sub, &pt) else {
            // Defensive: the LP disagreed with the Φ comparison inside float
            // tolerance. Treat as covered with the Φ certificate.
            exceptional.sort_unstable();
            return Ok(PeelResult {
                exceptional,
                cover: phi.cover,
                tau_star: first_tau,
                entropy_bits: first_entropy,
                p: pt,
                rounds,
            });
        };
        rounds += 1;
        if first_tau.is_none() {
            first_tau = Some(tau.clone());
            first_entropy = nu.entropy_bits();
        }
        let tie_floor = tie_threshold(&tau);
        let peeled: Vec<usize> = nu
            .weights
            .iter()
            .filter(|(_, w)| *w >= tie_floor)
            .map(|(t, _)| alive[*t])
            .collect();
        debug_assert!(!peeled.is_empty(), "tie set at the maximum is nonempty");
        exceptional.extend(peeled.iter().copied());
        let drop: std::collections::HashSet<usize> = peeled.into_iter().collect();
        alive.retain(|i| !drop.contains(i));
    }
}

/// Min-ℓ∞ p-smooth distribution: minimize τ subject to ν p-smooth, ν_T ≤ τ.
/// Returns `None` when no p-smooth distribution exists.
fn min_linf_smooth<T: CoverScalar>(
    fam: &SetFamily,
    p: &T,
) -> Option<(T, FamilyDistribution<T>)> {
    let m = fam.len();
    if m == 0 {
        return None;
    }
    let supp: Vec<usize> = fam.support().to_vec();
    let mut obj = vec![T::zero(); m + 1];
    obj[m] = T::one();
    let mut lp = LinearProgram::minimize(obj);
    for &i in &supp {
        let mut row = vec![T::zero(); m + 1];
        for (t, member) in fam.members().iter().enumerate() {
            if member.contains(i) {
                row[t] = T::one();
            }
        }
        lp.constraint(row, Cmp::Le, p.clone());
    }
    let mut norm = vec![T::one(); m + 1];
    norm[m] = T::zero();
    lp.constraint(norm, Cmp::Eq, T::one());
    for t in 0..m {
        let mut row = vec![T::zero(); m + 1];
        row[t] = T::one();
        row[m] = -T::one();
        lp.constraint(row, Cmp::Le, T::zero());
    }
    match lp.solve() {
        LpOutcome::Optimal { value, solution } => {
            let nu = FamilyDistribution {
                weights: (0..m)
                    .filter(|&t| !solution[t].is_zero())
                    .map(|t| (t, solution[t].clone()))
                    .collect(),
            };
            Some((value, nu))
        }
        _ => None,
    }
}

/// In float mode members within relative 1e-9 of τ* count as ties; in exact
/// mode only exact maximizers do.
fn tie_threshold<T: CoverScalar>(tau: &T) -> T {
    let slack = T::tol();
    if slack.is_zero() {
        tau.clone()
    } else {
        tau.clone() - tau.clone() * T::from_f64_lossless(1e-9)
    }
}

fn subfamily(fam: &SetFamily, alive: &[usize]) -> SetFamily {
    SetFamily::from_sets(fam.n(), alive.iter().map(|&i| fam.members()[i].clone()))
}

fn validated_level<T: CoverScalar>(p: f64) -> Result<T, CoverError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CoverError::InvalidLevel(p));
    }
    Ok(T::from_f64_lossless(p))
}

/// `φ(p) = p·log₂(1/p)`, extended by 0 at p = 0.
pub fn phi_p(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Cover level for a target entropy rate: `p = a / (4·log₂(4/a))`, which
/// guarantees `φ(p) ≤ a` for `a ∈ (0, 1/4]`.
pub fn choose_p(a: f64) -> Result<f64, CoverError> {
    if !(a > 0.0 && a <= 0.25) {
        return Err(CoverError::InvalidTarget(a));
    }
    Ok(a / (4.0 * (4.0 / a).log2()))
}

/// Entropy budget `B·k·log₂(n/k)·φ(p)`.
pub fn h_bound(n: usize, k: usize, p: f64, b: f64) -> Result<f64, CoverError> {
    if n < k || k < 1 || b <= 0.0 {
        return Err(CoverError::InvalidBudgetArgs { n, k, b });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(CoverError::InvalidLevel(p));
    }
    Ok(b * k as f64 * (n as f64 / k as f64).log2() * phi_p(p))
}

/// Measured ratio `H(D) / (φ(p)·log₂|U(fam)|)`.
///
/// The ratio estimates a constant that the theory leaves unspecified, so it
/// is reported as a diagnostic and never checked against a threshold.
#[derive(Clone, Debug)]
pub struct AmplificationReport {
    pub entropy_bits: f64,
    pub phi_p: f64,
    pub log2_union_size: f64,
    pub ratio: f64,
}

pub fn amplification_diagnostic<T: CoverScalar>(
    fam: &SetFamily,
    d: &FamilyDistribution<T>,
    p: f64,
    union_cap: usize,
) -> Result<AmplificationReport, CoverError> {
    let u = crate::setfam::union_closure(fam, union_cap)?;
    let h = d.entropy_bits();
    let fp = phi_p(p);
    let lu = (u.len() as f64).log2();
    let denom = fp * lu;
    let ratio = if denom > 0.0 { h / denom } else { 0.0 };
    Ok(AmplificationReport {
        entropy_bits: h,
        phi_p: fp,
        log2_union_size: lu,
        ratio,
    })
}
