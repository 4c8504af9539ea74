//! Acceptance gate: ten numbered end-to-end checks, each printing a single
//! PASS/FAIL line with its measurements before asserting. Every randomized
//! check runs from a fixed seed.

use moonflower::bits::CoordSet;
use moonflower::cover::{choose_p, phi_value};
use moonflower::oracle::{
    chernoff_montecarlo, mf_bruteforce, min_sparsifier_bruteforce, nrd_bruteforce, OracleBudget,
};
use moonflower::puncture::{one_step_reduce, ReductionConfig};
use moonflower::setfam::{
    binomial, gen_lower_bound_family, mf_exact, union_closure, vc_dimension, SetFamily,
};
use moonflower::sparsify::{
    audit_error_budget, build_sparsifier, certify_lower_bound, chernoff_bound, gen_chain_code,
    ChainVerdict, Code, Sparsifier, SparsifierConfig,
};
use num::{BigRational, BigUint, FromPrimitive, One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const SEED: u64 = 0x6d6f_6f6e;

fn report(number: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number:02} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn random_family(rng: &mut ChaCha8Rng, max_n: usize, max_members: usize) -> SetFamily {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_members);
    let mut sets = Vec::with_capacity(m);
    for _ in 0..m {
        let mut s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.35)).collect();
        if s.is_empty() {
            s.push(rng.gen_range(0..n));
        }
        sets.push(s);
    }
    SetFamily::from_index_sets(n, &sets)
}

#[test]
fn criterion_01_generator_size_and_exhaustive_value() {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let mut failures = Vec::new();
    let mut cases = 0;
    for k in 2..=5usize {
        for w in 1..=4usize {
            let members = binomial(k + w - 2, w);
            if members.to_u64().is_none_or(|v| v > 70) {
                continue;
            }
            cases += 1;
            let fam = gen_lower_bound_family(k, w, 1000).expect("generator within budget");
            if members.to_usize() != Some(fam.len()) {
                failures.push(format!("({k},{w}) size {} != {members}", fam.len()));
            }
            match mf_bruteforce(&fam, &budget) {
                Ok(r) if r.value == k - 1 => {}
                Ok(r) => failures.push(format!("({k},{w}) value {} != {}", r.value, k - 1)),
                Err(e) => failures.push(format!("({k},{w}) oracle error: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 10.0;
    report(
        1,
        "generator size = binomial, exhaustive value = k-1",
        pass,
        &format!("cases={cases} failures={failures:?} elapsed={elapsed:.2?} (cap 10s)"),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_02_nonredundancy_equals_moonflower_number() {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let trials = 200;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let n = rng.gen_range(1..=14usize);
        let m = rng.gen_range(1..=10usize);
        let mut words = Vec::with_capacity(m);
        for _ in 0..m {
            words.push((0..n).filter(|_| rng.gen_bool(0.3)).collect::<Vec<_>>());
        }
        let code = Code::from_supports(n, words).expect("coordinates in range");
        let nrd = nrd_bruteforce(&code, &budget).expect("within budget");
        let fam = code.support_family();
        let mf = mf_bruteforce(&fam, &budget).expect("within budget");
        let (fast, _) = mf_exact(&fam, 1 << 22).expect("within budget");
        if nrd.value != mf.value || mf.value != fast {
            failures.push(format!(
                "trial {trial}: nrd={} mf_oracle={} mf_exact={fast}",
                nrd.value, mf.value
            ));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 60.0;
    report(
        2,
        "exhaustive non-redundancy = exhaustive MF = fast MF",
        pass,
        &format!("trials={trials} failures={failures:?} elapsed={elapsed:.2?} (cap 60s)"),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_03_exact_duality_and_float_agreement() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let trials = 500;
    let mut failures = Vec::new();
    let mut worst_gap = 0.0f64;
    for trial in 0..trials {
        let fam = random_family(&mut rng, 10, 10);
        let exact = phi_value::<BigRational>(&fam);
        let primal = fam
            .members()
            .iter()
            .map(|s| exact.cover.mass_on(s))
            .min()
            .expect("nonempty family");
        let dual = exact.smooth.max_coordinate_hit(&fam);
        if primal != exact.value || dual != exact.value {
            failures.push(format!("trial {trial}: primal/dual mismatch"));
        }
        let float = phi_value::<f64>(&fam);
        let gap = (float.value - exact.value.to_f64().unwrap()).abs();
        worst_gap = worst_gap.max(gap);
        if !(gap < 1e-9) {
            failures.push(format!("trial {trial}: float gap {gap:.3e}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 60.0;
    report(
        3,
        "rational primal = rational dual, float gap < 1e-9",
        pass,
        &format!(
            "trials={trials} worst_float_gap={worst_gap:.3e} failures={failures:?} elapsed={elapsed:.2?} (cap 60s)"
        ),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_04_peeling_certificate_and_entropy_count() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3); // same families as criterion 3
    let mut p_rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let trials = 500;
    let mut failures = Vec::new();
    let mut ran = 0;
    let mut skipped = 0;
    for trial in 0..trials {
        let fam = random_family(&mut rng, 10, 10);
        let phi = phi_value::<f64>(&fam).value;
        if phi >= 1.0 - 1e-9 {
            skipped += 1; // no p strictly between the game value and 1
            continue;
        }
        let u: f64 = p_rng.gen_range(0.05..0.95);
        let p = phi + (1.0 - phi) * u;
        ran += 1;
        let peel = match moonflower::cover::peel_exceptional::<BigRational>(&fam, p) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("trial {trial}: peel error {e}"));
                continue;
            }
        };
        let p_exact = BigRational::from_float(p).unwrap();
        let remainder = fam.without_members(&peel.exceptional);
        if !peel.cover.covers(&remainder, &p_exact) {
            failures.push(format!("trial {trial}: remainder not certified covered"));
        }
        if let Some(tau) = &peel.tau_star {
            let s = BigRational::from_usize(peel.exceptional.len()).unwrap();
            if &s * tau > BigRational::one() {
                failures.push(format!("trial {trial}: |S|*tau > 1"));
            }
            let min_mass = BigRational::new(1.into(), (fam.len() as i64).into());
            if tau < &min_mass {
                failures.push(format!("trial {trial}: tau below 1/|F|"));
            }
        } else if !peel.exceptional.is_empty() {
            failures.push(format!("trial {trial}: peeled without tau"));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 60.0;
    report(
        4,
        "peeled remainder certified covered, |S|·tau ≤ 1, tau ≥ 1/|F|",
        pass,
        &format!(
            "ran={ran} skipped_at_value_1={skipped} failures={failures:?} elapsed={elapsed:.2?} (cap 60s)"
        ),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_05_potential_decay_rate() {
    let start = Instant::now();
    let fam = gen_lower_bound_family(4, 3, 1000).expect("fixture");
    let p = choose_p(0.25).expect("valid level");
    let trials = 200u64;
    let mut histories = Vec::new();
    for trial in 0..trials {
        let cfg = ReductionConfig::new(p, 1.0 / 16.0)
            .with_seed(SEED.wrapping_add(trial))
            .with_retries(1);
        let trace = one_step_reduce(&fam, &cfg, 1.0).expect("fixture config valid");
        histories.push(trace.potential_history);
    }
    let target = 1.0 - p / 2.0;
    let mut failures = Vec::new();
    let mut step = 0usize;
    let mut steps_checked = 0;
    loop {
        let ratios: Vec<f64> = histories
            .iter()
            .filter(|h| h.len() > step + 1 && h[step] > 0.0)
            .map(|h| h[step + 1] / h[step])
            .collect();
        if ratios.len() < 50 {
            break;
        }
        steps_checked += 1;
        let m = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / m;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m;
        let sigma = (var / m).sqrt();
        if mean > target + 3.0 * sigma {
            failures.push(format!(
                "step {step}: mean {mean:.6} > {target:.6} + 3*{sigma:.2e} over {} trials",
                ratios.len()
            ));
        }
        step += 1;
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && steps_checked > 0 && elapsed.as_secs_f64() < 300.0;
    report(
        5,
        "mean per-step potential ratio ≤ 1 - p/2 + 3σ",
        pass,
        &format!(
            "trials={trials} steps_checked={steps_checked} target={target:.6} failures={failures:?} elapsed={elapsed:.2?} (cap 5min)"
        ),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_06_reduction_attains_covering_bound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let mut fixtures: Vec<(String, SetFamily)> = vec![
        ("gen(3,2)".into(), gen_lower_bound_family(3, 2, 1000).unwrap()),
        ("gen(4,2)".into(), gen_lower_bound_family(4, 2, 1000).unwrap()),
        ("gen(4,3)".into(), gen_lower_bound_family(4, 3, 1000).unwrap()),
        ("gen(5,2)".into(), gen_lower_bound_family(5, 2, 1000).unwrap()),
        ("gen(3,3)".into(), gen_lower_bound_family(3, 3, 1000).unwrap()),
        (
            "singletons(8)".into(),
            SetFamily::from_index_sets(8, &(0..8).map(|i| vec![i]).collect::<Vec<_>>()),
        ),
    ];
    for i in 0..4 {
        fixtures.push((format!("random[{i}]"), random_family(&mut rng, 12, 10)));
    }
    let p = choose_p(0.25).expect("valid level");
    let mut failures = Vec::new();
    for (tag, fam) in &fixtures {
        let cfg = ReductionConfig::new(p, 1.0 / 16.0).with_seed(SEED).with_retries(50);
        match one_step_reduce(fam, &cfg, 1.0) {
            Ok(trace) => {
                if !trace.attained_bound {
                    failures.push(format!(
                        "{tag}: best covered {} of {} under the bound",
                        trace.covered_count, trace.family_size
                    ));
                }
                if trace.steps > trace.t_budget {
                    failures.push(format!("{tag}: |I| {} > t {}", trace.steps, trace.t_budget));
                }
            }
            Err(e) => failures.push(format!("{tag}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 300.0;
    report(
        6,
        "some retry covers ≥ (1-δ)|F| - t·M_measured with |I| ≤ t",
        pass,
        &format!(
            "fixtures={} failures={failures:?} elapsed={elapsed:.2?} (cap 5min)",
            fixtures.len()
        ),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

/// Code with non-redundancy at most 6 by construction: six disjoint atom
/// sets, each word a union of a random nonempty subset of atoms (a private
/// coordinate for a word must come from an atom no other chosen word uses,
/// so at most six words can hold one simultaneously).
fn random_low_nrd_code(rng: &mut ChaCha8Rng, n: usize) -> Code {
    let block = n / 6;
    let mut atoms: Vec<Vec<usize>> = Vec::with_capacity(6);
    for b in 0..6 {
        let lo = b * block;
        let mut atom: Vec<usize> =
            (lo..lo + block).filter(|_| rng.gen_bool(0.25)).collect();
        if atom.is_empty() {
            atom.push(lo);
        }
        atoms.push(atom);
    }
    let m = rng.gen_range(2..=64usize);
    let mut words = Vec::with_capacity(m);
    for _ in 0..m {
        let mut pick: Vec<usize> = (0..6).filter(|_| rng.gen_bool(0.5)).collect();
        if pick.is_empty() {
            pick.push(rng.gen_range(0..6));
        }
        let mut word: Vec<usize> = pick.iter().flat_map(|&b| atoms[b].iter().copied()).collect();
        word.sort_unstable();
        words.push(word);
    }
    Code::from_supports(n, words).expect("valid construction")
}

#[test]
fn criterion_07_sparsifier_end_to_end() {
    let start = Instant::now();
    let n = 4096;
    let mut fixtures: Vec<(String, Code)> = vec![
        (
            "unit_vectors".into(),
            Code::from_supports(n, (0..8).map(|i| vec![i * (n / 8)]).collect::<Vec<_>>()).unwrap(),
        ),
        ("all_ones".into(), Code::from_supports(n, vec![(0..n).collect::<Vec<_>>()]).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    for i in 0..20 {
        fixtures.push((format!("random[{i}]"), random_low_nrd_code(&mut rng, 2048)));
    }
    let mut failures = Vec::new();
    let mut sizes = Vec::new();
    for (tag, code) in &fixtures {
        let (mf, _) = mf_exact(&code.support_family(), 1 << 22).expect("small family");
        if mf > 6 && tag.starts_with("random") {
            failures.push(format!("{tag}: fixture NRD {mf} > 6"));
            continue;
        }
        let mut cfg = SparsifierConfig::new(0.25);
        cfg.seed = SEED;
        cfg.max_build_retries = 10;
        match build_sparsifier(code, &cfg, None) {
            Ok((sp, log)) => {
                if !log.verify.pass {
                    failures.push(format!("{tag}: verify failed"));
                }
                let audit = audit_error_budget(&log);
                if !audit.ok {
                    failures.push(format!(
                        "{tag}: audit worst eps sum {:.3e} over cap",
                        audit.worst_eps_sum
                    ));
                }
                sizes.push(format!("{tag}:|T|={} c={:.2}", sp.t_size(), log.t_fitted_constant));
            }
            Err(e) => failures.push(format!("{tag}: build failed: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 600.0;
    report(
        7,
        "builds verify within 10 retries, audit within ε/25",
        pass,
        &format!(
            "fixtures={} sizes_reported=[{}] failures={failures:?} elapsed={elapsed:.2?} (cap 10min)",
            fixtures.len(),
            sizes.join(", ")
        ),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_08_chain_code_lower_bound() {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let (code, spec) = gen_chain_code(8, 2, 0.5).expect("chain fixture");
    let threshold = spec.k * spec.s; // 4
    let mut failures = Vec::new();

    let nrd = nrd_bruteforce(&code, &budget).expect("within budget");
    if nrd.value != 2 {
        failures.push(format!("non-redundancy {} != 2", nrd.value));
    }

    let identity = Sparsifier::identity(8);
    if !matches!(certify_lower_bound(&spec, &identity, 0.5), ChainVerdict::Consistent { .. }) {
        failures.push("identity key set rejected".into());
    }

    let support: Vec<usize> = {
        let mut s = CoordSet::new(8);
        for w in code.words() {
            s.union_with(w);
        }
        s.to_vec()
    };
    let mut tested = 0;
    for mask in 0u32..(1u32 << support.len()) {
        if (mask.count_ones() as usize) >= threshold {
            continue;
        }
        let picks: Vec<(usize, u32)> = support
            .iter()
            .enumerate()
            .filter(|(pos, _)| mask >> pos & 1 == 1)
            .map(|(_, &c)| (c, 0))
            .collect();
        let sp = Sparsifier::from_rounds(8, 0, picks).unwrap();
        tested += 1;
        if !matches!(certify_lower_bound(&spec, &sp, 0.5), ChainVerdict::Invalid { .. }) {
            failures.push(format!("key set below threshold accepted (mask {mask:04b})"));
        }
    }

    let min_sp = min_sparsifier_bruteforce(&code, 0.5, &budget).expect("within budget");
    if min_sp.size < threshold {
        failures.push(format!(
            "enumerated minimum key set has size {} < k·s = {threshold} (witness T={:?}, α={:?})",
            min_sp.size,
            min_sp.coords,
            min_sp.alpha.iter().map(|r| format!("{r}")).collect::<Vec<_>>()
        ));
    }

    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 120.0;
    report(
        8,
        "chain code: NRD = 2, enumerated minimum ≥ k·s, certifier sound",
        pass,
        &format!(
            "sub_threshold_tested={tested} failures={failures:?} elapsed={elapsed:.2?} (cap 2min)"
        ),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_09_binomial_tail_under_bound() {
    let start = Instant::now();
    let trials = 100_000u64;
    let mut failures = Vec::new();
    let mut checked = 0;
    for (i, &t) in [4u64, 16, 64, 256].iter().enumerate() {
        for (j, mult) in [1.0f64, 2.0, 4.0].iter().enumerate() {
            let delta = mult * (t as f64).sqrt();
            let bound = chernoff_bound(t as f64, delta);
            if bound >= 1.0 {
                continue;
            }
            checked += 1;
            let est = chernoff_montecarlo(t, delta, trials, SEED ^ ((i as u64) << 8 | j as u64));
            if est.empirical > bound {
                failures.push(format!(
                    "t={t} delta={delta:.1}: empirical {:.5} > bound {bound:.5}",
                    est.empirical
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 120.0;
    report(
        9,
        "empirical tail ≤ 2·exp(-Δ²/3t) where bound < 1",
        pass,
        &format!(
            "grid_points_checked={checked} trials={trials} failures={failures:?} elapsed={elapsed:.2?} (cap 2min)"
        ),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}

#[test]
fn criterion_10_structural_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 10);
    let trials = 1000;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let fam = random_family(&mut rng, 8, 8);
        let (mf, _) = mf_exact(&fam, 1 << 22).expect("small family");
        let w = fam.max_set_size();

        // Projection cannot create new structure and keeps enough members.
        let keep: Vec<usize> = (0..fam.n()).filter(|_| rng.gen_bool(0.5)).collect();
        let i_set = CoordSet::from_indices(fam.n(), keep.iter().copied());
        let proj = fam.project(&i_set);
        let (mf_proj, _) = mf_exact(&proj, 1 << 22).expect("small family");
        if mf_proj > mf {
            failures.push(format!("trial {trial}: projection raised MF {mf} -> {mf_proj}"));
        }
        let outside = fam.n() - i_set.len();
        if (proj.len() as u128) << outside < fam.len() as u128 {
            failures.push(format!(
                "trial {trial}: |F_I| {} < |F|/2^{outside} of {}",
                proj.len(),
                fam.len()
            ));
        }

        if fam.support_size() > mf * w {
            failures.push(format!(
                "trial {trial}: support {} > MF·w = {mf}·{w}",
                fam.support_size()
            ));
        }

        let closure = union_closure(&fam, 1 << 16).expect("small closure");
        let vc = vc_dimension(&closure, 1 << 16).expect("small closure");
        if vc > mf {
            failures.push(format!("trial {trial}: VC {vc} > MF {mf}"));
        }
        let s = closure.support_size();
        let ss_bound: BigUint = (0..=vc.min(s)).map(|i| binomial(s, i)).sum();
        if BigUint::from(closure.len()) > ss_bound {
            failures.push(format!(
                "trial {trial}: |closure| {} above shattering bound {ss_bound}",
                closure.len()
            ));
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 300.0;
    report(
        10,
        "projection/counting/VC structural invariants",
        pass,
        &format!("trials={trials} failures={failures:?} elapsed={elapsed:.2?} (cap 5min)"),
    );
    assert!(pass, "failures: {failures:?}, elapsed {elapsed:?}");
}
