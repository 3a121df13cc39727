//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use dashu_int::UBig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dbx_core::classify::{classify_base_pair, classify_pair, perturbation_stability_probe};
use dbx_core::dimension::{
    admissible_blocks, block_count, dyadic_scales, empirical_eps, estimate_dimension, family_pair,
    sample_family_pair, sample_rng, separation_check, Family, FamilyParams, Solved,
};
use dbx_core::exec::Exec;
use dbx_core::expand::{is_unique_expansion, orbit_uniqueness_check, pi_eval, BasePair, Known, Region};
use dbx_core::ineq::{eval_s_to_tol, random_sequence, series_at_solution, SeriesInput, DEFAULT_PRECISION};
use dbx_core::phimap::{phi_forward, phi_inverse, phi_inverse_for_depth, PhiInverse, SolveConfig};
use dbx_core::real::{parse_rational, Hp, Rational, Real};
use dbx_core::seqcore::{EpSeq, Word};
use dbx_core::tri::Tri;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn s(x: &str) -> EpSeq {
    x.parse().unwrap()
}

fn rat(x: &str) -> Rational {
    parse_rational(x).unwrap()
}

fn random_word<R: Rng>(rng: &mut R, len: usize) -> Word {
    Word::new((0..len).map(|_| rng.gen_range(0..=1u8)).collect()).unwrap()
}

fn random_seq<R: Rng>(rng: &mut R, max_pre: usize, max_per: usize) -> EpSeq {
    let pre = rng.gen_range(0..=max_pre);
    let per = rng.gen_range(1..=max_per);
    EpSeq::new(random_word(rng, pre), random_word(rng, per)).unwrap()
}

/// Rejection-samples a pair in B'.
fn random_b_prime<R: Rng>(rng: &mut R, max_pre: usize, max_per: usize) -> (EpSeq, EpSeq) {
    loop {
        let mu = random_seq(rng, max_pre, max_per);
        let alpha = random_seq(rng, max_pre, max_per);
        if classify_pair(&mu, &alpha).in_b_prime.is_yes() {
            return (mu, alpha);
        }
    }
}

/// Random rational pair strictly inside B.
fn random_b_pair<R: Rng>(rng: &mut R) -> (Rational, Rational) {
    loop {
        let a: i64 = rng.gen_range(105..=290);
        let b: i64 = rng.gen_range(105..=290);
        let (q0, q1) = (Rational::from_parts(a.into(), 100u32.into()), Rational::from_parts(b.into(), 100u32.into()));
        if BasePair::new(q0.clone(), q1.clone()).unwrap().region() == Region::B {
            return (q0, q1);
        }
    }
}

fn residuals_ok<R: Real>(r: &PhiInverse<R>) -> bool {
    r.residual_f < 1e-12 && r.residual_f_tilde < 1e-12
}

fn golden_ratio() -> Outcome {
    let t = Instant::now();
    let r: PhiInverse<Hp> = phi_inverse(&s("(01)*"), &s("(10)*"), &SolveConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed().as_secs_f64();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let (d0, d1) = ((r.q0.to_f64() - phi).abs(), (r.q1.to_f64() - phi).abs());
    check(d0 < 1e-10 && d1 < 1e-10, || format!("|q - φ| = ({d0:e}, {d1:e})"))?;
    check(residuals_ok(&r), || format!("residuals {:e}, {:e}", r.residual_f, r.residual_f_tilde))?;
    check(elapsed < 1.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("|q0 - φ| = {d0:.1e}, |q1 - φ| = {d1:.1e}, {elapsed:.3} s"))
}

fn non_monotone() -> Outcome {
    let cfg = SolveConfig::default();
    let a: PhiInverse<Hp> = phi_inverse(&s("(00101)*"), &s("(11100)*"), &cfg).map_err(|e| e.to_string())?;
    let b: PhiInverse<Hp> = phi_inverse(&s("(00100101)*"), &s("(1110)*"), &cfg).map_err(|e| e.to_string())?;
    let d0 = b.q0.to_f64() - a.q0.to_f64();
    let d1 = a.q1.to_f64() - b.q1.to_f64();
    check(d0 > 1e-9 && d1 > 1e-9, || format!("q0' - q0 = {d0:e}, q1 - q1' = {d1:e}"))?;
    check(residuals_ok(&a) && residuals_ok(&b), || "residual above 1e-12".into())?;
    Ok(format!("q0' - q0 = {d0:.4}, q1 - q1' = {d1:.4}"))
}

fn round_trip() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SolveConfig::default();
    let mut min_cert = usize::MAX;
    for i in 0..50 {
        let (mu, alpha) = random_b_prime(&mut rng, 4, 8);
        let inv = phi_inverse_for_depth(&mu, &alpha, 48, &cfg).map_err(|e| format!("{mu} {alpha}: {e}"))?;
        check(residuals_ok(&inv), || format!("pair {i} ({mu}, {alpha}): residual above 1e-12"))?;
        let f = phi_forward(&inv.base_pair().map_err(|e| e.to_string())?, 48).map_err(|e| e.to_string())?;
        check(f.mu == mu.prefix(48) && f.alpha == alpha.prefix(48), || {
            format!("pair {i} ({mu}, {alpha}) came back as ({}, {})", f.mu, f.alpha)
        })?;
        min_cert = min_cert.min(f.certified);
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(elapsed < 60.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!("50/50 pairs reproduce 48 digits (min certified {min_cert}), {elapsed:.1} s"))
}

fn boundary_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (q0, q1) = random_b_pair(&mut rng);
        let exact = BasePair::new(q0.clone(), q1.clone()).unwrap();
        let zero = pi_eval(&exact, &EpSeq::zeros()).unwrap();
        check(zero == Rational::ZERO, || format!("π(0^∞) = {zero} at ({q0}, {q1})"))?;
        let top = pi_eval(&exact, &EpSeq::ones()).unwrap();
        let want = (q1.clone() - Rational::ONE).recip();
        check(top == want, || format!("π(1^∞) = {top} at ({q0}, {q1})"))?;
        let p = 128;
        let hp = BasePair::new(Hp::from_ratio_prec(&q0, p), Hp::from_ratio_prec(&q1, p)).unwrap();
        let err = (pi_eval(&hp, &EpSeq::ones()).unwrap() - Hp::from_ratio_prec(&want, p)).abs().to_f64();
        check(err < 1e-15, || format!("|π(1^∞) - 1/(q1-1)| = {err:e} at ({q0}, {q1})"))?;
    }
    Ok("20 pairs: exact identities, 128-bit error < 1e-15; residuals checked in 1-3".into())
}

/// Number of distinct length-`depth` prefixes over all expansions of `x`.
fn expansion_prefixes(q: &BasePair<Rational>, x: &Rational, depth: usize) -> usize {
    let top = (q.q1().clone() - Rational::ONE).recip();
    if depth == 0 {
        return 1;
    }
    let mut n = 0;
    for d in 0..=1u8 {
        let next = q.q(d).clone() * x.clone() - Rational::from(d);
        if next >= Rational::ZERO && next <= top {
            n += expansion_prefixes(q, &next, depth - 1);
        }
    }
    n
}

fn uniqueness_oracle() -> Outcome {
    let q = BasePair::new(rat("2"), rat("3/2")).unwrap();
    let class = classify_base_pair(&q, 64, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let (mu, alpha) = class.recognised.ok_or("Φ(2, 3/2) was not recognised as eventually periodic")?;
    let (km, ka) = (Known::Exact(mu), Known::Exact(alpha));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let depth = 14;
    let (mut unique, mut branching) = (0, 0);
    for _ in 0..100 {
        let x = random_seq(&mut rng, 4, 6);
        let v = pi_eval(&q, &x).unwrap();
        let count = expansion_prefixes(&q, &v, depth);
        let lex = is_unique_expansion(&x, &km, &ka);
        let orbit = orbit_uniqueness_check(&q, &x).map_err(|e| e.to_string())?;
        check(lex == orbit.verdict, || format!("{x}: lexicographic {lex}, orbit {}", orbit.verdict))?;
        let expect_branch = match (orbit.verdict, orbit.first_visit) {
            (Tri::Yes, _) => false,
            (Tri::No, Some(k)) => k < depth,
            _ => return Err(format!("{x}: undecided verdict in exact arithmetic")),
        };
        check((count > 1) == expect_branch, || {
            format!("{x}: {count} prefixes of length {depth}, verdict {}, first visit {:?}", orbit.verdict, orbit.first_visit)
        })?;
        if orbit.verdict == Tri::Yes {
            unique += 1;
        }
        if count > 1 {
            branching += 1;
        }
    }
    Ok(format!("100 strings agree ({unique} unique, {branching} branch within {depth} digits)"))
}

fn classifier_nesting() -> Outcome {
    let pc = classify_pair(&s("(01)*"), &s("(10)*"));
    check(pc.in_v2_prime.verdict == Tri::Yes, || "((01)*, (10)*) not in V'2".into())?;
    check(pc.in_closure_u2_prime.verdict == Tri::No, || "((01)*, (10)*) in the closure".into())?;
    let (u, v) = pc.isolated_uv.clone().ok_or("no periodic (u, v) witness")?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut u2, mut clo, mut v2) = (0, 0, 0);
    for _ in 0..1000 {
        let c = classify_pair(&random_seq(&mut rng, 4, 6), &random_seq(&mut rng, 4, 6));
        let (a, b, d) = (c.in_u2_prime.verdict, c.in_closure_u2_prime.verdict, c.in_v2_prime.verdict);
        check(a != Tri::Yes || b == Tri::Yes, || "U'2 member outside the closure".into())?;
        check(b != Tri::Yes || d == Tri::Yes, || "closure member outside V'2".into())?;
        u2 += a.is_yes() as usize;
        clo += b.is_yes() as usize;
        v2 += d.is_yes() as usize;
    }
    Ok(format!("witness (u, v) = ({u}, {v}); 1000 pairs: {u2} in U'2, {clo} in closure, {v2} in V'2"))
}

/// Words of `blocks * n` digits that start with `lead^{2n-1}(1-lead)` and
/// continue with blocks strictly between `0^n` and `1^n`.
fn enumerate_prefixes(n: usize, blocks: usize, lead: u64) -> Vec<u64> {
    let len = n * blocks;
    let mask = (1u64 << n) - 1;
    (0..1u64 << len)
        .filter(|&w| {
            let block = |i: usize| (w >> (len - (i + 1) * n)) & mask;
            let header = (w >> (len - 2 * n)) & ((1 << (2 * n)) - 1);
            let want = if lead == 1 { (1 << (2 * n)) - 2 } else { 1 };
            header == want && (2..blocks).all(|i| block(i) != 0 && block(i) != mask)
        })
        .collect()
}

fn block_counts() -> Outcome {
    let mut checked = 0;
    for n_block in [2usize, 3] {
        for n in 2..=4usize {
            let alphas = enumerate_prefixes(n_block, n, 1);
            let mus = enumerate_prefixes(n_block, n, 0);
            for k in 2..=n {
                let (all, fixed) = block_count(n_block, n, k).map_err(|e| e.to_string())?;
                let brute_all = UBig::from(mus.len()) * UBig::from(alphas.len());
                // prefixes agreeing with the first enumerated pair on k blocks
                let shift = n_block * (n - k);
                let same = |v: &[u64]| v.iter().filter(|&&w| w >> shift == v[0] >> shift).count();
                let brute_fixed = UBig::from(same(&mus)) * UBig::from(same(&alphas));
                check(all == brute_all && fixed == brute_fixed, || {
                    format!("N={n_block} n={n} k={k}: formula ({all}, {fixed}), enumeration ({brute_all}, {brute_fixed})")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (N, n, k) cases equal exhaustive enumeration"))
}

fn inequality_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut widest: f64 = 0.0;
    for _ in 0..50 {
        let (x, y) = (rng.gen_range(1.1..4.0), rng.gen_range(1.1..4.0));
        let (c, ct) = (rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0));
        let input = SeriesInput::new(x, y, vec![c], vec![ct]).map_err(|e| e.to_string())?;
        let v = eval_s_to_tol(&input, 1e-11, DEFAULT_PRECISION).map_err(|e| e.to_string())?;
        check(v.contains(0.0) && v.width() < 1e-9, || format!("({x}, {y}, {c}, {ct}): [{}, {}]", v.lower, v.upper))?;
        widest = widest.max(v.width());
    }
    let mut min_lower = f64::INFINITY;
    let mut done = 0;
    while done < 1000 {
        let (x, y) = (rng.gen_range(1.1..4.0), rng.gen_range(1.1..4.0));
        let input = SeriesInput::new(x, y, random_sequence(&mut rng), random_sequence(&mut rng)).map_err(|e| e.to_string())?;
        if input.both_constant() {
            continue;
        }
        let mut tol = 1e-10;
        let mut v = eval_s_to_tol(&input, tol, DEFAULT_PRECISION).map_err(|e| e.to_string())?;
        while v.lower <= 0.0 && tol > 1e-40 {
            tol *= 1e-6;
            v = eval_s_to_tol(&input, tol, DEFAULT_PRECISION).map_err(|e| e.to_string())?;
        }
        check(v.lower > 0.0, || format!("not certified positive: {input:?} gives [{}, {}]", v.lower, v.upper))?;
        min_lower = min_lower.min(v.lower);
        done += 1;
    }
    let cfg = SolveConfig::default();
    let mut min_run = f64::INFINITY;
    for i in 0..20 {
        let n = 2 + i % 2;
        let (mu, alpha) = sample_family_pair(n, 3, &mut sample_rng(9, i)).map_err(|e| e.to_string())?;
        let r = series_at_solution(&mu, &alpha, &cfg).map_err(|e| format!("{mu} {alpha}: {e}"))?;
        check(r.value.lower > 0.0, || format!("run-length series at ({mu}, {alpha}) has lower {}", r.value.lower))?;
        min_run = min_run.min(r.value.lower);
    }
    Ok(format!(
        "50 constant enclosures contain 0 (widest {widest:.1e}); 1000 non-constant, min lower {min_lower:.2e}; 20 run-length pairs, min lower {min_run:.2e}"
    ))
}

fn solve(mu: EpSeq, alpha: EpSeq) -> Result<Solved, String> {
    let r: PhiInverse<f64> = phi_inverse(&mu, &alpha, &SolveConfig::default()).map_err(|e| format!("{mu} {alpha}: {e}"))?;
    Ok(Solved { mu, alpha, q0: r.q0, q1: r.q1, radius: r.radius })
}

/// A random family pair with `depth` free blocks, and a second one sharing its
/// header and first `j` blocks.
fn neighbour_pairs(n: usize, depth: usize, rng: &mut ChaCha8Rng) -> Result<(Solved, Solved), String> {
    let blocks = admissible_blocks(n);
    let mut pick = |k: usize| -> Vec<Word> { (0..k).map(|_| blocks[rng.gen_range(0..blocks.len())].clone()).collect() };
    let (mb, ab) = (pick(depth + 1), pick(depth + 1));
    let (mb2, ab2) = (pick(depth + 1), pick(depth + 1));
    let j = rng.gen_range(0..=depth);
    let splice = |a: &[Word], b: &[Word]| -> Vec<Word> { a[..j].iter().chain(&b[j..]).cloned().collect() };
    let (mb2, ab2) = (splice(&mb, &mb2), splice(&ab, &ab2));
    let (mu, alpha) = family_pair(n, &mb[..depth], &ab[..depth], &mb[depth], &ab[depth]).map_err(|e| e.to_string())?;
    let (mu2, alpha2) = family_pair(n, &mb2[..depth], &ab2[..depth], &mb2[depth], &ab2[depth]).map_err(|e| e.to_string())?;
    Ok((solve(mu, alpha)?, solve(mu2, alpha2)?))
}

fn separation() -> Outcome {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pairs = (0..200).map(|_| neighbour_pairs(n, 6, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    let all: Vec<Solved> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let eps = empirical_eps(&all);
    let (mut nontrivial, mut max_checked) = (0, 0);
    for (a, b) in &pairs {
        let r = separation_check(a, b, n, eps, 0).map_err(|e| e.to_string())?;
        check(r.holds, || {
            format!("({}, {}) vs ({}, {}): m = {}, first disagreement {:?}", a.mu, a.alpha, b.mu, b.alpha, r.m, r.first_disagreement)
        })?;
        nontrivial += (r.checked > 0) as usize;
        max_checked = max_checked.max(r.checked);
    }
    Ok(format!("200 pairs, ε(3) = {eps:.3}, {nontrivial} with m > 0 (up to {max_checked} digits checked), 0 violations"))
}

fn dimension_trend() -> Outcome {
    let t = Instant::now();
    let scales = dyadic_scales(4, 12);
    let run = |n: usize, family: Family| {
        estimate_dimension(&FamilyParams { n, depth_blocks: 6, family }, 10_000, &scales, 11, Exec::Parallel)
            .map_err(|e| e.to_string())
    };
    let d2 = run(2, Family::Full)?;
    let d3 = run(3, Family::Full)?;
    let gap = run(3, Family::Gap)?;
    let summary = format!(
        "slope N=2 {:.3} (bound {:.3}), N=3 {:.3} (bound {:.3}, ε {:.3}), gap N=3 {:.3}, {:.0} s",
        d2.slope,
        d2.bound,
        d3.slope,
        d3.bound,
        d3.eps_n,
        gap.slope,
        t.elapsed().as_secs_f64()
    );
    check(d3.slope > d2.slope, || summary.clone())?;
    check(d3.slope >= 1.2, || summary.clone())?;
    check(d2.slope >= d2.bound - 0.2 && d3.slope >= d3.bound - 0.2, || summary.clone())?;
    check(gap.slope >= 0.7, || summary.clone())?;
    check(t.elapsed().as_secs() < 600, || summary.clone())?;
    Ok(summary)
}

fn perturbation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut report = Vec::new();
    for i in 0..10 {
        let (q0, q1) = random_b_pair(&mut rng);
        let p = 128;
        let q = BasePair::new(Hp::from_ratio_prec(&q0, p), Hp::from_ratio_prec(&q1, p)).unwrap();
        let mut last = 0;
        for eps in [1e-4, 1e-7, 1e-10] {
            let probe = perturbation_stability_probe(&q, eps, 40, 8, i).map_err(|e| e.to_string())?;
            check(probe.min_agreement >= last, || {
                format!("({q0}, {q1}): agreement {} at eps {eps:e} after {last}", probe.min_agreement)
            })?;
            last = probe.min_agreement;
        }
        report.push(last);
    }
    Ok(format!("10 pairs, agreement at eps 1e-10: {report:?}"))
}

fn main() {
    let criteria: [Check; 11] = [
        ("golden-ratio fixed point", golden_ratio),
        ("non-monotone inverse", non_monotone),
        ("round trip at 48 digits", round_trip),
        ("boundary identities", boundary_identities),
        ("uniqueness oracle equivalence", uniqueness_oracle),
        ("classifier nesting", classifier_nesting),
        ("block counts", block_counts),
        ("series positivity", inequality_suite),
        ("digit separation", separation),
        ("dimension trend", dimension_trend),
        ("perturbation stability", perturbation),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
