//! Cross-module invariants, checked on random inputs against independent oracles.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dbx_core::classify::{classify_base_pair, classify_pair, periodic_pair_words};
use dbx_core::dimension::{
    box_count, empirical_eps, sample_family_pair, sample_rng, separation_check, solve_samples, Family,
    FamilyParams,
};
use dbx_core::exec::Exec;
use dbx_core::expand::{pi_raw, run_algorithm, BasePair, Mode, Region};
use dbx_core::ineq::{eval_s, SeriesInput};
use dbx_core::phimap::{g_tilde_mu, phi_forward, phi_inverse, PhiInverse, SolveConfig};
use dbx_core::real::{Hp, Rational, Real};
use dbx_core::seqcore::{EpSeq, Word};

fn seq(max_pre: usize, max_per: usize) -> impl Strategy<Value = EpSeq> {
    (
        proptest::collection::vec(0u8..2, 0..=max_pre),
        proptest::collection::vec(0u8..2, 1..=max_per),
    )
        .prop_map(|(pre, per)| EpSeq::new(Word::new(pre).unwrap(), Word::new(per).unwrap()).unwrap())
}

/// Rational base pair strictly inside B, as hundredths.
fn b_pair() -> impl Strategy<Value = (Rational, Rational)> {
    (105i64..=290, 105i64..=290)
        .prop_filter("in B", |&(a, b)| a * b < 100 * (a + b))
        .prop_map(|(a, b)| (Rational::from_parts(a.into(), 100u32.into()), Rational::from_parts(b.into(), 100u32.into())))
}

/// All digit strings of length `depth` that extend to an expansion of `x`.
fn all_prefixes(q: &BasePair<Rational>, x: &Rational, depth: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == depth {
        out.push(prefix.clone());
        return;
    }
    let top = (q.q1().clone() - Rational::ONE).recip();
    for d in 0..=1u8 {
        let next = q.q(d).clone() * x.clone() - Rational::from(d);
        if next >= Rational::ZERO && next <= top {
            prefix.push(d);
            all_prefixes(q, &next, depth, prefix, out);
            prefix.pop();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_and_lazy_are_the_extreme_expansions((q0, q1) in b_pair(), num in 0u32..=1000) {
        let q = BasePair::new(q0, q1.clone()).unwrap();
        let top = (q1 - Rational::ONE).recip();
        let x = top * Rational::from_parts(num.into(), 1000u32.into());
        let depth = 12;
        let mut all = Vec::new();
        all_prefixes(&q, &x, depth, &mut Vec::new(), &mut all);
        let run = |m| run_algorithm(&q, &x, m, depth).unwrap().digits.into_digits();
        let (g, qg, l, ql) = (run(Mode::Greedy), run(Mode::QuasiGreedy), run(Mode::Lazy), run(Mode::QuasiLazy));
        prop_assert_eq!(&g, all.iter().max().unwrap());
        prop_assert_eq!(&l, all.iter().min().unwrap());
        prop_assert!(all.contains(&qg) && all.contains(&ql));
        prop_assert!(qg <= g && ql >= l);
    }

    #[test]
    fn tilde_value_is_the_swapped_conjugate(a in seq(5, 6), (q0, q1) in b_pair()) {
        let (x, y) = (q0.to_f64().value(), q1.to_f64().value());
        let direct = pi_raw(&x, &y, &a, true);
        let swapped = pi_raw(&y, &x, &a.conjugate(), false);
        prop_assert!((direct - swapped).abs() <= 64.0 * f64::EPSILON * direct.abs().max(1.0));
    }

    #[test]
    fn conjugate_symmetry_of_v2(mu in seq(3, 5), alpha in seq(3, 5)) {
        let a = classify_pair(&mu, &alpha).in_v2_prime.verdict;
        let b = classify_pair(&alpha.conjugate(), &mu.conjugate()).in_v2_prime.verdict;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn isolated_points_have_the_periodic_form(mu in seq(2, 6), alpha in seq(2, 6)) {
        let c = classify_pair(&mu, &alpha);
        if c.in_v2_prime.is_yes() && !c.in_closure_u2_prime.is_yes() {
            let (u, v) = periodic_pair_words(&mu, &alpha).expect("V'2 minus closure without (u, v)");
            prop_assert_eq!(EpSeq::periodic(u.concat(&v)).unwrap(), mu);
            prop_assert_eq!(EpSeq::periodic(v.concat(&u)).unwrap(), alpha);
        }
    }
}

#[test]
fn forward_is_monotone_in_the_bases() {
    // (q0, q1) <= (q0', q1') componentwise moves μ down and α up
    let cases = [((1.3, 1.5), (1.35, 1.55)), ((1.8, 1.7), (1.8, 1.75)), ((2.4, 1.4), (2.45, 1.4)), ((1.2, 3.0), (1.21, 3.2))];
    for ((a0, a1), (b0, b1)) in cases {
        let p = BasePair::new(a0, a1).unwrap();
        let q = BasePair::new(b0, b1).unwrap();
        assert_eq!((p.region(), q.region()), (Region::B, Region::B));
        let (f, g) = (phi_forward(&p, 40).unwrap(), phi_forward(&q, 40).unwrap());
        let c = f.certified.min(g.certified);
        assert!(g.mu.prefix(c) <= f.mu.prefix(c), "({a0}, {a1}) -> ({b0}, {b1})");
        assert!(g.alpha.prefix(c) >= f.alpha.prefix(c), "({a0}, {a1}) -> ({b0}, {b1})");
    }
}

#[test]
fn inner_mu_root_decreases_in_q0() {
    let cfg = SolveConfig::default();
    for i in 0..10 {
        let (mu, _) = sample_family_pair(2 + i % 2, 3, &mut sample_rng(21, i)).unwrap();
        let roots: Vec<f64> = [1.4, 1.6, 1.8, 2.0].iter().map(|&q0| g_tilde_mu(&mu, &q0, &cfg).unwrap().root).collect();
        assert!(roots.windows(2).all(|w| w[0] > w[1]), "{mu}: {roots:?}");
    }
}

#[test]
fn diagonal_pairs_approach_two() {
    let cfg = SolveConfig::default();
    let mut last = 0.0;
    for k in 1..=10 {
        let alpha: EpSeq = format!("(1{}0)*", "1".repeat(k)).parse().unwrap();
        let r: PhiInverse<f64> = phi_inverse(&alpha.conjugate(), &alpha, &cfg).unwrap();
        assert!((r.q0 - r.q1).abs() < 1e-9);
        assert!(r.q0 > last && r.q0 < 2.0);
        last = r.q0;
    }
    assert!(2.0 - last < 1e-3);
}

#[test]
fn base_classification_matches_symbols() {
    let pairs = [("0001(01)*", "1110(10)*"), ("(01)*", "(10)*"), ("(0001)*", "1110(10)*"), ("(001)*", "(110)*"), ("0(011)*", "(110)*")];
    for (m, a) in pairs {
        let (mu, alpha): (EpSeq, EpSeq) = (m.parse().unwrap(), a.parse().unwrap());
        let sym = classify_pair(&mu, &alpha);
        let inv: PhiInverse<Hp> = phi_inverse(&mu, &alpha, &SolveConfig { root_tol: 1e-30, ..SolveConfig::default() }).unwrap();
        let c = classify_base_pair(&inv.base_pair().unwrap(), 64, &SolveConfig::default()).unwrap();
        assert_eq!(c.recognised.as_ref().map(|r| (r.0.clone(), r.1.clone())), Some((mu.clone(), alpha.clone())), "{m} {a}");
        assert_eq!(c.in_u2, sym.in_u2_prime.verdict, "{m} {a}");
        assert_eq!(c.in_v2, sym.in_v2_prime.verdict, "{m} {a}");
        assert_eq!(c.in_closure_u2, sym.in_closure_u2_prime.verdict, "{m} {a}");
    }
}

#[test]
fn samples_respect_the_sandwich_bounds() {
    for n in [2, 3, 4] {
        let lower: EpSeq = format!("{}1(0)*", "0".repeat(2 * n - 2)).parse().unwrap();
        let upper: EpSeq = format!("{}0(1)*", "1".repeat(2 * n - 2)).parse().unwrap();
        for i in 0..50 {
            let (mu, alpha) = sample_family_pair(n, 4, &mut sample_rng(22, i)).unwrap();
            assert!(mu < lower && alpha > upper);
            for t in mu.distinct_tails().iter().skip(1) {
                assert!(*t > lower, "{mu}: tail {t}");
            }
            for t in alpha.distinct_tails().iter().skip(1) {
                assert!(*t < upper, "{alpha}: tail {t}");
            }
        }
    }
}

#[test]
fn excess_over_two_by_block_length() {
    let eps = |n| {
        let p = FamilyParams { n, depth_blocks: 4, family: Family::Full };
        let s = solve_samples(&p, 2000, 23, Exec::Parallel).unwrap();
        assert!(s.iter().all(|s| s.q0 > 1.0 && s.q1 > 1.0));
        empirical_eps(&s)
    };
    let e: Vec<f64> = (2..=6).map(eps).collect();
    assert_eq!(e[0], 0.0);
    assert!(e[2] > e[3] && e[3] > e[4], "{e:?}");
}

#[test]
fn box_counts_grow_as_scales_shrink() {
    let p = FamilyParams { n: 3, depth_blocks: 4, family: Family::Full };
    let pts: Vec<(f64, f64)> = solve_samples(&p, 1000, 24, Exec::Parallel).unwrap().iter().map(|s| (s.q0, s.q1)).collect();
    let counts: Vec<usize> = (2..14).map(|k| box_count(&pts, 2f64.powi(-k))).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
}

#[test]
fn overstated_separation_fails() {
    let p = FamilyParams { n: 3, depth_blocks: 4, family: Family::Full };
    let s = solve_samples(&p, 40, 25, Exec::Parallel).unwrap();
    let eps = empirical_eps(&s);
    let failures = s.chunks(2).filter(|c| !separation_check(&c[0], &c[1], 3, eps, 10).unwrap().holds).count();
    assert!(failures >= 15, "{failures}");
    assert!(separation_check(&s[0], &s[0], 3, eps, 0).unwrap().holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn series_enclosures_shrink_and_nest(
        x in 1.2f64..4.0,
        y in 1.2f64..4.0,
        n in proptest::collection::vec(0u8..6, 1..6),
        nt in proptest::collection::vec(0u8..6, 1..6),
    ) {
        let sorted = |v: Vec<u8>| { let mut v: Vec<f64> = v.into_iter().map(f64::from).collect(); v.sort_by(f64::total_cmp); v };
        let input = SeriesInput::new(x, y, sorted(n), sorted(nt)).unwrap();
        let small = eval_s(&input, 40).unwrap();
        let big = eval_s(&input, 80).unwrap();
        let slack = 1e-15 * small.width().max(1.0);
        prop_assert!(big.width() <= small.width() + slack);
        prop_assert!(big.lower >= small.lower - slack && big.upper <= small.upper + slack);
        let sw = eval_s(&input.swapped(), 80).unwrap();
        prop_assert!((sw.lower - big.lower).abs() <= 1e-12 * big.width().max(1.0));
        prop_assert!((sw.upper - big.upper).abs() <= 1e-12 * big.width().max(1.0));
        if !input.both_constant() {
            prop_assert!(big.upper > 0.0);
        }
    }
}

#[test]
fn sample_streams_do_not_interfere() {
    // sampling with the same seed gives the same pair regardless of other draws
    let a = sample_family_pair(3, 5, &mut sample_rng(9, 4)).unwrap();
    let mut other = ChaCha8Rng::seed_from_u64(1);
    let _ = sample_family_pair(3, 5, &mut other).unwrap();
    assert_eq!(a, sample_family_pair(3, 5, &mut sample_rng(9, 4)).unwrap());
}
