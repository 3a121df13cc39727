//! Membership in the symbolic sets and in their images under the inverse map.

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expand::{critical_points, run_algorithm, BasePair, Mode, Region};
use crate::phimap::{phi_forward, phi_inverse, SolveConfig};
use crate::real::Real;
use crate::seqcore::{EpSeq, SeqKind, Word};
use crate::tri::Tri;

/// Reason a predicate failed, e.g. `sigma^2(mu) < mu`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness(pub String);

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub verdict: Tri,
    pub witness: Option<Witness>,
}

impl Verdict {
    fn yes() -> Self {
        Verdict { verdict: Tri::Yes, witness: None }
    }

    fn no(w: impl Into<String>) -> Self {
        Verdict { verdict: Tri::No, witness: Some(Witness(w.into())) }
    }

    fn unknown(depth: usize) -> Self {
        Verdict { verdict: Tri::Unknown(depth), witness: None }
    }

    pub fn is_yes(&self) -> bool {
        self.verdict.is_yes()
    }
}

fn name(seq: &str, m: usize) -> String {
    if m == 0 {
        seq.to_string()
    } else {
        format!("sigma^{m}({seq})")
    }
}

fn rel(o: Ordering) -> &'static str {
    match o {
        Ordering::Less => "<",
        Ordering::Equal => "=",
        Ordering::Greater => ">",
    }
}

fn span(a: &EpSeq) -> usize {
    a.pre_digits().len() + a.per_digits().len()
}

/// First shift `m` in `from..=span` whose tail compared with `target` is not in `ok`.
fn first_violation(
    seq: &EpSeq,
    seq_name: &str,
    target: &EpSeq,
    target_name: &str,
    from: usize,
    ok: &[Ordering],
) -> Option<Witness> {
    (from..=span(seq)).find_map(|m| {
        let o = seq.shift(m).cmp(target);
        (!ok.contains(&o)).then(|| {
            Witness(format!("{} {} {}", name(seq_name, m), rel(o), target_name))
        })
    })
}

fn check_starts(mu: &EpSeq, alpha: &EpSeq) -> Option<Verdict> {
    if mu.digit(1) != 0 {
        return Some(Verdict::no("mu must start with 0"));
    }
    if alpha.digit(1) != 1 {
        return Some(Verdict::no("alpha must start with 1"));
    }
    None
}

pub fn in_c_prime(mu: &EpSeq, alpha: &EpSeq) -> Verdict {
    if mu.is_zeros() {
        return Verdict::no("mu = 0^inf").flip();
    }
    if mu.kind() == SeqKind::CoFinite {
        return Verdict::no("mu is co-finite").flip();
    }
    if alpha.is_ones() {
        return Verdict::no("alpha = 1^inf").flip();
    }
    if alpha.kind() == SeqKind::Finite {
        return Verdict::no("alpha is finite").flip();
    }
    Verdict::no("mu is neither 0^inf nor co-finite and alpha is neither 1^inf nor finite")
}

impl Verdict {
    /// Same witness, opposite verdict.
    fn flip(mut self) -> Self {
        self.verdict = self.verdict.not();
        self
    }
}

use Ordering::{Equal, Greater, Less};

pub fn in_b_prime(mu: &EpSeq, alpha: &EpSeq) -> Verdict {
    if let Some(v) = check_starts(mu, alpha) {
        return v;
    }
    let c = in_c_prime(mu, alpha);
    if c.is_yes() {
        return Verdict::no(format!("in C': {}", c.witness.unwrap()));
    }
    first_violation(mu, "mu", mu, "mu", 1, &[Greater, Equal])
        .or_else(|| first_violation(alpha, "alpha", alpha, "alpha", 1, &[Less, Equal]))
        .map_or_else(Verdict::yes, |w| Verdict { verdict: Tri::No, witness: Some(w) })
}

/// Strict sandwich `mu < tail < alpha` for every tail of either sequence with shift ≥ 1.
pub fn in_u2_prime(mu: &EpSeq, alpha: &EpSeq) -> Verdict {
    if let Some(v) = check_starts(mu, alpha) {
        return v;
    }
    first_violation(mu, "mu", mu, "mu", 1, &[Greater])
        .or_else(|| first_violation(mu, "mu", alpha, "alpha", 1, &[Less]))
        .or_else(|| first_violation(alpha, "alpha", mu, "mu", 1, &[Greater]))
        .or_else(|| first_violation(alpha, "alpha", alpha, "alpha", 1, &[Less]))
        .map_or_else(Verdict::yes, |w| Verdict { verdict: Tri::No, witness: Some(w) })
}

/// Weak sandwich `mu <= tail <= alpha` for every tail, shifts ≥ 0.
pub fn in_v2_prime(mu: &EpSeq, alpha: &EpSeq) -> Verdict {
    if let Some(v) = check_starts(mu, alpha) {
        return v;
    }
    let weak_up = [Less, Equal];
    let weak_down = [Greater, Equal];
    first_violation(mu, "mu", mu, "mu", 0, &weak_down)
        .or_else(|| first_violation(mu, "mu", alpha, "alpha", 0, &weak_up))
        .or_else(|| first_violation(alpha, "alpha", mu, "mu", 0, &weak_down))
        .or_else(|| first_violation(alpha, "alpha", alpha, "alpha", 0, &weak_up))
        .map_or_else(Verdict::yes, |w| Verdict { verdict: Tri::No, witness: Some(w) })
}

/// Smallest `m ≥ 1` with `σ^m(a) = b`.
fn shift_to(a: &EpSeq, b: &EpSeq) -> Option<usize> {
    (1..=span(a)).find(|&m| a.shift(m) == *b)
}

/// The words `u, v` with `mu = (uv)^∞` and `alpha = (vu)^∞`, when both shift
/// relations hold.
pub fn periodic_pair_words(mu: &EpSeq, alpha: &EpSeq) -> Option<(Word, Word)> {
    let m = shift_to(mu, alpha)?;
    let n = shift_to(alpha, mu)?;
    Some((mu.prefix(m), alpha.prefix(n)))
}

pub fn in_closure_u2_prime(mu: &EpSeq, alpha: &EpSeq) -> Verdict {
    let v = in_v2_prime(mu, alpha);
    if !v.is_yes() {
        return v;
    }
    match periodic_pair_words(mu, alpha) {
        Some((u, w)) => Verdict::no(format!(
            "isolated point: mu = ({u}{w})^inf, alpha = ({w}{u})^inf"
        )),
        None => Verdict::yes(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairClass {
    pub in_b_prime: Verdict,
    pub in_u2_prime: Verdict,
    pub in_v2_prime: Verdict,
    pub in_closure_u2_prime: Verdict,
    /// `(u, v)` when the pair lies in the weak set but not the closure.
    pub isolated_uv: Option<(String, String)>,
}

pub fn classify_pair(mu: &EpSeq, alpha: &EpSeq) -> PairClass {
    let cl = in_closure_u2_prime(mu, alpha);
    let v = in_v2_prime(mu, alpha);
    let isolated_uv = if v.is_yes() && !cl.is_yes() {
        periodic_pair_words(mu, alpha).map(|(u, w)| (u.to_string(), w.to_string()))
    } else {
        None
    };
    PairClass {
        in_b_prime: in_b_prime(mu, alpha),
        in_u2_prime: in_u2_prime(mu, alpha),
        in_v2_prime: v,
        in_closure_u2_prime: cl,
        isolated_uv,
    }
}

/// Tail conditions on finite prefixes: a violation visible inside the prefixes gives
/// `No`, otherwise `Unknown(depth)`.
fn prefix_verdicts(mu: &Word, alpha: &Word) -> (Verdict, Verdict) {
    let depth = mu.len().min(alpha.len());
    let (m, a) = (mu.digits(), alpha.digits());
    let d0 = m.first().copied();
    let d1 = a.first().copied();
    if d0 != Some(0) {
        let v = Verdict::no("mu must start with 0");
        return (v.clone(), v);
    }
    if d1 != Some(1) {
        let v = Verdict::no("alpha must start with 1");
        return (v.clone(), v);
    }
    // compare tail of `x` at shift k with `y`, over digits known on both sides
    let cmp = |x: &[u8], k: usize, y: &[u8]| -> Option<Ordering> {
        let n = (x.len() - k).min(y.len());
        (0..n).map(|i| x[k + i].cmp(&y[i])).find(|o| o.is_ne())
    };
    let mut strict = None;
    let mut weak = None;
    for k in 0..depth {
        let checks = [
            (m, "mu", k, m, "mu", Greater),
            (m, "mu", k, a, "alpha", Less),
            (a, "alpha", k, m, "mu", Greater),
            (a, "alpha", k, a, "alpha", Less),
        ];
        for (x, xn, k, y, yn, want) in checks {
            if let Some(o) = cmp(x, k, y) {
                if o != want {
                    let w = format!("{} {} {}", name(xn, k), rel(o), yn);
                    if k >= 1 && strict.is_none() {
                        strict = Some(w.clone());
                    }
                    if weak.is_none() {
                        weak = Some(w);
                    }
                }
            }
        }
    }
    let to = |w: Option<String>| w.map_or_else(|| Verdict::unknown(depth), Verdict::no);
    (to(strict), to(weak))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BaseClass {
    pub region: Region,
    pub in_u2: Tri,
    pub in_v2: Tri,
    pub in_closure_u2: Tri,
    /// Number of certified digits behind the verdicts (`None` when exact).
    pub certified_depth: Option<usize>,
    /// Eventually periodic pair recognised from the digits and confirmed by solving back.
    pub recognised: Option<(EpSeq, EpSeq)>,
}

/// Classifies a base pair. C is inside all three sets and the complement of
/// `B ∪ C` outside all; in B the verdicts come from the symbolic pair.
pub fn classify_base_pair<R: Real>(q: &BasePair<R>, depth: usize, cfg: &SolveConfig) -> Result<BaseClass> {
    match q.region() {
        Region::C => {
            return Ok(BaseClass {
                region: Region::C,
                in_u2: Tri::Yes,
                in_v2: Tri::Yes,
                in_closure_u2: Tri::Yes,
                certified_depth: None,
                recognised: None,
            })
        }
        Region::Outside => {
            return Ok(BaseClass {
                region: Region::Outside,
                in_u2: Tri::No,
                in_v2: Tri::No,
                in_closure_u2: Tri::No,
                certified_depth: None,
                recognised: None,
            })
        }
        Region::B => {}
    }
    let fw = phi_forward(q, depth)?;
    let c = fw.certified;
    // recognition may use digits past a tie: the solve-back check confirms them
    if let Some((m, a)) = recognise(q, &fw.mu, &fw.alpha, cfg) {
        let pc = classify_pair(&m, &a);
        return Ok(BaseClass {
            region: Region::B,
            in_u2: pc.in_u2_prime.verdict,
            in_v2: pc.in_v2_prime.verdict,
            in_closure_u2: pc.in_closure_u2_prime.verdict,
            certified_depth: Some(c),
            recognised: Some((m, a)),
        });
    }
    let (strict, weak) = prefix_verdicts(&fw.mu.prefix(c), &fw.alpha.prefix(c));
    // the closure differs from the weak set only on periodic pairs, which are
    // recognised above when visible in the prefix
    Ok(BaseClass {
        region: Region::B,
        in_u2: strict.verdict,
        in_v2: weak.verdict,
        in_closure_u2: weak.verdict,
        certified_depth: Some(c),
        recognised: None,
    })
}

/// Looks for a period in the second half of each prefix and confirms the
/// candidate pair by solving it back to the given bases.
fn recognise<R: Real>(q: &BasePair<R>, mu: &Word, alpha: &Word, cfg: &SolveConfig) -> Option<(EpSeq, EpSeq)> {
    let m = detect_period(mu)?;
    let a = detect_period(alpha)?;
    if !in_b_prime(&m, &a).is_yes() {
        return None;
    }
    let inv = phi_inverse::<f64>(&m, &a, &SolveConfig { precision: 53, ..cfg.clone() }).ok()?;
    let (q0, q1) = q.to_f64();
    let tol = cfg.match_tol.max(q.radius());
    ((inv.q0 - q0).abs() <= tol && (inv.q1 - q1).abs() <= tol).then_some((m, a))
}

/// Smallest eventually periodic sequence that reproduces the prefix, with the
/// period repeating at least twice over the second half.
pub fn detect_period(w: &Word) -> Option<EpSeq> {
    let d = w.digits();
    let n = d.len();
    if n < 8 {
        return None;
    }
    let half = n / 2;
    let p = (1..=half / 2).find(|&p| (half..n - p).all(|i| d[i] == d[i + p]))?;
    // earliest start of the periodic part
    let mut s = half;
    while s > 0 && d[s - 1] == d[s - 1 + p] {
        s -= 1;
    }
    let pre = Word::new(d[..s].to_vec()).ok()?;
    let per = Word::new(d[s..s + p].to_vec()).ok()?;
    EpSeq::new(pre, per).ok()
}

/// Indices `n` (1-based, up to `limit`) with `x_n = digit` such that every block
/// `x_{k+1}..x_n` is beyond `x_1..x_{n-k}` in the given direction: above it when
/// `digit = 1`, below it when `digit = 0`.
pub fn cut_indices(x: &EpSeq, digit: u8, limit: usize) -> Vec<usize> {
    let want = if digit == 1 { Greater } else { Less };
    let w = x.prefix(limit);
    let d = w.digits();
    (1..=limit)
        .filter(|&n| {
            d[n - 1] == digit
                && (1..n).all(|k| d[k..n].cmp(&d[..n - k]) == want)
        })
        .collect()
}

fn cut_limit(x: &EpSeq, k: usize) -> usize {
    x.pre_digits().len() + (k + 4) * x.per_digits().len()
}

/// `mu^k = (mu_1..mu_{n_k})(mu_1..mu_{n_{k+1}})^∞` from the cut indices of `mu`,
/// paired with `alpha`.
pub fn build_approximant_u2_prime(mu: &EpSeq, alpha: &EpSeq, k: usize) -> Result<(EpSeq, EpSeq)> {
    if k == 0 {
        return Err(Error::Precondition("approximant index k must be at least 1".into()));
    }
    if !in_v2_prime(mu, alpha).is_yes() {
        return Err(Error::Precondition("pair is not in the weak set V'".into()));
    }
    if let Some(w) = first_violation(mu, "mu", mu, "mu", 1, &[Greater]) {
        return Err(Error::Precondition(format!(
            "approximants need every tail of mu above mu: {w}"
        )));
    }
    let idx = cut_indices(mu, 1, cut_limit(mu, k));
    if idx.len() < k + 1 {
        return Err(Error::Precondition(format!(
            "mu has only {} cut indices, need {}",
            idx.len(),
            k + 1
        )));
    }
    let head = mu.prefix(idx[k - 1]);
    let per = mu.prefix(idx[k]);
    Ok((EpSeq::new(head, per)?, alpha.clone()))
}

/// `mu = (mu_1..mu_n^- alpha_1..alpha_m^+)^∞`, `alpha = (alpha_1..alpha_m^+ mu_1..mu_n^-)^∞`.
pub fn build_v_minus_closure_witness(
    mu: &EpSeq,
    alpha: &EpSeq,
    n: usize,
    m: usize,
) -> Result<(EpSeq, EpSeq)> {
    if n == 0 || m == 0 {
        return Err(Error::Precondition("n and m must be positive".into()));
    }
    if mu.digit(n) != 1 {
        return Err(Error::Precondition(format!("mu_{n} must be 1")));
    }
    if alpha.digit(m) != 0 {
        return Err(Error::Precondition(format!("alpha_{m} must be 0")));
    }
    if !cut_indices(mu, 1, n).contains(&n) {
        return Err(Error::Precondition(format!("{n} is not a cut index of mu")));
    }
    if !cut_indices(alpha, 0, m).contains(&m) {
        return Err(Error::Precondition(format!("{m} is not a cut index of alpha")));
    }
    let u = mu.prefix(n).minus()?;
    let v = alpha.prefix(m).plus()?;
    Ok((EpSeq::periodic(u.concat(&v))?, EpSeq::periodic(v.concat(&u))?))
}

/// B' pairs other than the input that agree with it on at least `depth` digits.
/// Each side is replaced by the periodic truncation (or its `±` variant) with the
/// fewest shared digits beyond `depth`; both single and joint replacements are returned.
pub fn nearby_b_prime_pairs(mu: &EpSeq, alpha: &EpSeq, depth: usize) -> Vec<(EpSeq, EpSeq)> {
    let reach = 2 * (span(mu) + span(alpha)) + 4;
    let pick = |x: &EpSeq, ok: &dyn Fn(&EpSeq) -> bool, bump: fn(&Word) -> Result<Word>| {
        (depth.max(1)..=depth + reach)
            .flat_map(|n| {
                let w = x.prefix(n);
                [Some(w.clone()), bump(&w).ok()]
            })
            .flatten()
            .filter_map(|w| EpSeq::periodic(w).ok())
            .filter(|c| c != x && ok(c))
            .filter_map(|c| {
                let agree = c.first_difference(x)? - 1;
                (agree >= depth).then_some((agree, c))
            })
            .min_by_key(|(agree, _)| *agree)
            .map(|(_, c)| c)
    };
    let m = pick(mu, &|c| in_b_prime(c, alpha).is_yes(), Word::plus);
    let a = pick(alpha, &|c| in_b_prime(mu, c).is_yes(), Word::minus);
    let mut out = Vec::new();
    if let Some(m) = &m {
        out.push((m.clone(), alpha.clone()));
    }
    if let Some(a) = &a {
        out.push((mu.clone(), a.clone()));
    }
    if let (Some(m), Some(a)) = (m, a) {
        if in_b_prime(&m, &a).is_yes() {
            out.push((m, a));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationSample {
    pub q0: f64,
    pub q1: f64,
    /// `greedy` when `α(q') ≻ α(q)` on the computed prefix, else `quasi-greedy`.
    pub r_expansion: Mode,
    pub r_agreement: usize,
    /// `lazy` when `μ(q') ≺ μ(q)` on the computed prefix, else `quasi-lazy`.
    pub l_expansion: Mode,
    pub l_agreement: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityProbe {
    pub eps: f64,
    pub depth: usize,
    pub samples: Vec<PerturbationSample>,
    /// Perturbed pairs that fell outside `B ∪ C`.
    pub skipped: usize,
    pub min_agreement: usize,
}

struct Expansions {
    greedy: Word,
    quasi_greedy: Word,
    lazy: Word,
    quasi_lazy: Word,
    certified: usize,
}

fn expansions<R: Real>(q: &BasePair<R>, depth: usize) -> Result<Expansions> {
    let (ell, r) = critical_points(q)?;
    let runs = [
        run_algorithm(q, &r, Mode::Greedy, depth)?,
        run_algorithm(q, &r, Mode::QuasiGreedy, depth)?,
        run_algorithm(q, &ell, Mode::Lazy, depth)?,
        run_algorithm(q, &ell, Mode::QuasiLazy, depth)?,
    ];
    let certified = runs.iter().map(|r| r.certified_depth).min().unwrap_or(0);
    let [g, qg, l, ql] = runs.map(|r| r.digits);
    Ok(Expansions { greedy: g, quasi_greedy: qg, lazy: l, quasi_lazy: ql, certified })
}

/// Samples pairs within `eps` of `q` in the max metric and measures how long the
/// expansions of r and ℓ stay equal. Which expansion must agree depends on the
/// order of the perturbed quasi-greedy (resp. quasi-lazy) expansion against the
/// original one.
pub fn perturbation_stability_probe<R: Real>(
    q: &BasePair<R>,
    eps: f64,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<StabilityProbe> {
    if q.region() == Region::Outside {
        return Err(Error::Precondition("the base pair must lie in B or C".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::Precondition(format!("eps must be non-negative, got {eps}")));
    }
    let base = expansions(q, depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut skipped = 0;
    for _ in 0..samples {
        let (d0, d1) = if eps > 0.0 { (rng.gen_range(-eps..=eps), rng.gen_range(-eps..=eps)) } else { (0.0, 0.0) };
        let p = BasePair::new(q.q0().clone() + q.q0().lift(d0), q.q1().clone() + q.q1().lift(d1));
        let p = match p {
            Ok(p) if p.region() != Region::Outside => p,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let e = expansions(&p, depth)?;
        let cert = base.certified.min(e.certified);
        let agree = |a: &Word, b: &Word| a.common_prefix(b).min(cert);
        // an order not visible within `depth` digits selects the quasi expansion,
        // which then agrees over the whole prefix
        let (r_expansion, r_agreement) = if e.quasi_greedy.digits() > base.quasi_greedy.digits() {
            (Mode::Greedy, agree(&e.greedy, &base.greedy))
        } else {
            (Mode::QuasiGreedy, agree(&e.quasi_greedy, &base.quasi_greedy))
        };
        let (l_expansion, l_agreement) = if e.quasi_lazy.digits() < base.quasi_lazy.digits() {
            (Mode::Lazy, agree(&e.lazy, &base.lazy))
        } else {
            (Mode::QuasiLazy, agree(&e.quasi_lazy, &base.quasi_lazy))
        };
        let (q0, q1) = p.to_f64();
        out.push(PerturbationSample { q0, q1, r_expansion, r_agreement, l_expansion, l_agreement });
    }
    let min_agreement = out.iter().map(|s| s.r_agreement.min(s.l_agreement)).min().unwrap_or(depth);
    Ok(StabilityProbe { eps, depth, samples: out, skipped, min_agreement })
}
