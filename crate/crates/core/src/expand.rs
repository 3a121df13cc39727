//! Base pairs, the value map, and the four digit-selection algorithms.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::seqcore::{EpSeq, Word};
use crate::tri::Tri;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    /// `q0 + q1 > q0 q1`: the digit intervals overlap.
    B,
    /// `q0 + q1 = q0 q1`.
    C,
    Outside,
}

/// Pair of bases `q0, q1 > 1`. `radius` bounds how far the stored values may be
/// from the intended ones (0 when they are taken as exact).
#[derive(Clone, Debug)]
pub struct BasePair<R> {
    q0: R,
    q1: R,
    region: Region,
    radius: f64,
}

impl<R: Real> BasePair<R> {
    pub fn new(q0: R, q1: R) -> Result<Self> {
        let one = q0.lift(1.0);
        if q0 <= one || q1 <= one {
            return Err(Error::Precondition(format!(
                "bases must exceed 1, got q0={:?} q1={:?}",
                q0.to_f64(),
                q1.to_f64()
            )));
        }
        let region = region_of(&q0, &q1);
        Ok(BasePair { q0, q1, region, radius: 0.0 })
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius.max(0.0);
        self
    }

    pub fn q0(&self) -> &R {
        &self.q0
    }

    pub fn q1(&self) -> &R {
        &self.q1
    }

    pub fn q(&self, d: u8) -> &R {
        if d == 0 {
            &self.q0
        } else {
            &self.q1
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.q0.to_f64(), self.q1.to_f64())
    }

    fn require_b_or_c(&self, what: &str) -> Result<()> {
        if self.region == Region::Outside {
            return Err(Error::Precondition(format!(
                "{what} needs q0 + q1 >= q0 q1, got ({}, {})",
                self.q0.to_f64(),
                self.q1.to_f64()
            )));
        }
        Ok(())
    }
}

/// Region test; floating inputs within `2^-64 max(1, q0 q1)` of the curve count as C.
pub fn region_of<R: Real>(q0: &R, q1: &R) -> Region {
    let p = q0.clone() * q1.clone();
    let diff = q0.clone() + q1.clone() - p.clone();
    let tol = if q0.is_exact() {
        0.0
    } else {
        2f64.powi(-64) * p.to_f64().max(1.0)
    };
    if diff.abs().to_f64() <= tol && (tol > 0.0 || diff == q0.lift(0.0)) {
        Region::C
    } else if diff.is_negative() {
        Region::Outside
    } else {
        Region::B
    }
}

/// `π` (or `π̃` when `tilde`) of an eventually periodic sequence, without a region check.
/// Requires the period discount to be below 1.
pub fn pi_raw<R: Real>(q0: &R, q1: &R, a: &EpSeq, tilde: bool) -> R {
    let inv = [q0.recip(), q1.recip()];
    let zero = q0.lift(0.0);
    let one = q0.lift(1.0);
    let num = |d: u8| if (d == 1) != tilde { one.clone() } else { zero.clone() };
    let mut val = zero.clone();
    let mut disc = one.clone();
    for &d in a.per_digits() {
        disc = disc * inv[d as usize].clone();
        if (d == 1) != tilde {
            val = val + disc.clone();
        }
    }
    let mut v = val / (one.clone() - disc);
    for &d in a.pre_digits().iter().rev() {
        v = (num(d) + v) * inv[d as usize].clone();
    }
    v
}

pub fn pi_eval<R: Real>(q: &BasePair<R>, a: &EpSeq) -> Result<R> {
    q.require_b_or_c("pi")?;
    Ok(pi_raw(&q.q0, &q.q1, a, false))
}

/// Value with numerators `1 - x_k`.
pub fn pi_tilde_eval<R: Real>(q: &BasePair<R>, a: &EpSeq) -> Result<R> {
    q.require_b_or_c("pi tilde")?;
    Ok(pi_raw(&q.q0, &q.q1, a, true))
}

/// Value of a finite word followed by zeros, and its discount `∏ 1/q_{w_i}`.
pub fn pi_word<R: Real>(q: &BasePair<R>, w: &Word) -> (R, R) {
    let mut val = q.q0.lift(0.0);
    let mut disc = q.q0.lift(1.0);
    for &d in w.digits() {
        disc = disc / q.q(d).clone();
        if d == 1 {
            val = val + disc.clone();
        }
    }
    (val, disc)
}

/// `(ℓ, r)` with `ℓ = q1/(q0(q1-1)) - 1` and `r = q0/q1`.
pub fn critical_points<R: Real>(q: &BasePair<R>) -> Result<(R, R)> {
    q.require_b_or_c("critical points")?;
    let one = q.q0.lift(1.0);
    let ell = q.q1.clone() / (q.q0.clone() * (q.q1.clone() - one.clone())) - one;
    let r = q.q0.clone() / q.q1.clone();
    Ok((ell, r))
}

/// Sum of `|∂/∂q0| + |∂/∂q1|` for ℓ and r.
fn critical_sensitivity(q0: f64, q1: f64) -> (f64, f64) {
    let ell = q1 / (q0 * q0 * (q1 - 1.0)) + 1.0 / (q0 * (q1 - 1.0) * (q1 - 1.0));
    let r = 1.0 / q1 + q0 / (q1 * q1);
    (ell, r)
}

/// Largest value any expansion can take, `1/(q1-1)`.
pub fn max_value<R: Real>(q: &BasePair<R>) -> R {
    (q.q1.clone() - q.q1.lift(1.0)).recip()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Greedy,
    QuasiGreedy,
    Lazy,
    QuasiLazy,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "greedy" => Ok(Mode::Greedy),
            "quasi-greedy" => Ok(Mode::QuasiGreedy),
            "lazy" => Ok(Mode::Lazy),
            "quasi-lazy" => Ok(Mode::QuasiLazy),
            _ => Err(Error::Parse(format!("unknown mode \"{s}\""))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExpansionRun<R> {
    pub digits: Word,
    pub mode: Mode,
    /// Bounds on `x` minus the value of the emitted digits.
    pub residual_lo: R,
    pub residual_hi: R,
    /// Number of leading digits whose selection was decided beyond rounding error.
    pub certified_depth: usize,
}

/// Runs a digit-selection algorithm for `x` over `depth` steps.
///
/// When a comparison margin is within its error bound the step is treated as an
/// exact tie and resolved by the literal inequality; certification stops there.
pub fn run_algorithm<R: Real>(
    q: &BasePair<R>,
    x: &R,
    mode: Mode,
    depth: usize,
) -> Result<ExpansionRun<R>> {
    run_with_uncertainty(q, x, 0.0, mode, depth)
}

/// As [`run_algorithm`], with `x_sens` the sensitivity of `x` to the bases,
/// scaled by the pair's radius in the error bound.
pub(crate) fn run_with_uncertainty<R: Real>(
    q: &BasePair<R>,
    x: &R,
    x_sens: f64,
    mode: Mode,
    depth: usize,
) -> Result<ExpansionRun<R>> {
    q.require_b_or_c("digit algorithms")?;
    let u = x.unit_roundoff();
    let zero = x.lift(0.0);
    let xmax = max_value(q);
    let slack = x.lift(16.0 * u * xmax.to_f64());
    if *x < zero.clone() - slack.clone() || *x > xmax.clone() + slack {
        return Err(Error::Precondition(format!(
            "x = {} is outside [0, 1/(q1-1)] = [0, {}]",
            x.to_f64(),
            xmax.to_f64()
        )));
    }
    let inv0 = q.q0.recip();
    let inv1 = q.q1.recip();
    let inv_tail = inv0.clone() / (q.q1.clone() - x.lift(1.0));
    let (q0f, q1f) = q.to_f64();
    let qmin = q0f.min(q1f);
    let xf = x.to_f64().abs();
    let radius = q.radius;

    let mut digits = Word::empty();
    let mut partial = zero.clone();
    let mut disc = x.lift(1.0);
    // running bounds, all in f64: absolute error of `partial`, relative error of
    // `disc`, and sensitivity of `partial` to the bases
    let mut err_partial = 0.0f64;
    let mut rel_disc = 0.0f64;
    let mut sens_partial = 0.0f64;
    let mut certified = None;

    for k in 0..depth {
        let greedy_side = matches!(mode, Mode::Greedy | Mode::QuasiGreedy);
        let (term, term_rel, term_sens_extra) = if greedy_side {
            (disc.clone() * inv1.clone(), rel_disc + 2.0 * u, 0.0)
        } else {
            let t = disc.clone() * inv_tail.clone();
            let tf = t.to_f64().abs();
            (t, rel_disc + 5.0 * u, tf / (q1f - 1.0))
        };
        let cand = partial.clone() + term.clone();
        let margin = if greedy_side {
            x.clone() - cand.clone()
        } else {
            cand.clone() - x.clone()
        };
        let tf = term.to_f64().abs();
        let mf = margin.to_f64();
        let err = err_partial + tf * term_rel + (cand.to_f64().abs() + mf.abs() + xf) * u;
        let sens = x_sens + sens_partial + tf * (k + 1) as f64 / qmin + term_sens_extra;
        let err = err + 2.0 * radius * sens;
        let tie = err > 0.0 && mf.abs() <= err;
        if tie && certified.is_none() {
            certified = Some(k);
        }
        let d = match mode {
            Mode::Greedy => u8::from(tie || mf >= 0.0),
            Mode::QuasiGreedy => u8::from(!tie && margin > zero),
            Mode::Lazy => u8::from(!(tie || mf >= 0.0)),
            Mode::QuasiLazy => u8::from(tie || margin <= zero),
        };
        digits.push(d);
        let next_disc = disc.clone() * if d == 0 { inv0.clone() } else { inv1.clone() };
        if d == 1 {
            let t = disc.clone() * inv1.clone();
            let tf = t.to_f64().abs();
            partial = partial + t;
            err_partial += tf * (rel_disc + 2.0 * u) + partial.to_f64().abs() * u;
            sens_partial += tf * (k + 1) as f64 / qmin;
        }
        disc = next_disc;
        rel_disc += 2.0 * u;
    }
    let res = x.clone() - partial.clone();
    let rerr = err_partial + (res.to_f64().abs() + xf) * u + 2.0 * radius * (x_sens + sens_partial);
    let rerr = x.lift(rerr);
    Ok(ExpansionRun {
        digits,
        mode,
        residual_lo: res.clone() - rerr.clone(),
        residual_hi: res + rerr,
        certified_depth: certified.unwrap_or(depth),
    })
}

/// Quasi-lazy expansion of ℓ and quasi-greedy expansion of r, with certification depth.
pub(crate) fn critical_expansions<R: Real>(
    q: &BasePair<R>,
    depth: usize,
) -> Result<(ExpansionRun<R>, ExpansionRun<R>)> {
    let (ell, r) = critical_points(q)?;
    let (q0f, q1f) = q.to_f64();
    let (s_ell, s_r) = critical_sensitivity(q0f, q1f);
    let mu = run_with_uncertainty(q, &ell, s_ell, Mode::QuasiLazy, depth)?;
    let alpha = run_with_uncertainty(q, &r, s_r, Mode::QuasiGreedy, depth)?;
    Ok((mu, alpha))
}

/// `(β1..βn^-)^∞` for a finite greedy expansion, identity otherwise.
pub fn quasi_from_greedy(beta: &EpSeq) -> EpSeq {
    if beta.kind() != crate::seqcore::SeqKind::Finite {
        return beta.clone();
    }
    let w = beta.pre().minus().expect("finite sequences end in 1");
    EpSeq::periodic(w).expect("non-empty word")
}

/// `(λ1..λm^+)^∞` for a co-finite lazy expansion, identity otherwise.
pub fn quasi_from_lazy(lambda: &EpSeq) -> EpSeq {
    if lambda.kind() != crate::seqcore::SeqKind::CoFinite {
        return lambda.clone();
    }
    let w = lambda.pre().plus().expect("co-finite sequences end in 0");
    EpSeq::periodic(w).expect("non-empty word")
}

/// A reference sequence known either exactly or through a prefix.
#[derive(Clone, Debug)]
pub enum Known {
    Exact(EpSeq),
    Prefix(Word),
}

impl Known {
    /// Ordering of `t` against the reference, if decidable.
    pub fn cmp_from(&self, t: &EpSeq) -> Option<Ordering> {
        match self {
            Known::Exact(e) => Some(t.cmp(e)),
            Known::Prefix(w) => t.compare_prefix(w),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Known::Exact(_) => usize::MAX,
            Known::Prefix(w) => w.len(),
        }
    }
}

/// Lexicographic uniqueness test: `μ ≺ σ^m(x)` whenever `x_m = 1` and
/// `σ^m(x) ≺ α` whenever `x_m = 0`, for all `m ≥ 1`.
pub fn is_unique_expansion(x: &EpSeq, mu: &Known, alpha: &Known) -> Tri {
    let n = x.pre_digits().len() + x.per_digits().len();
    let mut verdict = Tri::Yes;
    for m in 1..=n {
        let tail = x.shift(m);
        let (refseq, want) = if x.digit(m) == 1 {
            (mu, Ordering::Greater)
        } else {
            (alpha, Ordering::Less)
        };
        match refseq.cmp_from(&tail) {
            Some(o) if o == want => {}
            Some(_) => return Tri::No,
            None => verdict = verdict.and(Tri::Unknown(refseq.depth())),
        }
    }
    verdict
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitVerdict {
    pub verdict: Tri,
    /// Smallest `n` with `π(σ^n x)` certainly inside the switch region.
    pub first_visit: Option<usize>,
}

/// Checks that no point `π(σ^n x)`, n ≥ 0, falls in `[1/q1, 1/(q0(q1-1))]`.
pub fn orbit_uniqueness_check<R: Real>(q: &BasePair<R>, x: &EpSeq) -> Result<OrbitVerdict> {
    q.require_b_or_c("orbit check")?;
    let one = q.q0.lift(1.0);
    let lo = q.q1.recip();
    let hi = (q.q0.clone() * (q.q1.clone() - one)).recip();
    let n = x.pre_digits().len() + x.per_digits().len();
    let u = lo.unit_roundoff();
    let mut first_visit = None;
    let mut unknown = false;
    for k in 0..n {
        let v = pi_raw(&q.q0, &q.q1, &x.shift(k), false);
        let tol = v.lift(8.0 * (n + 8) as f64 * u * (v.to_f64().abs() + hi.to_f64()));
        let tol = tol + v.lift(4.0 * q.radius * (n + 2) as f64 * v.to_f64().abs().max(1.0));
        let certainly_in = v.clone() - tol.clone() >= lo && v.clone() + tol.clone() <= hi;
        let certainly_out = v.clone() + tol.clone() < lo || v.clone() - tol > hi;
        if certainly_in {
            first_visit = Some(k);
            break;
        }
        if !certainly_out {
            unknown = true;
        }
    }
    let verdict = match (first_visit, unknown) {
        (Some(_), _) => Tri::No,
        (None, true) => Tri::Unknown(n),
        (None, false) => Tri::Yes,
    };
    Ok(OrbitVerdict { verdict, first_visit })
}
