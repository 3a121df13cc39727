//! Certified enclosures of the double series
//! `S = Σ_k Σ_l (z - kl) / (x^{n_k + l} y^{k + ñ_l})`, `z = xy / ((x-1)(y-1))`,
//! for non-decreasing `(n_k)`, `(ñ_l)`.

use rand::Rng;
use serde::Serialize;

use crate::dimension::sample_rng;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::phimap::{phi_inverse, PhiInverse, SolveConfig};
use crate::real::{Hp, Real};
use crate::seqcore::EpSeq;

/// What the sequences do past the listed values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    /// Repeat the last value forever.
    #[default]
    ConstantExtension,
    /// Unknown, but never below the last value. Only listed terms are summed.
    NonDecreasing,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesInput {
    pub x: f64,
    pub y: f64,
    pub n_seq: Vec<f64>,
    pub ntilde_seq: Vec<f64>,
    pub tail: Tail,
}

impl SeriesInput {
    pub fn new(x: f64, y: f64, n_seq: Vec<f64>, ntilde_seq: Vec<f64>) -> Result<Self> {
        let s = SeriesInput { x, y, n_seq, ntilde_seq, tail: Tail::ConstantExtension };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x > 1.0 && self.y > 1.0) || !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::Precondition(format!("need x, y > 1, got x = {}, y = {}", self.x, self.y)));
        }
        for (name, v) in [("n", &self.n_seq), ("ntilde", &self.ntilde_seq)] {
            if v.is_empty() {
                return Err(Error::Precondition(format!("sequence {name} is empty")));
            }
            if v.iter().any(|t| !t.is_finite()) {
                return Err(Error::Precondition(format!("sequence {name} has a non-finite entry")));
            }
            if let Some(i) = v.windows(2).position(|w| w[1] < w[0]) {
                return Err(Error::Precondition(format!(
                    "sequence {name} decreases at index {}",
                    i + 2
                )));
            }
        }
        Ok(())
    }

    fn is_constant(v: &[f64]) -> bool {
        v.iter().all(|&t| t == v[0])
    }

    /// Both sequences constant, so `S = 0`.
    pub fn both_constant(&self) -> bool {
        self.tail == Tail::ConstantExtension && Self::is_constant(&self.n_seq) && Self::is_constant(&self.ntilde_seq)
    }

    /// The same series with the roles of the two indices exchanged.
    pub fn swapped(&self) -> SeriesInput {
        SeriesInput {
            x: self.y,
            y: self.x,
            n_seq: self.ntilde_seq.clone(),
            ntilde_seq: self.n_seq.clone(),
            tail: self.tail,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesValue {
    pub lower: f64,
    pub upper: f64,
    /// Terms summed in each index.
    pub k_terms: usize,
    pub l_terms: usize,
    /// Bound on the omitted terms.
    pub tail_bound: f64,
}

impl SeriesValue {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

pub const DEFAULT_PRECISION: usize = 128;

/// `base^{-e}` in `Hp`, exact powering for integral `e`.
fn inv_pow(base: &Hp, e: f64) -> Hp {
    if e.fract() == 0.0 && e.abs() < 1e9 {
        let p = base.powi(e.abs() as u32);
        if e >= 0.0 {
            p.recip()
        } else {
            p
        }
    } else {
        base.powf(&base.lift(-e))
    }
}

/// Weights `w_j = s^{-m_j} t^{-j}` for `j = 1..=count`.
fn weights(s: &Hp, t: &Hp, m: &[f64], count: usize) -> Vec<Hp> {
    let last = *m.last().unwrap();
    let tinv = t.recip();
    let mut tp = s.lift(1.0);
    (1..=count)
        .map(|j| {
            tp = tp.clone() * tinv.clone();
            inv_pow(s, m.get(j - 1).copied().unwrap_or(last)) * tp.clone()
        })
        .collect()
}

/// Bounds on `Σ_{j>K} s^{-m_j} t^{-j}` and `Σ_{j>K} j s^{-m_j} t^{-j}` for any
/// non-decreasing continuation with `m_j >= last`.
/// With `r = 1/t`: `Σ_{j>K} r^j = r^{K+1}/(1-r)` and
/// `Σ_{j>K} j r^j = r^{K+1} ((K+1) - K r) / (1-r)^2`.
fn tail_sums(s: &Hp, t: &Hp, last: f64, k: usize) -> (Hp, Hp) {
    let one = s.lift(1.0);
    let r = t.recip();
    let c = inv_pow(s, last);
    let rk1 = r.powi(k as u32 + 1);
    let om = one - r.clone();
    let kf = s.lift(k as f64);
    let plain = c.clone() * rk1.clone() / om.clone();
    let weighted = c * rk1 * (kf.clone() + s.lift(1.0) - kf * r) / (om.clone() * om);
    (plain, weighted)
}

fn round_down(v: &Hp) -> f64 {
    v.to_f64().next_down()
}

fn round_up(v: &Hp) -> f64 {
    v.to_f64().next_up()
}

/// Enclosure of `S` from the terms with `k, l <= K` and a bound on the rest.
pub fn eval_s(input: &SeriesInput, k: usize) -> Result<SeriesValue> {
    eval_s_prec(input, k, DEFAULT_PRECISION)
}

pub fn eval_s_prec(input: &SeriesInput, k: usize, precision: usize) -> Result<SeriesValue> {
    input.validate()?;
    let need = input.n_seq.len().max(input.ntilde_seq.len());
    if input.tail == Tail::ConstantExtension && k < need {
        return Err(Error::Precondition(format!("K = {k} is shorter than the sequences ({need})")));
    }
    let (kn, kl) = match input.tail {
        Tail::ConstantExtension => (k, k),
        Tail::NonDecreasing => (k.min(input.n_seq.len()), k.min(input.ntilde_seq.len())),
    };
    let x = Hp::from_f64_prec(input.x, precision);
    let y = Hp::from_f64_prec(input.y, precision);
    let one = x.lift(1.0);
    let z = x.clone() * y.clone() / ((x.clone() - one.clone()) * (y.clone() - one));

    // a_k = x^{-n_k} y^{-k}, b_l = y^{-ñ_l} x^{-l}
    let a = weights(&x, &y, &input.n_seq, kn);
    let b = weights(&y, &x, &input.ntilde_seq, kl);

    let zero = x.lift(0.0);
    let fold = |v: &[Hp], weighted: bool| {
        v.iter().enumerate().fold(zero.clone(), |acc, (i, w)| {
            if weighted {
                acc + x.lift((i + 1) as f64) * w.clone()
            } else {
                acc + w.clone()
            }
        })
    };
    let (a0, a1, b0, b1) = (fold(&a, false), fold(&a, true), fold(&b, false), fold(&b, true));

    // row k of the box sums to a_k (z B - k B1)
    let sum = a.iter().enumerate().fold(zero.clone(), |acc, (i, ak)| {
        acc + ak.clone() * (z.clone() * b0.clone() - x.lift((i + 1) as f64) * b1.clone())
    });
    let abs_sum = z.clone() * a0.clone() * b0.clone() + a1.clone() * b1.clone();

    // omitted terms are bounded by (z + kl)|a_k||b_l| over everything outside the box
    let (ta0, ta1) = tail_sums(&x, &y, *input.n_seq.last().unwrap(), kn);
    let (tb0, tb1) = tail_sums(&y, &x, *input.ntilde_seq.last().unwrap(), kl);
    let full = |p: &Hp, tp: &Hp, q: &Hp, tq: &Hp| (p.clone() + tp.clone()) * (q.clone() + tq.clone()) - p.clone() * q.clone();
    let tail = z * full(&a0, &ta0, &b0, &tb0) + full(&a1, &ta1, &b1, &tb1);

    // generous accumulated rounding: every term carries a few hundred roundings at most
    let ops = (64 * (kn + kl) + 1024) as f64;
    let slack = (abs_sum + tail.clone()) * x.lift(8.0 * ops * x.unit_roundoff());
    let lo = sum.clone() - tail.clone() - slack.clone();
    let hi = sum + tail.clone() + slack;
    Ok(SeriesValue {
        lower: round_down(&lo),
        upper: round_up(&hi),
        k_terms: kn,
        l_terms: kl,
        tail_bound: round_up(&tail),
    })
}

/// Doubles `K` until the bound on the omitted terms is below `tol`.
pub fn eval_s_to_tol(input: &SeriesInput, tol: f64, precision: usize) -> Result<SeriesValue> {
    let mut k = input.n_seq.len().max(input.ntilde_seq.len()).max(8);
    loop {
        let v = eval_s_prec(input, k, precision)?;
        if v.tail_bound < tol {
            return Ok(v);
        }
        let capped = input.tail == Tail::NonDecreasing && k >= input.n_seq.len() && k >= input.ntilde_seq.len();
        if capped || k >= 1 << 14 {
            return Err(Error::Numeric(format!(
                "tail bound {:.3e} still above {tol:.1e} at K = {k}",
                v.tail_bound
            )));
        }
        k *= 2;
    }
}

/// Replaces `n_k` by `n_k - (n_{k'+1} - n_{k'})` for `k > k'` (1-based `k'`).
pub fn flatten_step(input: &SeriesInput, kprime: usize) -> Result<SeriesInput> {
    input.validate()?;
    let n = &input.n_seq;
    let at = |k: usize| n.get(k - 1).copied().unwrap_or(*n.last().unwrap());
    if kprime == 0 || at(kprime + 1) <= at(kprime) {
        return Err(Error::Precondition(format!("n does not increase strictly at k' = {kprime}")));
    }
    let gap = at(kprime + 1) - at(kprime);
    let n_seq = n
        .iter()
        .enumerate()
        .map(|(i, &v)| if i + 1 > kprime { v - gap } else { v })
        .collect();
    Ok(SeriesInput { n_seq, ..input.clone() })
}

/// `n_1, ..., n_count` with `α = 1 0^{n_1} 1 0^{n_2 - n_1} 1 ...`.
pub fn alpha_run_lengths(alpha: &EpSeq, count: usize) -> Result<Vec<f64>> {
    if alpha.digit(1) != 1 {
        return Err(Error::Precondition(format!("{alpha} does not start with 1")));
    }
    if !alpha.per_digits().contains(&1) {
        return Err(Error::Precondition(format!("{alpha} has finitely many ones")));
    }
    let mut out = Vec::with_capacity(count);
    let (mut pos, mut zeros) = (1usize, 0usize);
    while out.len() < count {
        pos += 1;
        if alpha.digit(pos) == 1 {
            out.push(zeros as f64);
        } else {
            zeros += 1;
        }
    }
    Ok(out)
}

/// `ñ_1, ..., ñ_count` with `μ = 0 1^{ñ_1} 0 1^{ñ_2 - ñ_1} 0 ...`.
pub fn mu_run_lengths(mu: &EpSeq, count: usize) -> Result<Vec<f64>> {
    alpha_run_lengths(&mu.conjugate(), count)
        .map_err(|_| Error::Precondition(format!("{mu} must start with 0 and contain infinitely many zeros")))
}

/// Run-length series of `(μ, α)` at `(x, y) = (q0, q1)`, with enough terms that
/// the omitted part is below `tol`.
pub fn run_length_series(mu: &EpSeq, alpha: &EpSeq, x: f64, y: f64, tol: f64, precision: usize) -> Result<SeriesValue> {
    let mut count = 16;
    loop {
        let input = SeriesInput {
            x,
            y,
            n_seq: alpha_run_lengths(alpha, count)?,
            ntilde_seq: mu_run_lengths(mu, count)?,
            tail: Tail::NonDecreasing,
        };
        let v = eval_s_prec(&input, count, precision)?;
        if v.tail_bound < tol || count >= 1 << 12 {
            return Ok(v);
        }
        count *= 2;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolvedSeries {
    pub q0: f64,
    pub q1: f64,
    pub value: SeriesValue,
}

/// Solves for `(q0, q1)` and encloses the run-length series there.
pub fn series_at_solution(mu: &EpSeq, alpha: &EpSeq, cfg: &SolveConfig) -> Result<SolvedSeries> {
    let r: PhiInverse<f64> = phi_inverse(mu, alpha, cfg)?;
    let value = run_length_series(mu, alpha, r.q0, r.q1, 1e-12, DEFAULT_PRECISION)?;
    Ok(SolvedSeries { q0: r.q0, q1: r.q1, value })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepFailure {
    pub trial: usize,
    pub input: SeriesInput,
    pub lower: f64,
    pub upper: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub x: f64,
    pub y: f64,
    pub trials: usize,
    pub seed: u64,
    /// Smallest certified lower bound over trials with a non-constant sequence.
    pub min_lower_nonconstant: Option<f64>,
    pub failures: Vec<SweepFailure>,
}

/// Random non-decreasing integer sequence, length 1..=12, values 0..=8.
pub fn random_sequence<R: Rng>(rng: &mut R) -> Vec<f64> {
    let len = rng.gen_range(1..=12);
    let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(0..=8) as f64).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

const SWEEP_TOL: f64 = 1e-10;

/// Checks `S >= 0` on random sequences, and `S > 0` whenever a sequence is not
/// constant. A trial that is not certified positive at the default tolerance is
/// retried with a smaller one before it counts as a failure.
pub fn verify_positivity_sweep(x: f64, y: f64, trials: usize, seed: u64, exec: Exec) -> Result<SweepReport> {
    SeriesInput::new(x, y, vec![0.0], vec![0.0])?;
    let outcomes = map_indexed(exec, trials, |i| -> Result<(SeriesInput, SeriesValue, Option<String>)> {
        let mut rng = sample_rng(seed, i);
        let input = SeriesInput::new(x, y, random_sequence(&mut rng), random_sequence(&mut rng))?;
        let constant = input.both_constant();
        let mut tol = SWEEP_TOL;
        loop {
            let v = eval_s_to_tol(&input, tol, DEFAULT_PRECISION)?;
            let reason = if v.lower < -SWEEP_TOL {
                Some("lower bound below -1e-10".to_string())
            } else if constant && !v.contains(0.0) {
                Some("constant sequences but 0 not enclosed".to_string())
            } else if !constant && v.lower <= 0.0 {
                if tol > 1e-40 {
                    tol *= 1e-6;
                    continue;
                }
                Some("non-constant sequences but positivity not certified".to_string())
            } else {
                None
            };
            return Ok((input, v, reason));
        }
    });
    let mut failures = Vec::new();
    let mut min_lower: Option<f64> = None;
    for (trial, o) in outcomes.into_iter().enumerate() {
        let (input, v, reason) = o?;
        if !input.both_constant() {
            min_lower = Some(min_lower.map_or(v.lower, |m| m.min(v.lower)));
        }
        if let Some(reason) = reason {
            failures.push(SweepFailure { trial, lower: v.lower, upper: v.upper, input, reason });
        }
    }
    Ok(SweepReport { x, y, trials, seed, min_lower_nonconstant: min_lower, failures })
}
