//! The map from base pairs to `(μ, α)` and its inverse on eventually periodic pairs.

use serde::Serialize;

use crate::classify::{in_b_prime, nearby_b_prime_pairs};
use crate::error::{Error, Result};
use crate::expand::{critical_expansions, pi_raw, BasePair, Region};
use crate::real::{Hp, Real};
use crate::seqcore::{EpSeq, Word};
use crate::solve::{bisect, illinois, Root};

#[derive(Clone, Debug, Serialize)]
pub struct SolveConfig {
    /// Absolute tolerance on bracket widths.
    pub root_tol: f64,
    pub max_iter: usize,
    /// Points in the geometric scan for the inner roots.
    pub grid: usize,
    /// Distance kept from the ends of the outer interval.
    pub eps0: f64,
    /// Bits for floating backends that take a precision.
    pub precision: usize,
    /// Tolerance when matching a recognised pair back to given bases.
    pub match_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            root_tol: 1e-12,
            max_iter: 200,
            grid: 64,
            eps0: 1e-9,
            precision: 128,
            match_tol: 1e-9,
        }
    }
}

/// `f_α(q0, q1) = π(α) - q0/q1`.
pub fn f_alpha<R: Real>(alpha: &EpSeq, q0: &R, q1: &R) -> R {
    pi_raw(q0, q1, alpha, false) - q0.clone() / q1.clone()
}

/// `f̃_μ(q0, q1) = π̃(μ) - q1/q0`.
pub fn f_tilde_mu<R: Real>(mu: &EpSeq, q0: &R, q1: &R) -> R {
    pi_raw(q0, q1, mu, true) - q1.clone() / q0.clone()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    Alpha,
    Mu,
}

fn side_value<R: Real>(side: Side, s: &EpSeq, q0: &R, q1: &R) -> R {
    match side {
        Side::Alpha => f_alpha(s, q0, q1),
        Side::Mu => f_tilde_mu(s, q0, q1),
    }
}

/// Root in `q1 ∈ (1, q0/(q0-1)]` of `f_α(q0, ·)` or `f̃_μ(q0, ·)`, in f64:
/// a geometric scan brackets the sign change, bisection refines it.
fn inner_f64(side: Side, s: &EpSeq, q0: f64, cfg: &SolveConfig) -> Result<Root<f64>> {
    let top = q0 / (q0 - 1.0);
    let edge = match side {
        Side::Alpha => s.is_ones(),
        Side::Mu => s.is_zeros(),
    };
    if edge {
        return Ok(Root { root: top, lo: top, hi: top, iterations: 0 });
    }
    let f = |q1: &f64| side_value(side, s, &q0, q1);
    let n = cfg.grid.max(2);
    let span = top - 1.0;
    let ratio = (1e12f64).powf(1.0 / (n - 1) as f64);
    let pts: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { top } else { 1.0 + span * 1e-12 * ratio.powi(i as i32) })
        .collect();
    let vals: Vec<f64> = pts.iter().map(f).collect();
    let changes: Vec<usize> = (0..n - 1)
        .filter(|&i| vals[i] > 0.0 && vals[i + 1] <= 0.0 || vals[i] < 0.0 && vals[i + 1] >= 0.0)
        .collect();
    match changes.as_slice() {
        // root within rounding of the upper end
        [] if vals.iter().all(|&v| v > 0.0) && vals[n - 1] <= 1e-9 * vals[0].abs().max(1.0) => {
            Ok(Root { root: top, lo: pts[n - 2], hi: top, iterations: 0 })
        }
        [] => Err(Error::Numeric(format!(
            "no sign change for q1 in (1, {top}) at q0 = {q0}: q0 is outside the valid range"
        ))),
        [i] => bisect(f, pts[*i], pts[*i + 1], cfg.root_tol, cfg.max_iter),
        _ => Err(Error::Numeric(format!(
            "{} sign changes for q1 at q0 = {q0}",
            changes.len()
        ))),
    }
}

/// Refines an inner root in the backend's precision starting near `guess`.
fn inner_refine<R: Real>(side: Side, s: &EpSeq, q0: &R, guess: f64, tol: f64, cfg: &SolveConfig) -> Result<Root<R>> {
    let one = q0.lift(1.0);
    let top = q0.clone() / (q0.clone() - one.clone());
    let edge = match side {
        Side::Alpha => s.is_ones(),
        Side::Mu => s.is_zeros(),
    };
    if edge {
        return Ok(Root { root: top.clone(), lo: top.clone(), hi: top, iterations: 0 });
    }
    let f = |q1: &R| side_value(side, s, q0, q1);
    let mut w = 1e-13 * guess.abs().max(1.0);
    for _ in 0..12 {
        let lo = q0.lift(guess - w).max_of(one.clone() + q0.lift(1e-300));
        let hi = q0.lift(guess + w).min_of(top.clone());
        let (flo, fhi) = (f(&lo), f(&hi));
        if flo.is_negative() != fhi.is_negative() || flo == q0.lift(0.0) || fhi == q0.lift(0.0) {
            return illinois(f, lo, hi, tol, cfg.max_iter);
        }
        w *= 16.0;
    }
    Err(Error::Numeric(format!("could not bracket the refined root near {guess}")))
}

/// `g_α(q0)`: the q1 solving `f_α(q0, q1) = 0`.
pub fn g_alpha<R: Real>(alpha: &EpSeq, q0: &R, cfg: &SolveConfig) -> Result<Root<R>> {
    solve_inner(Side::Alpha, alpha, q0, cfg)
}

/// `g̃_μ(q0)`: the q1 solving `f̃_μ(q0, q1) = 0`.
pub fn g_tilde_mu<R: Real>(mu: &EpSeq, q0: &R, cfg: &SolveConfig) -> Result<Root<R>> {
    solve_inner(Side::Mu, mu, q0, cfg)
}

fn needs_refinement<R: Real>(x: &R, cfg: &SolveConfig) -> bool {
    x.unit_roundoff() < 1e-17 && cfg.root_tol < 1e-13
}

fn solve_inner<R: Real>(side: Side, s: &EpSeq, q0: &R, cfg: &SolveConfig) -> Result<Root<R>> {
    if q0.is_exact() {
        return Err(Error::Precondition("root solves need floating arithmetic".into()));
    }
    if *q0 <= q0.lift(1.0) {
        return Err(Error::Precondition("q0 must exceed 1".into()));
    }
    let r = inner_f64(side, s, q0.to_f64(), cfg)?;
    if !needs_refinement(q0, cfg) {
        return Ok(Root { root: q0.lift(r.root), lo: q0.lift(r.lo), hi: q0.lift(r.hi), iterations: r.iterations });
    }
    inner_refine(side, s, q0, r.root, cfg.root_tol, cfg)
}

/// `q_α` with `f_α(q_α, 1) = 0`: the right end of the domain of `g_α`.
pub fn q_alpha_bound<R: Real>(alpha: &EpSeq, proto: &R, cfg: &SolveConfig) -> Result<R> {
    if alpha.per_digits().iter().all(|&d| d == 1) {
        return Err(Error::Precondition(format!(
            "the defining series diverges for alpha = {alpha}"
        )));
    }
    let lead = (1..).take_while(|&i| alpha.digit(i) == 1).count() as f64;
    let one = proto.lift(1.0);
    let f = |q0: &R| f_alpha(alpha, q0, &one);
    let r = bisect(|q0: &f64| f_alpha(alpha, q0, &1.0), 1.0 + 1e-12, lead + 2.0, cfg.root_tol.max(1e-15), cfg.max_iter)?;
    if !needs_refinement(proto, cfg) {
        return Ok(proto.lift(r.root));
    }
    let w = 1e-12 * r.root;
    Ok(illinois(f, proto.lift(r.root - w), proto.lift(r.root + w), cfg.root_tol, cfg.max_iter)?.root)
}

#[derive(Clone, Debug)]
pub struct PhiForward {
    pub mu: Word,
    pub alpha: Word,
    /// Digits of both prefixes decided beyond rounding error.
    pub certified: usize,
}

/// `Φ(q0, q1) = (μ, α)` to `depth` digits: the quasi-lazy expansion of ℓ and the
/// quasi-greedy expansion of r. On C the result is `(0^∞, 1^∞)`.
pub fn phi_forward<R: Real>(q: &BasePair<R>, depth: usize) -> Result<PhiForward> {
    match q.region() {
        Region::Outside => Err(Error::Precondition(
            "phi is defined on q0 + q1 >= q0 q1 only".into(),
        )),
        Region::C => Ok(PhiForward {
            mu: Word::repeat(0, depth),
            alpha: Word::repeat(1, depth),
            certified: depth,
        }),
        Region::B => {
            let (mu, alpha) = critical_expansions(q, depth)?;
            Ok(PhiForward {
                certified: mu.certified_depth.min(alpha.certified_depth),
                mu: mu.digits,
                alpha: alpha.digits,
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhiInverse<R> {
    pub q0: R,
    pub q1: R,
    /// Bracket on q0 from the outer solve.
    pub q0_lo: R,
    pub q0_hi: R,
    /// Uncertainty radius of `(q0, q1)` in the max metric.
    pub radius: f64,
    pub iterations: usize,
    pub residual_f: f64,
    pub residual_f_tilde: f64,
}

impl<R: Real> PhiInverse<R> {
    pub fn base_pair(&self) -> Result<BasePair<R>> {
        Ok(BasePair::new(self.q0.clone(), self.q1.clone())?.with_radius(self.radius))
    }
}

/// Sign of `h(q0) = g_α(q0) - g̃_μ(q0)`, with q0 past the domain of `g_α` counted negative.
fn h_f64(mu: &EpSeq, alpha: &EpSeq, q0: f64, cfg: &SolveConfig) -> Result<f64> {
    let ga = match inner_f64(Side::Alpha, alpha, q0, cfg) {
        Ok(r) => r.root,
        Err(Error::Numeric(m)) if m.contains("no sign change") => return Ok(-1.0),
        Err(e) => return Err(e),
    };
    let gm = inner_f64(Side::Mu, mu, q0, cfg)?.root;
    Ok(ga - gm)
}

/// Solves `Φ(q0, q1) = (μ, α)` for a pair in B'.
///
/// The outer root `h(q0) = 0` is bracketed by a scan of `(1 + eps0, q_α - eps0)`,
/// refined by bisection in f64, then polished in the backend's precision.
pub fn phi_inverse<R: Real>(mu: &EpSeq, alpha: &EpSeq, cfg: &SolveConfig) -> Result<PhiInverse<R>> {
    let v = in_b_prime(mu, alpha);
    if !v.is_yes() {
        return Err(Error::Precondition(format!(
            "not in B': {}",
            v.witness.map(|w| w.0).unwrap_or_default()
        )));
    }
    let proto = R::from_f64_prec(1.0, cfg.precision);
    if proto.is_exact() {
        return Err(Error::Precondition("phi_inverse needs floating arithmetic".into()));
    }
    let f64_cfg = SolveConfig { root_tol: cfg.root_tol.max(1e-15), ..cfg.clone() };
    let qa: f64 = q_alpha_bound(alpha, &1.0, &f64_cfg)?;
    let (lo, hi) = (1.0 + cfg.eps0, qa - cfg.eps0);
    if hi <= lo {
        return Err(Error::Numeric(format!("empty q0 interval, q_alpha = {qa}")));
    }
    let h = |q0: f64| h_f64(mu, alpha, q0, &f64_cfg);

    // scan in log(q0 - 1) for the single sign change
    let n = 16;
    let (la, lb) = ((lo - 1.0).ln(), (hi - 1.0).ln());
    let pts: Vec<f64> = (0..n)
        .map(|i| 1.0 + (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    let vals = pts.iter().map(|&q| h(q)).collect::<Result<Vec<f64>>>()?;
    let changes: Vec<usize> = (0..n - 1)
        .filter(|&i| (vals[i] > 0.0) != (vals[i + 1] > 0.0))
        .collect();
    let i = match changes.as_slice() {
        [i] => *i,
        [] => return Err(Error::Numeric("h has no sign change on (1, q_alpha)".into())),
        _ => {
            return Err(Error::Numeric(format!(
                "h has {} sign changes on (1, q_alpha)",
                changes.len()
            )))
        }
    };
    let (mut a, mut b) = (pts[i], pts[i + 1]);
    let mut iterations = 0;
    while iterations < cfg.max_iter && b - a > f64_cfg.root_tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        iterations += 1;
        if h(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let q0f = 0.5 * (a + b);

    if !needs_refinement(&proto, cfg) {
        let q1f = inner_f64(Side::Alpha, alpha, q0f, &f64_cfg)?.root;
        let slope = g_slope(alpha, q0f, &f64_cfg);
        let radius = 2.0 * ((b - a) * (1.0 + slope) + f64_cfg.root_tol);
        return Ok(PhiInverse {
            q0: proto.lift(q0f),
            q1: proto.lift(q1f),
            q0_lo: proto.lift(a),
            q0_hi: proto.lift(b),
            radius,
            iterations,
            residual_f: f_alpha(alpha, &q0f, &q1f).abs(),
            residual_f_tilde: f_tilde_mu(mu, &q0f, &q1f).abs(),
        });
    }

    // polish: outer Illinois in R over inner Illinois solves in R
    let tol = cfg.root_tol;
    let inner_tol = tol * 1e-3;
    let hr = |q0: &R| -> R {
        let ga = inner_f64(Side::Alpha, alpha, q0.to_f64(), &f64_cfg)
            .and_then(|g| inner_refine(Side::Alpha, alpha, q0, g.root, inner_tol, cfg));
        let ga = match ga {
            Ok(r) => r.root,
            Err(_) => return q0.lift(-1.0),
        };
        match inner_f64(Side::Mu, mu, q0.to_f64(), &f64_cfg)
            .and_then(|g| inner_refine(Side::Mu, mu, q0, g.root, inner_tol, cfg))
        {
            Ok(r) => ga - r.root,
            Err(_) => q0.lift(f64::NAN),
        }
    };
    let mut w = (b - a).max(1e-14 * q0f);
    let mut bracket = None;
    for _ in 0..8 {
        let (l, r) = (proto.lift(q0f - w), proto.lift(q0f + w));
        if !hr(&l).is_negative() && hr(&r).is_negative() {
            bracket = Some((l, r));
            break;
        }
        w *= 8.0;
    }
    let (l, r) = bracket.ok_or_else(|| Error::Numeric("could not bracket q0 in high precision".into()))?;
    let root = illinois(hr, l, r, tol, cfg.max_iter)?;
    let q0 = root.root.clone();
    let g = inner_f64(Side::Alpha, alpha, q0.to_f64(), &f64_cfg)?;
    let q1r = inner_refine(Side::Alpha, alpha, &q0, g.root, inner_tol, cfg)?;
    let slope = g_slope(alpha, q0.to_f64(), &f64_cfg);
    // a bracket can collapse when h rounds to exactly zero; the root is still
    // only known to the rounding level of h
    let floor = 64.0 * q0.unit_roundoff() * q0.to_f64().max(q1r.root.to_f64());
    let radius = 2.0 * ((root.width() + floor) * (1.0 + slope) + q1r.width() + floor);
    Ok(PhiInverse {
        residual_f: f_alpha(alpha, &q0, &q1r.root).abs().to_f64(),
        residual_f_tilde: f_tilde_mu(mu, &q0, &q1r.root).abs().to_f64(),
        q1: q1r.root,
        q0,
        q0_lo: root.lo,
        q0_hi: root.hi,
        radius,
        iterations: iterations + root.iterations,
    })
}

fn g_slope(alpha: &EpSeq, q0: f64, cfg: &SolveConfig) -> f64 {
    let d = 1e-6 * q0;
    match (inner_f64(Side::Alpha, alpha, q0 - d, cfg), inner_f64(Side::Alpha, alpha, q0 + d, cfg)) {
        (Ok(a), Ok(b)) => ((b.root - a.root) / (2.0 * d)).abs(),
        _ => 1.0,
    }
}

/// Bits of precision that keep `depth` digits of the expansions at bases up to
/// `qmax` resolvable after solving.
pub fn precision_for_depth(qmax: f64, depth: usize) -> usize {
    let bits = 80.0 + 2.0 * depth as f64 * qmax.max(2.0).log2();
    bits.ceil() as usize
}

/// Solves in two passes: f64 to size the problem, then at a precision chosen so
/// that `depth` digits survive a forward run.
pub fn phi_inverse_for_depth(mu: &EpSeq, alpha: &EpSeq, depth: usize, cfg: &SolveConfig) -> Result<PhiInverse<Hp>> {
    let rough: PhiInverse<f64> = phi_inverse(mu, alpha, &SolveConfig { precision: 53, ..cfg.clone() })?;
    let bits = precision_for_depth(rough.q0.max(rough.q1), depth).max(cfg.precision);
    let tol = 2f64.powi(-(bits as i32 - 24)).max(f64::MIN_POSITIVE);
    phi_inverse(mu, alpha, &SolveConfig { precision: bits, root_tol: tol.min(cfg.root_tol), ..cfg.clone() })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityProbe {
    pub depth: usize,
    /// For each nearby pair: digits shared with the input, and max-metric distance of the solutions.
    pub samples: Vec<(usize, f64)>,
    pub max_deviation: f64,
}

/// Solves nearby B' pairs that agree with `(μ, α)` on `depth` digits and reports
/// how far their solutions move.
pub fn phi_inverse_continuity_probe(mu: &EpSeq, alpha: &EpSeq, depth: usize, cfg: &SolveConfig) -> Result<ContinuityProbe> {
    let base: PhiInverse<f64> = phi_inverse(mu, alpha, cfg)?;
    let mut samples = Vec::new();
    for (m, a) in nearby_b_prime_pairs(mu, alpha, depth) {
        let agree = m.first_difference(mu).unwrap_or(usize::MAX).min(a.first_difference(alpha).unwrap_or(usize::MAX)) - 1;
        let p: PhiInverse<f64> = phi_inverse(&m, &a, cfg)?;
        let dev = (p.q0 - base.q0).abs().max((p.q1 - base.q1).abs());
        samples.push((agree, dev));
    }
    let max_deviation = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(ContinuityProbe { depth, samples, max_deviation })
}

/// Max-metric distance between the solutions for two pairs.
pub fn solution_distance(p: (&EpSeq, &EpSeq), q: (&EpSeq, &EpSeq), cfg: &SolveConfig) -> Result<f64> {
    let a: PhiInverse<f64> = phi_inverse(p.0, p.1, cfg)?;
    let b: PhiInverse<f64> = phi_inverse(q.0, q.1, cfg)?;
    Ok((a.q0 - b.q0).abs().max((a.q1 - b.q1).abs()))
}
