//! Block families of symbolic pairs, their images under the inverse map, and
//! box-counting estimates of the image dimension.

use std::collections::HashSet;

use dashu_int::UBig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::expand::BasePair;
use crate::phimap::{phi_forward, phi_inverse, PhiInverse, SolveConfig};
use crate::seqcore::{EpSeq, Word};

/// N-digit blocks strictly between `0^N` and `1^N`, in increasing order.
pub fn admissible_blocks(n: usize) -> Vec<Word> {
    (1..(1u64 << n) - 1)
        .map(|v| Word::new((0..n).rev().map(|b| ((v >> b) & 1) as u8).collect()).unwrap())
        .collect()
}

fn check_n(n: usize) -> Result<()> {
    if !(2..=16).contains(&n) {
        return Err(Error::Precondition(format!("block length N = {n} must be in 2..=16")));
    }
    Ok(())
}

fn check_blocks(n: usize, blocks: &[&Word]) -> Result<()> {
    for b in blocks {
        let d = b.digits();
        if d.len() != n || d.iter().all(|&x| x == 0) || d.iter().all(|&x| x == 1) {
            return Err(Error::Precondition(format!(
                "block {b} is not an N = {n} block strictly between 0^N and 1^N"
            )));
        }
    }
    Ok(())
}

/// `μ = 0^{2N-1}1 B_1..B_k (P)^∞` and `α = 1^{2N-1}0 C_1..C_k (Q)^∞`.
pub fn family_pair(
    n: usize,
    mu_blocks: &[Word],
    alpha_blocks: &[Word],
    mu_period: &Word,
    alpha_period: &Word,
) -> Result<(EpSeq, EpSeq)> {
    check_n(n)?;
    let all: Vec<&Word> = mu_blocks.iter().chain(alpha_blocks).chain([mu_period, alpha_period]).collect();
    check_blocks(n, &all)?;
    let head = |lead: u8| {
        let mut w = Word::repeat(lead, 2 * n - 1);
        w.push(1 - lead);
        w
    };
    let build = |lead: u8, blocks: &[Word], per: &Word| {
        let pre = blocks.iter().fold(head(lead), |acc, b| acc.concat(b));
        EpSeq::new(pre, per.clone())
    };
    Ok((build(0, mu_blocks, mu_period)?, build(1, alpha_blocks, alpha_period)?))
}

/// `(0^{2N-1}1)^∞`, the fixed first coordinate of the gap family.
pub fn gap_mu(n: usize) -> EpSeq {
    let mut w = Word::repeat(0, 2 * n - 1);
    w.push(1);
    EpSeq::periodic(w).unwrap()
}

fn pick_blocks(blocks: &[Word], k: usize, rng: &mut ChaCha8Rng) -> Vec<Word> {
    (0..k).map(|_| blocks[rng.gen_range(0..blocks.len())].clone()).collect()
}

/// Random member of the family with `depth_blocks` free blocks and a repeated
/// admissible block as tail.
pub fn sample_family_pair(n: usize, depth_blocks: usize, rng: &mut ChaCha8Rng) -> Result<(EpSeq, EpSeq)> {
    check_n(n)?;
    let blocks = admissible_blocks(n);
    let mb = pick_blocks(&blocks, depth_blocks + 1, rng);
    let ab = pick_blocks(&blocks, depth_blocks + 1, rng);
    family_pair(n, &mb[..depth_blocks], &ab[..depth_blocks], &mb[depth_blocks], &ab[depth_blocks])
}

/// Random member of the gap family: `μ = (0^{2N-1}1)^∞`, `α` as in the family.
pub fn sample_gap_pair(n: usize, depth_blocks: usize, rng: &mut ChaCha8Rng) -> Result<(EpSeq, EpSeq)> {
    let (_, alpha) = sample_family_pair(n, depth_blocks, rng)?;
    Ok((gap_mu(n), alpha))
}

/// Independent stream per sample index, so results do not depend on scheduling.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Number of admissible `nN`-prefixes of the family, `((2^N - 2)^{n-2})^2`, and
/// the count with the first `k` blocks fixed, `((2^N - 2)^{n-k})^2`.
pub fn block_count(n_block: usize, n: usize, k: usize) -> Result<(UBig, UBig)> {
    check_n(n_block)?;
    if k < 2 || k > n {
        return Err(Error::Precondition(format!("need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let per = UBig::from((1u64 << n_block) - 2);
    Ok((per.pow(2 * (n - 2)), per.pow(2 * (n - k))))
}

/// `τ` with `(2^N - 2)^2 = 2^{τN}`.
pub fn tau(n: usize) -> f64 {
    2.0 * (((1u64 << n) - 2) as f64).log2() / n as f64
}

/// `τ log_{2+ε} 2`.
pub fn dimension_lower_bound(n: usize, eps: f64) -> f64 {
    tau(n) * 2f64.ln() / (2.0 + eps).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Both coordinates free.
    Full,
    /// First coordinate frozen at `(0^{2N-1}1)^∞`.
    Gap,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyParams {
    pub n: usize,
    pub depth_blocks: usize,
    pub family: Family,
}

#[derive(Clone, Debug, Serialize)]
pub struct Solved {
    pub mu: EpSeq,
    pub alpha: EpSeq,
    pub q0: f64,
    pub q1: f64,
    pub radius: f64,
}

/// Samples `count` family members and solves each for its base pair.
pub fn solve_samples(p: &FamilyParams, count: usize, seed: u64, exec: Exec) -> Result<Vec<Solved>> {
    let cfg = SolveConfig::default();
    map_indexed(exec, count, |i| {
        let mut rng = sample_rng(seed, i);
        let (mu, alpha) = match p.family {
            Family::Full => sample_family_pair(p.n, p.depth_blocks, &mut rng)?,
            Family::Gap => sample_gap_pair(p.n, p.depth_blocks, &mut rng)?,
        };
        let r: PhiInverse<f64> = phi_inverse(&mu, &alpha, &cfg)?;
        Ok(Solved { mu, alpha, q0: r.q0, q1: r.q1, radius: r.radius })
    })
    .into_iter()
    .collect()
}

/// Occupied boxes of side `scale`.
pub fn box_count(points: &[(f64, f64)], scale: f64) -> usize {
    points
        .iter()
        .map(|&(x, y)| ((x / scale).floor() as i64, (y / scale).floor() as i64))
        .collect::<HashSet<_>>()
        .len()
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize)]
pub struct DimEstimate {
    #[serde(rename = "N")]
    pub n: usize,
    pub family: Family,
    pub sample_count: usize,
    /// Box sides, strictly decreasing.
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    /// Inclusive index range of `scales` used for the fit.
    pub fit_range: (usize, usize),
    pub slope: f64,
    #[serde(rename = "eps_N")]
    pub eps_n: f64,
    pub tau: f64,
    pub bound: f64,
}

/// Fit window: the middle two thirds of the scales.
pub fn fit_window(len: usize) -> (usize, usize) {
    let drop = len / 6;
    (drop, len - 1 - drop)
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.len() < 2 {
        return Err(Error::Precondition("need at least two scales".into()));
    }
    if scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("scales must be positive and strictly decreasing".into()));
    }
    Ok(())
}

/// Box counts and fitted slope for a point cloud.
pub fn box_dimension(points: &[(f64, f64)], scales: &[f64], exec: Exec) -> Result<(Vec<usize>, (usize, usize), f64)> {
    check_scales(scales)?;
    let counts = map_indexed(exec, scales.len(), |i| box_count(points, scales[i]));
    let fit = fit_window(scales.len());
    let xs: Vec<f64> = scales[fit.0..=fit.1].iter().map(|s| -s.log2()).collect();
    let ys: Vec<f64> = counts[fit.0..=fit.1].iter().map(|&c| (c as f64).log2()).collect();
    Ok((counts, fit, ls_slope(&xs, &ys)))
}

pub fn estimate_dimension(
    p: &FamilyParams,
    samples: usize,
    scales: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<DimEstimate> {
    check_scales(scales)?;
    let solved = solve_samples(p, samples, seed, exec)?;
    let pts: Vec<(f64, f64)> = solved.iter().map(|s| (s.q0, s.q1)).collect();
    let eps_n = empirical_eps(&solved);
    let (counts, fit_range, slope) = box_dimension(&pts, scales, exec)?;
    Ok(DimEstimate {
        n: p.n,
        family: p.family,
        sample_count: samples,
        scales: scales.to_vec(),
        counts,
        fit_range,
        slope,
        eps_n,
        tau: tau(p.n),
        bound: dimension_lower_bound(p.n, eps_n),
    })
}

/// The estimator on the gap family, `μ = (0^{2N-1}1)^∞` with α from the family.
pub fn estimate_dimension_gap(
    n: usize,
    depth_blocks: usize,
    samples: usize,
    scales: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<DimEstimate> {
    estimate_dimension(&FamilyParams { n, depth_blocks, family: Family::Gap }, samples, scales, seed, exec)
}

/// `max(max(q0, q1) - 2, 0)` over the samples.
pub fn empirical_eps(solved: &[Solved]) -> f64 {
    solved.iter().map(|s| (s.q0.max(s.q1) - 2.0).max(0.0)).fold(0.0, f64::max)
}

/// `2^{-lo}, ..., 2^{-hi}`.
pub fn dyadic_scales(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Separation {
    pub distance: f64,
    /// Digits that must agree; 0 when the pairs are too far apart to say anything.
    pub m: usize,
    /// Digits actually compared (limited by certified forward digits).
    pub checked: usize,
    pub holds: bool,
    /// First digit, 1-based, where the μ or α prefixes differ.
    pub first_disagreement: Option<usize>,
}

/// Digits compared when the two pairs coincide.
pub const MAX_SEPARATION_DEPTH: usize = 64;

/// If the base pairs are within `C (2+ε)^{-m}` with `C = (2+ε)^{-2N+3}`, their
/// first `m` digits of μ and of α must agree. Digits come from forward runs at
/// the solved bases. `m_offset` shifts `m`, for exercising the failure path.
pub fn separation_check(a: &Solved, b: &Solved, n: usize, eps: f64, m_offset: isize) -> Result<Separation> {
    let base = 2.0 + eps;
    let c = base.powi(3 - 2 * n as i32);
    let distance = (a.q0 - b.q0).abs().max((a.q1 - b.q1).abs());
    let m_raw = if distance == 0.0 {
        MAX_SEPARATION_DEPTH as f64
    } else {
        ((c / distance).ln() / base.ln()).floor().clamp(0.0, MAX_SEPARATION_DEPTH as f64)
    };
    let m = (m_raw as isize + m_offset).clamp(0, MAX_SEPARATION_DEPTH as isize) as usize;
    if m == 0 {
        return Ok(Separation { distance, m, checked: 0, holds: true, first_disagreement: None });
    }
    let fa = phi_forward(&BasePair::new(a.q0, a.q1)?.with_radius(a.radius), m)?;
    let fb = phi_forward(&BasePair::new(b.q0, b.q1)?.with_radius(b.radius), m)?;
    let checked = m.min(fa.certified).min(fb.certified);
    let diff = |x: &Word, y: &Word| x.prefix(checked).common_prefix(&y.prefix(checked));
    let agree = diff(&fa.mu, &fb.mu).min(diff(&fa.alpha, &fb.alpha));
    let first_disagreement = (agree < checked).then_some(agree + 1);
    Ok(Separation { distance, m, checked, holds: first_disagreement.is_none(), first_disagreement })
}

/// Random sample whose forward digits must reproduce the sampled sequences.
pub fn forward_matches(s: &Solved, depth: usize) -> Result<usize> {
    let f = phi_forward(&BasePair::new(s.q0, s.q1)?.with_radius(s.radius), depth)?;
    let c = f.certified;
    if f.mu.prefix(c) != s.mu.prefix(c) || f.alpha.prefix(c) != s.alpha.prefix(c) {
        return Err(Error::Numeric("forward digits disagree with the sampled pair".into()));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{in_b_prime, in_closure_u2_prime, in_u2_prime};
    use crate::tri::Tri;

    fn w(x: &str) -> Word {
        x.parse().unwrap()
    }

    #[test]
    fn blocks() {
        assert_eq!(admissible_blocks(2), vec![w("01"), w("10")]);
        assert_eq!(admissible_blocks(3).len(), 6);
    }

    #[test]
    fn family_example() {
        let (mu, alpha) = family_pair(2, &[], &[], &w("01"), &w("10")).unwrap();
        assert_eq!(mu, "0001(01)*".parse().unwrap());
        assert_eq!(alpha, "1110(10)*".parse().unwrap());
        assert!(family_pair(2, &[w("11")], &[], &w("01"), &w("10")).is_err());
    }

    #[test]
    fn block_counts() {
        assert_eq!(block_count(2, 2, 2).unwrap().0, UBig::ONE);
        assert_eq!(block_count(2, 3, 2).unwrap().0, UBig::from(4u8));
        assert_eq!(block_count(3, 4, 2).unwrap().0, UBig::from(1296u32));
        assert_eq!(block_count(3, 4, 3).unwrap().1, UBig::from(36u32));
        assert!(block_count(3, 4, 5).is_err());
        assert!(block_count(1, 4, 2).is_err());
    }

    #[test]
    fn tau_values() {
        assert!((tau(2) - 1.0).abs() < 1e-15);
        for n in 3..12 {
            assert!(tau(n) > 1.0 && tau(n) < 2.0);
        }
    }

    #[test]
    fn samples_are_in_the_sets() {
        for i in 0..40 {
            let mut rng = sample_rng(7, i);
            let (mu, alpha) = sample_family_pair(3, 3, &mut rng).unwrap();
            assert!(in_u2_prime(&mu, &alpha).is_yes(), "{mu} {alpha}");
            assert!(in_b_prime(&mu, &alpha).is_yes());
            let (g, a) = sample_gap_pair(3, 3, &mut rng).unwrap();
            assert!(in_closure_u2_prime(&g, &a).is_yes());
            assert_eq!(in_u2_prime(&g, &a).verdict, Tri::No);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = FamilyParams { n: 2, depth_blocks: 3, family: Family::Full };
        let a = solve_samples(&p, 20, 11, Exec::Sequential).unwrap();
        let b = solve_samples(&p, 20, 11, Exec::Parallel).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.q0, x.q1), (y.q0, y.q1));
        }
    }

    #[test]
    fn forward_reproduces_samples() {
        let p = FamilyParams { n: 3, depth_blocks: 3, family: Family::Full };
        for s in solve_samples(&p, 10, 3, Exec::Parallel).unwrap() {
            assert!(forward_matches(&s, 40).unwrap() >= 15);
        }
    }

    #[test]
    fn slope_of_a_line() {
        assert!((ls_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (0..1000).map(|i| (i as f64 / 1000.0, 0.5)).collect();
        assert_eq!(box_count(&pts, 0.25), 4);
    }

    #[test]
    fn degenerate_cloud_has_zero_slope() {
        let pts = vec![(1.9, 1.8); 50];
        let (counts, _, slope) = box_dimension(&pts, &dyadic_scales(2, 10), Exec::Sequential).unwrap();
        assert!(counts.iter().all(|&c| c == 1));
        assert!(slope.abs() < 1e-12);
        assert!(box_dimension(&pts, &[0.1], Exec::Sequential).is_err());
        assert!(box_dimension(&pts, &[0.1, 0.2], Exec::Sequential).is_err());
    }
}
