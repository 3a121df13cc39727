//! Bracketed scalar root finding.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct Root<R> {
    pub root: R,
    /// Final bracket, ordered.
    pub lo: R,
    pub hi: R,
    pub iterations: usize,
}

impl<R: Real> Root<R> {
    pub fn width(&self) -> f64 {
        (self.hi.clone() - self.lo.clone()).to_f64()
    }
}

fn sign<R: Real>(v: &R) -> i8 {
    let z = v.lift(0.0);
    if *v > z {
        1
    } else if *v < z {
        -1
    } else {
        0
    }
}

/// Plain bisection on `[a, b]` with `f(a)`, `f(b)` of opposite sign.
pub fn bisect<R: Real>(
    mut f: impl FnMut(&R) -> R,
    a: R,
    b: R,
    tol: f64,
    max_iter: usize,
) -> Result<Root<R>> {
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let slo = sign(&f(&lo));
    let shi = sign(&f(&hi));
    if slo == 0 {
        return Ok(Root { root: lo.clone(), hi: lo.clone(), lo, iterations: 0 });
    }
    if shi == 0 {
        return Ok(Root { root: hi.clone(), lo: hi.clone(), hi, iterations: 0 });
    }
    if slo == shi {
        return Err(Error::Numeric("no sign change on the bracket".into()));
    }
    let half = lo.lift(0.5);
    let mut it = 0;
    while it < max_iter && (hi.clone() - lo.clone()).to_f64() > tol {
        let mid = (lo.clone() + hi.clone()) * half.clone();
        if !(mid > lo && mid < hi) {
            break;
        }
        it += 1;
        let s = sign(&f(&mid));
        if s == 0 {
            return Ok(Root { root: mid.clone(), lo: mid.clone(), hi: mid, iterations: it });
        }
        if s == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = (lo.clone() + hi.clone()) * half;
    Ok(Root { root, lo, hi, iterations: it })
}

/// Regula falsi with the Illinois modification and a bisection safeguard.
/// The bracket stays valid throughout.
pub fn illinois<R: Real>(
    mut f: impl FnMut(&R) -> R,
    a: R,
    b: R,
    tol: f64,
    max_iter: usize,
) -> Result<Root<R>> {
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let mut flo = f(&lo);
    let mut fhi = f(&hi);
    let (slo, shi) = (sign(&flo), sign(&fhi));
    if slo == 0 {
        return Ok(Root { root: lo.clone(), hi: lo.clone(), lo, iterations: 0 });
    }
    if shi == 0 {
        return Ok(Root { root: hi.clone(), lo: hi.clone(), hi, iterations: 0 });
    }
    if slo == shi {
        return Err(Error::Numeric("no sign change on the bracket".into()));
    }
    let half = lo.lift(0.5);
    let mut last_side = 0i8;
    let mut it = 0;
    let mut width = (hi.clone() - lo.clone()).to_f64();
    while it < max_iter && width > tol {
        it += 1;
        let mut c = (lo.clone() * fhi.clone() - hi.clone() * flo.clone()) / (fhi.clone() - flo.clone());
        // every third step without halving the bracket falls back to bisection
        if it % 3 == 0 || !(c > lo && c < hi) {
            c = (lo.clone() + hi.clone()) * half.clone();
            if !(c > lo && c < hi) {
                break;
            }
        }
        let fc = f(&c);
        let s = sign(&fc);
        if s == 0 {
            return Ok(Root { root: c.clone(), lo: c.clone(), hi: c, iterations: it });
        }
        if s == slo {
            lo = c;
            flo = fc;
            if last_side == -1 {
                fhi = fhi * half.clone();
            }
            last_side = -1;
        } else {
            hi = c;
            fhi = fc;
            if last_side == 1 {
                flo = flo * half.clone();
            }
            last_side = 1;
        }
        width = (hi.clone() - lo.clone()).to_f64();
    }
    // pick the endpoint with the smaller residual
    let root = if flo.abs() <= fhi.abs() { lo.clone() } else { hi.clone() };
    Ok(Root { root, lo, hi, iterations: it })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Hp;

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x: &f64| x * x - 2.0, 0.0, 2.0, 1e-13, 200).unwrap();
        assert!((r.root - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.lo <= 2f64.sqrt() && 2f64.sqrt() <= r.hi);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        assert!(bisect(|x: &f64| x * x + 1.0, -1.0, 2.0, 1e-12, 100).is_err());
        assert!(illinois(|x: &f64| x * x + 1.0, -1.0, 2.0, 1e-12, 100).is_err());
    }

    #[test]
    fn illinois_high_precision() {
        let two = Hp::from_f64_prec(2.0, 256);
        let r = illinois(
            |x: &Hp| x.clone() * x.clone() - two.clone(),
            Hp::from_f64_prec(1.0, 256),
            Hp::from_f64_prec(2.0, 256),
            1e-70,
            200,
        )
        .unwrap();
        let err = (r.root.clone() - two.sqrt()).abs().to_f64();
        assert!(err < 1e-70, "{err}");
        assert!(r.iterations < 60, "{}", r.iterations);
    }
}
