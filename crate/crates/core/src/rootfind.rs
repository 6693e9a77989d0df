//! Safeguarded root finding for non-decreasing scalar maps.
//!
//! Both the resolvent `x - a F(x) = y` and the implicit backward step
//! `y - dt f(y) = S` reduce to `g(x) = target` with `g` continuous and
//! non-decreasing with slope bounded below by a positive constant. Such a
//! `g` diverges in both directions, so a bracket always exists; bisection
//! then converges regardless of smoothness. A secant step is taken whenever
//! it lands strictly inside the bracket and the previous secant step was not
//! stalling.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Absolute tolerance on `|g(x) - target|`.
    pub tol: f64,
    pub max_iterations: usize,
    pub max_expansions: usize,
}

impl RootOptions {
    pub fn with_tol(tol: f64) -> Self {
        RootOptions {
            tol,
            ..RootOptions::default()
        }
    }
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            tol: 1e-12,
            max_iterations: 400,
            max_expansions: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `g(x) - target` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `map(x) = target` for a non-decreasing `map`, starting the bracket
/// search at `center` with the given initial `radius` and doubling it.
///
/// Terminates when the residual is within `opts.tol`, or when the bracket has
/// shrunk to adjacent floating point numbers (the best attainable point is
/// returned, its residual recorded).
pub fn solve_increasing<F>(mut map: F, target: f64, center: f64, radius: f64, opts: RootOptions) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut resid = |x: f64| -> Result<f64> { Ok(map(x)? - target) };

    let r_center = resid(center)?;
    if !r_center.is_finite() {
        return Err(Error::BracketFailure {
            center,
            radius,
            expansions: 0,
        });
    }
    if r_center.abs() <= opts.tol {
        return Ok(Root {
            x: center,
            residual: r_center,
            iterations: 0,
        });
    }

    // Only one side needs to move: the center already has a known sign.
    let mut radius = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
    let (mut lo, mut r_lo, mut hi, mut r_hi);
    let mut expansions = 0;
    if r_center < 0.0 {
        lo = center;
        r_lo = r_center;
        loop {
            hi = center + radius;
            r_hi = resid(hi)?;
            if r_hi >= 0.0 {
                break;
            }
            if !r_hi.is_finite() || expansions >= opts.max_expansions || !hi.is_finite() {
                return Err(Error::BracketFailure { center, radius, expansions });
            }
            // Everything left of `hi` is negative too.
            lo = hi;
            r_lo = r_hi;
            radius *= 2.0;
            expansions += 1;
        }
    } else {
        hi = center;
        r_hi = r_center;
        loop {
            lo = center - radius;
            r_lo = resid(lo)?;
            if r_lo <= 0.0 {
                break;
            }
            if !r_lo.is_finite() || expansions >= opts.max_expansions || !lo.is_finite() {
                return Err(Error::BracketFailure { center, radius, expansions });
            }
            hi = lo;
            r_hi = r_lo;
            radius *= 2.0;
            expansions += 1;
        }
    }
    if !r_lo.is_finite() || !r_hi.is_finite() {
        return Err(Error::BracketFailure { center, radius, expansions });
    }
    if r_lo.abs() <= opts.tol {
        return Ok(Root {
            x: lo,
            residual: r_lo,
            iterations: 0,
        });
    }
    if r_hi.abs() <= opts.tol {
        return Ok(Root {
            x: hi,
            residual: r_hi,
            iterations: 0,
        });
    }

    let mut last_secant = false;
    let mut last_width = hi - lo;
    for iteration in 1..=opts.max_iterations {
        let width = hi - lo;
        let mid = lo + 0.5 * width;
        if mid <= lo || mid >= hi {
            // Adjacent floats: no better representable point exists.
            let (x, residual) = if r_lo.abs() <= r_hi.abs() { (lo, r_lo) } else { (hi, r_hi) };
            return Ok(Root {
                x,
                residual,
                iterations: iteration,
            });
        }

        let secant = lo - r_lo * (hi - lo) / (r_hi - r_lo);
        let stalling = last_secant && width > 0.5 * last_width;
        let x = if secant > lo && secant < hi && !stalling {
            last_secant = true;
            secant
        } else {
            last_secant = false;
            mid
        };
        last_width = width;

        let r = resid(x)?;
        if !r.is_finite() {
            return Err(Error::ToleranceFailure {
                tol: opts.tol,
                residual: r,
                iterations: iteration,
            });
        }
        if r.abs() <= opts.tol {
            return Ok(Root {
                x,
                residual: r,
                iterations: iteration,
            });
        }
        if r < 0.0 {
            lo = x;
            r_lo = r;
        } else {
            hi = x;
            r_hi = r;
        }
    }

    Err(Error::ToleranceFailure {
        tol: opts.tol,
        residual: r_lo.abs().min(r_hi.abs()),
        iterations: opts.max_iterations,
    })
}
