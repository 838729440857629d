//! Adaptive Simpson quadrature.
//!
//! Every radial demand integral in the load model goes through
//! [`adaptive_simpson`], so there is exactly one numerical path to audit.

use crate::error::{Error, Result};

/// Relative tolerance used by the load model integrals.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[lo, hi]` to a relative tolerance `rel_tol`.
///
/// The integrand must be finite everywhere on the closed interval; a
/// non-finite sample is reported as [`Error::IntegrandSingularity`].
pub fn adaptive_simpson<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if lo == hi {
        return Ok(0.0);
    }
    let sample = |x: f64| -> Result<f64> {
        let y = f(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::IntegrandSingularity { lo, hi })
        }
    };

    let fa = sample(lo)?;
    let fb = sample(hi)?;
    let mid = 0.5 * (lo + hi);
    let fm = sample(mid)?;
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);

    // Seed the absolute tolerance from a coarse estimate so that the
    // recursion targets a relative error on the final value.
    let coarse = composite_simpson(&sample, lo, hi, 64)?;
    let abs_tol = (rel_tol * coarse.abs()).max(f64::MIN_POSITIVE);

    recurse(&sample, lo, hi, fa, fm, fb, whole, abs_tol, MAX_DEPTH).map_err(|e| match e {
        Error::QuadratureDiverged { .. } => Error::QuadratureDiverged { lo, hi },
        other => other,
    })
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureDiverged { lo: a, hi: b });
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

fn composite_simpson<F>(f: &F, lo: f64, hi: f64, panels: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = (hi - lo) / (2 * panels) as f64;
    let mut acc = f(lo)? + f(hi)?;
    for k in 1..2 * panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + k as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}
