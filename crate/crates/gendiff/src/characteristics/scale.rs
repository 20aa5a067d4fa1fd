//! Scale function representations and the operations derived from them:
//! evaluation, inversion and one-sided derivatives of the inverse.
//!
//! A scale function s is strictly increasing and continuous on the state
//! interval. Its inverse q = s^-1 lives on the natural-scale image s(J);
//! the one-sided derivatives q'_+ and q'_- of the inverse are what the
//! representation-property criterion inspects. Singular examples are
//! represented through an explicit inverse evaluator because the
//! counterexample construction specifies q, not s.

use std::fmt;
use std::sync::Arc;

use crate::characteristics::field::ScalarField;
use crate::error::{Error, Result};
use crate::quad;

/// Which one-sided limit to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Scale represented by a positive density s' and an anchor with s(anchor) = 0.
#[derive(Debug, Clone)]
pub struct DensityScale {
    pub sprime: ScalarField,
    pub anchor: f64,
    /// Open hull of the state-space domain on which s' is defined.
    pub domain: (f64, f64),
}

/// Scale represented by monotone samples, interpolated piecewise linearly.
#[derive(Debug, Clone)]
pub struct SampledScale {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// An exactly represented inverse scale function q = s^-1.
///
/// Implementors evaluate q and its one-sided derivatives exactly on a
/// natural-scale domain, and may expose an exact description of the
/// Lebesgue measure of `{q' = 0}` inside a window.
pub trait ExplicitInverse: Send + Sync {
    /// Closed hull `[lo, hi]` of the natural-scale domain of q.
    fn domain(&self) -> (f64, f64);
    /// q(w) for w in the domain.
    fn value(&self, w: f64) -> f64;
    /// One-sided derivative of q at w.
    fn derivative(&self, w: f64, side: Side) -> f64;
    /// Exact `(measure, error)` of `{w in [lo, hi] : q'(w) = 0}` when the
    /// implementor can certify it; `None` forces the sampling estimator.
    fn zero_set_measure_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)>;
    fn describe(&self) -> String;
    /// Arguments of the `scale` directive that reconstruct this inverse in
    /// a spec file; `None` when the representation has no file form.
    fn spec_directive(&self) -> Option<String> {
        None
    }
}

/// The scale function of a diffusion, in one of four representations.
#[derive(Clone)]
pub enum ScaleFunction {
    /// s = identity.
    Natural,
    Density(DensityScale),
    InverseExplicit(Arc<dyn ExplicitInverse>),
    Sampled(SampledScale),
}

impl fmt::Debug for ScaleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleFunction::Natural => write!(f, "ScaleFunction::Natural"),
            ScaleFunction::Density(d) => f.debug_tuple("ScaleFunction::Density").field(d).finish(),
            ScaleFunction::InverseExplicit(ie) => {
                write!(f, "ScaleFunction::InverseExplicit({})", ie.describe())
            }
            ScaleFunction::Sampled(s) => f.debug_tuple("ScaleFunction::Sampled").field(s).finish(),
        }
    }
}

/// Result of a one-sided derivative evaluation of q.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeEstimate {
    pub value: f64,
    /// Estimated absolute error (0 for exact representations).
    pub error: f64,
    /// True when the value comes from an exact evaluator, not refinement.
    pub exact: bool,
    /// False flags a point where Richardson refinement did not stabilize.
    pub converged: bool,
}

impl DerivativeEstimate {
    fn exact(value: f64) -> Self {
        DerivativeEstimate { value, error: 0.0, exact: true, converged: true }
    }
}

const SCALE_QUAD_TOL: f64 = 1e-13;

impl ScaleFunction {
    pub fn natural() -> Self {
        ScaleFunction::Natural
    }

    pub fn density(sprime: ScalarField, anchor: f64, domain: (f64, f64)) -> Self {
        ScaleFunction::Density(DensityScale { sprime, anchor, domain })
    }

    pub fn sampled(grid: Vec<f64>, values: Vec<f64>) -> Self {
        ScaleFunction::Sampled(SampledScale { grid, values })
    }

    pub fn inverse_explicit(ie: Arc<dyn ExplicitInverse>) -> Self {
        ScaleFunction::InverseExplicit(ie)
    }

    /// State-space hull on which the scale is defined.
    pub fn state_domain(&self) -> (f64, f64) {
        match self {
            ScaleFunction::Natural => (f64::NEG_INFINITY, f64::INFINITY),
            ScaleFunction::Density(d) => d.domain,
            ScaleFunction::InverseExplicit(ie) => {
                let (lo, hi) = ie.domain();
                (ie.value(lo), ie.value(hi))
            }
            ScaleFunction::Sampled(s) => (s.grid[0], *s.grid.last().unwrap()),
        }
    }

    /// Evaluates s(x).
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            ScaleFunction::Natural => Ok(x),
            ScaleFunction::Density(d) => {
                let (lo, hi) = d.domain;
                if x < lo || x > hi {
                    return Err(Error::OutOfRange { query: x, lo, hi });
                }
                let tol = SCALE_QUAD_TOL * (1.0 + (x - d.anchor).abs());
                Ok(quad::integrate(|z| d.sprime.eval(z), d.anchor, x, tol).value)
            }
            ScaleFunction::InverseExplicit(ie) => invert_explicit(ie.as_ref(), x),
            ScaleFunction::Sampled(s) => s.interpolate(x),
        }
    }

    /// Evaluates s(x) given an already evaluated point `(x0, s(x0))`.
    ///
    /// Density scales integrate only over the gap to `x`, which keeps a
    /// sweep over many ordered points linear in the swept span instead of
    /// quadratic; every other representation defers to [`eval`](Self::eval).
    pub fn eval_from(&self, known: (f64, f64), x: f64) -> Result<f64> {
        match self {
            ScaleFunction::Density(d) => {
                let (lo, hi) = d.domain;
                if x < lo || x > hi {
                    return Err(Error::OutOfRange { query: x, lo, hi });
                }
                let (x0, s0) = known;
                let tol = SCALE_QUAD_TOL * (1.0 + (x - x0).abs());
                Ok(s0 + quad::integrate(|z| d.sprime.eval(z), x0, x, tol).value)
            }
            _ => self.eval(x),
        }
    }

    /// Returns an evaluator for q = s^-1 with the default inversion tolerance.
    pub fn inverse(&self) -> ScaleInverter<'_> {
        ScaleInverter { scale: self, tol: None }
    }

    /// Same as [`inverse`](Self::inverse) with an explicit absolute tolerance
    /// in state-space units.
    pub fn inverse_with_tolerance(&self, tol: f64) -> ScaleInverter<'_> {
        ScaleInverter { scale: self, tol: Some(tol) }
    }

    /// One-sided derivative of q = s^-1 at a natural-scale point `w`.
    ///
    /// Exact for the natural, sampled and explicit-inverse representations;
    /// for density scales a shrinking one-sided difference quotient with
    /// Richardson refinement is used and an error estimate reported.
    pub fn inverse_derivative(&self, w: f64, side: Side) -> Result<DerivativeEstimate> {
        match self {
            ScaleFunction::Natural => Ok(DerivativeEstimate::exact(1.0)),
            ScaleFunction::InverseExplicit(ie) => {
                let (lo, hi) = ie.domain();
                if w < lo || w > hi {
                    return Err(Error::OutOfRange { query: w, lo, hi });
                }
                Ok(DerivativeEstimate::exact(ie.derivative(w, side)))
            }
            ScaleFunction::Sampled(s) => s.inverse_slope(w, side).map(DerivativeEstimate::exact),
            ScaleFunction::Density(_) => self.refined_inverse_derivative(w, side),
        }
    }

    fn refined_inverse_derivative(&self, w: f64, side: Side) -> Result<DerivativeEstimate> {
        let inv = self.inverse();
        let x0 = inv.eval(w)?;
        let sign = match side {
            Side::Right => 1.0,
            Side::Left => -1.0,
        };
        // One-sided difference quotients at geometrically shrinking offsets,
        // then a Richardson table assuming an h-power error expansion.
        let h0 = 1e-2 * (1.0 + w.abs());
        let levels = 10;
        let mut diag: Vec<f64> = Vec::with_capacity(levels);
        let mut table: Vec<f64> = Vec::with_capacity(levels);
        let mut best = f64::NAN;
        let mut best_err = f64::INFINITY;
        let mut h = h0;
        for _ in 0..levels {
            let q_h = match inv.eval(w + sign * h) {
                Ok(v) => v,
                // Shrink into the domain if the offset fell outside.
                Err(_) => {
                    h *= 0.5;
                    continue;
                }
            };
            let d = sign * (q_h - x0) / h;
            table.push(d);
            let row = table.len() - 1;
            for j in (0..row).rev() {
                let factor = 2f64.powi((row - j) as i32);
                table[j] = (factor * table[j + 1] - table[j]) / (factor - 1.0);
            }
            diag.push(table[0]);
            if diag.len() >= 2 {
                let err = (diag[diag.len() - 1] - diag[diag.len() - 2]).abs();
                if err < best_err {
                    best_err = err;
                    best = diag[diag.len() - 1];
                }
                if err <= 1e-9 * (1.0 + best.abs()) {
                    return Ok(DerivativeEstimate {
                        value: best,
                        error: err,
                        exact: false,
                        converged: true,
                    });
                }
            }
            h *= 0.5;
        }
        Ok(DerivativeEstimate {
            value: if best.is_nan() { *diag.last().unwrap_or(&f64::NAN) } else { best },
            error: best_err,
            exact: false,
            converged: false,
        })
    }
}

impl SampledScale {
    fn interpolate(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.grid[0], *self.grid.last().unwrap());
        if x < lo || x > hi {
            return Err(Error::OutOfRange { query: x, lo, hi });
        }
        let i = match self.grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i - 1,
        };
        let t = (x - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        Ok(self.values[i] + t * (self.values[i + 1] - self.values[i]))
    }

    fn invert(&self, y: f64) -> Result<f64> {
        let (lo, hi) = (self.values[0], *self.values.last().unwrap());
        if y < lo || y > hi {
            return Err(Error::OutOfRange { query: y, lo, hi });
        }
        let i = match self.values.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(i) => return Ok(self.grid[i]),
            Err(i) => i - 1,
        };
        let t = (y - self.values[i]) / (self.values[i + 1] - self.values[i]);
        Ok(self.grid[i] + t * (self.grid[i + 1] - self.grid[i]))
    }

    /// Piecewise-constant slope of the inverse at natural-scale point `w`.
    fn inverse_slope(&self, w: f64, side: Side) -> Result<f64> {
        let (lo, hi) = (self.values[0], *self.values.last().unwrap());
        if w < lo || w > hi {
            return Err(Error::OutOfRange { query: w, lo, hi });
        }
        let n = self.values.len();
        let seg = match self.values.binary_search_by(|v| v.partial_cmp(&w).unwrap()) {
            // Exactly on a knot: the side picks the segment.
            Ok(i) => match side {
                Side::Right => i.min(n - 2),
                Side::Left => i.saturating_sub(1).min(n - 2),
            },
            Err(i) => i - 1,
        };
        Ok((self.grid[seg + 1] - self.grid[seg]) / (self.values[seg + 1] - self.values[seg]))
    }
}

/// Evaluator for q = s^-1, produced by [`ScaleFunction::inverse`].
pub struct ScaleInverter<'a> {
    scale: &'a ScaleFunction,
    tol: Option<f64>,
}

impl ScaleInverter<'_> {
    /// Evaluates q(y) for y in s(J).
    pub fn eval(&self, y: f64) -> Result<f64> {
        match self.scale {
            ScaleFunction::Natural => Ok(y),
            ScaleFunction::InverseExplicit(ie) => {
                let (lo, hi) = ie.domain();
                if y < lo || y > hi {
                    return Err(Error::OutOfRange { query: y, lo, hi });
                }
                Ok(ie.value(y))
            }
            ScaleFunction::Sampled(s) => s.invert(y),
            ScaleFunction::Density(d) => self.invert_density(d, y),
        }
    }

    fn invert_density(&self, d: &DensityScale, y: f64) -> Result<f64> {
        let evaluate = |x: f64| -> f64 {
            let tol = SCALE_QUAD_TOL * (1.0 + (x - d.anchor).abs());
            quad::integrate(|z| d.sprime.eval(z), d.anchor, x, tol).value
        };
        // Bracket the query by expanding from the anchor toward the domain
        // edges (geometric approach for finite edges, doubling otherwise).
        let (dom_lo, dom_hi) = d.domain;
        let mut lo = d.anchor;
        let mut hi = d.anchor;
        let mut step = 1.0;
        for _ in 0..200 {
            if evaluate(hi) >= y {
                break;
            }
            hi = if dom_hi.is_finite() { 0.5 * (hi + dom_hi) } else { d.anchor + step };
            step *= 2.0;
        }
        step = 1.0;
        for _ in 0..200 {
            if evaluate(lo) <= y {
                break;
            }
            lo = if dom_lo.is_finite() { 0.5 * (lo + dom_lo) } else { d.anchor - step };
            step *= 2.0;
        }
        let (s_lo, s_hi) = (evaluate(lo), evaluate(hi));
        if !(s_lo <= y && y <= s_hi) {
            return Err(Error::OutOfRange { query: y, lo: s_lo, hi: s_hi });
        }
        let tol = self.tol.unwrap_or(0.0);
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if evaluate(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= tol {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn invert_explicit(ie: &dyn ExplicitInverse, x: f64) -> Result<f64> {
    let (mut lo, mut hi) = ie.domain();
    let (q_lo, q_hi) = (ie.value(lo), ie.value(hi));
    if x < q_lo || x > q_hi {
        return Err(Error::OutOfRange { query: x, lo: q_lo, hi: q_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ie.value(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Shared validation of a scale representation; returns violation messages.
pub(crate) fn scale_violations(scale: &ScaleFunction) -> Vec<String> {
    let mut out = Vec::new();
    match scale {
        ScaleFunction::Natural => {}
        ScaleFunction::Density(d) => {
            if !(d.domain.0 < d.domain.1) {
                out.push("scale density domain is empty".into());
            }
            if !d.domain.0.is_finite() && !d.domain.1.is_finite() && !d.anchor.is_finite() {
                out.push("scale anchor must be finite".into());
            }
        }
        ScaleFunction::InverseExplicit(ie) => {
            let (lo, hi) = ie.domain();
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                out.push("explicit inverse domain must be a finite interval".into());
            }
        }
        ScaleFunction::Sampled(s) => {
            if s.grid.len() != s.values.len() {
                out.push("sampled scale grid/value lengths differ".into());
            }
            if s.grid.len() < 2 {
                out.push("sampled scale needs at least two knots".into());
            }
            if !s.grid.windows(2).all(|w| w[0] < w[1]) {
                out.push("sampled scale grid not strictly increasing".into());
            }
            if !s.values.windows(2).all(|w| w[0] < w[1]) {
                out.push("scale not strictly increasing".into());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::field::Formula;

    #[test]
    fn natural_identity() {
        let s = ScaleFunction::Natural;
        assert_eq!(s.eval(0.3).unwrap(), 0.3);
        assert_eq!(s.inverse().eval(0.3).unwrap(), 0.3);
        let d = s.inverse_derivative(2.0, Side::Right).unwrap();
        assert_eq!(d.value, 1.0);
        assert!(d.exact);
    }

    #[test]
    fn density_round_trip() {
        // s'(x) = e^{x^2}, anchored at 0 (the scale density of an OU spec).
        let s = ScaleFunction::density(
            ScalarField::Formula(Formula::ExpQuad { coeff: 1.0 }),
            0.0,
            (f64::NEG_INFINITY, f64::INFINITY),
        );
        let y = s.eval(0.5).unwrap();
        let x = s.inverse().eval(y).unwrap();
        assert!((x - 0.5).abs() < 1e-10, "round trip error {}", (x - 0.5).abs());
    }

    #[test]
    fn density_inverse_derivative_matches_reciprocal() {
        let s = ScaleFunction::density(
            ScalarField::Formula(Formula::ExpQuad { coeff: 1.0 }),
            0.0,
            (f64::NEG_INFINITY, f64::INFINITY),
        );
        // q'(w) = 1 / s'(q(w)); independent check of the Richardson path.
        let w = s.eval(0.7).unwrap();
        let d = s.inverse_derivative(w, Side::Right).unwrap();
        let expect = 1.0 / (0.7f64 * 0.7).exp();
        assert!(d.converged);
        assert!(
            (d.value - expect).abs() < 1e-6 + 10.0 * d.error,
            "value {} expected {} err {}",
            d.value,
            expect,
            d.error
        );
    }

    #[test]
    fn sampled_interpolation_and_slopes() {
        let s = ScaleFunction::sampled(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 2.0]);
        assert_eq!(s.eval(0.5).unwrap(), 0.25);
        assert_eq!(s.inverse().eval(0.25).unwrap(), 0.5);
        // Slopes of the inverse: 2 on [0, 0.5), 2/3 on (0.5, 2].
        assert_eq!(s.inverse_derivative(0.2, Side::Right).unwrap().value, 2.0);
        assert_eq!(s.inverse_derivative(0.5, Side::Right).unwrap().value, 1.0 / 1.5);
        assert_eq!(s.inverse_derivative(0.5, Side::Left).unwrap().value, 2.0);
    }

    #[test]
    fn sampled_out_of_range() {
        let s = ScaleFunction::sampled(vec![0.0, 1.0], vec![0.0, 1.0]);
        assert!(matches!(s.eval(1.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(s.inverse().eval(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn decreasing_sampled_flagged() {
        let s = ScaleFunction::sampled(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5]);
        let viols = scale_violations(&s);
        assert!(viols.iter().any(|v| v.contains("not strictly increasing")));
    }
}
