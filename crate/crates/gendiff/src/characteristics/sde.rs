//! Conversion of Ito coefficients into scale and speed characteristics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::characteristics::field::ScalarField;
use crate::characteristics::scale::ScaleFunction;
use crate::characteristics::speed::SpeedMeasure;
use crate::characteristics::{BoundaryBehavior, DiffusionSpec, Interval};
use crate::error::{Error, Result};
use crate::quad;

const RATIO_QUAD_TOL: f64 = 1e-10;

/// Builds the characteristics of the solution of
/// `dX = mu(X) dt + sigma(X) dW` on `interval`:
/// `s'(x) = exp(-int 2 mu / sigma^2)` from the anchor, and the speed density
/// `1 / (s' sigma^2)`.
///
/// Rejects coefficients with a vanishing `sigma` at a probe point and
/// drift-to-variance ratios that fail to be locally integrable.
pub fn from_sde(
    label: &str,
    interval: Interval,
    mu: ScalarField,
    sigma: ScalarField,
    left: BoundaryBehavior,
    right: BoundaryBehavior,
    x0: Option<f64>,
) -> Result<DiffusionSpec> {
    let probe = probe_window(&interval);
    let anchor = match x0 {
        Some(v) if interval.contains_interior(v) => v,
        _ => 0.5 * (probe.0 + probe.1),
    };

    check_sigma(&sigma, probe, anchor)?;
    check_integrability(&mu, &sigma, probe)?;

    let ratio = {
        let mu = mu.clone();
        let sigma = sigma.clone();
        move |x: f64| {
            let s = sigma.eval(x);
            2.0 * mu.eval(x) / (s * s)
        }
    };
    let sprime = {
        let ratio = ratio.clone();
        ScalarField::from_fn(move |x| {
            let tol = RATIO_QUAD_TOL * (1.0 + (x - anchor).abs());
            (-quad::integrate(&ratio, anchor, x, tol).value).exp()
        })
    };
    let speed_density = {
        let sigma = sigma.clone();
        ScalarField::from_fn(move |x| {
            let tol = RATIO_QUAD_TOL * (1.0 + (x - anchor).abs());
            let log_sprime = -quad::integrate(&ratio, anchor, x, tol).value;
            let s2 = sigma.eval(x).powi(2);
            (-log_sprime).exp() / s2
        })
    };

    Ok(DiffusionSpec {
        label: label.to_string(),
        interval,
        scale: ScaleFunction::density(sprime, anchor, interval.interior()),
        speed: SpeedMeasure::with_density(speed_density),
        left,
        right,
        x0,
    })
}

fn probe_window(interval: &Interval) -> (f64, f64) {
    let (mut lo, mut hi) = interval.interior();
    if !lo.is_finite() {
        lo = if hi.is_finite() { hi - 20.0 } else { -10.0 };
    }
    if !hi.is_finite() {
        hi = lo + 20.0;
    }
    let margin = 1e-6 * (hi - lo);
    (lo + margin, hi - margin)
}

fn check_sigma(sigma: &ScalarField, probe: (f64, f64), anchor: f64) -> Result<()> {
    let (lo, hi) = probe;
    // Deterministic grid first (catches zeros at round points), then seeded
    // random probes.
    for k in 0..=32 {
        let x = lo + (hi - lo) * k as f64 / 32.0;
        if sigma.eval(x) == 0.0 {
            return Err(Error::ZeroSigma(x));
        }
    }
    if sigma.eval(anchor) == 0.0 {
        return Err(Error::ZeroSigma(anchor));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5de_c0ffee);
    for _ in 0..64 {
        let x = rng.gen_range(lo..hi);
        if sigma.eval(x) == 0.0 {
            return Err(Error::ZeroSigma(x));
        }
    }
    Ok(())
}

fn check_integrability(mu: &ScalarField, sigma: &ScalarField, probe: (f64, f64)) -> Result<()> {
    let (lo, hi) = probe;
    let ratio = |x: f64| {
        let s = sigma.eval(x);
        2.0 * mu.eval(x) / (s * s)
    };
    let pieces = 8;
    for k in 0..pieces {
        let a = lo + (hi - lo) * k as f64 / pieces as f64;
        let b = lo + (hi - lo) * (k + 1) as f64 / pieces as f64;
        let r = quad::integrate(ratio, a, b, RATIO_QUAD_TOL * (1.0 + b - a));
        if !r.converged || !r.value.is_finite() {
            return Err(Error::NonLocallyIntegrable(0.5 * (a + b)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::state_mass;

    #[test]
    fn driftless_unit_noise_is_brownian() {
        let spec = from_sde(
            "bm",
            Interval::real_line(),
            ScalarField::constant(0.0),
            ScalarField::constant(1.0),
            BoundaryBehavior::Inaccessible,
            BoundaryBehavior::Inaccessible,
            Some(0.0),
        )
        .unwrap();
        // Scale is the identity up to quadrature error, speed is Lebesgue.
        assert!((spec.scale.eval(1.7).unwrap() - 1.7).abs() < 1e-9);
        let m = state_mass(&spec.speed, &spec.scale, 0.0, 2.0).unwrap();
        assert!((m.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn ou_scale_density_matches_gaussian_exponential() {
        // dX = -X dt + dW: s'(x) = exp(x^2), speed density exp(-x^2).
        let spec = from_sde(
            "ou",
            Interval::real_line(),
            ScalarField::from_fn(|x| -x),
            ScalarField::constant(1.0),
            BoundaryBehavior::Inaccessible,
            BoundaryBehavior::Inaccessible,
            Some(0.0),
        )
        .unwrap();
        let s1 = spec.scale.eval(1.0).unwrap();
        let expect = quad::integrate(|z| (z * z).exp(), 0.0, 1.0, 1e-12).value;
        assert!((s1 - expect).abs() < 1e-8, "{s1} vs {expect}");
        let m = state_mass(&spec.speed, &spec.scale, -1.0, 1.0).unwrap();
        let expect_m = quad::integrate(|z| (-z * z).exp(), -1.0, 1.0, 1e-12).value;
        assert!((m.value - expect_m).abs() < 1e-7, "{} vs {expect_m}", m.value);
    }

    #[test]
    fn vanishing_sigma_rejected() {
        let err = from_sde(
            "degenerate",
            Interval::open(-1.0, 1.0),
            ScalarField::constant(0.0),
            ScalarField::from_fn(|x| x),
            BoundaryBehavior::Inaccessible,
            BoundaryBehavior::Inaccessible,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroSigma(_) | Error::NonLocallyIntegrable(_)));
    }

    #[test]
    fn non_integrable_ratio_rejected() {
        // mu = 1, sigma = |x|^{1/4} + tiny: ratio ~ 2 |x|^{-1/2} is
        // integrable; use sigma = |x| (off-zero probes) for divergence.
        let err = from_sde(
            "bad",
            Interval::open(-1.0, 1.0),
            ScalarField::constant(1.0),
            ScalarField::from_fn(|x| if x == 0.0 { 1e-300 } else { x.abs() }),
            BoundaryBehavior::Inaccessible,
            BoundaryBehavior::Inaccessible,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonLocallyIntegrable(_) | Error::ZeroSigma(_)));
    }
}
