//! Change of coordinates that turns a diffusion into natural scale.

use crate::characteristics::field::ScalarField;
use crate::characteristics::scale::{ScaleFunction, Side};
use crate::characteristics::speed::{Atom, SpeedCoords, SpeedMeasure};
use crate::characteristics::{DiffusionSpec, Interval};
use crate::error::{Error, Result};

/// Rewrites `spec` in natural scale: the new state interval is the image
/// `s(J)`, the new scale is the identity, and the new speed measure is the
/// pushforward of the old one under `s`. Boundary behaviors carry over and
/// the start point is mapped through `s`.
///
/// The transformed process has the same law as the original seen through
/// `s`, so exit probabilities become linear and all path functionals can be
/// computed in the driftless picture.
pub fn natural_scale_transform(spec: &DiffusionSpec) -> Result<DiffusionSpec> {
    let reference = spec
        .probe_window()
        .map(|(lo, hi)| 0.5 * (lo + hi))
        .ok_or(Error::InvalidSpec {
            label: spec.label.clone(),
            first_violation: "interval has no interior".into(),
        })?;

    let new_left = scale_limit(&spec.scale, spec.interval.left, reference, false);
    let new_right = scale_limit(&spec.scale, spec.interval.right, reference, true);
    let interval = Interval {
        left: new_left,
        right: new_right,
        left_closed: spec.interval.left_closed,
        right_closed: spec.interval.right_closed,
    };

    let speed = pushforward_speed(spec)?;
    let x0 = match spec.x0 {
        Some(v) => Some(spec.scale.eval(v)?),
        None => None,
    };

    Ok(DiffusionSpec {
        label: format!("{} (natural scale)", spec.label),
        interval,
        scale: ScaleFunction::Natural,
        speed,
        left: spec.left,
        right: spec.right,
        x0,
    })
}

fn pushforward_speed(spec: &DiffusionSpec) -> Result<SpeedMeasure> {
    if spec.speed.coords == SpeedCoords::NaturalScale {
        // Already expressed as the pushforward; only the coordinate tag
        // changes meaning (the new state space is the natural scale).
        return Ok(SpeedMeasure {
            density: spec.speed.density.clone(),
            atoms: spec.speed.atoms.clone(),
            coords: SpeedCoords::StateSpace,
        });
    }

    let mut atoms = Vec::with_capacity(spec.speed.atoms.len());
    for a in &spec.speed.atoms {
        atoms.push(Atom { at: spec.scale.eval(a.at)?, mass: a.mass });
    }

    let density = if spec.speed.density.is_zero() {
        ScalarField::constant(0.0)
    } else {
        let scale = spec.scale.clone();
        let dens = spec.speed.density.clone();
        ScalarField::from_fn(move |w| match &scale {
            ScaleFunction::Natural => dens.eval(w),
            ScaleFunction::Density(d) => {
                // q'(w) = 1 / s'(q(w)) for an absolutely continuous scale.
                let x = scale.inverse().eval(w).unwrap_or(f64::NAN);
                dens.eval(x) / d.sprime.eval(x)
            }
            _ => {
                let x = scale.inverse().eval(w).unwrap_or(f64::NAN);
                let slope = scale
                    .inverse_derivative(w, Side::Right)
                    .map(|d| d.value)
                    .unwrap_or(f64::NAN);
                dens.eval(x) * slope
            }
        })
    };

    Ok(SpeedMeasure { density, atoms, coords: SpeedCoords::StateSpace })
}

/// Limit of the scale toward an interval endpoint, by direct evaluation when
/// possible and otherwise by a geometric probe sequence. Values beyond 1e12
/// are treated as an infinite boundary image.
fn scale_limit(scale: &ScaleFunction, endpoint: f64, reference: f64, toward_right: bool) -> f64 {
    const BLOWUP: f64 = 1e12;
    if endpoint.is_finite() {
        if let Ok(v) = scale.eval(endpoint) {
            if v.is_finite() {
                return v;
            }
        }
    }
    let mut prev = f64::NAN;
    for k in 1..=60 {
        let x = if endpoint.is_finite() {
            endpoint - (endpoint - reference) * 2f64.powi(-k)
        } else if toward_right {
            reference + 2f64.powi(k)
        } else {
            reference - 2f64.powi(k)
        };
        let Ok(v) = scale.eval(x) else { continue };
        if !v.is_finite() || v.abs() > BLOWUP {
            break;
        }
        if (v - prev).abs() <= 1e-9 * (1.0 + v.abs()) {
            return v;
        }
        prev = v;
    }
    if toward_right {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::green::green_expected_exit_time;
    use crate::characteristics::speed::state_mass;
    use crate::characteristics::BoundaryBehavior;

    fn doubled() -> DiffusionSpec {
        // s(x) = 2x on (-10, 10), Lebesgue speed, atom at 0.5.
        DiffusionSpec {
            label: "doubled".into(),
            interval: Interval::open(-10.0, 10.0),
            scale: ScaleFunction::sampled(vec![-10.0, 10.0], vec![-20.0, 20.0]),
            speed: SpeedMeasure::lebesgue().add_atom(0.5, 3.0),
            left: BoundaryBehavior::Inaccessible,
            right: BoundaryBehavior::Inaccessible,
            x0: Some(0.25),
        }
    }

    #[test]
    fn interval_and_start_mapped() {
        let t = natural_scale_transform(&doubled()).unwrap();
        assert_eq!(t.interval.interior(), (-20.0, 20.0));
        assert_eq!(t.x0, Some(0.5));
        assert!(matches!(t.scale, ScaleFunction::Natural));
    }

    #[test]
    fn mass_is_preserved_under_pushforward() {
        let spec = doubled();
        let t = natural_scale_transform(&spec).unwrap();
        let original = state_mass(&spec.speed, &spec.scale, -1.0, 1.0).unwrap().value;
        let mapped = state_mass(&t.speed, &t.scale, -2.0, 2.0).unwrap().value;
        assert!((original - mapped).abs() < 1e-8, "{original} vs {mapped}");
        // Atom moved to s(0.5) = 1 with its mass intact.
        assert_eq!(t.speed.atoms, vec![Atom { at: 1.0, mass: 3.0 }]);
    }

    #[test]
    fn exit_times_agree_through_the_transform() {
        let spec = doubled();
        let t = natural_scale_transform(&spec).unwrap();
        let original = green_expected_exit_time(&spec, -1.0, 0.25, 1.0).unwrap().value;
        let mapped = green_expected_exit_time(&t, -2.0, 0.5, 2.0).unwrap().value;
        assert!((original - mapped).abs() < 1e-7, "{original} vs {mapped}");
    }

    #[test]
    fn natural_coords_speed_keeps_its_data() {
        let mut spec = doubled();
        spec.speed = SpeedMeasure::lebesgue().add_atom(0.7, 2.0).in_natural_coords();
        let t = natural_scale_transform(&spec).unwrap();
        assert_eq!(t.speed.coords, SpeedCoords::StateSpace);
        assert_eq!(t.speed.atoms, vec![Atom { at: 0.7, mass: 2.0 }]);
    }

    #[test]
    fn unbounded_image_detected() {
        // s'(x) = exp(x^2) has s(+-inf) = +-inf.
        let spec = DiffusionSpec {
            label: "ou".into(),
            interval: Interval::real_line(),
            scale: ScaleFunction::density(
                ScalarField::from_fn(|x| (x * x).exp()),
                0.0,
                (f64::NEG_INFINITY, f64::INFINITY),
            ),
            speed: SpeedMeasure::with_density(ScalarField::from_fn(|x| (-x * x).exp())),
            left: BoundaryBehavior::Inaccessible,
            right: BoundaryBehavior::Inaccessible,
            x0: Some(0.0),
        };
        let t = natural_scale_transform(&spec).unwrap();
        assert!(t.interval.left.is_infinite());
        assert!(t.interval.right.is_infinite());
    }
}
