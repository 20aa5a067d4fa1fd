//! Expected exit times through the Green function of a window.

use crate::characteristics::speed::{natural_atoms_in, natural_density_mass, MassResult};
use crate::characteristics::DiffusionSpec;
use crate::error::{Error, Result};

/// Expected time for the diffusion started at `x` to leave the open window
/// `(a, b)`:
///
/// `E_x[T] = int G(x, y) m(dy)` over `(a, b)` with
/// `G(x, y) = 2 (s(x^y) - s(a)) (s(b) - s(xvy)) / (s(b) - s(a))`.
///
/// The normalization makes standard Brownian motion (identity scale,
/// Lebesgue speed) come out as `(x - a)(b - x)`. Returns zero when `x` sits
/// on the window edge.
pub fn green_expected_exit_time(
    spec: &DiffusionSpec,
    a: f64,
    x: f64,
    b: f64,
) -> Result<MassResult> {
    if !(a < b) || x < a || x > b {
        return Err(Error::OrderViolation { a, x, b });
    }
    if a < spec.interval.left || b > spec.interval.right {
        return Err(Error::OutOfRange {
            query: if a < spec.interval.left { a } else { b },
            lo: spec.interval.left,
            hi: spec.interval.right,
        });
    }
    if x == a || x == b {
        return Ok(MassResult { value: 0.0, error: 0.0 });
    }

    let w_a = spec.scale.eval(a)?;
    let w_x = spec.scale.eval(x)?;
    let w_b = spec.scale.eval(b)?;
    let span = w_b - w_a;

    // Split at w_x: the Green function is linear on each side.
    let left_weight = move |w: f64| 2.0 * (w - w_a) * (w_b - w_x) / span;
    let right_weight = move |w: f64| 2.0 * (w_x - w_a) * (w_b - w) / span;

    let lo = natural_density_mass(&spec.speed, &spec.scale, w_a, w_x, &left_weight)?;
    let hi = natural_density_mass(&spec.speed, &spec.scale, w_x, w_b, &right_weight)?;
    let mut value = lo.value + hi.value;
    let error = lo.error + hi.error;

    // Atoms strictly inside the window; the weight vanishes on the edges so
    // inclusive filtering cannot overcount.
    for atom in natural_atoms_in(&spec.speed, &spec.scale, w_a, w_b)? {
        let weight = if atom.at <= w_x { left_weight(atom.at) } else { right_weight(atom.at) };
        value += atom.mass * weight;
    }

    Ok(MassResult { value, error })
}
