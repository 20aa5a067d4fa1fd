//! Speed measures: absolutely continuous part, atoms, and integration
//! against them in state or natural-scale coordinates.
//!
//! A speed measure is locally finite and strictly positive on the open
//! state interval. Some examples are easiest to describe through their
//! pushforward under the scale (the Cantor construction has a singular
//! state-space speed whose pushforward is plain Lebesgue measure), so a
//! measure declares which coordinate system its density and atoms use.

use crate::characteristics::field::ScalarField;
use crate::characteristics::scale::ScaleFunction;
use crate::error::Result;
use crate::quad;

/// Coordinate system the density and atom positions of a [`SpeedMeasure`]
/// refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedCoords {
    /// Plain coordinates on the state interval.
    StateSpace,
    /// Coordinates on the natural-scale image; the stored data describe the
    /// pushforward of the measure under the scale function.
    NaturalScale,
}

/// A point mass of the speed measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub at: f64,
    pub mass: f64,
}

/// Speed measure of a diffusion: density plus atoms in the declared
/// coordinates. Boundary stickiness is carried by the boundary behavior of
/// the spec, not by an atom here.
#[derive(Debug, Clone)]
pub struct SpeedMeasure {
    pub density: ScalarField,
    pub atoms: Vec<Atom>,
    pub coords: SpeedCoords,
}

/// An integral value with its quadrature error estimate.
#[derive(Debug, Clone, Copy)]
pub struct MassResult {
    pub value: f64,
    pub error: f64,
}

const MASS_QUAD_TOL: f64 = 1e-11;
// Pre-partition count for user-facing mass integrals. Pushforward
// densities of sampled scales jump at knot values, and a blind adaptive
// pass can miss a whole constant block; see quad::integrate_partitioned.
const MASS_PANELS: u32 = 16;

impl SpeedMeasure {
    /// Lebesgue measure on the state interval.
    pub fn lebesgue() -> Self {
        SpeedMeasure {
            density: ScalarField::constant(1.0),
            atoms: Vec::new(),
            coords: SpeedCoords::StateSpace,
        }
    }

    pub fn with_density(density: ScalarField) -> Self {
        SpeedMeasure { density, atoms: Vec::new(), coords: SpeedCoords::StateSpace }
    }

    pub fn add_atom(mut self, at: f64, mass: f64) -> Self {
        self.atoms.push(Atom { at, mass });
        self
    }

    pub fn in_natural_coords(mut self) -> Self {
        self.coords = SpeedCoords::NaturalScale;
        self
    }

    /// True when the absolutely continuous part is identically zero and the
    /// measure consists of atoms only.
    pub fn purely_atomic(&self) -> bool {
        self.density.is_zero() && !self.atoms.is_empty()
    }

    /// Atoms of the measure inside `[lo, hi]` in the measure's own
    /// coordinates.
    pub fn atoms_in_own(&self, lo: f64, hi: f64) -> impl Iterator<Item = Atom> + '_ {
        self.atoms.iter().copied().filter(move |a| lo <= a.at && a.at <= hi)
    }

    fn density_mass_own(&self, lo: f64, hi: f64) -> MassResult {
        if hi <= lo || self.density.is_zero() {
            return MassResult { value: 0.0, error: 0.0 };
        }
        let tol = MASS_QUAD_TOL * (1.0 + hi - lo);
        let r = quad::integrate_partitioned(|x| self.density.eval(x), lo, hi, tol, MASS_PANELS);
        MassResult { value: r.value, error: r.error }
    }
}

/// Mass of the closed state-space interval `[lo, hi]`, atoms included.
pub fn state_mass(
    speed: &SpeedMeasure,
    scale: &ScaleFunction,
    lo: f64,
    hi: f64,
) -> Result<MassResult> {
    if hi < lo {
        return Ok(MassResult { value: 0.0, error: 0.0 });
    }
    match speed.coords {
        SpeedCoords::StateSpace => {
            let mut r = speed.density_mass_own(lo, hi);
            for a in speed.atoms_in_own(lo, hi) {
                r.value += a.mass;
            }
            Ok(r)
        }
        SpeedCoords::NaturalScale => {
            let (w_lo, w_hi) = (scale.eval(lo)?, scale.eval(hi)?);
            let mut r = speed.density_mass_own(w_lo, w_hi);
            for a in speed.atoms_in_own(w_lo, w_hi) {
                r.value += a.mass;
            }
            Ok(r)
        }
    }
}

/// Integral of `weight` against the absolutely continuous part of the
/// pushforward measure over the natural-scale window `[w0, w1]`. Atoms are
/// reported separately by [`natural_atoms_in`].
pub fn natural_density_mass(
    speed: &SpeedMeasure,
    scale: &ScaleFunction,
    w0: f64,
    w1: f64,
    weight: &dyn Fn(f64) -> f64,
) -> Result<MassResult> {
    if w1 <= w0 || speed.density.is_zero() {
        return Ok(MassResult { value: 0.0, error: 0.0 });
    }
    if speed.coords == SpeedCoords::NaturalScale {
        return natural_density_mass_between(speed, scale, (w0, w0), (w1, w1), weight, MASS_PANELS);
    }
    let inv = scale.inverse();
    let (x0, x1) = (inv.eval(w0)?, inv.eval(w1)?);
    natural_density_mass_between(speed, scale, (w0, x0), (w1, x1), weight, MASS_PANELS)
}

/// Same integral with the window endpoints given as (natural, state)
/// pairs, for callers that already hold the inverted states; re-inverting
/// a density scale per window would dominate chain construction. Callers
/// on h-sized windows pass `panels = 1`; wide user-facing windows
/// pre-partition so density jumps cannot hide.
pub(crate) fn natural_density_mass_between(
    speed: &SpeedMeasure,
    scale: &ScaleFunction,
    (w0, x0): (f64, f64),
    (w1, x1): (f64, f64),
    weight: &dyn Fn(f64) -> f64,
    panels: u32,
) -> Result<MassResult> {
    if w1 <= w0 || speed.density.is_zero() {
        return Ok(MassResult { value: 0.0, error: 0.0 });
    }
    let tol = MASS_QUAD_TOL * (1.0 + w1 - w0);
    let r = match speed.coords {
        SpeedCoords::NaturalScale => {
            quad::integrate_partitioned(|w| weight(w) * speed.density.eval(w), w0, w1, tol, panels)
        }
        // Substitute x = q(w): the integral becomes one in state
        // coordinates weighted through the scale.
        SpeedCoords::StateSpace => match scale {
            ScaleFunction::Natural => {
                quad::integrate_partitioned(
                    |x| weight(x) * speed.density.eval(x),
                    x0,
                    x1,
                    tol,
                    panels,
                )
            }
            ScaleFunction::Density(ds) => {
                // The natural coordinate of a sample point is w0 plus a
                // short local integral; evaluating from the scale's own
                // anchor would redo a full-span quadrature per sample.
                let local_tol = 1e-13 * (1.0 + (x1 - x0).abs());
                quad::integrate_partitioned(
                    |x| {
                        let dw = quad::integrate(|z| ds.sprime.eval(z), x0, x, local_tol).value;
                        weight(w0 + dw) * speed.density.eval(x)
                    },
                    x0,
                    x1,
                    tol,
                    panels,
                )
            }
            _ => quad::integrate_partitioned(
                |x| {
                    let w = scale.eval(x).unwrap_or(f64::NAN);
                    weight(w) * speed.density.eval(x)
                },
                x0,
                x1,
                tol,
                panels,
            ),
        },
    };
    Ok(MassResult { value: r.value, error: r.error })
}

/// Atoms of the pushforward measure with natural-scale positions in
/// `[w0, w1]`, positions reported in natural-scale coordinates.
pub fn natural_atoms_in(
    speed: &SpeedMeasure,
    scale: &ScaleFunction,
    w0: f64,
    w1: f64,
) -> Result<Vec<Atom>> {
    let mut out = Vec::new();
    match speed.coords {
        SpeedCoords::NaturalScale => {
            out.extend(speed.atoms_in_own(w0, w1));
        }
        SpeedCoords::StateSpace => {
            for a in &speed.atoms {
                let w = scale.eval(a.at)?;
                if w0 <= w && w <= w1 {
                    out.push(Atom { at: w, mass: a.mass });
                }
            }
        }
    }
    out.sort_by(|a, b| a.at.partial_cmp(&b.at).unwrap());
    Ok(out)
}

/// Shared validation of a speed measure; returns violation messages.
pub(crate) fn speed_violations(speed: &SpeedMeasure) -> Vec<String> {
    let mut out = Vec::new();
    for a in &speed.atoms {
        if !(a.mass > 0.0) || !a.mass.is_finite() {
            out.push(format!("speed atom at {} has non-positive mass {}", a.at, a.mass));
        }
        if !a.at.is_finite() {
            out.push(format!("speed atom position {} is not finite", a.at));
        }
    }
    if speed.density.is_zero() && speed.atoms.is_empty() {
        out.push("speed measure is identically zero".into());
    }
    out
}
