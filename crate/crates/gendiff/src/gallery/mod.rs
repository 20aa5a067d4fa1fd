//! Ready-made diffusion specs: Brownian motion, Ornstein-Uhlenbeck, sticky
//! Brownian motion, the Feller-McKean diffusion with purely atomic speed,
//! and the Cantor construction in [`cantor`].

pub mod cantor;

pub use cantor::{
    cantor_diffusion_spec, cantor_q, distance_to_set, fat_cantor_set, CantorQ, FatCantorSet,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::characteristics::{
    Atom, BoundaryBehavior, DiffusionSpec, Formula, Interval, ScalarField, ScaleFunction,
    SpeedCoords, SpeedMeasure,
};
use crate::error::{Error, Result};

/// Standard Brownian motion on the line.
pub fn bm_spec(x0: f64) -> DiffusionSpec {
    DiffusionSpec {
        label: "bm".into(),
        interval: Interval::real_line(),
        scale: ScaleFunction::Natural,
        speed: SpeedMeasure::lebesgue(),
        left: BoundaryBehavior::Inaccessible,
        right: BoundaryBehavior::Inaccessible,
        x0: Some(x0),
    }
}

/// Ornstein-Uhlenbeck process `dX = -X dt + dW` through its closed-form
/// characteristics: scale density `e^{x^2}`, speed density `e^{-x^2}`.
pub fn ou_spec(x0: f64) -> DiffusionSpec {
    DiffusionSpec {
        label: "ou".into(),
        interval: Interval::real_line(),
        scale: ScaleFunction::density(
            ScalarField::Formula(Formula::ExpQuad { coeff: 1.0 }),
            0.0,
            (f64::NEG_INFINITY, f64::INFINITY),
        ),
        speed: SpeedMeasure::with_density(ScalarField::Formula(Formula::ExpQuad { coeff: -1.0 })),
        left: BoundaryBehavior::Inaccessible,
        right: BoundaryBehavior::Inaccessible,
        x0: Some(x0),
    }
}

/// Brownian motion sticky at the origin: natural scale, speed measure
/// `dx + rho delta_0`.
pub fn sticky_bm_spec(rho: f64, x0: f64) -> Result<DiffusionSpec> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::NonPositiveRho(rho));
    }
    Ok(DiffusionSpec {
        label: format!("sticky-bm(rho={rho})"),
        interval: Interval::real_line(),
        scale: ScaleFunction::Natural,
        speed: SpeedMeasure::lebesgue().add_atom(0.0, rho),
        left: BoundaryBehavior::Inaccessible,
        right: BoundaryBehavior::Inaccessible,
        x0: Some(x0),
    })
}

/// Truncation of the Feller-McKean diffusion: natural scale on `[-1, 1]`
/// with instantly reflecting walls and a purely atomic speed measure on a
/// dense sequence of dyadic rationals.
///
/// The sequence enumerates dyadics level by level (integers first, then
/// odd multiples of 2^-1, 2^-2, ...), shuffling each level with a stream
/// derived from `seed`. Truncating to more atoms extends the sequence
/// without reordering it, so refinements are comparable path by path. The
/// k-th atom carries mass 2^-k.
pub fn feller_mckean_spec(n_atoms: usize, seed: u64, x0: f64) -> DiffusionSpec {
    let mut positions: Vec<f64> = Vec::with_capacity(n_atoms.max(3));
    let mut level: u32 = 0;
    while positions.len() < n_atoms {
        let mut batch: Vec<f64> = if level == 0 {
            vec![-1.0, 0.0, 1.0]
        } else {
            let denom = 2f64.powi(level as i32);
            ((-(1i64 << level) + 1)..(1i64 << level))
                .step_by(2)
                .map(|j| j as f64 / denom)
                .collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(level) + 1);
        batch.shuffle(&mut rng);
        positions.extend(batch);
        level += 1;
    }
    positions.truncate(n_atoms);
    let atoms = positions
        .into_iter()
        .enumerate()
        .map(|(i, at)| Atom { at, mass: 2f64.powi(-(i as i32) - 1) })
        .collect();
    DiffusionSpec {
        label: format!("feller-mckean(n_atoms={n_atoms}, seed={seed})"),
        interval: Interval::closed(-1.0, 1.0),
        scale: ScaleFunction::Natural,
        speed: SpeedMeasure {
            density: ScalarField::constant(0.0),
            atoms,
            coords: SpeedCoords::StateSpace,
        },
        left: BoundaryBehavior::InstantReflecting,
        right: BoundaryBehavior::InstantReflecting,
        x0: Some(x0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::{from_sde, state_mass};

    #[test]
    fn bm_validates() {
        let report = bm_spec(0.0).validate();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
    }

    #[test]
    fn sticky_atom_and_guard() {
        let spec = sticky_bm_spec(2.5, 0.0).unwrap();
        assert_eq!(spec.speed.atoms, vec![Atom { at: 0.0, mass: 2.5 }]);
        assert!(spec.validate().is_valid());
        assert!(matches!(sticky_bm_spec(0.0, 0.0), Err(Error::NonPositiveRho(_))));
        assert!(matches!(sticky_bm_spec(-1.0, 0.0), Err(Error::NonPositiveRho(_))));
    }

    #[test]
    fn feller_mckean_masses_are_geometric() {
        let spec = feller_mckean_spec(10, 7, 0.0);
        let sum: f64 = spec.speed.atoms.iter().map(|a| a.mass).sum();
        // Partial sums of 2^-k are exactly representable.
        assert_eq!(sum, 1.0 - 2f64.powi(-10));
    }

    #[test]
    fn feller_mckean_validates_with_atomic_note() {
        let report = feller_mckean_spec(200, 7, 0.0).validate();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
        assert!(report.notes.iter().any(|n| n.contains("truncation")));
    }

    #[test]
    fn feller_mckean_prefix_stable_under_refinement() {
        let coarse = feller_mckean_spec(100, 7, 0.0);
        let fine = feller_mckean_spec(200, 7, 0.0);
        assert_eq!(coarse.speed.atoms[..], fine.speed.atoms[..100]);
    }

    #[test]
    fn feller_mckean_positions_distinct_and_in_window() {
        let spec = feller_mckean_spec(300, 3, 0.0);
        let mut pos: Vec<f64> = spec.speed.atoms.iter().map(|a| a.at).collect();
        assert!(pos.iter().all(|p| (-1.0..=1.0).contains(p)));
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "duplicate atom position");
    }

    #[test]
    fn ou_catalog_matches_sde_derivation() {
        let catalog = ou_spec(0.0);
        let derived = from_sde(
            "ou-sde",
            Interval::real_line(),
            ScalarField::from_fn(|x| -x),
            ScalarField::constant(1.0),
            BoundaryBehavior::Inaccessible,
            BoundaryBehavior::Inaccessible,
            Some(0.0),
        )
        .unwrap();
        for x in [-1.0, -0.3, 0.5, 1.2] {
            let a = catalog.scale.eval(x).unwrap();
            let b = derived.scale.eval(x).unwrap();
            assert!((a - b).abs() < 1e-7, "scale mismatch at {x}: {a} vs {b}");
        }
        let ma = state_mass(&catalog.speed, &catalog.scale, -1.0, 1.0).unwrap().value;
        let mb = state_mass(&derived.speed, &derived.scale, -1.0, 1.0).unwrap().value;
        assert!((ma - mb).abs() < 1e-7, "speed mass mismatch: {ma} vs {mb}");
    }
}
