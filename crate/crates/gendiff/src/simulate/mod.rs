//! Path simulation through a speed-measure Markov chain in natural scale.
//!
//! The chain lives on a uniform natural-scale grid. From an interior point
//! it jumps to either neighbor with probability 1/2 after an exponential
//! holding time whose mean is the Green-function integral of the speed
//! measure over the two-neighbor cell. This reproduces exit probabilities
//! exactly at grid points and exit times exactly at the cell level, and it
//! handles atoms (stickiness) and singular scales, which have no SDE
//! coefficients to discretize.

pub mod functionals;

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::characteristics::scale::DensityScale;
use crate::characteristics::speed::natural_density_mass_between;
use crate::characteristics::{natural_atoms_in, BoundaryBehavior, DiffusionSpec, ScaleFunction};
use crate::error::{Error, Result};
use crate::quad;

/// What the chain does at a window edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallRule {
    Absorb,
    ReflectInward,
}

/// Discretized diffusion on a uniform natural-scale grid.
#[derive(Debug, Clone)]
pub struct GridChain {
    /// Natural-scale grid points, uniformly spaced by `h`.
    pub grid: Vec<f64>,
    /// State-space values `q(grid[k])`.
    pub values: Vec<f64>,
    /// Mean exponential holding time per grid point.
    pub mean_holding: Vec<f64>,
    pub left_rule: WallRule,
    pub right_rule: WallRule,
    /// Probability of jumping to the left neighbor from an interior point.
    pub jump_left_prob: f64,
    pub h: f64,
    pub spec_label: String,
    /// True when the wall truncates a wider state space instead of
    /// realizing a boundary of the spec; statistics should be read before
    /// the first artificial wall hit.
    pub left_artificial: bool,
    pub right_artificial: bool,
}

/// One sampled trajectory. Values are the piecewise-constant states held
/// on `[times[i], times[i+1])`; the final sample sits at the horizon.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub grid_step: f64,
    pub spec_label: String,
    /// State values of the generating chain, shared across an ensemble.
    pub state_grid: Arc<Vec<f64>>,
}

const WALL_MATCH_TOL: f64 = 1e-9;

/// Builds the chain for `spec` on the natural-scale window `[lo, hi]` with
/// target step `h` (adjusted to divide the window exactly).
///
/// A window edge that coincides with the image of a closed endpoint
/// realizes that endpoint's behavior; any other edge is an artificial
/// reflecting wall and is flagged as such.
pub fn build_grid_chain(spec: &DiffusionSpec, h: f64, window: (f64, f64)) -> Result<GridChain> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::NonPositiveStep(h));
    }
    let (lo, hi) = window;
    if !lo.is_finite() || !hi.is_finite() || !(lo < hi) || (hi - lo) < 2.0 * h {
        return Err(Error::WindowTooSmall { lo, hi, h });
    }
    let n = ((hi - lo) / h).round() as usize;
    let n = n.max(2);
    let h = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();

    let values = state_values_on(&spec.scale, &grid)?;

    let (left_rule, left_artificial) =
        wall_rule(natural_edge(spec, true), spec.interval.left_closed, &spec.left, lo);
    let (right_rule, right_artificial) =
        wall_rule(natural_edge(spec, false), spec.interval.right_closed, &spec.right, hi);

    let mut mean_holding = vec![0.0; n + 1];
    for k in 1..n {
        let center = grid[k];
        let weight = move |u: f64| h - (u - center).abs();
        mean_holding[k] = natural_density_mass_between(
            &spec.speed,
            &spec.scale,
            (grid[k - 1], values[k - 1]),
            (grid[k + 1], values[k + 1]),
            &weight,
            1,
        )?
        .value;
    }
    if left_rule == WallRule::ReflectInward {
        let y1 = grid[1];
        mean_holding[0] = natural_density_mass_between(
            &spec.speed,
            &spec.scale,
            (grid[0], values[0]),
            (y1, values[1]),
            &move |u| 2.0 * (y1 - u),
            1,
        )?
        .value;
        if !left_artificial {
            mean_holding[0] += 2.0 * h * spec.left.boundary_mass();
        }
    }
    if right_rule == WallRule::ReflectInward {
        let y1 = grid[n - 1];
        mean_holding[n] = natural_density_mass_between(
            &spec.speed,
            &spec.scale,
            (y1, values[n - 1]),
            (grid[n], values[n]),
            &move |u| 2.0 * (u - y1),
            1,
        )?
        .value;
        if !right_artificial {
            mean_holding[n] += 2.0 * h * spec.right.boundary_mass();
        }
    }

    // Atoms snap to the nearest grid point (ties to the left). An atom in
    // an interior cell contributes h times its mass to the holding time;
    // at a reflecting wall the one-sided cell doubles the weight. Atoms
    // snapped onto an absorbing wall are inert.
    for atom in natural_atoms_in(&spec.speed, &spec.scale, lo, hi)? {
        let f = (atom.at - lo) / h;
        let fl = f.floor();
        let k = if f - fl > 0.5 { fl as usize + 1 } else { fl as usize };
        let k = k.min(n);
        if k == 0 {
            if left_rule == WallRule::ReflectInward {
                mean_holding[0] += 2.0 * h * atom.mass;
            }
        } else if k == n {
            if right_rule == WallRule::ReflectInward {
                mean_holding[n] += 2.0 * h * atom.mass;
            }
        } else {
            mean_holding[k] += h * atom.mass;
        }
    }

    Ok(GridChain {
        grid,
        values,
        mean_holding,
        left_rule,
        right_rule,
        jump_left_prob: 0.5,
        h,
        spec_label: spec.label.clone(),
        left_artificial,
        right_artificial,
    })
}

/// Inverts the scale at every grid point. Density scales walk the grid
/// with Newton steps from the previous solution, integrating the scale
/// density only over each step; anchored inversion per point would redo a
/// full-span quadrature hundreds of times.
fn state_values_on(scale: &ScaleFunction, grid: &[f64]) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(grid.len());
    if let ScaleFunction::Density(ds) = scale {
        let mut x = ds.anchor;
        let mut s = 0.0;
        for &w in grid {
            match newton_invert(ds, x, s, w) {
                Ok((nx, ns)) => {
                    x = nx;
                    s = ns;
                }
                Err(_) => {
                    x = scale.inverse().eval(w)?;
                    s = w;
                }
            }
            values.push(x);
        }
        return Ok(values);
    }
    let inverter = scale.inverse();
    for &w in grid {
        values.push(inverter.eval(w)?);
    }
    Ok(values)
}

/// One Newton solve of `s(x) = target` starting from a point with known
/// scale value; returns the solution with its accumulated scale value.
fn newton_invert(ds: &DensityScale, mut x: f64, mut s: f64, target: f64) -> Result<(f64, f64)> {
    let (dlo, dhi) = ds.domain;
    for _ in 0..80 {
        let slope = ds.sprime.eval(x);
        if !(slope > 0.0) || !slope.is_finite() {
            return Err(Error::InversionFailure(target));
        }
        let err = target - s;
        let step = err / slope;
        if step.abs() <= 1e-13 * (1.0 + x.abs()) {
            return Ok((x, s));
        }
        let mut x2 = x + step;
        if x2 <= dlo {
            x2 = 0.5 * (x + dlo);
        }
        if x2 >= dhi {
            x2 = 0.5 * (x + dhi);
        }
        let tol = 1e-13 * (1.0 + (x2 - x).abs()) + 1e-12 * err.abs();
        s += quad::integrate(|z| ds.sprime.eval(z), x, x2, tol).value;
        x = x2;
    }
    let slope = ds.sprime.eval(x).max(f64::MIN_POSITIVE);
    if (target - s).abs() / slope > 1e-6 * (1.0 + x.abs()) {
        return Err(Error::InversionFailure(target));
    }
    Ok((x, s))
}

/// Natural-scale image of a finite interval endpoint. Explicit-inverse
/// scales read it off the inverse's domain; inverting the value would be
/// ambiguous where the inverse is flat.
fn natural_edge(spec: &DiffusionSpec, left: bool) -> Option<f64> {
    let endpoint = if left { spec.interval.left } else { spec.interval.right };
    if !endpoint.is_finite() {
        return None;
    }
    match &spec.scale {
        crate::characteristics::ScaleFunction::InverseExplicit(inv) => {
            let (dlo, dhi) = inv.domain();
            Some(if left { dlo } else { dhi })
        }
        scale => scale.eval(endpoint).ok(),
    }
}

/// Natural-scale image of a state-space window. A window endpoint equal to
/// an interval endpoint maps to the exact edge of the scale image, so real
/// walls are recognized by [`build_grid_chain`] rather than approximated.
pub fn natural_window(spec: &DiffusionSpec, state_window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = state_window;
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(Error::WindowOutOfRange { lo, hi });
    }
    let side = |x: f64, left: bool| -> Result<f64> {
        let endpoint = if left { spec.interval.left } else { spec.interval.right };
        if x == endpoint {
            return natural_edge(spec, left).ok_or(Error::OutOfRange {
                query: x,
                lo: spec.interval.left,
                hi: spec.interval.right,
            });
        }
        spec.scale.eval(x)
    };
    Ok((side(lo, true)?, side(hi, false)?))
}

fn wall_rule(
    image: Option<f64>,
    closed: bool,
    behavior: &BoundaryBehavior,
    edge: f64,
) -> (WallRule, bool) {
    if closed {
        if let Some(image) = image {
            if (image - edge).abs() <= WALL_MATCH_TOL * (1.0 + image.abs()) {
                let rule = match behavior {
                    BoundaryBehavior::Absorbing => WallRule::Absorb,
                    _ => WallRule::ReflectInward,
                };
                return (rule, false);
            }
        }
    }
    (WallRule::ReflectInward, true)
}

impl GridChain {
    /// Copy of the chain with both walls absorbing, for exit-time and
    /// exit-probability estimation on a window interior to the state space.
    pub fn with_absorbing_walls(&self) -> GridChain {
        let mut chain = self.clone();
        chain.left_rule = WallRule::Absorb;
        chain.right_rule = WallRule::Absorb;
        let n = chain.mean_holding.len() - 1;
        chain.mean_holding[0] = 0.0;
        chain.mean_holding[n] = 0.0;
        chain
    }

    /// Index of the grid point whose state value is nearest to `x0`.
    pub fn snap_index(&self, x0: f64) -> Result<usize> {
        let n = self.values.len() - 1;
        let (vlo, vhi) = (self.values[0], self.values[n]);
        if !(vlo <= x0 && x0 <= vhi) {
            return Err(Error::StartOutsideWindow { x0, lo: vlo, hi: vhi });
        }
        let i = match self.values.binary_search_by(|v| v.partial_cmp(&x0).unwrap()) {
            Ok(i) => i,
            Err(i) => {
                if x0 - self.values[i - 1] <= self.values[i] - x0 {
                    i - 1
                } else {
                    i
                }
            }
        };
        Ok(i)
    }

    fn absorbed_at(&self, k: usize) -> bool {
        (k == 0 && self.left_rule == WallRule::Absorb)
            || (k == self.values.len() - 1 && self.right_rule == WallRule::Absorb)
    }
}

/// Simulates one trajectory up to `horizon` with its own generator.
///
/// Zero-holding states are passed through in zero time and merged into the
/// next sample, so the recorded times strictly increase. After absorption
/// the path plateaus to the horizon.
pub fn simulate_path(chain: &GridChain, x0: f64, horizon: f64, seed: u64) -> Result<SamplePath> {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(run_path(chain, chain.snap_index(x0)?, horizon, rng, seed))
}

fn run_path(
    chain: &GridChain,
    start: usize,
    horizon: f64,
    mut rng: ChaCha8Rng,
    seed: u64,
) -> SamplePath {
    let n = chain.values.len() - 1;
    let mut k = start;
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut values = vec![chain.values[k]];
    let state_grid = Arc::new(chain.values.clone());
    loop {
        if chain.absorbed_at(k) {
            break;
        }
        let hold = chain.mean_holding[k];
        let dt = if hold > 0.0 { -hold * (1.0f64 - rng.gen::<f64>()).ln() } else { 0.0 };
        if t + dt >= horizon {
            break;
        }
        t += dt;
        k = if k == 0 {
            1
        } else if k == n {
            n - 1
        } else if rng.gen::<f64>() < chain.jump_left_prob {
            k - 1
        } else {
            k + 1
        };
        if *times.last().unwrap() == t {
            *values.last_mut().unwrap() = chain.values[k];
        } else {
            times.push(t);
            values.push(chain.values[k]);
        }
    }
    if *times.last().unwrap() < horizon {
        times.push(horizon);
        values.push(chain.values[k]);
    }
    SamplePath {
        times,
        values,
        seed,
        grid_step: chain.h,
        spec_label: chain.spec_label.clone(),
        state_grid,
    }
}

/// Simulates `n_paths` trajectories in parallel. Path `i` uses stream `i`
/// of the master seed, so the ensemble is identical for any worker count.
pub fn simulate_ensemble(
    chain: &GridChain,
    x0: f64,
    horizon: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<SamplePath>> {
    let start = chain.snap_index(x0)?;
    Ok((0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(i as u64);
            run_path(chain, start, horizon, rng, master_seed)
        })
        .collect())
}

/// Per-path generator for estimators that fold a path online instead of
/// storing it; uses the same stream layout as [`simulate_ensemble`].
pub fn path_rng(master_seed: u64, path_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index as u64);
    rng
}
