//! Characteristics of one-dimensional general diffusions: state interval,
//! scale function, speed measure, boundary behavior, and validation of the
//! whole bundle.

pub mod field;
pub mod green;
pub mod scale;
pub mod sde;
pub mod speed;
pub mod transform;

pub use field::{Formula, ScalarField};
pub use green::green_expected_exit_time;
pub use scale::{
    DensityScale, DerivativeEstimate, ExplicitInverse, SampledScale, ScaleFunction, ScaleInverter,
    Side,
};
pub use sde::from_sde;
pub use speed::{
    natural_atoms_in, natural_density_mass, state_mass, Atom, MassResult, SpeedCoords, SpeedMeasure,
};
pub use transform::natural_scale_transform;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// State interval of a diffusion. Endpoints may be infinite; an endpoint is
/// part of the state space exactly when it is closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub left: f64,
    pub right: f64,
    pub left_closed: bool,
    pub right_closed: bool,
}

impl Interval {
    pub fn open(left: f64, right: f64) -> Self {
        Interval { left, right, left_closed: false, right_closed: false }
    }

    pub fn closed(left: f64, right: f64) -> Self {
        Interval { left, right, left_closed: true, right_closed: true }
    }

    pub fn real_line() -> Self {
        Interval::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn close_left(mut self) -> Self {
        self.left_closed = true;
        self
    }

    pub fn close_right(mut self) -> Self {
        self.right_closed = true;
        self
    }

    /// Endpoints of the interior.
    pub fn interior(&self) -> (f64, f64) {
        (self.left, self.right)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.left_closed { x >= self.left } else { x > self.left };
        let below = if self.right_closed { x <= self.right } else { x < self.right };
        above && below
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        self.left < x && x < self.right
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.left < self.right) {
            out.push(format!("interval endpoints out of order: {} >= {}", self.left, self.right));
        }
        if self.left_closed && !self.left.is_finite() {
            out.push("closed left endpoint must be finite".into());
        }
        if self.right_closed && !self.right.is_finite() {
            out.push("closed right endpoint must be finite".into());
        }
        if self.left.is_nan() || self.right.is_nan() {
            out.push("interval endpoint is NaN".into());
        }
        out
    }
}

/// Behavior of the diffusion at one endpoint of its state interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryBehavior {
    /// The endpoint is never reached; it is not part of the state space.
    Inaccessible,
    /// The process stays at the endpoint forever once it arrives.
    Absorbing,
    /// Reflection without time spent at the endpoint.
    InstantReflecting,
    /// Sticky reflection: the speed measure puts `mass` on the endpoint.
    SlowReflecting { mass: f64 },
}

impl BoundaryBehavior {
    pub fn accessible(&self) -> bool {
        !matches!(self, BoundaryBehavior::Inaccessible)
    }

    /// Speed mass sitting on the endpoint itself.
    pub fn boundary_mass(&self) -> f64 {
        match self {
            BoundaryBehavior::SlowReflecting { mass } => *mass,
            _ => 0.0,
        }
    }
}

/// Full description of a regular one-dimensional diffusion.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    pub label: String,
    pub interval: Interval,
    pub scale: ScaleFunction,
    pub speed: SpeedMeasure,
    pub left: BoundaryBehavior,
    pub right: BoundaryBehavior,
    /// Default starting point for simulation and gallery output.
    pub x0: Option<f64>,
}

/// Outcome of [`DiffusionSpec::validate`]. `violations` are definite
/// failures; `notes` record checks that only hold at a finite resolution.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const PROBE_PAIRS: usize = 256;
// Probe substitute for an infinite endpoint. Kept small: probing evaluates
// the scale, whose density can grow like exp(x^2) on unbounded intervals.
const PROBE_CAP: f64 = 3.0;
const PROBE_SEED: u64 = 0x5eed_5ca1e;

impl DiffusionSpec {
    /// Checks structural invariants and probes the analytic ones
    /// (monotonicity of the scale, positivity of the speed) at seeded
    /// sample points.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        report.violations.extend(self.interval.violations());
        self.check_boundaries(&mut report);
        self.check_scale(&mut report);
        self.check_speed(&mut report);
        self.check_start(&mut report);
        report
    }

    fn check_boundaries(&self, report: &mut ValidationReport) {
        let sides = [
            ("left", self.interval.left, self.interval.left_closed, &self.left),
            ("right", self.interval.right, self.interval.right_closed, &self.right),
        ];
        for (name, endpoint, closed, behavior) in sides {
            if endpoint.is_infinite() && behavior.accessible() {
                report
                    .violations
                    .push(format!("{name} endpoint is infinite but marked accessible"));
            }
            if closed && !behavior.accessible() {
                report.violations.push(format!(
                    "{name} endpoint is part of the state space but marked inaccessible"
                ));
            }
            if !closed && behavior.accessible() && endpoint.is_finite() {
                report.violations.push(format!(
                    "{name} endpoint has accessible behavior but is excluded from the interval"
                ));
            }
            if let BoundaryBehavior::SlowReflecting { mass } = behavior {
                if !(*mass > 0.0) || !mass.is_finite() {
                    report
                        .violations
                        .push(format!("{name} sticky boundary mass {mass} must be positive"));
                }
            }
        }
    }

    fn check_scale(&self, report: &mut ValidationReport) {
        report.violations.extend(scale::scale_violations(&self.scale));
        let (dom_lo, dom_hi) = self.scale.state_domain();
        if dom_lo > self.interval.left || dom_hi < self.interval.right {
            report.violations.push(format!(
                "scale domain [{dom_lo}, {dom_hi}] does not cover the state interval"
            ));
            return;
        }
        if !report.violations.is_empty() {
            return;
        }
        let Some((lo, hi)) = self.probe_window() else {
            return;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
        let mut points: Vec<f64> = (0..2 * PROBE_PAIRS).map(|_| rng.gen_range(lo..hi)).collect();
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        // One left-to-right sweep: strict increase between consecutive
        // points implies it for every drawn pair, and each comparison rests
        // on a single short integral rather than two anchored ones.
        let mut prev: Option<(f64, f64)> = None;
        for &x in &points {
            let evaluated = match prev {
                None => self.scale.eval(x),
                Some(known) => self.scale.eval_from(known, x),
            };
            let sx = match evaluated {
                Ok(s) => s,
                Err(_) => {
                    report
                        .violations
                        .push(format!("scale evaluation failed inside the state interval at {x}"));
                    return;
                }
            };
            if let Some((px, ps)) = prev {
                if !(ps < sx) {
                    report.violations.push(format!(
                        "scale not strictly increasing: s({px}) = {ps}, s({x}) = {sx}"
                    ));
                    return;
                }
            }
            prev = Some((x, sx));
        }
    }

    fn check_speed(&self, report: &mut ValidationReport) {
        report.violations.extend(speed::speed_violations(&self.speed));
        if self.speed.coords == SpeedCoords::StateSpace {
            for a in &self.speed.atoms {
                if !(self.interval.left <= a.at && a.at <= self.interval.right) {
                    report
                        .violations
                        .push(format!("speed atom at {} lies outside the state interval", a.at));
                }
            }
        }
        if !report.violations.is_empty() {
            return;
        }
        let Some((lo, hi)) = self.probe_window() else {
            return;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED ^ 1);
        let mut atomic_note = false;
        for _ in 0..16 {
            let a = rng.gen_range(lo..hi);
            let b = rng.gen_range(lo..hi);
            let (x, y) = if a < b { (a, b) } else { (b, a) };
            if y - x < 1e-6 * (hi - lo) {
                continue;
            }
            let mass = match state_mass(&self.speed, &self.scale, x, y) {
                Ok(m) => m.value,
                Err(e) => {
                    report.violations.push(format!("speed mass of [{x}, {y}] failed: {e}"));
                    return;
                }
            };
            if !(mass > 0.0) {
                if self.speed.purely_atomic() {
                    atomic_note = true;
                } else {
                    report
                        .violations
                        .push(format!("speed measure vanishes on [{x}, {y}]"));
                    return;
                }
            }
        }
        if atomic_note || self.speed.purely_atomic() {
            report.notes.push(
                "speed is purely atomic: strict positivity holds only at the atom truncation \
                 resolution"
                    .into(),
            );
        }
    }

    fn check_start(&self, report: &mut ValidationReport) {
        let Some(x0) = self.x0 else {
            return;
        };
        if !x0.is_finite() || x0 < self.interval.left || x0 > self.interval.right {
            report.violations.push(format!("start point {x0} lies outside the state interval"));
            return;
        }
        if x0 == self.interval.left && !self.interval.left_closed {
            report.violations.push(format!("start point {x0} sits on an excluded endpoint"));
        }
        if x0 == self.interval.right && !self.interval.right_closed {
            report.violations.push(format!("start point {x0} sits on an excluded endpoint"));
        }
    }

    /// True when the process starts at an absorbing endpoint and therefore
    /// never moves.
    pub fn starts_absorbed(&self) -> bool {
        match self.x0 {
            Some(x0) => {
                (x0 == self.interval.left && matches!(self.left, BoundaryBehavior::Absorbing))
                    || (x0 == self.interval.right
                        && matches!(self.right, BoundaryBehavior::Absorbing))
            }
            None => false,
        }
    }

    /// A finite window strictly inside the interval interior, usable for
    /// probing; `None` when the interval is malformed.
    pub fn probe_window(&self) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = self.interval.interior();
        if !(lo < hi) {
            return None;
        }
        if !lo.is_finite() {
            lo = if hi.is_finite() { hi - 2.0 * PROBE_CAP } else { -PROBE_CAP };
        }
        if !hi.is_finite() {
            hi = lo + 2.0 * PROBE_CAP;
        }
        let margin = 1e-6 * (hi - lo);
        Some((lo + margin, hi - margin))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> DiffusionSpec {
        DiffusionSpec {
            label: "bm".into(),
            interval: Interval::real_line(),
            scale: ScaleFunction::Natural,
            speed: SpeedMeasure::lebesgue(),
            left: BoundaryBehavior::Inaccessible,
            right: BoundaryBehavior::Inaccessible,
            x0: Some(0.0),
        }
    }

    #[test]
    fn brownian_motion_is_valid() {
        let report = bm().validate();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
    }

    #[test]
    fn reversed_interval_flagged() {
        let mut spec = bm();
        spec.interval = Interval::open(1.0, -1.0);
        assert!(!spec.validate().is_valid());
    }

    #[test]
    fn infinite_accessible_endpoint_flagged() {
        let mut spec = bm();
        spec.right = BoundaryBehavior::Absorbing;
        let report = spec.validate();
        assert!(report.violations.iter().any(|v| v.contains("infinite")));
    }

    #[test]
    fn negative_atom_mass_flagged() {
        let mut spec = bm();
        spec.speed = SpeedMeasure::lebesgue().add_atom(0.0, -1.0);
        assert!(!spec.validate().is_valid());
    }

    #[test]
    fn start_outside_interval_flagged() {
        let mut spec = bm();
        spec.interval = Interval::open(0.0, 1.0).close_left();
        spec.left = BoundaryBehavior::Absorbing;
        spec.x0 = Some(2.0);
        assert!(!spec.validate().is_valid());
    }

    #[test]
    fn purely_atomic_speed_noted_not_rejected() {
        let mut spec = bm();
        spec.interval = Interval::open(-1.0, 1.0);
        spec.speed = SpeedMeasure {
            density: ScalarField::constant(0.0),
            atoms: vec![Atom { at: 0.0, mass: 1.0 }, Atom { at: 0.5, mass: 0.5 }],
            coords: SpeedCoords::StateSpace,
        };
        let report = spec.validate();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
        assert!(report.notes.iter().any(|n| n.contains("atomic")));
    }

    #[test]
    fn decreasing_scale_probe_detects() {
        let mut spec = bm();
        spec.interval = Interval::open(0.0, 2.0);
        spec.scale = ScaleFunction::sampled(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5]);
        let report = spec.validate();
        assert!(report.violations.iter().any(|v| v.contains("increasing")));
    }
}
