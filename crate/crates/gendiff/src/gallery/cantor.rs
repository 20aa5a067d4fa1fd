//! Fat Cantor sets and the singular monotone function built from them.
//!
//! The construction removes, at level k, a centered open interval of
//! length `alpha * 4^{-k}` from each of the `2^{k-1}` remnants. The kept
//! set G is closed, nowhere dense and has Lebesgue measure `1 - alpha/2`
//! in the infinite limit. Integrating the distance function d_G gives a
//! monotone function q whose derivative vanishes exactly on G; its inverse
//! is a scale function that is continuous and strictly increasing yet not
//! absolutely continuous, which is what defeats the representation
//! property downstream.

use std::sync::Arc;

use crate::characteristics::scale::{ExplicitInverse, ScaleFunction, Side};
use crate::characteristics::speed::SpeedMeasure;
use crate::characteristics::{BoundaryBehavior, DiffusionSpec, Interval};
use crate::error::{Error, Result};

/// Finite-level truncation of a fat Cantor set in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct FatCantorSet {
    pub levels: u32,
    pub alpha: f64,
    /// Removed interval length per level, `alpha * 4^{-k}` for k = 1..levels.
    pub removal_fractions: Vec<f64>,
    /// Sorted disjoint closed remnants after `levels` removal rounds.
    pub kept_intervals: Vec<(f64, f64)>,
    /// Exact infinite-level limit `1 - alpha/2`, not the truncated length.
    pub analytic_measure: f64,
}

/// Builds the level-`levels` truncation of the fat Cantor set with removal
/// parameter `alpha` in `(0, 1]`.
pub fn fat_cantor_set(levels: u32, alpha: f64) -> Result<FatCantorSet> {
    if levels == 0 {
        return Err(Error::InvalidParameter(format!(
            "levels must be a positive integer, got {levels}"
        )));
    }
    // The truncation stores 2^levels intervals.
    if levels > 24 {
        return Err(Error::InvalidParameter(format!(
            "levels is capped at 24, got {levels}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut kept: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    let mut removal_fractions = Vec::with_capacity(levels as usize);
    for k in 1..=levels {
        let gap = alpha * 4f64.powi(-(k as i32));
        removal_fractions.push(gap);
        let mut next = Vec::with_capacity(kept.len() * 2);
        for &(a, b) in &kept {
            if gap >= b - a {
                return Err(Error::BudgetExceeded { level: k });
            }
            let center = 0.5 * (a + b);
            next.push((a, center - 0.5 * gap));
            next.push((center + 0.5 * gap, b));
        }
        kept = next;
    }
    Ok(FatCantorSet {
        levels,
        alpha,
        removal_fractions,
        kept_intervals: kept,
        analytic_measure: 1.0 - 0.5 * alpha,
    })
}

impl FatCantorSet {
    /// Total length of the kept intervals at this truncation level.
    pub fn kept_length(&self) -> f64 {
        self.kept_intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// Exact distance from `x` to the level-`levels` kept union.
pub fn distance_to_set(set: &FatCantorSet, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange { query: x, lo: 0.0, hi: 1.0 });
    }
    // Last kept interval starting at or before x; the first one starts at 0.
    let idx = match set
        .kept_intervals
        .binary_search_by(|(a, _)| a.partial_cmp(&x).unwrap())
    {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    let (_, end) = set.kept_intervals[idx];
    if x <= end {
        return Ok(0.0);
    }
    let (next_start, _) = set.kept_intervals[idx + 1];
    Ok((x - end).min(next_start - x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SegKind {
    Kept,
    Gap,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    end: f64,
    /// Value of the unrescaled antiderivative at `start`.
    cum: f64,
    kind: SegKind,
}

/// The monotone function `q(x) = int_0^x d_G(z) dz` of a fat Cantor set,
/// evaluated exactly through per-segment quadratic antiderivatives.
///
/// `q` is flat on kept segments and a quadratic ramp across each removed
/// gap; its derivative is `d_G` itself, with Lipschitz constant 1.
#[derive(Debug, Clone)]
pub struct CantorQ {
    pub base_set: FatCantorSet,
    segment_table: Vec<Segment>,
    total: f64,
}

impl CantorQ {
    pub fn new(base_set: FatCantorSet) -> Self {
        let mut table = Vec::with_capacity(2 * base_set.kept_intervals.len());
        let mut cum = 0.0;
        for (i, &(a, b)) in base_set.kept_intervals.iter().enumerate() {
            table.push(Segment { start: a, end: b, cum, kind: SegKind::Kept });
            if let Some(&(next, _)) = base_set.kept_intervals.get(i + 1) {
                table.push(Segment { start: b, end: next, cum, kind: SegKind::Gap });
                let g = next - b;
                cum += g * g / 4.0;
            }
        }
        CantorQ { base_set, segment_table: table, total: cum }
    }

    /// Unrescaled `q(x)`; `eval_raw(1)` equals [`total`](Self::total).
    pub fn eval_raw(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let seg = self.segment(x);
        match seg.kind {
            SegKind::Kept => seg.cum,
            SegKind::Gap => {
                let g = seg.end - seg.start;
                let mid = seg.start + 0.5 * g;
                if x <= mid {
                    let d = x - seg.start;
                    seg.cum + 0.5 * d * d
                } else {
                    let d = seg.end - x;
                    seg.cum + g * g / 4.0 - 0.5 * d * d
                }
            }
        }
    }

    /// Unrescaled derivative, equal to the distance function of the base
    /// set by construction.
    pub fn derivative_raw(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let seg = self.segment(x);
        match seg.kind {
            SegKind::Kept => 0.0,
            SegKind::Gap => (x - seg.start).min(seg.end - x),
        }
    }

    /// `int_0^1 d_G`, the affine rescaling factor that maps the range onto
    /// `[0, 1]`.
    pub fn total(&self) -> f64 {
        self.total
    }

    fn segment(&self, x: f64) -> &Segment {
        let idx = match self
            .segment_table
            .binary_search_by(|s| s.start.partial_cmp(&x).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        &self.segment_table[idx]
    }

    /// Lebesgue measure of the infinite-level set G inside `[lo, hi]`,
    /// with the (negligible) recursion truncation reported as error.
    pub fn ideal_zero_set_measure(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut err = 0.0;
        let v = ideal_measure(
            lo.max(0.0),
            hi.min(1.0),
            0.0,
            1.0,
            0,
            self.base_set.alpha,
            self.base_set.analytic_measure,
            &mut err,
        );
        (v, err)
    }
}

/// Recursive ideal-set measure: a depth-`d` remnant carries exactly
/// `2^{-d} * (1 - alpha/2)` of the limit set, and windows that split a
/// remnant recurse past the truncation level using the removal schedule.
#[allow(clippy::too_many_arguments)]
fn ideal_measure(
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
    depth: i32,
    alpha: f64,
    analytic: f64,
    err: &mut f64,
) -> f64 {
    let clip_lo = lo.max(a);
    let clip_hi = hi.min(b);
    if clip_hi <= clip_lo {
        return 0.0;
    }
    if clip_lo <= a && b <= clip_hi {
        return 2f64.powi(-depth) * analytic;
    }
    if depth >= 80 {
        // Below f64 resolution; bound the unresolved overlap.
        *err += clip_hi - clip_lo;
        return 0.0;
    }
    let gap = alpha * 4f64.powi(-(depth + 1));
    let center = 0.5 * (a + b);
    let (u, v) = (center - 0.5 * gap, center + 0.5 * gap);
    ideal_measure(lo, hi, a, u, depth + 1, alpha, analytic, err)
        + ideal_measure(lo, hi, v, b, depth + 1, alpha, analytic, err)
}

impl ExplicitInverse for CantorQ {
    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn value(&self, w: f64) -> f64 {
        self.eval_raw(w) / self.total
    }

    fn derivative(&self, w: f64, _side: Side) -> f64 {
        // q' = d_G is continuous, so both one-sided derivatives agree.
        self.derivative_raw(w) / self.total
    }

    fn zero_set_measure_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        Some(self.ideal_zero_set_measure(lo, hi))
    }

    fn describe(&self) -> String {
        format!("cantor-q(levels={}, alpha={})", self.base_set.levels, self.base_set.alpha)
    }

    fn spec_directive(&self) -> Option<String> {
        Some(format!("cantor {} {}", self.base_set.levels, self.base_set.alpha))
    }
}

/// The scale function whose inverse is the rescaled Cantor q, surjective
/// onto `[0, 1]`.
pub fn cantor_q(set: &FatCantorSet) -> ScaleFunction {
    ScaleFunction::inverse_explicit(Arc::new(CantorQ::new(set.clone())))
}

/// The diffusion `Y = q(W)`: scale `q^{-1}`, speed measure whose natural
/// scale pushforward is Lebesgue on `(0, 1)`, absorbed at both endpoints.
pub fn cantor_diffusion_spec(set: &FatCantorSet, x0: f64) -> Result<DiffusionSpec> {
    if !(0.0 < x0 && x0 < 1.0) {
        return Err(Error::OutOfRange { query: x0, lo: 0.0, hi: 1.0 });
    }
    Ok(DiffusionSpec {
        label: format!("cantor(levels={}, alpha={})", set.levels, set.alpha),
        interval: Interval::closed(0.0, 1.0),
        scale: cantor_q(set),
        speed: SpeedMeasure::lebesgue().in_natural_coords(),
        left: BoundaryBehavior::Absorbing,
        right: BoundaryBehavior::Absorbing,
        x0: Some(x0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn level_one_geometry() {
        let set = fat_cantor_set(1, 1.0).unwrap();
        assert_eq!(set.kept_intervals, vec![(0.0, 0.375), (0.625, 1.0)]);
        assert_eq!(set.removal_fractions, vec![0.25]);
        assert_eq!(set.analytic_measure, 0.5);
    }

    #[test]
    fn kept_length_matches_geometric_series_exactly() {
        // Dyadic alpha keeps every operation exact in binary arithmetic.
        for levels in [1u32, 5, 10, 20] {
            for alpha in [1.0, 0.5] {
                let set = fat_cantor_set(levels, alpha).unwrap();
                let expect = 1.0 - 0.5 * alpha * (1.0 - 2f64.powi(-(levels as i32)));
                assert_eq!(set.kept_length(), expect, "levels={levels} alpha={alpha}");
            }
        }
    }

    #[test]
    fn parameter_guards() {
        assert!(matches!(fat_cantor_set(0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(fat_cantor_set(3, 1.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(fat_cantor_set(3, 0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn distance_examples() {
        let set = fat_cantor_set(1, 1.0).unwrap();
        assert_eq!(distance_to_set(&set, 0.2).unwrap(), 0.0);
        assert_eq!(distance_to_set(&set, 0.5).unwrap(), 0.125);
        assert_eq!(distance_to_set(&set, 0.375).unwrap(), 0.0);
        assert_eq!(distance_to_set(&set, 0.625).unwrap(), 0.0);
        assert!(distance_to_set(&set, 1.5).is_err());
    }

    #[test]
    fn level_one_antiderivative() {
        let q = CantorQ::new(fat_cantor_set(1, 1.0).unwrap());
        // Two triangular humps of half-width 1/8 over the removed interval.
        assert_eq!(q.total(), 1.0 / 64.0);
        assert_eq!(q.eval_raw(0.0), 0.0);
        assert_eq!(q.eval_raw(0.25), 0.0);
        assert_eq!(q.eval_raw(1.0), 1.0 / 64.0);
        // Symmetry of the single tent: midpoint carries half the mass.
        assert_eq!(q.eval_raw(0.5), 1.0 / 128.0);
        assert_eq!(q.derivative_raw(0.5), 0.125);
    }

    #[test]
    fn rescaled_endpoints_and_midpoint() {
        let set = fat_cantor_set(8, 1.0).unwrap();
        let q = CantorQ::new(set);
        assert_eq!(q.value(0.0), 0.0);
        assert_eq!(q.value(1.0), 1.0);
        // The construction is symmetric about 1/2 and dyadic alpha keeps
        // every partial sum exact, so the midpoint is hit exactly.
        assert_eq!(q.value(0.5), 0.5);
    }

    #[test]
    fn evaluator_matches_quadrature_of_distance() {
        // The oracle integrates sampled distances numerically, never touching
        // the antiderivative algebra. Splitting at the kinks of d keeps the
        // midpoint rule exact on each piece; a blind adaptive pass can
        // terminate early on the flats and miss narrow tents entirely.
        let set = fat_cantor_set(6, 1.0).unwrap();
        let q = CantorQ::new(set.clone());
        let mut kinks = vec![0.0, 1.0];
        for pair in set.kept_intervals.windows(2) {
            let (u, v) = (pair[0].1, pair[1].0);
            kinks.extend([u, 0.5 * (u + v), v]);
        }
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = |x: f64| -> f64 {
            let mut sum = 0.0;
            let mut lo = 0.0;
            for &k in kinks.iter().filter(|&&k| k < x) {
                sum += quad::integrate(|z| distance_to_set(&set, z).unwrap(), lo, k, 1e-15).value;
                lo = k;
            }
            sum + quad::integrate(|z| distance_to_set(&set, z).unwrap(), lo, x, 1e-15).value
        };
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let x: f64 = rng.gen();
            let o = oracle(x);
            assert!((q.eval_raw(x) - o).abs() < 1e-12, "x={x} q={} oracle={o}", q.eval_raw(x));
        }
    }

    #[test]
    fn derivative_equals_distance_exactly() {
        let set = fat_cantor_set(10, 0.75).unwrap();
        let q = CantorQ::new(set.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let x: f64 = rng.gen();
            assert_eq!(q.derivative_raw(x), distance_to_set(&set, x).unwrap(), "x={x}");
        }
    }

    #[test]
    fn derivative_is_lipschitz_one() {
        let set = fat_cantor_set(9, 1.0).unwrap();
        let q = CantorQ::new(set);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..1000 {
            let x: f64 = rng.gen();
            let y: f64 = rng.gen();
            let lhs = (q.derivative_raw(x) - q.derivative_raw(y)).abs();
            assert!(lhs <= (x - y).abs() + 1e-15, "x={x} y={y}");
        }
    }

    #[test]
    fn ideal_measure_values() {
        let q = CantorQ::new(fat_cantor_set(12, 1.0).unwrap());
        let (full, err) = q.ideal_zero_set_measure(0.0, 1.0);
        assert_eq!(full, 0.5);
        assert_eq!(err, 0.0);
        // Symmetric half window and the level-1 gap.
        let (half, _) = q.ideal_zero_set_measure(0.0, 0.5);
        assert!((half - 0.25).abs() < 1e-12, "half={half}");
        let (gap, _) = q.ideal_zero_set_measure(0.375, 0.625);
        assert!(gap.abs() < 1e-12, "gap={gap}");
        let q2 = CantorQ::new(fat_cantor_set(12, 0.8).unwrap());
        assert_eq!(q2.ideal_zero_set_measure(0.0, 1.0).0, 0.6);
    }

    #[test]
    fn flat_exactly_on_shared_kept_segments() {
        // q is constant across a pair iff both points sit in one kept
        // interval; any pair spanning a gap must strictly increase.
        let set = fat_cantor_set(12, 1.0).unwrap();
        let q = CantorQ::new(set.clone());
        let same_kept = |x: f64, y: f64| {
            set.kept_intervals.iter().any(|&(a, b)| a <= x && x <= b && a <= y && y <= b)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..1000 {
            let a: f64 = rng.gen();
            let b: f64 = rng.gen();
            let (x, y) = if a < b { (a, b) } else { (b, a) };
            if x == y {
                continue;
            }
            if same_kept(x, y) {
                assert_eq!(q.eval_raw(x), q.eval_raw(y), "x={x} y={y}");
            } else {
                assert!(q.eval_raw(x) < q.eval_raw(y), "x={x} y={y}");
            }
        }
    }

    #[test]
    fn diffusion_spec_validates_clean() {
        let set = fat_cantor_set(12, 1.0).unwrap();
        let spec = cantor_diffusion_spec(&set, 0.5).unwrap();
        let report = spec.validate();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
    }

    #[test]
    fn transformed_speed_density_is_unit() {
        let set = fat_cantor_set(6, 1.0).unwrap();
        let spec = cantor_diffusion_spec(&set, 0.5).unwrap();
        let t = crate::characteristics::natural_scale_transform(&spec).unwrap();
        for w in [0.1, 0.3, 0.7, 0.9] {
            assert_eq!(t.speed.density.eval(w), 1.0);
        }
    }

    #[test]
    fn start_point_guard() {
        let set = fat_cantor_set(3, 1.0).unwrap();
        assert!(cantor_diffusion_spec(&set, 0.0).is_err());
        assert!(cantor_diffusion_spec(&set, 1.2).is_err());
    }
}
