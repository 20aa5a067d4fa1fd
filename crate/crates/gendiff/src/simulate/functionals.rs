//! Pathwise functionals of sampled trajectories.
//!
//! Paths are piecewise constant, so quadratic variation is a sum of
//! squared jumps, occupation times are exact sums of holding intervals,
//! and local time is read off a downcrossing count at the grid resolution.

use crate::error::{Error, Result};
use crate::simulate::SamplePath;

/// Right-continuous step function, e.g. a running quadratic variation.
#[derive(Debug, Clone)]
pub struct StepFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    /// Value at time `t`: the last recorded value with time `<= t`, or the
    /// initial value before the first record.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&u| u <= t) {
            0 => self.values[0],
            i => self.values[i - 1],
        }
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Running sum of squared jumps along the path.
pub fn quadratic_variation(path: &SamplePath) -> StepFunction {
    let mut values = Vec::with_capacity(path.values.len());
    let mut acc = 0.0;
    values.push(0.0);
    for w in path.values.windows(2) {
        let d = w[1] - w[0];
        acc += d * d;
        values.push(acc);
    }
    StepFunction { times: path.times.clone(), values }
}

/// Union of closed intervals and exact points in state space.
#[derive(Debug, Clone, Default)]
pub struct TargetSet {
    pub intervals: Vec<(f64, f64)>,
    pub points: Vec<f64>,
}

impl TargetSet {
    pub fn point(x: f64) -> Self {
        TargetSet { intervals: Vec::new(), points: vec![x] }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        TargetSet { intervals: vec![(lo, hi)], points: Vec::new() }
    }

    pub fn everything() -> Self {
        Self::interval(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Point membership is bitwise: paths take values on an exact grid, so
    /// a target point either is a grid value or is never hit.
    pub fn contains(&self, x: f64) -> bool {
        self.points.contains(&x)
            || self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }
}

/// Lebesgue time spent in `target` up to time `t`.
pub fn occupation_time(path: &SamplePath, target: &TargetSet, t: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..path.values.len() {
        let start = path.times[i];
        if start >= t {
            break;
        }
        // The final state persists beyond its sample time.
        let end = if i + 1 < path.times.len() { path.times[i + 1].min(t) } else { t };
        if end > start && target.contains(path.values[i]) {
            total += end - start;
        }
    }
    total
}

/// Local time of the path at `level` up to time `t`, via downcrossings.
///
/// With `eps` one state-grid cell above the level, the local time estimate
/// is `2 eps D` where `D` counts completed downcrossings of
/// `(level, level + eps)`; the calibration constant is 1.
pub fn local_time_at(path: &SamplePath, level: f64, t: f64) -> Result<f64> {
    let grid = &path.state_grid;
    let lo = grid[0];
    let hi = *grid.last().unwrap();
    if !(lo <= level && level <= hi) {
        return Err(Error::LevelOutsideWindow { level, lo, hi });
    }
    let above = match grid.binary_search_by(|v| v.partial_cmp(&level).unwrap()) {
        Ok(i) => grid[i..].iter().copied().find(|&v| v > level),
        Err(i) => grid.get(i).copied(),
    };
    let Some(upper) = above else {
        // Level at the top of the window: no cell above, no crossings.
        return Ok(0.0);
    };
    let eps = upper - level;

    let mut armed = false;
    let mut crossings = 0u64;
    for i in 0..path.values.len() {
        if path.times[i] > t {
            break;
        }
        let v = path.values[i];
        if v >= upper {
            armed = true;
        } else if v <= level && armed {
            crossings += 1;
            armed = false;
        }
    }
    Ok(2.0 * eps * crossings as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn path(times: Vec<f64>, values: Vec<f64>, grid: Vec<f64>) -> SamplePath {
        SamplePath {
            times,
            values,
            seed: 0,
            grid_step: 1.0,
            spec_label: "test".into(),
            state_grid: Arc::new(grid),
        }
    }

    #[test]
    fn quadratic_variation_accumulates_squared_jumps() {
        let p = path(
            vec![0.0, 1.0, 2.0, 4.0],
            vec![0.0, 0.1, 0.0, 0.2],
            vec![0.0, 0.1, 0.2],
        );
        let qv = quadratic_variation(&p);
        assert!((qv.final_value() - (0.01 + 0.01 + 0.04)).abs() < 1e-15);
        assert_eq!(qv.at(0.5), 0.0);
        assert!((qv.at(1.0) - 0.01).abs() < 1e-15);
        assert!((qv.at(3.9) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn occupation_times_partition_the_horizon() {
        let p = path(
            vec![0.0, 1.0, 3.0, 5.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0, 1.0],
        );
        let at_zero = occupation_time(&p, &TargetSet::point(0.0), 5.0);
        let at_one = occupation_time(&p, &TargetSet::point(1.0), 5.0);
        assert!((at_zero - 3.0).abs() < 1e-15);
        assert!((at_one - 2.0).abs() < 1e-15);
        let everywhere = occupation_time(&p, &TargetSet::everything(), 4.2);
        assert!((everywhere - 4.2).abs() < 1e-15);
    }

    #[test]
    fn occupation_counts_the_terminal_plateau() {
        let p = path(vec![0.0, 1.0, 2.0], vec![0.5, 1.0, 1.0], vec![0.0, 0.5, 1.0]);
        // State 1.0 from t = 1 onward; horizon sample at t = 2.
        assert!((occupation_time(&p, &TargetSet::point(1.0), 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn downcrossings_count_completed_round_trips() {
        let grid = vec![-0.2, -0.1, 0.0, 0.1, 0.2];
        let p = path(
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![0.0, 0.1, 0.0, 0.1, 0.2, 0.1, 0.0],
            grid,
        );
        // Two completed downcrossings of (0, 0.1): eps = 0.1.
        let lt = local_time_at(&p, 0.0, 6.0).unwrap();
        assert!((lt - 2.0 * 0.1 * 2.0).abs() < 1e-15);
        // Cut before the second crossing completes.
        let lt_early = local_time_at(&p, 0.0, 5.5).unwrap();
        assert!((lt_early - 2.0 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn level_guards() {
        let p = path(vec![0.0, 1.0], vec![0.0, 0.1], vec![0.0, 0.1]);
        assert!(matches!(
            local_time_at(&p, 5.0, 1.0),
            Err(Error::LevelOutsideWindow { .. })
        ));
        // Top of the window has no cell above it.
        assert_eq!(local_time_at(&p, 0.1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn level_between_grid_points_uses_next_value_up() {
        let p = path(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0.2, 0.0, 0.2, 0.0],
            vec![0.0, 0.2, 0.4],
        );
        // eps from 0.05 to the next grid value 0.2.
        let lt = local_time_at(&p, 0.05, 3.0).unwrap();
        assert!((lt - 2.0 * 0.15 * 2.0).abs() < 1e-15);
    }
}
