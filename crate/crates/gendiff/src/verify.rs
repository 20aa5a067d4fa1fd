//! Statistical verification of the identities the characteristics imply.
//!
//! Every target comes from an oracle computed without simulation: a closed
//! form, a Green-function quadrature, or exact gallery arithmetic. The
//! estimators run the grid chain directly and fold their statistics
//! online, so ensembles of millions of steps never materialize paths.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::{green_expected_exit_time, DiffusionSpec};
use crate::error::{Error, Result};
use crate::gallery::{bm_spec, feller_mckean_spec, sticky_bm_spec};
use crate::simulate::{build_grid_chain, path_rng, GridChain};

/// Default pass threshold in standard errors.
pub const Z_MAX: f64 = 3.0;

/// Relative tolerance for the occupation/local-time identity; the
/// downcrossing estimator is the noisiest component, so this test is wider
/// than the 3-sigma checks.
pub const OCCUPATION_REL_TOL: f64 = 0.15;

/// Mean relative sup-deviation allowed between quadratic variation and the
/// occupation-corrected clock, at grid steps h <= 0.01.
pub const CHARACTERISTICS_REL_TOL: f64 = 0.05;

/// Minimum fraction of time in the atom set demanded of the truncated
/// atomic diffusion; the untruncated target is 1, with no quantitative
/// truncation bound available, so this is an engineering threshold.
pub const ATOMIC_FRACTION_MIN: f64 = 0.95;

/// One verification outcome with everything needed to replay it.
#[derive(Debug, Clone, Serialize)]
pub struct StatReport {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub z_score: f64,
    pub n_paths: usize,
    pub pass: bool,
    pub metadata: BTreeMap<String, String>,
}

fn z_and_pass(estimate: f64, target: f64, stderr: f64) -> (f64, bool) {
    if stderr > 0.0 {
        let z = (estimate - target) / stderr;
        (z, z.abs() <= Z_MAX)
    } else {
        // Deterministic estimate: compare at floating-point resolution.
        let ok = (estimate - target).abs() <= 1e-9 * (1.0 + target.abs());
        (0.0, ok)
    }
}

fn sample_stats(sum: f64, sumsq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

fn base_metadata(h: f64, seed: u64, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("h".into(), format!("{h}"));
    m.insert("seed".into(), format!("{seed}"));
    for (k, v) in extra {
        m.insert((*k).into(), v.clone());
    }
    m
}

fn positive_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    Ok(())
}

/// Empirical probability of exiting `(a, b)` on the right against the
/// scale-ratio target `(s(x0) - s(a)) / (s(b) - s(a))`, evaluated at the
/// grid point the start snaps to.
pub fn exit_probability_test(
    spec: &DiffusionSpec,
    x0: f64,
    a: f64,
    b: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    if !(a < x0 && x0 < b) {
        return Err(Error::OrderViolation { a, x: x0, b });
    }
    positive_paths(n_paths)?;
    let wa = spec.scale.eval(a)?;
    let wb = spec.scale.eval(b)?;
    let chain = build_grid_chain(spec, h, (wa, wb))?.with_absorbing_walls();
    let k0 = chain.snap_index(x0)?;
    let target = (chain.grid[k0] - wa) / (wb - wa);
    let n = chain.values.len() - 1;

    // Exit side of the embedded walk does not depend on holding times.
    let right: u64 = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut k = k0;
            while k != 0 && k != n {
                k = if rng.gen::<f64>() < 0.5 { k - 1 } else { k + 1 };
            }
            u64::from(k == n)
        })
        .sum();

    let estimate = right as f64 / n_paths as f64;
    let stderr = (target * (1.0 - target) / n_paths as f64).sqrt();
    let (z_score, pass) = z_and_pass(estimate, target, stderr);
    Ok(StatReport {
        name: format!("exit-probability({})", spec.label),
        estimate,
        stderr,
        target,
        z_score,
        n_paths,
        pass,
        metadata: base_metadata(
            chain.h,
            seed,
            &[
                ("window", format!("({a}, {b})")),
                ("x0", format!("{x0}")),
                ("natural_start", format!("{}", chain.grid[k0])),
            ],
        ),
    })
}

/// Empirical mean of the exit time of `(a, b)` against the Green-function
/// oracle evaluated at the snapped start.
pub fn exit_time_test(
    spec: &DiffusionSpec,
    x0: f64,
    a: f64,
    b: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    if !(a < b) || x0 < a || x0 > b {
        return Err(Error::OrderViolation { a, x: x0, b });
    }
    positive_paths(n_paths)?;
    let wa = spec.scale.eval(a)?;
    let wb = spec.scale.eval(b)?;
    let chain = build_grid_chain(spec, h, (wa, wb))?.with_absorbing_walls();
    let k0 = chain.snap_index(x0)?;
    let x_snap = chain.values[k0];
    let target = green_expected_exit_time(spec, a, x_snap.clamp(a, b), b)?.value;
    if !target.is_finite() {
        return Err(Error::InfiniteTarget);
    }
    let n = chain.values.len() - 1;

    // Collected in path order and summed sequentially: parallel float
    // reduction would make the estimate depend on work splitting.
    let exit_times: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut k = k0;
            let mut t = 0.0;
            while k != 0 && k != n {
                let hold = chain.mean_holding[k];
                if hold > 0.0 {
                    t -= hold * (1.0f64 - rng.gen::<f64>()).ln();
                }
                k = if rng.gen::<f64>() < 0.5 { k - 1 } else { k + 1 };
            }
            t
        })
        .collect();
    let sum: f64 = exit_times.iter().sum();
    let sumsq: f64 = exit_times.iter().map(|t| t * t).sum();

    let (estimate, stderr) = sample_stats(sum, sumsq, n_paths);
    let (z_score, pass) = z_and_pass(estimate, target, stderr);
    Ok(StatReport {
        name: format!("exit-time({})", spec.label),
        estimate,
        stderr,
        target,
        z_score,
        n_paths,
        pass,
        metadata: base_metadata(
            chain.h,
            seed,
            &[("window", format!("({a}, {b})")), ("x0", format!("{x0}"))],
        ),
    })
}

/// Mean of the stopped natural-scale process at each checkpoint against
/// its start value; the report carries the worst checkpoint.
#[allow(clippy::too_many_arguments)]
pub fn martingale_test(
    spec: &DiffusionSpec,
    x0: f64,
    a: f64,
    b: f64,
    checkpoints: &[f64],
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    if !(a < x0 && x0 < b) {
        return Err(Error::OrderViolation { a, x: x0, b });
    }
    positive_paths(n_paths)?;
    if checkpoints.is_empty()
        || checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints.iter().any(|&t| !(t > 0.0) || !t.is_finite())
    {
        return Err(Error::InvalidParameter(
            "checkpoints must be finite, positive and strictly increasing".into(),
        ));
    }
    let wa = spec.scale.eval(a)?;
    let wb = spec.scale.eval(b)?;
    let chain = build_grid_chain(spec, h, (wa, wb))?.with_absorbing_walls();
    let k0 = chain.snap_index(x0)?;
    let target = chain.grid[k0];
    let n = chain.values.len() - 1;
    let m = checkpoints.len();

    // Per-path stopped values, collected in path order; the sequential
    // accumulation below keeps the report bit-reproducible.
    let stopped: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut k = k0;
            let mut t = 0.0;
            let mut out = vec![0.0; m];
            let mut ci = 0;
            while ci < m {
                if k == 0 || k == n {
                    while ci < m {
                        out[ci] = chain.grid[k];
                        ci += 1;
                    }
                    break;
                }
                let hold = chain.mean_holding[k];
                let dt =
                    if hold > 0.0 { -hold * (1.0f64 - rng.gen::<f64>()).ln() } else { 0.0 };
                while ci < m && checkpoints[ci] < t + dt {
                    out[ci] = chain.grid[k];
                    ci += 1;
                }
                t += dt;
                k = if rng.gen::<f64>() < 0.5 { k - 1 } else { k + 1 };
            }
            out
        })
        .collect();
    let mut acc = vec![0.0; 2 * m];
    for path in &stopped {
        for j in 0..m {
            acc[j] += path[j];
            acc[m + j] += path[j] * path[j];
        }
    }

    let mut worst: Option<(f64, f64, f64, f64)> = None;
    let mut metadata = base_metadata(
        chain.h,
        seed,
        &[("window", format!("({a}, {b})")), ("natural_start", format!("{target}"))],
    );
    for j in 0..m {
        let (mean, se) = sample_stats(acc[j], acc[m + j], n_paths);
        let (z, _) = z_and_pass(mean, target, se);
        metadata.insert(format!("checkpoint_{}", checkpoints[j]), format!("mean={mean} z={z}"));
        if worst.is_none_or(|(wz, ..)| z.abs() > wz.abs()) {
            worst = Some((z, mean, se, checkpoints[j]));
        }
    }
    let (z_score, estimate, stderr, at) = worst.unwrap();
    metadata.insert("worst_checkpoint".into(), format!("{at}"));
    let pass = z_score.abs() <= Z_MAX;
    Ok(StatReport {
        name: format!("martingale({})", spec.label),
        estimate,
        stderr,
        target,
        z_score,
        n_paths,
        pass,
        metadata,
    })
}

/// Per-path moments of occupation time at zero and of the downcrossing
/// local time, shared by the identity test and the monotonicity check.
#[derive(Debug, Clone, Copy)]
pub struct OccupationSummary {
    pub occupation_mean: f64,
    pub occupation_var: f64,
    pub local_time_mean: f64,
    pub local_time_var: f64,
    pub covariance: f64,
    pub n_paths: usize,
    pub h: f64,
}

/// Time at the zero node and completed downcrossings of one grid cell
/// above it, folded online over one path.
fn occupation_and_crossings(
    chain: &GridChain,
    k0: usize,
    node0: usize,
    horizon: f64,
    mut rng: ChaCha8Rng,
) -> (f64, u64) {
    let n = chain.values.len() - 1;
    let mut k = k0;
    let mut t = 0.0;
    let mut occ = 0.0;
    let mut crossings = 0u64;
    loop {
        let hold = chain.mean_holding[k];
        let dt = if hold > 0.0 { -hold * (1.0f64 - rng.gen::<f64>()).ln() } else { 0.0 };
        if k == node0 {
            occ += dt.min(horizon - t);
        }
        t += dt;
        if t >= horizon {
            return (occ, crossings);
        }
        let prev = k;
        k = if k == 0 {
            1
        } else if k == n {
            n - 1
        } else if rng.gen::<f64>() < 0.5 {
            k - 1
        } else {
            k + 1
        };
        // Nearest-neighbor moves: a completed downcrossing of
        // (0, one cell) is exactly an arrival at the zero node from above.
        if k == node0 && prev == node0 + 1 {
            crossings += 1;
        }
    }
}

fn occupation_summary_on(
    chain: &GridChain,
    x0: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<OccupationSummary> {
    positive_paths(n_paths)?;
    let k0 = chain.snap_index(x0)?;
    let node0 = chain.snap_index(0.0)?;
    let eps = chain.values[node0 + 1] - chain.values[node0];

    let per_path: Vec<(f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let (occ, d) = occupation_and_crossings(chain, k0, node0, horizon, path_rng(seed, i));
            (occ, 2.0 * eps * d as f64)
        })
        .collect();
    let mut acc = [0.0; 5];
    for &(occ, lt) in &per_path {
        acc[0] += occ;
        acc[1] += occ * occ;
        acc[2] += lt;
        acc[3] += lt * lt;
        acc[4] += occ * lt;
    }

    let nf = n_paths as f64;
    let om = acc[0] / nf;
    let lm = acc[2] / nf;
    Ok(OccupationSummary {
        occupation_mean: om,
        occupation_var: ((acc[1] - acc[0] * acc[0] / nf) / (nf - 1.0)).max(0.0),
        local_time_mean: lm,
        local_time_var: ((acc[3] - acc[2] * acc[2] / nf) / (nf - 1.0)).max(0.0),
        covariance: (acc[4] - acc[0] * acc[2] / nf) / (nf - 1.0),
        n_paths,
        h: chain.h,
    })
}

/// Window wide enough that a path almost never reaches the artificial
/// walls over the tested horizons.
const STICKY_WINDOW: (f64, f64) = (-4.0, 4.0);

/// Occupation and local-time moments for sticky Brownian motion at zero.
pub fn sticky_occupation_summary(
    rho: f64,
    x0: f64,
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<OccupationSummary> {
    let spec = sticky_bm_spec(rho, x0)?;
    let chain = build_grid_chain(&spec, h, STICKY_WINDOW)?;
    occupation_summary_on(&chain, x0, horizon, n_paths, seed)
}

/// Tests the occupation identity: time at zero equals rho times the local
/// time there. Both sides are estimated from the same paths; the pass
/// criterion is relative because the downcrossing estimator carries an
/// O(h) bias on top of Monte Carlo noise.
pub fn sticky_occupation_test(
    rho: f64,
    x0: f64,
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    let s = sticky_occupation_summary(rho, x0, horizon, h, n_paths, seed)?;
    let nf = s.n_paths as f64;
    let estimate = s.occupation_mean / (rho * s.local_time_mean);
    // Delta method for the ratio of two correlated means.
    let rel_var = s.occupation_var / (nf * s.occupation_mean * s.occupation_mean)
        + s.local_time_var / (nf * s.local_time_mean * s.local_time_mean)
        - 2.0 * s.covariance / (nf * s.occupation_mean * s.local_time_mean);
    let stderr = (estimate * estimate * rel_var.max(0.0)).sqrt();
    let target = 1.0;
    let z_score = if stderr > 0.0 { (estimate - target) / stderr } else { 0.0 };
    let pass = (estimate - target).abs() <= OCCUPATION_REL_TOL;
    Ok(StatReport {
        name: format!("sticky-occupation(rho={rho})"),
        estimate,
        stderr,
        target,
        z_score,
        n_paths: s.n_paths,
        pass,
        metadata: base_metadata(
            s.h,
            seed,
            &[
                ("horizon", format!("{horizon}")),
                ("occupation_mean", format!("{}", s.occupation_mean)),
                ("local_time_mean", format!("{}", s.local_time_mean)),
                ("tolerance", format!("{OCCUPATION_REL_TOL} relative")),
            ],
        ),
    })
}

/// Per-path sup deviation between quadratic variation and the
/// occupation-corrected clock, plus the terminal state for the drift check.
fn characteristics_deviation(
    chain: &GridChain,
    k0: usize,
    node0: usize,
    horizon: f64,
    mut rng: ChaCha8Rng,
) -> (f64, f64) {
    let n = chain.values.len() - 1;
    let mut k = k0;
    let mut t = 0.0;
    let mut occ = 0.0;
    let mut qv = 0.0;
    let mut sup = 0.0f64;
    loop {
        let hold = chain.mean_holding[k];
        let dt = if hold > 0.0 { -hold * (1.0f64 - rng.gen::<f64>()).ln() } else { 0.0 };
        if t + dt >= horizon {
            if k == node0 {
                occ += horizon - t;
            }
            let c = horizon - occ;
            sup = sup.max((qv - c).abs());
            let rel = sup / c.max(1e-12);
            return (rel, chain.values[k]);
        }
        if k == node0 {
            occ += dt;
        }
        t += dt;
        let c = t - occ;
        sup = sup.max((qv - c).abs());
        let prev = k;
        k = if k == 0 {
            1
        } else if k == n {
            n - 1
        } else if rng.gen::<f64>() < 0.5 {
            k - 1
        } else {
            k + 1
        };
        let d = chain.values[k] - chain.values[prev];
        qv += d * d;
        sup = sup.max((qv - c).abs());
    }
}

fn characteristics_report(
    name: String,
    chain: &GridChain,
    x0: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    positive_paths(n_paths)?;
    let k0 = chain.snap_index(x0)?;
    let node0 = chain.snap_index(0.0)?;
    let x_start = chain.values[k0];

    let per_path: Vec<(f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| characteristics_deviation(chain, k0, node0, horizon, path_rng(seed, i)))
        .collect();
    let mut acc = [0.0; 4];
    for &(rel, xt) in &per_path {
        acc[0] += rel;
        acc[1] += rel * rel;
        acc[2] += xt;
        acc[3] += xt * xt;
    }

    let (estimate, stderr) = sample_stats(acc[0], acc[1], n_paths);
    let (drift_mean, drift_se) = sample_stats(acc[2], acc[3], n_paths);
    let drift_z = if drift_se > 0.0 { (drift_mean - x_start) / drift_se } else { 0.0 };
    let z_score = if stderr > 0.0 { estimate / stderr } else { 0.0 };
    let pass = estimate <= CHARACTERISTICS_REL_TOL && drift_z.abs() <= Z_MAX;
    Ok(StatReport {
        name,
        estimate,
        stderr,
        target: 0.0,
        z_score,
        n_paths,
        pass,
        metadata: base_metadata(
            chain.h,
            seed,
            &[
                ("horizon", format!("{horizon}")),
                ("drift_mean", format!("{drift_mean}")),
                ("drift_z", format!("{drift_z}")),
                ("tolerance", format!("{CHARACTERISTICS_REL_TOL} relative sup-deviation")),
            ],
        ),
    })
}

/// Tests that quadratic variation matches the clock spent away from zero,
/// and that the drift vanishes. The same functional form passes for every
/// rho, which is the point: the characteristics do not pin down the law.
pub fn sticky_characteristics_test(
    rho: f64,
    x0: f64,
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    let spec = sticky_bm_spec(rho, x0)?;
    let chain = build_grid_chain(&spec, h, STICKY_WINDOW)?;
    characteristics_report(
        format!("sticky-characteristics(rho={rho})"),
        &chain,
        x0,
        horizon,
        n_paths,
        seed,
    )
}

/// Degenerate case of the characteristics identity: for Brownian motion
/// the zero-set correction is O(h) and quadratic variation tracks time.
pub fn bm_characteristics_test(
    x0: f64,
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    let spec = bm_spec(x0);
    let chain = build_grid_chain(&spec, h, STICKY_WINDOW)?;
    characteristics_report("bm-characteristics".into(), &chain, x0, horizon, n_paths, seed)
}

/// Fraction of time spent in the atom set over the window `[t/2, t]`,
/// which avoids any dependence on whether the start point is an atom.
///
/// The truncated speed measure is purely atomic, so non-atom grid states
/// hold for zero time and the observed fraction is exactly 1; the
/// threshold leaves room for the untruncated ideal being out of reach.
pub fn feller_mckean_occupation_test(
    n_atoms: usize,
    t: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<StatReport> {
    if n_atoms < 50 {
        return Err(Error::InvalidParameter(format!(
            "need at least 50 atoms for a meaningful truncation, got {n_atoms}"
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {t}")));
    }
    positive_paths(n_paths)?;
    let spec = feller_mckean_spec(n_atoms, seed, 0.0);
    let chain = build_grid_chain(&spec, h, (-1.0, 1.0))?;
    let k0 = chain.snap_index(0.0)?;
    let timed: Vec<bool> = chain.mean_holding.iter().map(|&m| m > 0.0).collect();
    let n = chain.values.len() - 1;
    let (lo, hi) = (t / 2.0, t);

    let fractions: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut k = k0;
            let mut time = 0.0;
            let mut in_atoms = 0.0;
            while time < hi {
                let hold = chain.mean_holding[k];
                let dt =
                    if hold > 0.0 { -hold * (1.0f64 - rng.gen::<f64>()).ln() } else { 0.0 };
                let overlap = (time + dt).min(hi) - time.max(lo);
                if overlap > 0.0 && timed[k] {
                    in_atoms += overlap;
                }
                time += dt;
                if time >= hi {
                    break;
                }
                k = if k == 0 {
                    1
                } else if k == n {
                    n - 1
                } else if rng.gen::<f64>() < 0.5 {
                    k - 1
                } else {
                    k + 1
                };
            }
            in_atoms / (hi - lo)
        })
        .collect();

    let estimate = fractions.iter().sum::<f64>() / n_paths as f64;
    let target = 1.0;
    let pass = estimate >= ATOMIC_FRACTION_MIN;
    Ok(StatReport {
        name: format!("atomic-occupation(n_atoms={n_atoms})"),
        estimate,
        stderr: 0.0,
        target,
        z_score: 0.0,
        n_paths,
        pass,
        metadata: base_metadata(
            chain.h,
            seed,
            &[
                ("horizon", format!("{t}")),
                ("threshold", format!("{ATOMIC_FRACTION_MIN}")),
                ("truncated_mass", format!("{}", 2f64.powi(-(n_atoms as i32)))),
                (
                    "note",
                    "non-atom states hold zero time at this truncation, so the fraction is exact"
                        .into(),
                ),
            ],
        ),
    })
}
