//! Decides the representation property from the characteristics alone.
//!
//! The decisive quantity is the Lebesgue measure of the set where the
//! one-sided derivative of the inverse scale vanishes, taken inside the
//! natural-scale image of the interior. Positive measure defeats the
//! representation property and extremality; measure zero certifies both.
//! Representations built by this crate (natural, density, sampled,
//! explicit inverse with a certificate) admit exact answers; anything else
//! falls back to a stratified derivative scan that is honest about its
//! resolution.

use crate::characteristics::{DiffusionSpec, ScaleFunction, Side};
use crate::error::{Error, Result};

/// Outcome label of the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RPStatus {
    Holds,
    Fails,
    /// The start point is an absorbing endpoint; the stopped filtration
    /// carries only constant local martingales.
    TriviallyHolds,
}

/// How a zero-set measure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Numeric,
}

/// Measure of `{w : q'(w) = 0}` inside a window, with an error bound.
#[derive(Debug, Clone, Copy)]
pub struct ZeroSetMeasure {
    pub value: f64,
    pub error: f64,
    pub method: Method,
}

/// Verdict on the representation property and extremality.
#[derive(Debug, Clone)]
pub struct RPVerdict {
    pub status: RPStatus,
    pub zero_set_measure: f64,
    pub error: f64,
    pub method: Method,
    /// Extremality in the associated semimartingale problem; mirrors the
    /// status for non-absorbing starts.
    pub is_extremal: bool,
    pub notes: Vec<String>,
}

impl RPVerdict {
    /// False only for numeric verdicts that could not separate the
    /// measure from zero at the scan resolution.
    pub fn conclusive(&self) -> bool {
        self.method == Method::Exact || self.status == RPStatus::Fails
    }
}

pub const DEFAULT_RESOLUTION: f64 = 1e-6;

/// Strata in the numeric derivative scan.
const SCAN_STRATA: usize = 1 << 18;

/// Measure of the vanishing set of `q'_+` inside `[lo, hi]`.
///
/// Exact for every representation this crate constructs; the window must
/// lie inside the explicit-inverse domain when there is one.
pub fn zero_derivative_measure(
    scale: &ScaleFunction,
    lo: f64,
    hi: f64,
    resolution: f64,
) -> Result<ZeroSetMeasure> {
    check_window(lo, hi)?;
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    match scale {
        // q' is 1, the reciprocal of a positive density, or a positive
        // piecewise slope; the zero set is empty in each case.
        ScaleFunction::Natural | ScaleFunction::Density(_) | ScaleFunction::Sampled(_) => {
            Ok(ZeroSetMeasure { value: 0.0, error: 0.0, method: Method::Exact })
        }
        ScaleFunction::InverseExplicit(ie) => {
            let (dlo, dhi) = ie.domain();
            if lo < dlo || hi > dhi {
                return Err(Error::WindowOutOfRange { lo, hi });
            }
            match ie.zero_set_measure_in(lo, hi) {
                Some((value, error)) => Ok(ZeroSetMeasure { value, error, method: Method::Exact }),
                None => numeric_zero_derivative_measure(scale, lo, hi, resolution),
            }
        }
    }
}

/// Stratified derivative scan: classifies each stratum by `q'_+` at its
/// endpoints against the threshold `resolution`, counting mixed strata and
/// near-threshold strata toward the error bound.
///
/// This route never consults an exact certificate, so it can cross-check
/// one. The window must be finite.
pub fn numeric_zero_derivative_measure(
    scale: &ScaleFunction,
    lo: f64,
    hi: f64,
    resolution: f64,
) -> Result<ZeroSetMeasure> {
    check_window(lo, hi)?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Unsupported(
            "numeric zero-set estimation needs a finite window".into(),
        ));
    }
    let tau = resolution;
    let w = (hi - lo) / SCAN_STRATA as f64;
    let mut value = 0.0;
    let mut error = w;
    let mut prev = derivative_magnitude(scale, lo, &mut error, w)?;
    for i in 1..=SCAN_STRATA {
        let point = if i == SCAN_STRATA { hi } else { lo + i as f64 * w };
        let cur = derivative_magnitude(scale, point, &mut error, w)?;
        let (lz, rz) = (prev <= tau, cur <= tau);
        if lz && rz {
            value += w;
        } else if lz || rz {
            value += 0.5 * w;
            error += w;
        } else if prev.min(cur) <= 2.0 * tau {
            error += w;
        }
        prev = cur;
    }
    Ok(ZeroSetMeasure { value, error, method: Method::Numeric })
}

fn derivative_magnitude(
    scale: &ScaleFunction,
    w: f64,
    error: &mut f64,
    stratum: f64,
) -> Result<f64> {
    let d = scale.inverse_derivative(w, Side::Right)?;
    if !d.converged {
        *error += stratum;
    }
    Ok(d.value.abs())
}

fn check_window(lo: f64, hi: f64) -> Result<()> {
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(Error::WindowOutOfRange { lo, hi });
    }
    Ok(())
}

/// Per-threshold row of an absolute-continuity report.
#[derive(Debug, Clone, Copy)]
pub struct AcRow {
    pub epsilon: f64,
    pub singular_mass: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcVerdict {
    Ac,
    NotAc,
    /// Numeric scan could not separate the singular mass from zero.
    AtResolution,
}

/// Result of [`absolute_continuity_test`].
#[derive(Debug, Clone)]
pub struct AcReport {
    pub rows: Vec<AcRow>,
    /// Singular mass at the finest tested threshold.
    pub singular_mass: f64,
    pub error: f64,
    pub verdict: AcVerdict,
    pub method: Method,
}

/// Tests absolute continuity of the scale on a compact state interval.
///
/// The singular part of the scale's length measure equals the Lebesgue
/// measure of the vanishing set of `q'` inside the natural-scale image of
/// the compact, which is what gets reported per threshold.
pub fn absolute_continuity_test(
    scale: &ScaleFunction,
    compact: (f64, f64),
    epsilon_grid: &[f64],
) -> Result<AcReport> {
    let (x0, x1) = compact;
    check_window(x0, x1)?;
    let w0 = scale.eval(x0).map_err(|_| Error::WindowOutOfRange { lo: x0, hi: x1 })?;
    let w1 = scale.eval(x1).map_err(|_| Error::WindowOutOfRange { lo: x0, hi: x1 })?;
    let mut grid: Vec<f64> =
        if epsilon_grid.is_empty() { vec![DEFAULT_RESOLUTION] } else { epsilon_grid.to_vec() };
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut rows = Vec::with_capacity(grid.len());
    let mut finest = None;
    for &eps in &grid {
        let zsm = zero_derivative_measure(scale, w0, w1, eps)?;
        rows.push(AcRow { epsilon: eps, singular_mass: zsm.value, error: zsm.error });
        finest = Some(zsm);
    }
    let zsm = finest.unwrap();
    let verdict = if zsm.value - zsm.error > 0.0 {
        AcVerdict::NotAc
    } else if zsm.method == Method::Numeric {
        AcVerdict::AtResolution
    } else {
        AcVerdict::Ac
    };
    Ok(AcReport {
        rows,
        singular_mass: zsm.value,
        error: zsm.error,
        verdict,
        method: zsm.method,
    })
}

/// Full verdict for a spec started at `x0`, at the default scan resolution.
pub fn rp_verdict(spec: &DiffusionSpec, x0: f64) -> Result<RPVerdict> {
    rp_verdict_at(spec, x0, DEFAULT_RESOLUTION)
}

/// Full verdict with an explicit scan resolution (only relevant on the
/// numeric fallback path).
pub fn rp_verdict_at(spec: &DiffusionSpec, x0: f64, resolution: f64) -> Result<RPVerdict> {
    let report = spec.validate();
    if let Some(first) = report.violations.first() {
        return Err(Error::InvalidSpec {
            label: spec.label.clone(),
            first_violation: first.clone(),
        });
    }
    if !spec.interval.contains(x0) {
        return Err(Error::OutOfRange {
            query: x0,
            lo: spec.interval.left,
            hi: spec.interval.right,
        });
    }
    let mut probe = spec.clone();
    probe.x0 = Some(x0);
    if probe.starts_absorbed() {
        return Ok(RPVerdict {
            status: RPStatus::TriviallyHolds,
            zero_set_measure: 0.0,
            error: 0.0,
            method: Method::Exact,
            is_extremal: true,
            notes: vec![
                "start at an absorbing endpoint: the process never moves, every local \
                 martingale of its filtration is constant"
                    .into(),
            ],
        });
    }

    let mut notes = Vec::new();
    let zsm = match &spec.scale {
        ScaleFunction::InverseExplicit(ie) => {
            let (lo, hi) = ie.domain();
            notes.push(format!("zero set from the explicit inverse: {}", ie.describe()));
            zero_derivative_measure(&spec.scale, lo, hi, resolution)?
        }
        other => {
            let kind = match other {
                ScaleFunction::Natural => "natural scale: the inverse derivative is 1",
                ScaleFunction::Density(_) => {
                    "scale has a positive density, so the inverse derivative is positive \
                     everywhere"
                }
                ScaleFunction::Sampled(_) => {
                    "piecewise-linear scale with positive slopes: the inverse derivative is \
                     bounded away from zero"
                }
                ScaleFunction::InverseExplicit(_) => unreachable!(),
            };
            notes.push(kind.into());
            if !spec.interval.left.is_finite() || !spec.interval.right.is_finite() {
                notes.push(
                    "natural-scale image may be unbounded; the certificate covers every compact \
                     window by the same argument"
                        .into(),
                );
            }
            zero_derivative_measure(&spec.scale, 0.0, 1.0, resolution)?
        }
    };

    let status =
        if zsm.value - zsm.error > 0.0 { RPStatus::Fails } else { RPStatus::Holds };
    if status == RPStatus::Fails {
        notes.push(format!(
            "inverse-scale derivative vanishes on measure {} (error {})",
            zsm.value, zsm.error
        ));
    }
    if zsm.method == Method::Numeric && status == RPStatus::Holds {
        notes.push(format!(
            "numeric scan at resolution {resolution}: zero set not separated from measure zero"
        ));
    }
    Ok(RPVerdict {
        status,
        zero_set_measure: zsm.value,
        error: zsm.error,
        method: zsm.method,
        is_extremal: status != RPStatus::Fails,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::ExplicitInverse;
    use crate::gallery::{
        bm_spec, cantor_diffusion_spec, cantor_q, fat_cantor_set, feller_mckean_spec, ou_spec,
        sticky_bm_spec, CantorQ,
    };
    use std::sync::Arc;

    #[test]
    fn natural_and_density_scales_hold() {
        for spec in [bm_spec(0.0), ou_spec(0.0)] {
            let v = rp_verdict(&spec, 0.0).unwrap();
            assert_eq!(v.status, RPStatus::Holds, "{}", spec.label);
            assert_eq!(v.method, Method::Exact);
            assert_eq!(v.zero_set_measure, 0.0);
            assert!(v.is_extremal);
            assert!(v.conclusive());
        }
    }

    #[test]
    fn sticky_holds_for_all_rho() {
        for rho in [0.1, 1.0, 10.0] {
            let spec = sticky_bm_spec(rho, 0.0).unwrap();
            let v = rp_verdict(&spec, 0.0).unwrap();
            assert_eq!(v.status, RPStatus::Holds, "rho={rho}");
            assert!(v.is_extremal);
        }
    }

    #[test]
    fn feller_mckean_holds() {
        let spec = feller_mckean_spec(200, 7, 0.0);
        let v = rp_verdict(&spec, 0.0).unwrap();
        assert_eq!(v.status, RPStatus::Holds);
        assert!(v.is_extremal);
    }

    #[test]
    fn cantor_fails_with_exact_measure() {
        let set = fat_cantor_set(12, 1.0).unwrap();
        let spec = cantor_diffusion_spec(&set, 0.5).unwrap();
        let v = rp_verdict(&spec, 0.5).unwrap();
        assert_eq!(v.status, RPStatus::Fails);
        assert_eq!(v.method, Method::Exact);
        assert_eq!(v.zero_set_measure, 0.5);
        assert_eq!(v.error, 0.0);
        assert!(!v.is_extremal);

        let set = fat_cantor_set(12, 0.8).unwrap();
        let spec = cantor_diffusion_spec(&set, 0.5).unwrap();
        let v = rp_verdict(&spec, 0.5).unwrap();
        assert_eq!(v.zero_set_measure, 0.6);
    }

    #[test]
    fn absorbing_start_trivially_holds() {
        let set = fat_cantor_set(8, 1.0).unwrap();
        let spec = cantor_diffusion_spec(&set, 0.5).unwrap();
        let v = rp_verdict(&spec, 0.0).unwrap();
        assert_eq!(v.status, RPStatus::TriviallyHolds);
        assert_eq!(v.zero_set_measure, 0.0);
        assert!(v.is_extremal);
        assert!(v.conclusive());
        assert!(v.notes.iter().any(|n| n.contains("absorbing")));
    }

    #[test]
    fn invalid_spec_propagates() {
        let mut spec = bm_spec(0.0);
        spec.interval = crate::characteristics::Interval::open(1.0, -1.0);
        assert!(matches!(rp_verdict(&spec, 0.0), Err(Error::InvalidSpec { .. })));
    }

    #[test]
    fn start_outside_interval_rejected() {
        let set = fat_cantor_set(8, 1.0).unwrap();
        let spec = cantor_diffusion_spec(&set, 0.5).unwrap();
        assert!(matches!(rp_verdict(&spec, 5.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn verdict_same_from_all_interior_starts() {
        let set = fat_cantor_set(10, 1.0).unwrap();
        let cantor = cantor_diffusion_spec(&set, 0.5).unwrap();
        for x0 in [0.1, 0.3, 0.5, 0.7, 0.83] {
            assert_eq!(rp_verdict(&cantor, x0).unwrap().status, RPStatus::Fails, "x0={x0}");
        }
        let sticky = sticky_bm_spec(1.0, 0.0).unwrap();
        for x0 in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            assert_eq!(rp_verdict(&sticky, x0).unwrap().status, RPStatus::Holds, "x0={x0}");
        }
    }

    /// s -> a + b s re-anchoring of an explicit-inverse scale.
    struct AffineInverse {
        inner: CantorQ,
        shift: f64,
        stretch: f64,
    }

    impl ExplicitInverse for AffineInverse {
        fn domain(&self) -> (f64, f64) {
            let (lo, hi) = self.inner.domain();
            (self.shift + self.stretch * lo, self.shift + self.stretch * hi)
        }
        fn value(&self, w: f64) -> f64 {
            self.inner.value((w - self.shift) / self.stretch)
        }
        fn derivative(&self, w: f64, side: Side) -> f64 {
            self.inner.derivative((w - self.shift) / self.stretch, side) / self.stretch
        }
        fn zero_set_measure_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
            let (v, e) = self.inner.zero_set_measure_in(
                (lo - self.shift) / self.stretch,
                (hi - self.shift) / self.stretch,
            )?;
            Some((v * self.stretch, e * self.stretch))
        }
        fn describe(&self) -> String {
            format!("affine({})", self.inner.describe())
        }
    }

    #[test]
    fn affine_reanchoring_preserves_the_verdict() {
        let set = fat_cantor_set(10, 1.0).unwrap();
        let base = cantor_diffusion_spec(&set, 0.5).unwrap();
        let mut moved = base.clone();
        moved.scale = ScaleFunction::inverse_explicit(Arc::new(AffineInverse {
            inner: CantorQ::new(set),
            shift: -3.0,
            stretch: 2.0,
        }));
        let v0 = rp_verdict(&base, 0.5).unwrap();
        let v1 = rp_verdict(&moved, 0.5).unwrap();
        assert_eq!(v0.status, v1.status);
        // The zero set itself is unchanged; only its coordinate length scales.
        assert_eq!(v1.zero_set_measure, 2.0 * v0.zero_set_measure);
    }

    #[test]
    fn numeric_scan_agrees_with_certificate() {
        let set = fat_cantor_set(12, 1.0).unwrap();
        let scale = cantor_q(&set);
        let exact = zero_derivative_measure(&scale, 0.0, 1.0, 1e-6).unwrap();
        assert_eq!(exact.method, Method::Exact);
        let scan = numeric_zero_derivative_measure(&scale, 0.0, 1.0, 1e-6).unwrap();
        assert_eq!(scan.method, Method::Numeric);
        assert!(
            (scan.value - exact.value).abs() <= scan.error,
            "scan {} +- {} vs exact {}",
            scan.value,
            scan.error,
            exact.value
        );
        // Positive measure survives the scan's own error bound.
        assert!(scan.value - scan.error > 0.0);
    }

    #[test]
    fn shrinking_resolution_never_grows_the_estimate() {
        let set = fat_cantor_set(10, 1.0).unwrap();
        let scale = cantor_q(&set);
        let mut prev: Option<ZeroSetMeasure> = None;
        for tau in [1e-3, 1e-4, 1e-5, 1e-6] {
            let cur = numeric_zero_derivative_measure(&scale, 0.0, 1.0, tau).unwrap();
            if let Some(p) = prev {
                assert!(cur.value <= p.value + p.error, "tau={tau}");
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn ac_report_flags_the_cantor_scale() {
        // Most of q's rise happens across the central gap, so the compact
        // must reach close to the endpoints to have its image cover a
        // sizable part of the zero set.
        let set = fat_cantor_set(10, 1.0).unwrap();
        let spec = cantor_diffusion_spec(&set, 0.5).unwrap();
        let report = absolute_continuity_test(&spec.scale, (0.01, 0.99), &[1e-4, 1e-6]).unwrap();
        assert_eq!(report.verdict, AcVerdict::NotAc);
        assert_eq!(report.method, Method::Exact);
        assert!(report.singular_mass > 0.2, "singular mass {}", report.singular_mass);
        assert_eq!(report.rows.len(), 2);
    }

    #[test]
    fn ac_report_clears_smooth_scales() {
        let ou = ou_spec(0.0);
        let report = absolute_continuity_test(&ou.scale, (-1.0, 1.0), &[1e-3, 1e-6]).unwrap();
        assert_eq!(report.verdict, AcVerdict::Ac);
        assert_eq!(report.singular_mass, 0.0);
        let bm = bm_spec(0.0);
        let report = absolute_continuity_test(&bm.scale, (-1.0, 1.0), &[]).unwrap();
        assert_eq!(report.verdict, AcVerdict::Ac);
    }

    #[test]
    fn window_outside_domain_rejected() {
        let set = fat_cantor_set(6, 1.0).unwrap();
        let scale = cantor_q(&set);
        assert!(matches!(
            zero_derivative_measure(&scale, -0.5, 0.5, 1e-6),
            Err(Error::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            zero_derivative_measure(&scale, 0.5, 0.5, 1e-6),
            Err(Error::WindowOutOfRange { .. })
        ));
    }
}
