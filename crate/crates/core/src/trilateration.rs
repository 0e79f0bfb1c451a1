//! Position recovery from distance observations.
//!
//! Two routes are provided: the closed-form three-circle solve, which subtracts
//! circle equations pairwise to obtain a 2×2 linear system, and a damped
//! Gauss–Newton minimizer of the squared range residuals for `n >= 3`
//! observations of any kind.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LocalPoint;

/// Vantage triangles with area below this (m²) are treated as collinear.
pub const COLLINEAR_AREA_M2: f64 = 1.0;

/// Absolute part of the circle-consistency tolerance for the exact solve.
pub const CONSISTENCY_ABS_TOL_M: f64 = 1e-6;
/// Relative part (times the largest observed distance) of the same tolerance.
pub const CONSISTENCY_REL_TOL: f64 = 1e-3;

const MAX_STEP_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrilaterationError {
    #[error("vantage points are collinear (triangle area {area_m2:.3} m²)")]
    CollinearVantages { area_m2: f64 },
    #[error("distances are inconsistent: circle residual {residual_m:.6} m exceeds {tolerance_m:.6} m")]
    InconsistentDistances { residual_m: f64, tolerance_m: f64 },
    #[error("need at least {need} observations, got {have}")]
    TooFewObservations { need: usize, have: usize },
    #[error("observation {index} is not an exact distance")]
    NotExact { index: usize },
    #[error("invalid observation {index}: {reason}")]
    InvalidObservation { index: usize, reason: &'static str },
}

/// What the observer learned about the range to the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceKind {
    Exact {
        d: f64,
    },
    /// A displayed distance rounded to a multiple of `step`.
    Quantized {
        displayed: f64,
        step: f64,
    },
    /// The range is known to lie in `[lo, hi]`.
    Interval {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceObservation {
    pub vantage: LocalPoint,
    pub kind: DistanceKind,
}

impl DistanceObservation {
    pub fn exact(vantage: LocalPoint, d: f64) -> Self {
        Self {
            vantage,
            kind: DistanceKind::Exact { d },
        }
    }

    pub fn quantized(vantage: LocalPoint, displayed: f64, step: f64) -> Self {
        Self {
            vantage,
            kind: DistanceKind::Quantized { displayed, step },
        }
    }

    pub fn interval(vantage: LocalPoint, lo: f64, hi: f64) -> Self {
        Self {
            vantage,
            kind: DistanceKind::Interval { lo, hi },
        }
    }

    /// Point target used by least squares: the center of the observation.
    pub fn target(&self) -> f64 {
        match self.kind {
            DistanceKind::Exact { d } => d,
            DistanceKind::Quantized { displayed, .. } => displayed,
            DistanceKind::Interval { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// Range interval consistent with the observation. Quantized readings
    /// widen to `[d - step/2, d + step/2]`, clamped at zero.
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            DistanceKind::Exact { d } => (d, d),
            DistanceKind::Quantized { displayed, step } => ((displayed - 0.5 * step).max(0.0), displayed + 0.5 * step),
            DistanceKind::Interval { lo, hi } => (lo, hi),
        }
    }

    fn validate(&self, index: usize) -> Result<(), TrilaterationError> {
        let bad = |reason| Err(TrilaterationError::InvalidObservation { index, reason });
        if !(self.vantage.x.is_finite() && self.vantage.y.is_finite()) {
            return bad("vantage is not finite");
        }
        let ok = match self.kind {
            DistanceKind::Exact { d } => d.is_finite() && d >= 0.0,
            DistanceKind::Quantized { displayed, step } => {
                displayed.is_finite() && displayed >= 0.0 && step.is_finite() && step >= 0.0
            }
            DistanceKind::Interval { lo, hi } => lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            bad("distance must be finite and non-negative, with lo <= hi and step >= 0")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub estimate: LocalPoint,
    pub residual_rms: f64,
    pub iterations: usize,
    /// False when `max_iter` was reached with the last step still above `tol`.
    /// The estimate is then the best iterate found.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Initial iterate; `None` starts from the linearized solution, falling
    /// back to the vantage centroid.
    pub initial: Option<LocalPoint>,
    /// Stop once a step is shorter than this (meters).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            initial: None,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

fn triangle_area(a: LocalPoint, b: LocalPoint, c: LocalPoint) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
}

/// Area of the widest triangle spanned by the vantages, measured from the
/// first vantage and the one farthest from it.
pub fn vantage_spread_area(obs: &[DistanceObservation]) -> f64 {
    let Some(first) = obs.first() else {
        return 0.0;
    };
    let a = first.vantage;
    let b = obs
        .iter()
        .map(|o| o.vantage)
        .max_by(|p, q| a.distance_to(p).total_cmp(&a.distance_to(q)))
        .unwrap_or(a);
    obs.iter().map(|o| triangle_area(a, b, o.vantage)).fold(0.0, f64::max)
}

fn check_geometry(obs: &[DistanceObservation]) -> Result<(), TrilaterationError> {
    let area_m2 = vantage_spread_area(obs);
    if area_m2 < COLLINEAR_AREA_M2 {
        return Err(TrilaterationError::CollinearVantages { area_m2 });
    }
    Ok(())
}

fn solve_2x2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<LocalPoint> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(LocalPoint::new(
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ))
}

/// Subtracting circle `0` from circle `i` gives the linear equation
/// `2(v_i - v_0)·p = d_0² - d_i² + |v_i|² - |v_0|²`. Coordinates are shifted to
/// the first vantage to keep the normal equations well conditioned.
fn linearized_solution(obs: &[DistanceObservation]) -> Option<LocalPoint> {
    let base = obs.first()?.vantage;
    let d0 = obs[0].target();
    let mut ata = [[0.0; 2]; 2];
    let mut atb = [0.0; 2];
    for o in &obs[1..] {
        let v = o.vantage - base;
        let row = [2.0 * v.x, 2.0 * v.y];
        let rhs = d0 * d0 - o.target().powi(2) + v.x * v.x + v.y * v.y;
        for i in 0..2 {
            for j in 0..2 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * rhs;
        }
    }
    solve_2x2(ata, atb).map(|p| p + base)
}

/// Solves the three-circle system exactly.
///
/// The returned point satisfies the two differenced (linear) equations; it is
/// then checked against every original circle, and rejected when any range
/// residual exceeds `CONSISTENCY_ABS_TOL_M + CONSISTENCY_REL_TOL * max(d)`.
pub fn solve_exact_three_circles(obs: &[DistanceObservation; 3]) -> Result<LocalPoint, TrilaterationError> {
    for (index, o) in obs.iter().enumerate() {
        o.validate(index)?;
        if !matches!(o.kind, DistanceKind::Exact { .. }) {
            return Err(TrilaterationError::NotExact { index });
        }
    }
    check_geometry(obs)?;
    let p = linearized_solution(obs).ok_or(TrilaterationError::CollinearVantages {
        area_m2: vantage_spread_area(obs),
    })?;
    let max_d = obs.iter().map(|o| o.target()).fold(0.0, f64::max);
    let tolerance_m = CONSISTENCY_ABS_TOL_M + CONSISTENCY_REL_TOL * max_d;
    let residual_m = obs
        .iter()
        .map(|o| (p.distance_to(&o.vantage) - o.target()).abs())
        .fold(0.0, f64::max);
    if residual_m > tolerance_m {
        return Err(TrilaterationError::InconsistentDistances {
            residual_m,
            tolerance_m,
        });
    }
    Ok(p)
}

/// Σ (‖p − vantage‖ − target)².
pub fn objective(p: LocalPoint, obs: &[DistanceObservation]) -> f64 {
    obs.iter()
        .map(|o| (p.distance_to(&o.vantage) - o.target()).powi(2))
        .sum()
}

/// Range residuals `‖p − vᵢ‖ − dᵢ` and their Jacobian rows `(p − vᵢ)/‖p − vᵢ‖`.
///
/// At a vantage the gradient is undefined; the row is set to zero there.
pub fn residuals_and_jacobian(p: LocalPoint, obs: &[DistanceObservation]) -> (Vec<f64>, Vec<[f64; 2]>) {
    obs.iter()
        .map(|o| {
            let diff = p - o.vantage;
            let r = diff.norm();
            let row = if r > 0.0 { [diff.x / r, diff.y / r] } else { [0.0, 0.0] };
            (r - o.target(), row)
        })
        .unzip()
}

/// Damped Gauss–Newton minimization of [`objective`].
///
/// Each Gauss–Newton step is halved (up to 20 times) while it fails to reduce
/// the objective. Iteration stops when the accepted step is shorter than
/// `tol`, or when no descent is possible.
pub fn solve_least_squares(
    obs: &[DistanceObservation],
    options: SolverOptions,
) -> Result<SolveResult, TrilaterationError> {
    if obs.len() < 3 {
        return Err(TrilaterationError::TooFewObservations {
            need: 3,
            have: obs.len(),
        });
    }
    for (index, o) in obs.iter().enumerate() {
        o.validate(index)?;
    }
    check_geometry(obs)?;

    let centroid = {
        let n = obs.len() as f64;
        let (sx, sy) = obs
            .iter()
            .fold((0.0, 0.0), |(sx, sy), o| (sx + o.vantage.x, sy + o.vantage.y));
        LocalPoint::new(sx / n, sy / n)
    };
    let mut p = options
        .initial
        .or_else(|| linearized_solution(obs).filter(|p| p.x.is_finite() && p.y.is_finite()))
        .unwrap_or(centroid);
    let mut f = objective(p, obs);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iter {
        iterations += 1;
        let (r, jac) = residuals_and_jacobian(p, obs);
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (ri, row) in r.iter().zip(&jac) {
            for i in 0..2 {
                for j in 0..2 {
                    jtj[i][j] += row[i] * row[j];
                }
                jtr[i] -= row[i] * ri;
            }
        }
        let Some(mut step) = solve_2x2(jtj, jtr) else {
            converged = true;
            break;
        };

        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let candidate = p + step;
            let fc = objective(candidate, obs);
            if fc <= f {
                accepted = Some((candidate, fc));
                break;
            }
            step = LocalPoint::new(0.5 * step.x, 0.5 * step.y);
        }
        let Some((next, fc)) = accepted else {
            // No damped step descends: p is a local minimum to working precision.
            converged = true;
            break;
        };
        p = next;
        f = fc;
        if step.norm() < options.tol {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        estimate: p,
        residual_rms: (f / obs.len() as f64).sqrt(),
        iterations,
        converged,
    })
}

/// Root-mean-square range residual at `p`. Interval observations use a
/// flat-bottom residual: zero inside `[lo, hi]`, else the gap to the nearer bound.
pub fn residual_rms(p: LocalPoint, obs: &[DistanceObservation]) -> Result<f64, TrilaterationError> {
    if obs.is_empty() {
        return Err(TrilaterationError::TooFewObservations { need: 1, have: 0 });
    }
    let sum: f64 = obs
        .iter()
        .map(|o| {
            let r = p.distance_to(&o.vantage);
            let res = match o.kind {
                DistanceKind::Interval { lo, hi } => {
                    if r < lo {
                        lo - r
                    } else if r > hi {
                        r - hi
                    } else {
                        0.0
                    }
                }
                _ => r - o.target(),
            };
            res * res
        })
        .sum();
    Ok((sum / obs.len() as f64).sqrt())
}
