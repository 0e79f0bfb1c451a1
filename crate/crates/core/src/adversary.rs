//! Localization attacks against a [`Server`].
//!
//! * [`classic_trilateration_attack`] reads the victim's displayed distance
//!   from three vantages and solves the circle system.
//! * [`neighbor_bound_attack`] never reads the victim's distance. In a list
//!   sorted by distance, the visible neighbors listed just before and just
//!   after the victim bound its distance from below and above; each vantage
//!   then contributes an annulus.
//! * [`colluding_distance_search`] places an adversary-controlled account at
//!   chosen distances and watches which of the two is listed first, bisecting
//!   the victim's distance. [`hidden_full_attack`] runs it from three vantages.
//! * [`select_remote_vantage`] picks a vantage between a crowded area and a
//!   remote victim so that crowd members sandwich the victim in the list.
//!
//! Annuli are drawn in a local projection. They are widened by the projection
//! error bound and half a cell diagonal so the raster keeps the cell holding
//! the victim whenever the distance bounds themselves are sound.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geo::{GeoError, GeoPoint, LocalPoint, Projection, METERS_PER_DEGREE};
use crate::lbs_sim::{
    DisplayedDistance, OrderingPolicy, ProximityResponse, Server, ServerConfig, ServerError, UserId, UserProfile,
};
use crate::region::{
    export_geojson, rasterize_intersection, Annulus, FeasibleRegion, Marker, Rect, DEFAULT_CELL_SIZE_M,
};
use crate::trilateration::{solve_least_squares, DistanceObservation, SolverOptions, TrilaterationError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("victim {victim} hides its distance (vantage {vantage})")]
    VictimHidden { victim: UserId, vantage: usize },
    #[error("victim {victim} is not listed from vantage {vantage}")]
    VictimNotVisible { victim: UserId, vantage: usize },
    #[error("attack needs {need} vantages, got {have}")]
    VantageCount { need: usize, have: usize },
    #[error("invalid attack parameter: {0}")]
    InvalidParameter(&'static str),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Solver(#[from] TrilaterationError),
    #[error(transparent)]
    Server(#[from] ServerError),
}

/// Settings shared by every attack run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackContext {
    /// Query time in seconds since the scenario epoch.
    pub now: i64,
    pub cell_size: f64,
    /// Optional raster extent as south-west and north-east corners.
    pub bounds: Option<(GeoPoint, GeoPoint)>,
}

impl Default for AttackContext {
    fn default() -> Self {
        Self {
            now: 0,
            cell_size: DEFAULT_CELL_SIZE_M,
            bounds: None,
        }
    }
}

/// Sound bounds on the victim's (geodesic) distance from a vantage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborBounds {
    pub vantage: GeoPoint,
    pub lower: f64,
    pub upper: f64,
    /// Both a preceding and a following visible neighbor were found.
    pub sandwiched: bool,
}

impl NeighborBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, d: f64) -> bool {
        self.lower <= d && d <= self.upper
    }
}

/// Outcome of one attack.
#[derive(Debug, Clone)]
pub struct AttackReport {
    pub estimate: Option<GeoPoint>,
    pub region: FeasibleRegion,
    /// Distance from the estimate to the victim's true location. Filled by the
    /// harness via [`with_truth`](Self::with_truth); the attacker never knows it.
    pub error_m: Option<f64>,
    pub region_area_m2: f64,
    pub queries_used: u64,
    pub account_moves: u64,
    pub converged: bool,
    pub projection: Projection,
    pub vantages: Vec<GeoPoint>,
    /// The planar annuli intersected to form `region`: the distance bounds
    /// widened by the projection error bound and half a cell diagonal.
    pub annuli: Vec<Annulus>,
}

impl AttackReport {
    pub fn with_truth(mut self, truth: GeoPoint) -> Self {
        self.error_m = self.estimate.map(|e| e.distance_to(&truth));
        self
    }

    /// Whether the region holds `p` (false when `p` is outside the raster).
    pub fn region_contains(&self, p: GeoPoint) -> bool {
        self.projection.project(p).is_ok_and(|l| self.region.contains(l))
    }

    /// Region plus vantage and estimate markers as GeoJSON.
    pub fn geojson(&self) -> Value {
        let mut markers: Vec<Marker> = self.vantages.iter().map(|v| Marker::new("vantage", *v)).collect();
        if let Some(e) = self.estimate {
            markers.push(Marker::new("estimate", e));
        }
        export_geojson(&self.region, &self.projection, &markers)
    }
}

/// Reads the victim's neighbors in a response and turns them into bounds on
/// its distance.
///
/// The nearest preceding entry with a visible distance gives the lower bound
/// and the nearest following one the upper bound, each widened by half a
/// quantization step. Missing neighbors fall back to 0 and `max_range`.
pub fn extract_neighbor_bounds(
    response: &ProximityResponse,
    victim: &UserId,
    config: &ServerConfig,
    vantage: GeoPoint,
) -> Result<NeighborBounds, AttackError> {
    let pos = response
        .position_of(victim)
        .ok_or_else(|| AttackError::VictimNotVisible {
            victim: victim.clone(),
            vantage: 0,
        })?;
    let half = 0.5 * config.quantization_step;
    let before = response.entries[..pos]
        .iter()
        .rev()
        .find_map(|e| e.displayed_distance.meters());
    let after = response.entries[pos + 1..]
        .iter()
        .find_map(|e| e.displayed_distance.meters());
    Ok(NeighborBounds {
        vantage,
        lower: before.map_or(0.0, |d| (d - half).max(0.0)),
        upper: after.map_or(config.max_range, |d| (d + half).min(config.max_range)),
        sandwiched: before.is_some() && after.is_some(),
    })
}

fn raster_bounds(projection: &Projection, ctx: &AttackContext) -> Result<Option<Rect>, AttackError> {
    ctx.bounds
        .map(|(sw, ne)| {
            Ok(Rect {
                min: projection.project(sw)?,
                max: projection.project(ne)?,
            })
        })
        .transpose()
}

/// Planar annulus that contains every point whose geodesic distance from
/// `vantage` lies in `[lower, upper]`, plus half a cell diagonal.
fn planar_annulus(projection: &Projection, vantage: LocalPoint, lower: f64, upper: f64, cell: f64) -> Annulus {
    let slack = projection.planar_error_bound(vantage.norm() + upper, upper) + cell * std::f64::consts::FRAC_1_SQRT_2;
    Annulus::new(vantage, (lower - slack).max(0.0), upper + slack)
}

fn build_region(
    projection: &Projection,
    constraints: &[(LocalPoint, f64, f64)],
    ctx: &AttackContext,
) -> Result<(FeasibleRegion, Vec<Annulus>), AttackError> {
    let bounds = raster_bounds(projection, ctx)?;
    // A first pass fixes the effective (possibly coarsened) cell size, which
    // the half-diagonal margin depends on.
    let mut cell = ctx.cell_size;
    loop {
        let annuli: Vec<Annulus> = constraints
            .iter()
            .map(|&(v, lo, hi)| planar_annulus(projection, v, lo, hi, cell))
            .collect();
        let region = rasterize_intersection(&annuli, cell, bounds);
        if region.cell_size() == cell {
            return Ok((region, annuli));
        }
        cell = region.cell_size();
    }
}

fn find_victim(
    response: &ProximityResponse,
    victim: &UserId,
    vantage: usize,
) -> Result<DisplayedDistance, AttackError> {
    response
        .entries
        .iter()
        .find(|e| &e.user_id == victim)
        .map(|e| e.displayed_distance)
        .ok_or_else(|| AttackError::VictimNotVisible {
            victim: victim.clone(),
            vantage,
        })
}

fn unproject_estimate(projection: &Projection, p: LocalPoint) -> Option<GeoPoint> {
    projection.unproject(p).ok()
}

/// Trilateration from the victim's displayed distances at three vantages.
pub fn classic_trilateration_attack(
    server: &Server,
    victim: &UserId,
    vantages: &[GeoPoint],
    ctx: &AttackContext,
) -> Result<AttackReport, AttackError> {
    if vantages.len() != 3 {
        return Err(AttackError::VantageCount {
            need: 3,
            have: vantages.len(),
        });
    }
    let projection = Projection::centered_on(vantages)?;
    let step = server.config().quantization_step;
    let mut observations = Vec::with_capacity(3);
    let mut constraints = Vec::with_capacity(3);
    for (k, v) in vantages.iter().enumerate() {
        let response = server.proximity_query(*v, ctx.now);
        let shown = find_victim(&response, victim, k)?
            .meters()
            .ok_or_else(|| AttackError::VictimHidden {
                victim: victim.clone(),
                vantage: k,
            })?;
        let local = projection.project(*v)?;
        let obs = DistanceObservation::quantized(local, shown, step);
        let (lo, hi) = obs.bounds();
        observations.push(obs);
        constraints.push((local, lo, hi));
    }
    let solved = solve_least_squares(&observations, SolverOptions::default())?;
    let (region, annuli) = build_region(&projection, &constraints, ctx)?;
    Ok(AttackReport {
        estimate: unproject_estimate(&projection, solved.estimate),
        region_area_m2: region.area_m2(),
        region,
        error_m: None,
        queries_used: 3,
        account_moves: 3,
        converged: solved.converged,
        projection,
        vantages: vantages.to_vec(),
        annuli,
    })
}

/// Region attack from neighbor bounds; works whether or not the victim hides
/// its distance. The estimate is the region centroid.
pub fn neighbor_bound_attack(
    server: &Server,
    victim: &UserId,
    vantages: &[GeoPoint],
    ctx: &AttackContext,
) -> Result<AttackReport, AttackError> {
    if vantages.is_empty() {
        return Err(AttackError::VantageCount { need: 1, have: 0 });
    }
    let projection = Projection::centered_on(vantages)?;
    let mut constraints = Vec::with_capacity(vantages.len());
    for (k, v) in vantages.iter().enumerate() {
        let response = server.proximity_query(*v, ctx.now);
        let bounds = extract_neighbor_bounds(&response, victim, server.config(), *v).map_err(|_| {
            AttackError::VictimNotVisible {
                victim: victim.clone(),
                vantage: k,
            }
        })?;
        constraints.push((projection.project(*v)?, bounds.lower, bounds.upper));
    }
    let (region, annuli) = build_region(&projection, &constraints, ctx)?;
    let n = vantages.len() as u64;
    Ok(AttackReport {
        estimate: region.centroid().and_then(|c| unproject_estimate(&projection, c)),
        region_area_m2: region.area_m2(),
        converged: !region.is_empty(),
        region,
        error_m: None,
        queries_used: n,
        account_moves: n,
        projection,
        vantages: vantages.to_vec(),
        annuli,
    })
}

/// Result of a colluding-account search from one vantage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub bounds: NeighborBounds,
    /// Bisection steps, each one colluder move plus one query.
    pub iterations: u64,
    /// Includes the initial visibility check.
    pub queries_used: u64,
    pub converged: bool,
}

/// Identifier of the colluding account. It sorts after the victim's id, so a
/// tie in the list ordering always puts the colluder second.
pub fn colluder_id(victim: &UserId) -> UserId {
    UserId::new(format!("{victim}#colluder"))
}

/// Bisects the victim's distance from `vantage` with one colluding account.
///
/// Starting from `[0, max_range]`, each step moves the colluder due north of
/// the vantage, queries, and keeps the half of the interval consistent with
/// which of the two is listed first. Due north, the colluder's geodesic
/// distance equals its latitude offset times [`METERS_PER_DEGREE`].
///
/// Under [`OrderingPolicy::TrueDistance`] the probe is the midpoint and the
/// search stops at width `epsilon`. Under [`OrderingPolicy::QuantizedThenId`]
/// only display buckets can be compared, so each probe tests the bucket edge
/// nearest the midpoint and the search stops at width `max(epsilon, step)`.
///
/// The colluder is removed afterwards. Reaching `max_iter` returns the current
/// (still sound) bounds with `converged = false`.
pub fn colluding_distance_search(
    server: &mut Server,
    victim: &UserId,
    vantage: GeoPoint,
    epsilon: f64,
    max_iter: u64,
    now: i64,
) -> Result<SearchOutcome, AttackError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(AttackError::InvalidParameter("epsilon must be positive"));
    }
    vantage.validate()?;
    let colluder = colluder_id(victim);
    if server.user(&colluder).is_some() {
        return Err(AttackError::InvalidParameter("colluder id already registered"));
    }
    let config = *server.config();
    let step = config.quantization_step;
    let quantized = config.ordering_policy == OrderingPolicy::QuantizedThenId && step > 0.0;
    let target_width = if quantized { epsilon.max(step) } else { epsilon };

    let mut queries_used = 1;
    if server.proximity_query(vantage, now).position_of(victim).is_none() {
        return Err(AttackError::VictimNotVisible {
            victim: victim.clone(),
            vantage: 0,
        });
    }

    let (mut lo, mut hi) = (0.0, config.max_range);
    let mut iterations = 0;
    let result = loop {
        if hi - lo <= target_width {
            break Ok(true);
        }
        if iterations >= max_iter {
            break Ok(false);
        }
        let mid = 0.5 * (lo + hi);
        // Threshold being tested and the colluder distance that tests it.
        let (threshold, placement) = if quantized {
            let edge = ((mid / step - 0.5).round() + 0.5) * step;
            let below = ((mid / step - 0.5).floor() + 0.5) * step;
            let above = below + step;
            let edge = [edge, below, above].into_iter().find(|e| lo < *e && *e < hi);
            match edge {
                Some(e) => (e, e - 0.5 * step),
                None => break Ok(true),
            }
        } else {
            (mid, mid)
        };
        let location = GeoPoint::new(vantage.lat + placement / METERS_PER_DEGREE, vantage.lon)?;
        let mut profile = UserProfile::new(colluder.clone(), location).logged_in_at(now);
        profile.hide_distance = true;
        if let Err(e) = server.upsert_user(profile) {
            break Err(e.into());
        }
        iterations += 1;
        queries_used += 1;
        let response = server.proximity_query(vantage, now);
        let colluder_first = match (response.position_of(&colluder), response.position_of(victim)) {
            (Some(c), Some(v)) => c < v,
            // The colluder pushed the victim off a truncated list.
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => {
                break Err(AttackError::VictimNotVisible {
                    victim: victim.clone(),
                    vantage: 0,
                })
            }
        };
        if colluder_first {
            lo = threshold;
        } else {
            hi = threshold;
        }
    };
    server.remove_user(&colluder);
    let converged = result?;
    Ok(SearchOutcome {
        bounds: NeighborBounds {
            vantage,
            lower: lo,
            upper: hi,
            sandwiched: true,
        },
        iterations,
        queries_used,
        converged,
    })
}

/// Colluding-account search from three vantages, then intersection and least
/// squares on the interval midpoints. Needs no displayed distance at all.
pub fn hidden_full_attack(
    server: &mut Server,
    victim: &UserId,
    vantages: &[GeoPoint],
    epsilon: f64,
    max_iter: u64,
    ctx: &AttackContext,
) -> Result<AttackReport, AttackError> {
    if vantages.len() != 3 {
        return Err(AttackError::VantageCount {
            need: 3,
            have: vantages.len(),
        });
    }
    let projection = Projection::centered_on(vantages)?;
    let mut observations = Vec::with_capacity(3);
    let mut constraints = Vec::with_capacity(3);
    let (mut queries_used, mut account_moves, mut converged) = (0, 0, true);
    for (k, v) in vantages.iter().enumerate() {
        let outcome =
            colluding_distance_search(server, victim, *v, epsilon, max_iter, ctx.now).map_err(|e| match e {
                AttackError::VictimNotVisible { victim, .. } => AttackError::VictimNotVisible { victim, vantage: k },
                other => other,
            })?;
        let local = projection.project(*v)?;
        observations.push(DistanceObservation::interval(
            local,
            outcome.bounds.lower,
            outcome.bounds.upper,
        ));
        constraints.push((local, outcome.bounds.lower, outcome.bounds.upper));
        queries_used += outcome.queries_used;
        // The adversary's own move to the vantage plus every colluder move.
        account_moves += 1 + outcome.iterations;
        converged &= outcome.converged;
    }
    let solved = solve_least_squares(&observations, SolverOptions::default())?;
    let (region, annuli) = build_region(&projection, &constraints, ctx)?;
    Ok(AttackReport {
        estimate: unproject_estimate(&projection, solved.estimate),
        region_area_m2: region.area_m2(),
        converged: converged && solved.converged && !region.is_empty(),
        region,
        error_m: None,
        queries_used,
        account_moves,
        projection,
        vantages: vantages.to_vec(),
        annuli,
    })
}

/// Point at `fraction` of the way from `dense_center` toward
/// `suspected_region_center`, interpolated in a projection about the first.
pub fn select_remote_vantage(
    dense_center: GeoPoint,
    suspected_region_center: GeoPoint,
    fraction: f64,
) -> Result<GeoPoint, AttackError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(AttackError::InvalidParameter("fraction must lie in (0, 1)"));
    }
    if dense_center == suspected_region_center {
        return Err(AttackError::InvalidParameter(
            "dense center and suspected region coincide",
        ));
    }
    let projection = Projection::new(dense_center)?;
    let target = projection.project(suspected_region_center)?;
    Ok(projection.unproject(LocalPoint::ORIGIN.lerp(&target, fraction))?)
}
