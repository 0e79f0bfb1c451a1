//! User-side countermeasures: hiding the displayed distance and reporting a
//! spoofed location, plus the utility cost of doing so.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_distance, GeoError, LocalPoint, Projection};
use crate::lbs_sim::UserProfile;
use crate::scenario::{AttackSpec, RunError, Scenario};

/// Radius of the disk around the true location from which honest viewers are
/// drawn when measuring utility.
pub const UTILITY_VIEWER_RADIUS_M: f64 = 5_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DefenseError {
    #[error("invalid defense parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("displacement leaves the valid coordinate range: {0}")]
    Displacement(#[from] GeoError),
}

/// Static location spoofing, applied once per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shift {
    /// Move `distance_m` along `bearing_deg` (clockwise from north).
    Fixed { bearing_deg: f64, distance_m: f64 },
    /// Move to a point drawn uniformly from the disk of radius `radius_m`.
    Jitter { radius_m: f64, jitter_seed: u64 },
}

/// Hide-distance flag and an optional spoofed location. The default is no
/// defense.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefensePolicy {
    pub hide_distance: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<Shift>,
}

impl DefensePolicy {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn hide_distance() -> Self {
        Self {
            hide_distance: true,
            shift: None,
        }
    }

    pub fn fixed_shift(bearing_deg: f64, distance_m: f64) -> Self {
        Self {
            hide_distance: false,
            shift: Some(Shift::Fixed {
                bearing_deg,
                distance_m,
            }),
        }
    }

    pub fn jitter(radius_m: f64, jitter_seed: u64) -> Self {
        Self {
            hide_distance: false,
            shift: Some(Shift::Jitter { radius_m, jitter_seed }),
        }
    }

    /// Same policy with the hide-distance flag set.
    pub fn and_hide(mut self) -> Self {
        self.hide_distance = true;
        self
    }

    pub fn with_jitter_seed(mut self, seed: u64) -> Self {
        if let Some(Shift::Jitter { jitter_seed, .. }) = &mut self.shift {
            *jitter_seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<(), DefenseError> {
        match self.shift {
            Some(Shift::Fixed {
                bearing_deg,
                distance_m,
            }) => {
                if !(0.0..360.0).contains(&bearing_deg) {
                    return Err(DefenseError::InvalidParameter("bearing must lie in [0, 360)"));
                }
                if !(distance_m.is_finite() && distance_m >= 0.0) {
                    return Err(DefenseError::InvalidParameter("shift distance must be non-negative"));
                }
            }
            Some(Shift::Jitter { radius_m, .. }) if !(radius_m.is_finite() && radius_m >= 0.0) => {
                return Err(DefenseError::InvalidParameter("jitter radius must be non-negative"));
            }
            Some(Shift::Jitter { .. }) | None => {}
        }
        Ok(())
    }

    /// Short label for tables, e.g. `hide+fixed_500m@90deg`.
    pub fn label(&self) -> String {
        let shift = match self.shift {
            None => None,
            Some(Shift::Fixed {
                bearing_deg,
                distance_m,
            }) => Some(format!("fixed_{distance_m}m@{bearing_deg}deg")),
            Some(Shift::Jitter { radius_m, .. }) => Some(format!("jitter_{radius_m}m")),
        };
        match (self.hide_distance, shift) {
            (false, None) => "none".to_owned(),
            (true, None) => "hide_distance".to_owned(),
            (false, Some(s)) => s,
            (true, Some(s)) => format!("hide+{s}"),
        }
    }
}

// FNV-1a; only needs to be stable across runs and platforms.
fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Applies `policy` to a profile. `true_location` is never touched; the
/// shift moves `reported_location` away from the true location.
pub fn apply_policy(profile: &UserProfile, policy: &DefensePolicy) -> Result<UserProfile, DefenseError> {
    policy.validate()?;
    let mut out = profile.clone();
    if policy.hide_distance {
        out.hide_distance = true;
    }
    let displacement = match policy.shift {
        None => return Ok(out),
        Some(Shift::Fixed {
            bearing_deg,
            distance_m,
        }) => {
            let (s, c) = bearing_deg.to_radians().sin_cos();
            LocalPoint::new(distance_m * s, distance_m * c)
        }
        Some(Shift::Jitter { radius_m, jitter_seed }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed ^ stable_hash(profile.id.as_str()));
            let r = radius_m * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            LocalPoint::new(r * t.cos(), r * t.sin())
        }
    };
    let projection = Projection::new(profile.true_location)?;
    out.reported_location = projection.unproject(displacement)?;
    Ok(out)
}

/// Mean displayed-distance error seen by honest viewers drawn uniformly from a
/// 5 km disk around the true location.
pub fn utility_distortion(
    profile: &UserProfile,
    policy: &DefensePolicy,
    viewer_samples: usize,
    seed: u64,
) -> Result<f64, DefenseError> {
    if viewer_samples == 0 {
        return Err(DefenseError::InvalidParameter("viewer_samples must be at least 1"));
    }
    let defended = apply_policy(profile, policy)?;
    let projection = Projection::new(profile.true_location)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..viewer_samples {
        let r = UTILITY_VIEWER_RADIUS_M * rng.random::<f64>().sqrt();
        let t = std::f64::consts::TAU * rng.random::<f64>();
        let viewer = projection.unproject(LocalPoint::new(r * t.cos(), r * t.sin()))?;
        total += (haversine_distance(viewer, defended.reported_location)
            - haversine_distance(viewer, profile.true_location))
        .abs();
    }
    Ok(total / viewer_samples as f64)
}

/// Number of viewers used for the utility column of [`evaluate_tradeoff`].
pub const TRADEOFF_VIEWER_SAMPLES: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub policy: String,
    pub seed: u64,
    pub error_m: Option<f64>,
    pub region_area_m2: Option<f64>,
    pub utility_m: f64,
    /// Attack-level failure (e.g. the victim hides its distance from a
    /// classic attack). Recorded, not fatal.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffSummary {
    pub policy: String,
    pub median_error_m: Option<f64>,
    pub median_region_area_m2: Option<f64>,
    pub mean_utility_m: f64,
    pub failures: usize,
}

/// Runs `attack` against the victim of `scenario` under each policy, for seeds
/// `0..seeds`. Each seed reseeds the population and jitter; cells run on
/// isolated servers in parallel and come back in policy-major order.
pub fn evaluate_tradeoff(
    scenario: &Scenario,
    policies: &[DefensePolicy],
    attack: AttackSpec,
    seeds: u64,
) -> Result<Vec<TradeoffRow>, RunError> {
    let cells: Vec<(DefensePolicy, u64)> = policies.iter().flat_map(|p| (0..seeds).map(move |s| (*p, s))).collect();
    cells
        .into_par_iter()
        .map(|(policy, seed)| {
            let mut s = scenario.clone();
            s.attack = attack;
            s.defense = policy;
            let s = s.reseeded(seed);
            s.validate()?;
            let victim = s
                .users
                .iter()
                .find(|u| u.id == s.victim_id)
                .expect("validated scenario names its victim");
            let profile = UserProfile::new(victim.id.clone(), victim.location);
            let utility_m = utility_distortion(&profile, &s.defense, TRADEOFF_VIEWER_SAMPLES, seed).map_err(|e| {
                crate::scenario::ScenarioError::Invalid {
                    path: "defense".into(),
                    message: e.to_string(),
                }
            })?;
            let label = policy.label();
            match s.run() {
                Ok((_, report)) => Ok(TradeoffRow {
                    policy: label,
                    seed,
                    error_m: report.error_m,
                    region_area_m2: Some(report.region_area_m2),
                    utility_m,
                    failure: None,
                }),
                Err(RunError::Attack(e)) => Ok(TradeoffRow {
                    policy: label,
                    seed,
                    error_m: None,
                    region_area_m2: None,
                    utility_m,
                    failure: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Per-policy medians and means, in first-appearance order.
pub fn summarize_tradeoff(rows: &[TradeoffRow]) -> Vec<TradeoffSummary> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.policy.as_str()) {
            labels.push(&r.policy);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&TradeoffRow> = rows.iter().filter(|r| r.policy == label).collect();
            let mut errors: Vec<f64> = group.iter().filter_map(|r| r.error_m).collect();
            let mut areas: Vec<f64> = group.iter().filter_map(|r| r.region_area_m2).collect();
            TradeoffSummary {
                policy: label.to_owned(),
                median_error_m: median(&mut errors),
                median_region_area_m2: median(&mut areas),
                mean_utility_m: group.iter().map(|r| r.utility_m).sum::<f64>() / group.len() as f64,
                failures: group.iter().filter(|r| r.failure.is_some()).count(),
            }
        })
        .collect()
}

pub const TRADEOFF_CSV_HEADER: [&str; 5] = ["policy", "seed", "error_m", "region_area_m2", "utility_m"];

pub fn write_tradeoff_csv<W: std::io::Write>(rows: &[TradeoffRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRADEOFF_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.seed.to_string(),
            r.error_m.map(|v| v.to_string()).unwrap_or_default(),
            r.region_area_m2.map(|v| v.to_string()).unwrap_or_default(),
            r.utility_m.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
