//! In-process model of a distance-sorting location service.
//!
//! The server keeps one profile per user id and answers proximity queries with
//! a list sorted by distance from the viewer. Distances may be quantized for
//! display or hidden per user; hidden users are still ranked by distance.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_distance, GeoError, GeoPoint};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub true_location: GeoPoint,
    /// Where the server believes the user is. Equals `true_location` unless a
    /// defense spoofs it.
    pub reported_location: GeoPoint,
    pub hide_distance: bool,
    /// Seconds since the scenario epoch.
    pub last_login: i64,
}

impl UserProfile {
    pub fn new(id: impl Into<UserId>, location: GeoPoint) -> Self {
        Self {
            id: id.into(),
            true_location: location,
            reported_location: location,
            hide_distance: false,
            last_login: 0,
        }
    }

    pub fn hiding(mut self) -> Self {
        self.hide_distance = true;
        self
    }

    pub fn logged_in_at(mut self, t: i64) -> Self {
        self.last_login = t;
        self
    }
}

impl From<String> for UserId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingPolicy {
    /// Sort by true distance, ties by id.
    #[default]
    TrueDistance,
    /// Sort by the quantized distance, ties by id.
    QuantizedThenId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    /// Display rounding in meters; 0 shows exact distances.
    pub quantization_step: f64,
    /// Seconds after the last login during which a user is listed.
    pub visibility_window: i64,
    pub max_results: usize,
    pub max_range: f64,
    pub ordering_policy: OrderingPolicy,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            quantization_step: 0.0,
            visibility_window: 7200,
            max_results: 100,
            max_range: 20_000.0,
            ordering_policy: OrderingPolicy::TrueDistance,
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ServerError> {
        let ok = self.quantization_step.is_finite()
            && self.quantization_step >= 0.0
            && self.visibility_window >= 0
            && self.max_results >= 1
            && self.max_range.is_finite()
            && self.max_range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ServerError::InvalidConfig)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServerError {
    #[error("invalid location for user {id}: {source}")]
    InvalidLocation { id: UserId, source: GeoError },
    #[error("server config must have non-negative step and window, max_results >= 1 and positive max_range")]
    InvalidConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayedDistance {
    Meters(f64),
    Hidden,
}

impl DisplayedDistance {
    pub fn meters(&self) -> Option<f64> {
        match self {
            DisplayedDistance::Meters(m) => Some(*m),
            DisplayedDistance::Hidden => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityEntry {
    pub user_id: UserId,
    pub rank: usize,
    pub displayed_distance: DisplayedDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityResponse {
    pub entries: Vec<ProximityEntry>,
    pub query_serial: u64,
}

impl ProximityResponse {
    pub fn position_of(&self, id: &UserId) -> Option<usize> {
        self.entries.iter().position(|e| &e.user_id == id)
    }
}

/// Rounds `d` to the nearest multiple of `step`, half-steps away from zero.
/// A zero step leaves `d` unchanged.
pub fn quantize_distance(d: f64, step: f64) -> f64 {
    if step == 0.0 {
        d
    } else {
        (d / step).round() * step
    }
}

/// The simulated service.
///
/// Mutations take `&mut self`; queries take `&self` and may run concurrently.
/// Every query bumps [`query_serial`](Self::query_serial).
#[derive(Debug)]
pub struct Server {
    config: ServerConfig,
    users: BTreeMap<UserId, UserProfile>,
    mutations: u64,
    queries: AtomicU64,
}

impl Server {
    pub fn new(config: ServerConfig) -> Result<Self, ServerError> {
        config.validate()?;
        Ok(Self {
            config,
            users: BTreeMap::new(),
            mutations: 0,
            queries: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn user(&self, id: &UserId) -> Option<&UserProfile> {
        self.users.get(id)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserProfile> {
        self.users.values()
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn mutation_count(&self) -> u64 {
        self.mutations
    }

    /// Number of proximity queries answered so far.
    pub fn query_serial(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Inserts or replaces the profile with `profile.id`.
    pub fn upsert_user(&mut self, profile: UserProfile) -> Result<(), ServerError> {
        for loc in [profile.true_location, profile.reported_location] {
            loc.validate().map_err(|source| ServerError::InvalidLocation {
                id: profile.id.clone(),
                source,
            })?;
        }
        self.users.insert(profile.id.clone(), profile);
        self.mutations += 1;
        Ok(())
    }

    pub fn remove_user(&mut self, id: &UserId) -> Option<UserProfile> {
        let removed = self.users.remove(id);
        if removed.is_some() {
            self.mutations += 1;
        }
        removed
    }

    /// Users visible from `viewer` at time `now`, nearest first.
    pub fn proximity_query(&self, viewer: GeoPoint, now: i64) -> ProximityResponse {
        let query_serial = self.queries.fetch_add(1, Ordering::Relaxed) + 1;
        let cfg = &self.config;
        let mut visible: Vec<(f64, f64, &UserProfile)> = self
            .users
            .values()
            .filter(|u| now - u.last_login <= cfg.visibility_window)
            .map(|u| {
                let d = haversine_distance(viewer, u.reported_location);
                (d, quantize_distance(d, cfg.quantization_step), u)
            })
            .filter(|(d, _, _)| *d <= cfg.max_range)
            .collect();
        match cfg.ordering_policy {
            OrderingPolicy::TrueDistance => {
                visible.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.2.id.cmp(&b.2.id)))
            }
            OrderingPolicy::QuantizedThenId => {
                visible.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.2.id.cmp(&b.2.id)))
            }
        }
        let entries = visible
            .into_iter()
            .take(cfg.max_results)
            .enumerate()
            .map(|(rank, (_, shown, u))| ProximityEntry {
                user_id: u.id.clone(),
                rank,
                displayed_distance: if u.hide_distance {
                    DisplayedDistance::Hidden
                } else {
                    DisplayedDistance::Meters(shown)
                },
            })
            .collect();
        ProximityResponse { entries, query_serial }
    }
}

impl Clone for Server {
    fn clone(&self) -> Self {
        Self {
            config: self.config,
            users: self.users.clone(),
            mutations: self.mutations,
            queries: AtomicU64::new(self.query_serial()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LocalPoint, Projection};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn home() -> GeoPoint {
        GeoPoint::new(35.0235, 135.7769).unwrap()
    }

    fn north_of(m: f64) -> GeoPoint {
        let proj = Projection::new(home()).unwrap();
        proj.unproject(LocalPoint::new(0.0, m)).unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_distance(845.0, 100.0), 800.0);
        assert_eq!(quantize_distance(850.0, 100.0), 900.0);
        assert_eq!(quantize_distance(977.0, 0.0), 977.0);
        assert_eq!(quantize_distance(0.0, 100.0), 0.0);
    }

    #[test]
    fn self_query_ranks_first() {
        let mut s = Server::new(ServerConfig {
            quantization_step: 100.0,
            ..Default::default()
        })
        .unwrap();
        s.upsert_user(UserProfile::new("me", home())).unwrap();
        let r = s.proximity_query(home(), 0);
        assert_eq!(r.entries[0].user_id.as_str(), "me");
        assert_eq!(r.entries[0].rank, 0);
        assert_eq!(r.entries[0].displayed_distance, DisplayedDistance::Meters(0.0));
    }

    #[test]
    fn upsert_replaces() {
        let mut s = Server::new(ServerConfig::default()).unwrap();
        s.upsert_user(UserProfile::new("a", north_of(100.0))).unwrap();
        s.upsert_user(UserProfile::new("b", north_of(200.0))).unwrap();
        s.upsert_user(UserProfile::new("a", north_of(300.0))).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.mutation_count(), 3);
        let r = s.proximity_query(home(), 0);
        let ids: Vec<_> = r.entries.iter().map(|e| e.user_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
    }

    #[test]
    fn rejects_invalid_location() {
        let mut s = Server::new(ServerConfig::default()).unwrap();
        let bad = UserProfile::new("x", GeoPoint { lat: 95.0, lon: 0.0 });
        assert!(matches!(s.upsert_user(bad), Err(ServerError::InvalidLocation { .. })));
        assert!(s.is_empty());
        assert!(Server::new(ServerConfig {
            max_results: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn hidden_user_keeps_rank() {
        let mut s = Server::new(ServerConfig::default()).unwrap();
        s.upsert_user(UserProfile::new("n1", north_of(100.0))).unwrap();
        s.upsert_user(UserProfile::new("v", north_of(200.0)).hiding()).unwrap();
        s.upsert_user(UserProfile::new("n2", north_of(300.0))).unwrap();
        let r = s.proximity_query(home(), 0);
        let ids: Vec<_> = r.entries.iter().map(|e| e.user_id.as_str()).collect();
        assert_eq!(ids, ["n1", "v", "n2"]);
        assert_eq!(r.entries[1].displayed_distance, DisplayedDistance::Hidden);
        assert!((r.entries[2].displayed_distance.meters().unwrap() - 300.0).abs() < 1e-6);
    }

    #[test]
    fn visibility_window_and_range() {
        let mut s = Server::new(ServerConfig {
            max_range: 1000.0,
            ..Default::default()
        })
        .unwrap();
        s.upsert_user(UserProfile::new("fresh", north_of(10.0)).logged_in_at(1))
            .unwrap();
        s.upsert_user(UserProfile::new("stale", north_of(10.0)).logged_in_at(-1))
            .unwrap();
        s.upsert_user(UserProfile::new("far", north_of(1500.0)).logged_in_at(7200))
            .unwrap();
        let r = s.proximity_query(home(), 7200);
        let ids: Vec<_> = r.entries.iter().map(|e| e.user_id.as_str()).collect();
        // stale logged in 7201 s ago with a 7200 s window.
        assert_eq!(ids, ["fresh"]);
    }

    #[test]
    fn truncation_and_serial() {
        let mut s = Server::new(ServerConfig {
            max_results: 2,
            ..Default::default()
        })
        .unwrap();
        for k in 0..5 {
            s.upsert_user(UserProfile::new(format!("u{k}"), north_of(100.0 * (k + 1) as f64)))
                .unwrap();
        }
        let r = s.proximity_query(home(), 0);
        assert_eq!(r.entries.len(), 2);
        assert_eq!(r.query_serial, 1);
        assert_eq!(s.proximity_query(home(), 0).query_serial, 2);
        assert_eq!(s.query_serial(), 2);
    }

    #[test]
    fn quantized_policy_orders_by_bucket_then_id() {
        let cfg = ServerConfig {
            quantization_step: 100.0,
            ordering_policy: OrderingPolicy::QuantizedThenId,
            ..Default::default()
        };
        let mut s = Server::new(cfg).unwrap();
        s.upsert_user(UserProfile::new("b", north_of(310.0))).unwrap();
        s.upsert_user(UserProfile::new("a", north_of(340.0))).unwrap();
        s.upsert_user(UserProfile::new("c", north_of(120.0))).unwrap();
        let r = s.proximity_query(home(), 0);
        let ids: Vec<_> = r.entries.iter().map(|e| e.user_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    fn population(seed: u64, n: usize) -> Vec<UserProfile> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj = Projection::new(home()).unwrap();
        (0..n)
            .map(|k| {
                let loc = proj
                    .unproject(LocalPoint::new(
                        rng.random_range(-3e3..3e3),
                        rng.random_range(-3e3..3e3),
                    ))
                    .unwrap();
                let mut u = UserProfile::new(format!("u{k:03}"), loc);
                u.hide_distance = rng.random_bool(0.3);
                u
            })
            .collect()
    }

    #[test]
    fn hiding_never_changes_ranks() {
        for seed in 0..100 {
            let users = population(seed, 60);
            let mut shown = Server::new(ServerConfig {
                quantization_step: 50.0,
                ..Default::default()
            })
            .unwrap();
            let mut toggled = shown.clone();
            for u in &users {
                shown.upsert_user(u.clone()).unwrap();
                let mut t = u.clone();
                t.hide_distance = !t.hide_distance;
                toggled.upsert_user(t).unwrap();
            }
            let a = shown.proximity_query(home(), 0);
            let b = toggled.proximity_query(home(), 0);
            let ids = |r: &ProximityResponse| r.entries.iter().map(|e| e.user_id.clone()).collect::<Vec<_>>();
            assert_eq!(ids(&a), ids(&b), "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn responses_sorted_bounded_and_deterministic(seed in 0u64..1000, step in 0.0f64..200.0) {
            let users = population(seed, 40);
            let mut s = Server::new(ServerConfig { quantization_step: step, ..Default::default() }).unwrap();
            for u in &users {
                s.upsert_user(u.clone()).unwrap();
            }
            let r = s.proximity_query(home(), 0);
            let again = s.proximity_query(home(), 0);
            prop_assert_eq!(&r.entries, &again.entries);
            let mut last = -1.0;
            for (k, e) in r.entries.iter().enumerate() {
                prop_assert_eq!(e.rank, k);
                let u = s.user(&e.user_id).unwrap();
                let d = haversine_distance(home(), u.reported_location);
                prop_assert!(d >= last);
                last = d;
                match e.displayed_distance {
                    DisplayedDistance::Meters(m) => prop_assert!((m - d).abs() <= step / 2.0 + 1e-9),
                    DisplayedDistance::Hidden => prop_assert!(u.hide_distance),
                }
            }
        }
    }
}
