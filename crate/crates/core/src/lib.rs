//! Simulation of a distance-sorted location service and of the attacks that
//! localize a user from it: classic trilateration, neighbor-bound annuli, and
//! colluding-account bisection, together with location-spoofing defenses.
//!
//! Everything is deterministic given the seeds in a [`Scenario`].

pub mod adversary;
pub mod defense;
pub mod geo;
pub mod kyoto;
pub mod lbs_sim;
pub mod region;
pub mod scenario;
pub mod trilateration;

pub use adversary::{
    classic_trilateration_attack, colluding_distance_search, extract_neighbor_bounds, hidden_full_attack,
    neighbor_bound_attack, select_remote_vantage, AttackContext, AttackError, AttackReport, NeighborBounds,
    SearchOutcome,
};
pub use defense::{apply_policy, evaluate_tradeoff, utility_distortion, DefensePolicy, Shift};
pub use geo::{haversine_distance, GeoError, GeoPoint, LocalPoint, Projection, EARTH_RADIUS_M};
pub use lbs_sim::{
    quantize_distance, DisplayedDistance, OrderingPolicy, ProximityEntry, ProximityResponse, Server, ServerConfig,
    UserId, UserProfile,
};
pub use region::{
    export_geojson, monte_carlo_area, rasterize_intersection, Annulus, CellLookup, FeasibleRegion, Marker, Rect,
};
pub use scenario::{AttackSpec, RunError, Scenario, ScenarioError, SweepAxis, SweepRow};
pub use trilateration::{
    residual_rms, solve_exact_three_circles, solve_least_squares, DistanceKind, DistanceObservation, SolveResult,
    SolverOptions, TrilaterationError,
};
