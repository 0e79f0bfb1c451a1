//! Built-in Kyoto scenario: a victim at the Science Frontier Laboratory of
//! Kyoto University observed from Demachi-yanagi Station, Heian Shrine and
//! the Kyoto Imperial Palace.

use crate::defense::DefensePolicy;
use crate::geo::GeoPoint;
use crate::lbs_sim::{ServerConfig, UserId};
use crate::scenario::{
    AttackSpec, OutputOptions, PopulationArea, PopulationSpec, Scenario, UserSpec, VantageSpec, SCHEMA_VERSION,
};

pub const VICTIM: GeoPoint = GeoPoint {
    lat: 35.02350485,
    lon: 135.77687703,
};
/// Demachi-yanagi Station.
pub const A1: GeoPoint = GeoPoint {
    lat: 35.03051251,
    lon: 135.77327415,
};
/// Heian Shrine.
pub const A2: GeoPoint = GeoPoint {
    lat: 35.01598257,
    lon: 135.78242585,
};
/// Kyoto Imperial Palace.
pub const A3: GeoPoint = GeoPoint {
    lat: 35.02258561,
    lon: 135.76493382,
};

pub const VANTAGES: [GeoPoint; 3] = [A1, A2, A3];

pub const VICTIM_ID: &str = "victim";
pub const DEMO_POPULATION: usize = 50;
pub const DEMO_POPULATION_RADIUS_M: f64 = 3_000.0;
pub const DEMO_POPULATION_SEED: u64 = 2016;
pub const DEMO_QUANTIZATION_M: f64 = 100.0;
pub const DEMO_EPSILON_M: f64 = 2.0;
pub const DEMO_MAX_ITER: u64 = 64;

/// The demo setup for one attack: 50 background users in a 3 km disk around
/// the victim, 100 m display rounding, true-distance ordering. The victim
/// shows its distance for the classic attack and hides it otherwise.
pub fn demo_scenario(attack: AttackSpec) -> Scenario {
    let defense = match attack {
        AttackSpec::Classic {} => DefensePolicy::none(),
        _ => DefensePolicy::hide_distance(),
    };
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: format!("kyoto-{}", attack.name()),
        server: ServerConfig {
            quantization_step: DEMO_QUANTIZATION_M,
            ..ServerConfig::default()
        },
        now: 0,
        users: vec![UserSpec {
            id: UserId::from(VICTIM_ID),
            location: VICTIM,
            hide_distance: false,
            last_login: 0,
        }],
        population: Some(PopulationSpec {
            count: DEMO_POPULATION,
            area: PopulationArea::Disk {
                center: VICTIM,
                radius_m: DEMO_POPULATION_RADIUS_M,
            },
            population_seed: DEMO_POPULATION_SEED,
            hide_fraction: 0.0,
            last_login: 0,
        }),
        victim_id: UserId::from(VICTIM_ID),
        vantages: VANTAGES.iter().map(|v| VantageSpec::Point(*v)).collect(),
        attack,
        defense,
        output: OutputOptions::default(),
        sweep_seed: 0,
    }
}

/// The three demo attacks in the order they are run.
pub fn demo_attacks() -> [AttackSpec; 3] {
    [
        AttackSpec::Classic {},
        AttackSpec::NeighborBound {},
        AttackSpec::HiddenFull {
            epsilon_m: DEMO_EPSILON_M,
            max_iter: DEMO_MAX_ITER,
        },
    ]
}
