//! Declarative experiment description and its execution.
//!
//! A scenario is one JSON document (`schema_version` 1) naming the server
//! configuration, explicit users, an optional seeded random population, the
//! victim, the vantages, the attack and the victim's defense. Unknown fields
//! are rejected. Every random draw comes from a seed stored in the document
//! (`population_seed`, `jitter_seed`, `sweep_seed`).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    classic_trilateration_attack, hidden_full_attack, neighbor_bound_attack, select_remote_vantage, AttackContext,
    AttackError, AttackReport,
};
use crate::defense::{apply_policy, DefensePolicy, Shift};
use crate::geo::{GeoPoint, LocalPoint, Projection};
use crate::lbs_sim::{Server, ServerConfig, UserId, UserProfile};
use crate::region::{RegionSummary, DEFAULT_CELL_SIZE_M};

pub const SCHEMA_VERSION: u32 = 1;

/// Prefix of generated population ids.
pub const POPULATION_ID_PREFIX: &str = "bg-";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ScenarioError {
    fn at(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError::Invalid {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn path(&self) -> &str {
        match self {
            ScenarioError::Invalid { path, .. } => path,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("attack failed: {0}")]
    Attack(#[from] AttackError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub id: UserId,
    pub location: GeoPoint,
    #[serde(default)]
    pub hide_distance: bool,
    #[serde(default)]
    pub last_login: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationArea {
    Disk {
        center: GeoPoint,
        radius_m: f64,
    },
    /// Axis-aligned square of side `width_m` centered on `center`.
    Box {
        center: GeoPoint,
        width_m: f64,
    },
}

impl PopulationArea {
    pub fn center(&self) -> GeoPoint {
        match self {
            PopulationArea::Disk { center, .. } | PopulationArea::Box { center, .. } => *center,
        }
    }

    fn extent(&self) -> f64 {
        match self {
            PopulationArea::Disk { radius_m, .. } => *radius_m,
            PopulationArea::Box { width_m, .. } => *width_m,
        }
    }

    /// Draws one point; consumes exactly two uniforms so that populations of
    /// different sizes from the same seed share a prefix.
    pub fn sample(&self, rng: &mut impl Rng) -> LocalPoint {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        match self {
            PopulationArea::Disk { radius_m, .. } => {
                let r = radius_m * u.sqrt();
                let t = std::f64::consts::TAU * v;
                LocalPoint::new(r * t.cos(), r * t.sin())
            }
            PopulationArea::Box { width_m, .. } => LocalPoint::new((u - 0.5) * width_m, (v - 0.5) * width_m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub count: usize,
    pub area: PopulationArea,
    pub population_seed: u64,
    /// Probability that a generated user hides its distance.
    #[serde(default)]
    pub hide_fraction: f64,
    #[serde(default)]
    pub last_login: i64,
}

impl PopulationSpec {
    pub fn generate(&self) -> Result<Vec<UserProfile>, ScenarioError> {
        let projection =
            Projection::new(self.area.center()).map_err(|e| ScenarioError::at("population.area.center", e))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.population_seed);
        (0..self.count)
            .map(|k| {
                let local = self.area.sample(&mut rng);
                let hide = rng.random::<f64>() < self.hide_fraction;
                let location = projection
                    .unproject(local)
                    .map_err(|e| ScenarioError::at("population.area", e))?;
                let mut user = UserProfile::new(format!("{POPULATION_ID_PREFIX}{k:05}"), location);
                user.hide_distance = hide;
                user.last_login = self.last_login;
                Ok(user)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteVantage {
    pub dense_center: GeoPoint,
    pub suspected_center: GeoPoint,
    pub fraction: f64,
}

/// A literal point, or one derived with [`select_remote_vantage`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VantageSpec {
    Point(GeoPoint),
    Remote { remote: RemoteVantage },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    Classic {},
    NeighborBound {},
    HiddenFull { epsilon_m: f64, max_iter: u64 },
}

impl AttackSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::Classic {} => "classic",
            AttackSpec::NeighborBound {} => "neighbor_bound",
            AttackSpec::HiddenFull { .. } => "hidden_full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoBounds {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub cell_size_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<GeoBounds>,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            cell_size_m: DEFAULT_CELL_SIZE_M,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub server: ServerConfig,
    /// Query time in seconds since the scenario epoch.
    #[serde(default)]
    pub now: i64,
    #[serde(default)]
    pub users: Vec<UserSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationSpec>,
    pub victim_id: UserId,
    pub vantages: Vec<VantageSpec>,
    pub attack: AttackSpec,
    #[serde(default)]
    pub defense: DefensePolicy,
    #[serde(default)]
    pub output: OutputOptions,
    #[serde(default)]
    pub sweep_seed: u64,
}

/// A server populated from a scenario, ready to attack.
#[derive(Debug, Clone)]
pub struct World {
    pub server: Server,
    /// The victim as stored on the server (after its defense).
    pub victim: UserProfile,
    pub vantages: Vec<GeoPoint>,
}

impl Scenario {
    /// Parses and validates a scenario document. Errors carry the JSON path of
    /// the offending field.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::at(if path == "." { "$".to_owned() } else { path }, e.into_inner())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::at(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        self.server.validate().map_err(|e| ScenarioError::at("server", e))?;
        let mut ids = BTreeSet::new();
        for (k, u) in self.users.iter().enumerate() {
            u.location
                .validate()
                .map_err(|e| ScenarioError::at(format!("users[{k}].location"), e))?;
            if u.id.as_str().starts_with(POPULATION_ID_PREFIX) && self.population.is_some() {
                return Err(ScenarioError::at(
                    format!("users[{k}].id"),
                    format!("ids starting with '{POPULATION_ID_PREFIX}' are reserved for the population"),
                ));
            }
            if !ids.insert(&u.id) {
                return Err(ScenarioError::at(
                    format!("users[{k}].id"),
                    format!("duplicate id '{}'", u.id),
                ));
            }
        }
        if !ids.contains(&self.victim_id) {
            return Err(ScenarioError::at(
                "victim_id",
                format!("victim '{}' is not among the listed users", self.victim_id),
            ));
        }
        if let Some(pop) = &self.population {
            pop.area
                .center()
                .validate()
                .map_err(|e| ScenarioError::at("population.area.center", e))?;
            let extent = pop.area.extent();
            if !(extent.is_finite() && extent > 0.0) {
                return Err(ScenarioError::at("population.area", "size must be positive"));
            }
            if !(0.0..=1.0).contains(&pop.hide_fraction) {
                return Err(ScenarioError::at("population.hide_fraction", "must lie in [0, 1]"));
            }
        }
        let need = match self.attack {
            AttackSpec::Classic {} | AttackSpec::HiddenFull { .. } => Some(3),
            AttackSpec::NeighborBound {} => None,
        };
        match need {
            Some(n) if self.vantages.len() != n => {
                return Err(ScenarioError::at(
                    "vantages",
                    format!(
                        "{} attack needs exactly {n} vantages, got {}",
                        self.attack.name(),
                        self.vantages.len()
                    ),
                ))
            }
            None if self.vantages.is_empty() => {
                return Err(ScenarioError::at("vantages", "at least one vantage is required"))
            }
            _ => {}
        }
        for (k, v) in self.vantages.iter().enumerate() {
            let points = match v {
                VantageSpec::Point(p) => vec![*p],
                VantageSpec::Remote { remote } => vec![remote.dense_center, remote.suspected_center],
            };
            for p in points {
                p.validate()
                    .map_err(|e| ScenarioError::at(format!("vantages[{k}]"), e))?;
            }
        }
        if let AttackSpec::HiddenFull { epsilon_m, .. } = self.attack {
            if !(epsilon_m.is_finite() && epsilon_m > 0.0) {
                return Err(ScenarioError::at("attack.epsilon_m", "must be positive"));
            }
        }
        self.defense.validate().map_err(|e| ScenarioError::at("defense", e))?;
        if !(self.output.cell_size_m.is_finite() && self.output.cell_size_m > 0.0) {
            return Err(ScenarioError::at("output.cell_size_m", "must be positive"));
        }
        Ok(())
    }

    /// Replaces every seed that drives a random draw (population and jitter).
    pub fn reseeded(&self, seed: u64) -> Scenario {
        let mut s = self.clone();
        if let Some(pop) = &mut s.population {
            pop.population_seed = seed;
        }
        s.defense = s.defense.with_jitter_seed(seed);
        s
    }

    pub fn attack_context(&self) -> AttackContext {
        AttackContext {
            now: self.now,
            cell_size: self.output.cell_size_m,
            bounds: self.output.bounds.map(|b| {
                (
                    GeoPoint {
                        lat: b.south,
                        lon: b.west,
                    },
                    GeoPoint {
                        lat: b.north,
                        lon: b.east,
                    },
                )
            }),
        }
    }

    pub fn resolve_vantages(&self) -> Result<Vec<GeoPoint>, ScenarioError> {
        self.vantages
            .iter()
            .enumerate()
            .map(|(k, v)| match v {
                VantageSpec::Point(p) => Ok(*p),
                VantageSpec::Remote { remote } => {
                    select_remote_vantage(remote.dense_center, remote.suspected_center, remote.fraction)
                        .map_err(|e| ScenarioError::at(format!("vantages[{k}].remote"), e))
                }
            })
            .collect()
    }

    /// Builds the server: explicit users, then the population, with the
    /// victim's defense applied.
    pub fn materialize(&self) -> Result<World, ScenarioError> {
        let mut server = Server::new(self.server).map_err(|e| ScenarioError::at("server", e))?;
        let mut victim = None;
        for (k, u) in self.users.iter().enumerate() {
            let mut profile = UserProfile::new(u.id.clone(), u.location).logged_in_at(u.last_login);
            profile.hide_distance = u.hide_distance;
            if u.id == self.victim_id {
                profile = apply_policy(&profile, &self.defense).map_err(|e| ScenarioError::at("defense", e))?;
                victim = Some(profile.clone());
            }
            server
                .upsert_user(profile)
                .map_err(|e| ScenarioError::at(format!("users[{k}]"), e))?;
        }
        if let Some(pop) = &self.population {
            for user in pop.generate()? {
                server
                    .upsert_user(user)
                    .map_err(|e| ScenarioError::at("population", e))?;
            }
        }
        let victim = victim.ok_or_else(|| ScenarioError::at("victim_id", "victim not found"))?;
        Ok(World {
            server,
            victim,
            vantages: self.resolve_vantages()?,
        })
    }

    /// Materializes and runs the configured attack. The report's `error_m` is
    /// measured against the victim's true location.
    pub fn run(&self) -> Result<(World, AttackReport), RunError> {
        let mut world = self.materialize()?;
        let ctx = self.attack_context();
        let victim = world.victim.id.clone();
        let report = match self.attack {
            AttackSpec::Classic {} => classic_trilateration_attack(&world.server, &victim, &world.vantages, &ctx)?,
            AttackSpec::NeighborBound {} => neighbor_bound_attack(&world.server, &victim, &world.vantages, &ctx)?,
            AttackSpec::HiddenFull { epsilon_m, max_iter } => {
                hidden_full_attack(&mut world.server, &victim, &world.vantages, epsilon_m, max_iter, &ctx)?
            }
        };
        let report = report.with_truth(world.victim.true_location);
        Ok((world, report))
    }
}

#[derive(Debug, Clone, Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

const TOOL: ToolInfo = ToolInfo {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

/// Serializable view of an [`AttackReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ReportBody {
    pub attack: &'static str,
    pub estimate: Option<GeoPoint>,
    pub error_m: Option<f64>,
    pub region_area_m2: f64,
    pub region: RegionSummary,
    pub region_centroid: Option<GeoPoint>,
    pub queries_used: u64,
    pub account_moves: u64,
    pub converged: bool,
    pub projection_origin: GeoPoint,
    pub vantages: Vec<GeoPoint>,
}

impl ReportBody {
    pub fn new(attack: &AttackSpec, report: &AttackReport) -> Self {
        Self {
            attack: attack.name(),
            estimate: report.estimate,
            error_m: report.error_m,
            region_area_m2: report.region_area_m2,
            region: report.region.summary(),
            region_centroid: report
                .region
                .centroid()
                .and_then(|c| report.projection.unproject(c).ok()),
            queries_used: report.queries_used,
            account_moves: report.account_moves,
            converged: report.converged,
            projection_origin: report.projection.origin(),
            vantages: report.vantages.clone(),
        }
    }
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    tool: ToolInfo,
    seed: Option<u64>,
    scenario: &'a Scenario,
    report: ReportBody,
}

/// The `report.json` document: tool version, seed override, scenario echo and
/// the attack outcome. Byte-stable for identical inputs.
pub fn report_json(scenario: &Scenario, seed: Option<u64>, report: &AttackReport) -> String {
    let doc = ReportDocument {
        tool: TOOL,
        seed,
        scenario,
        report: ReportBody::new(&scenario.attack, report),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
    out.push('\n');
    out
}

/// One-line human summary.
pub fn summary_line(report: &AttackReport) -> String {
    let err = report.error_m.map_or_else(|| "none".to_owned(), |e| format!("{e:.3}"));
    format!(
        "error_m={err} area_m2={:.1} queries={} moves={} converged={}",
        report.region_area_m2, report.queries_used, report.account_moves, report.converged
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PopulationCount,
    QuantizationStep,
    JitterRadius,
    Epsilon,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [
        SweepAxis::PopulationCount,
        SweepAxis::QuantizationStep,
        SweepAxis::JitterRadius,
        SweepAxis::Epsilon,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::PopulationCount => "population_count",
            SweepAxis::QuantizationStep => "quantization_step",
            SweepAxis::JitterRadius => "jitter_radius",
            SweepAxis::Epsilon => "epsilon",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepAxis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let known: Vec<_> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
            ScenarioError::at(
                "axis",
                format!("unknown axis '{s}' (expected one of {})", known.join(", ")),
            )
        })
    }
}

impl Scenario {
    /// Copy of the scenario with one sweep parameter replaced.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Scenario, ScenarioError> {
        let mut s = self.clone();
        if !(value.is_finite() && value >= 0.0) {
            return Err(ScenarioError::at(
                "values",
                format!("{value} is not a non-negative number"),
            ));
        }
        match axis {
            SweepAxis::PopulationCount => {
                let pop = s
                    .population
                    .as_mut()
                    .ok_or_else(|| ScenarioError::at("population", "population_count sweep needs a population"))?;
                if value.fract() != 0.0 {
                    return Err(ScenarioError::at("values", "population_count must be an integer"));
                }
                pop.count = value as usize;
            }
            SweepAxis::QuantizationStep => s.server.quantization_step = value,
            SweepAxis::JitterRadius => {
                let jitter_seed = match s.defense.shift {
                    Some(Shift::Jitter { jitter_seed, .. }) => jitter_seed,
                    _ => 0,
                };
                s.defense.shift = Some(Shift::Jitter {
                    radius_m: value,
                    jitter_seed,
                });
            }
            SweepAxis::Epsilon => match &mut s.attack {
                AttackSpec::HiddenFull { epsilon_m, .. } => *epsilon_m = value,
                _ => return Err(ScenarioError::at("attack", "epsilon sweep needs a hidden_full attack")),
            },
        }
        s.validate()?;
        Ok(s)
    }
}

/// One sweep cell. Attack-level failures leave the measurement fields empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub seed: u64,
    pub error_m: Option<f64>,
    pub region_area_m2: Option<f64>,
    pub queries_used: Option<u64>,
    pub account_moves: Option<u64>,
}

pub const SWEEP_CSV_HEADER: [&str; 6] = [
    "axis_value",
    "seed",
    "error_m",
    "region_area_m2",
    "queries_used",
    "account_moves",
];

/// Runs the Cartesian product `values × seeds`. Seeds are `sweep_seed + k`
/// for `k < seeds`. Cells run in parallel; rows come back in value-major order.
pub fn sweep(scenario: &Scenario, axis: SweepAxis, values: &[f64], seeds: u64) -> Result<Vec<SweepRow>, ScenarioError> {
    if values.is_empty() {
        return Err(ScenarioError::at("values", "at least one value is required"));
    }
    if seeds == 0 {
        return Err(ScenarioError::at("seeds", "at least one seed is required"));
    }
    let mut cells = Vec::new();
    for &value in values {
        let variant = scenario.with_axis(axis, value)?;
        for k in 0..seeds {
            let seed = scenario.sweep_seed.wrapping_add(k);
            cells.push((value, seed, variant.reseeded(seed)));
        }
    }
    cells
        .into_par_iter()
        .map(|(axis_value, seed, s)| match s.run() {
            Ok((_, report)) => Ok(SweepRow {
                axis_value,
                seed,
                error_m: report.error_m,
                region_area_m2: Some(report.region_area_m2),
                queries_used: Some(report.queries_used),
                account_moves: Some(report.account_moves),
            }),
            Err(RunError::Attack(_)) => Ok(SweepRow {
                axis_value,
                seed,
                error_m: None,
                region_area_m2: None,
                queries_used: None,
                account_moves: None,
            }),
            Err(RunError::Scenario(e)) => Err(e),
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.axis_value.to_string(),
            r.seed.to_string(),
            opt(r.error_m.map(|v| v.to_string())),
            opt(r.region_area_m2.map(|v| v.to_string())),
            opt(r.queries_used.map(|v| v.to_string())),
            opt(r.account_moves.map(|v| v.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kyoto;

    fn minimal() -> String {
        r#"{
            "schema_version": 1,
            "users": [
                {"id": "victim", "location": {"lat": 35.02350485, "lon": 135.77687703}}
            ],
            "victim_id": "victim",
            "vantages": [
                {"lat": 35.03051251, "lon": 135.77327415},
                {"lat": 35.01598257, "lon": 135.78242585},
                {"lat": 35.02258561, "lon": 135.76493382}
            ],
            "attack": {"kind": "classic"}
        }"#
        .to_owned()
    }

    #[test]
    fn parses_minimal_and_runs() {
        let s = Scenario::from_json(&minimal()).unwrap();
        assert_eq!(s.server, ServerConfig::default());
        let (_, report) = s.run().unwrap();
        assert!(report.error_m.unwrap() < 1.0);
    }

    #[test]
    fn unknown_field_reports_path() {
        let text = minimal().replace(r#""kind": "classic""#, r#""kind": "classic", "bogus": 1"#);
        let err = Scenario::from_json(&text).unwrap_err();
        assert!(err.path().starts_with("attack"), "{err}");
        let text = minimal().replace(r#""schema_version": 1,"#, r#""schema_version": 1, "extra": true,"#);
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn bad_values_report_paths() {
        let text = minimal().replace(r#""victim_id": "victim""#, r#""victim_id": "ghost""#);
        assert_eq!(Scenario::from_json(&text).unwrap_err().path(), "victim_id");

        let text = minimal().replace("35.02350485", "95.0");
        assert_eq!(Scenario::from_json(&text).unwrap_err().path(), "users[0].location");

        let text = minimal().replace(
            r#"{"kind": "classic"}"#,
            r#"{"kind": "hidden_full", "epsilon_m": 0, "max_iter": 3}"#,
        );
        assert_eq!(Scenario::from_json(&text).unwrap_err().path(), "attack.epsilon_m");

        let text = minimal().replace(r#""schema_version": 1"#, r#""schema_version": 2"#);
        assert_eq!(Scenario::from_json(&text).unwrap_err().path(), "schema_version");
    }

    #[test]
    fn vantage_count_checked() {
        let mut s = Scenario::from_json(&minimal()).unwrap();
        s.vantages.pop();
        assert_eq!(s.validate().unwrap_err().path(), "vantages");
        s.attack = AttackSpec::NeighborBound {};
        assert!(s.validate().is_ok());
    }

    #[test]
    fn round_trip_preserves_reports() {
        let s = kyoto::demo_scenario(AttackSpec::NeighborBound {});
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again);
        let (_, a) = s.run().unwrap();
        let (_, b) = again.run().unwrap();
        assert_eq!(report_json(&s, None, &a), report_json(&again, None, &b));
    }

    #[test]
    fn population_prefix_is_stable() {
        let s = kyoto::demo_scenario(AttackSpec::Classic {});
        let mut pop = s.population.unwrap();
        let small = pop.generate().unwrap();
        pop.count *= 2;
        let large = pop.generate().unwrap();
        assert_eq!(&large[..small.len()], &small[..]);
    }

    #[test]
    fn remote_vantage_resolves() {
        let text = minimal().replace(
            r#"{"lat": 35.03051251, "lon": 135.77327415}"#,
            r#"{"remote": {"dense_center": {"lat": 35.0, "lon": 135.7}, "suspected_center": {"lat": 35.02, "lon": 135.72}, "fraction": 0.5}}"#,
        );
        let s = Scenario::from_json(&text).unwrap();
        let v = s.resolve_vantages().unwrap();
        assert!((v[0].lat - 35.01).abs() < 1e-9);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let s = kyoto::demo_scenario(AttackSpec::Classic {});
        assert_eq!(
            sweep(&s, SweepAxis::QuantizationStep, &[], 3).unwrap_err().path(),
            "values"
        );
        assert!(sweep(&s, SweepAxis::Epsilon, &[1.0], 1).is_err());
        assert!("nope".parse::<SweepAxis>().is_err());
        assert_eq!("epsilon".parse::<SweepAxis>().unwrap(), SweepAxis::Epsilon);
    }

    #[test]
    fn sweep_rows_are_ordered_and_csv_has_header() {
        let s = kyoto::demo_scenario(AttackSpec::Classic {});
        let rows = sweep(&s, SweepAxis::QuantizationStep, &[0.0, 100.0], 3).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].axis_value, 0.0);
        assert_eq!(rows[3].axis_value, 100.0);
        assert_eq!(rows[4].seed, s.sweep_seed + 1);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("axis_value,seed,error_m,region_area_m2,queries_used,account_moves\n"));
        assert_eq!(text.lines().count(), 7);
    }
}
