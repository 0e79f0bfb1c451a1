//! Geodetic coordinates, great-circle distance and a local equirectangular
//! projection.
//!
//! All attack geometry runs in planar meters around a projection origin. The
//! projection and the haversine distance share one Earth radius so that the two
//! distance notions agree closely at city scale. The planar error grows with
//! latitude and reach; [`Projection::planar_error_bound`] gives a safe bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Meters per degree of latitude on the sphere of [`EARTH_RADIUS_M`].
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// Distance from the origin beyond which a [`Projection`] refuses to map points.
pub const PROJECTION_VALIDITY_RADIUS_M: f64 = 50_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("point is {distance_m:.1} m from the projection origin (limit {PROJECTION_VALIDITY_RADIUS_M} m)")]
    OutsideValidity { distance_m: f64 },
}

/// A WGS84-style latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    /// Checks the range invariants. Deserialized points are not validated
    /// until this is called.
    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidCoordinate {
                lat: self.lat,
                lon: self.lon,
            })
        }
    }

    pub fn distance_to(&self, other: &GeoPoint) -> f64 {
        haversine_distance(*self, *other)
    }
}

/// Planar coordinates in meters east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

impl LocalPoint {
    pub const ORIGIN: LocalPoint = LocalPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &LocalPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn lerp(&self, other: &LocalPoint, t: f64) -> LocalPoint {
        LocalPoint::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

impl std::ops::Add for LocalPoint {
    type Output = LocalPoint;
    fn add(self, rhs: LocalPoint) -> LocalPoint {
        LocalPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for LocalPoint {
    type Output = LocalPoint;
    fn sub(self, rhs: LocalPoint) -> LocalPoint {
        LocalPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection about a fixed origin.
///
/// `x = (lon - lon0) * K * cos(lat0)`, `y = (lat - lat0) * K` where `K` is
/// [`METERS_PER_DEGREE`]. Only meaningful within [`PROJECTION_VALIDITY_RADIUS_M`]
/// of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    origin: GeoPoint,
    cos_lat0: f64,
}

impl Projection {
    pub fn new(origin: GeoPoint) -> Result<Self, GeoError> {
        origin.validate()?;
        // cos(lat0) vanishes at the poles; the projection is undefined there.
        let cos_lat0 = origin.lat.to_radians().cos();
        if cos_lat0 < 1e-6 {
            return Err(GeoError::InvalidCoordinate {
                lat: origin.lat,
                lon: origin.lon,
            });
        }
        Ok(Self { origin, cos_lat0 })
    }

    /// Projection centered on the arithmetic mean of the given points.
    pub fn centered_on(points: &[GeoPoint]) -> Result<Self, GeoError> {
        let n = points.len().max(1) as f64;
        let lat = points.iter().map(|p| p.lat).sum::<f64>() / n;
        let lon = points.iter().map(|p| p.lon).sum::<f64>() / n;
        Self::new(GeoPoint::new(lat, lon)?)
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn project(&self, g: GeoPoint) -> Result<LocalPoint, GeoError> {
        g.validate()?;
        let distance_m = haversine_distance(self.origin, g);
        if distance_m > PROJECTION_VALIDITY_RADIUS_M {
            return Err(GeoError::OutsideValidity { distance_m });
        }
        Ok(self.project_unchecked(g))
    }

    pub fn unproject(&self, l: LocalPoint) -> Result<GeoPoint, GeoError> {
        let distance_m = l.norm();
        if !distance_m.is_finite() || distance_m > PROJECTION_VALIDITY_RADIUS_M {
            return Err(GeoError::OutsideValidity { distance_m });
        }
        let g = self.unproject_unchecked(l);
        g.validate()?;
        Ok(g)
    }

    /// Conservative bound on `|haversine − planar|` for a pair of points at
    /// geodesic distance `d`, both within `reach_m` of the origin.
    ///
    /// The equirectangular scale error grows roughly as
    /// `reach / R · |tan(lat0)|`; the bound doubles that and adds 0.5 m.
    pub fn planar_error_bound(&self, reach_m: f64, d: f64) -> f64 {
        let tan = self.origin.lat.to_radians().tan().abs();
        d * (2.0 * reach_m / EARTH_RADIUS_M * tan + 1e-6) + 0.5
    }

    pub(crate) fn project_unchecked(&self, g: GeoPoint) -> LocalPoint {
        LocalPoint::new(
            (g.lon - self.origin.lon) * METERS_PER_DEGREE * self.cos_lat0,
            (g.lat - self.origin.lat) * METERS_PER_DEGREE,
        )
    }

    pub(crate) fn unproject_unchecked(&self, l: LocalPoint) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + l.y / METERS_PER_DEGREE,
            lon: self.origin.lon + l.x / (METERS_PER_DEGREE * self.cos_lat0),
        }
    }
}
