//! Annulus constraints and their rasterized intersection.
//!
//! Cells live on a global lattice (`cell (i, j)` spans `[i·s, (i+1)·s) ×
//! [j·s, (j+1)·s)` for cell size `s`), so rasters built with the same cell size
//! share cells and adding a constraint can only clear cells. A cell is occupied
//! iff its center satisfies every annulus.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::geo::{GeoPoint, LocalPoint, Projection};

/// Upper bound on raster size. Larger extents double the cell size until they fit.
pub const MAX_CELLS: u64 = 1 << 26;

/// Default raster resolution in meters.
pub const DEFAULT_CELL_SIZE_M: f64 = 2.0;

/// The ring of points whose distance to `center` lies in `[r_inner, r_outer]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: LocalPoint,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Annulus {
    /// Builds an annulus, clamping a negative inner radius to zero.
    ///
    /// # Panics
    /// If the radii are not finite or `r_inner > r_outer`.
    pub fn new(center: LocalPoint, r_inner: f64, r_outer: f64) -> Self {
        assert!(
            r_inner.is_finite() && r_outer.is_finite() && r_inner <= r_outer,
            "invalid annulus radii [{r_inner}, {r_outer}]"
        );
        Self {
            center,
            r_inner: r_inner.max(0.0),
            r_outer,
        }
    }

    pub fn disk(center: LocalPoint, radius: f64) -> Self {
        Self::new(center, 0.0, radius)
    }

    pub fn contains(&self, p: LocalPoint) -> bool {
        let d = p.distance_to(&self.center);
        self.r_inner <= d && d <= self.r_outer
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * (self.r_outer.powi(2) - self.r_inner.powi(2))
    }

    fn outer_box(&self) -> Rect {
        Rect {
            min: LocalPoint::new(self.center.x - self.r_outer, self.center.y - self.r_outer),
            max: LocalPoint::new(self.center.x + self.r_outer, self.center.y + self.r_outer),
        }
    }

    /// Squared radius limits used for the cell-center test. A degenerate ring
    /// (`r_inner == r_outer`) is widened by half a cell diagonal.
    fn squared_limits(&self, cell_size: f64) -> (f64, f64) {
        let (lo, hi) = if self.r_inner == self.r_outer {
            let slack = cell_size * std::f64::consts::FRAC_1_SQRT_2;
            ((self.r_inner - slack).max(0.0), self.r_outer + slack)
        } else {
            (self.r_inner, self.r_outer)
        };
        (lo * lo, hi * hi)
    }
}

/// Axis-aligned rectangle in local meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: LocalPoint,
    pub max: LocalPoint,
}

impl Rect {
    pub fn is_empty(&self) -> bool {
        !(self.min.x <= self.max.x && self.min.y <= self.max.y)
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            (self.max.x - self.min.x) * (self.max.y - self.min.y)
        }
    }

    pub fn intersection(&self, other: &Rect) -> Rect {
        Rect {
            min: LocalPoint::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y)),
            max: LocalPoint::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y)),
        }
    }

    pub fn union(&self, other: &Rect) -> Rect {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Rect {
            min: LocalPoint::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: LocalPoint::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }
}

/// Tightest rectangle guaranteed to hold the intersection: the overlap of
/// every annulus' outer bounding box. `None` for an empty constraint list.
pub fn covering_rect(constraints: &[Annulus]) -> Option<Rect> {
    constraints
        .iter()
        .map(Annulus::outer_box)
        .reduce(|a, b| a.intersection(&b))
}

/// Result of looking up a point in a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLookup {
    Occupied,
    Vacant,
    OutOfBounds,
}

/// Occupancy raster of the cells whose centers satisfy every constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    cell_size: f64,
    /// Lattice index of the lower-left cell.
    ix0: i64,
    iy0: i64,
    nx: usize,
    ny: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    cell_count: u64,
    centroid: Option<LocalPoint>,
}

impl FeasibleRegion {
    fn empty(cell_size: f64) -> Self {
        Self {
            cell_size,
            ix0: 0,
            iy0: 0,
            nx: 0,
            ny: 0,
            words_per_row: 0,
            bits: Vec::new(),
            cell_count: 0,
            centroid: None,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_count(&self) -> u64 {
        self.cell_count
    }

    pub fn area_m2(&self) -> f64 {
        self.cell_count as f64 * self.cell_size * self.cell_size
    }

    pub fn centroid(&self) -> Option<LocalPoint> {
        self.centroid
    }

    pub fn is_empty(&self) -> bool {
        self.cell_count == 0
    }

    /// Extent of the raster (not of the occupied cells).
    pub fn bounds(&self) -> Rect {
        Rect {
            min: LocalPoint::new(self.ix0 as f64 * self.cell_size, self.iy0 as f64 * self.cell_size),
            max: LocalPoint::new(
                (self.ix0 + self.nx as i64) as f64 * self.cell_size,
                (self.iy0 + self.ny as i64) as f64 * self.cell_size,
            ),
        }
    }

    fn bit(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.words_per_row + i / 64] >> (i % 64) & 1 == 1
    }

    /// Whether the lattice cell `(ix, iy)` is occupied; false outside the raster.
    pub fn is_cell_occupied(&self, ix: i64, iy: i64) -> bool {
        let (i, j) = (ix - self.ix0, iy - self.iy0);
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny && self.bit(i as usize, j as usize)
    }

    pub fn locate(&self, p: LocalPoint) -> CellLookup {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return CellLookup::OutOfBounds;
        }
        let i = (p.x / self.cell_size).floor() as i64 - self.ix0;
        let j = (p.y / self.cell_size).floor() as i64 - self.iy0;
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            CellLookup::OutOfBounds
        } else if self.bit(i as usize, j as usize) {
            CellLookup::Occupied
        } else {
            CellLookup::Vacant
        }
    }

    /// True iff the cell containing `p` is occupied. Use [`locate`](Self::locate)
    /// to tell an out-of-bounds point from a vacant cell.
    pub fn contains(&self, p: LocalPoint) -> bool {
        self.locate(p) == CellLookup::Occupied
    }

    /// Lattice indices of occupied cells in row-major order.
    pub fn occupied_cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx)
                .filter(move |&i| self.bit(i, j))
                .map(move |i| (self.ix0 + i as i64, self.iy0 + j as i64))
        })
    }

    pub fn summary(&self) -> RegionSummary {
        RegionSummary {
            cell_size_m: self.cell_size,
            cell_count: self.cell_count,
            area_m2: self.area_m2(),
            centroid: self.centroid,
        }
    }
}

/// Serializable description of a region without its raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub cell_size_m: f64,
    pub cell_count: u64,
    pub area_m2: f64,
    pub centroid: Option<LocalPoint>,
}

/// Rasterizes the intersection of `constraints`.
///
/// The raster covers `bounds` (if given) together with [`covering_rect`].
/// If that extent needs more than [`MAX_CELLS`] cells the cell size is
/// doubled until it fits; the effective size is reported by
/// [`FeasibleRegion::cell_size`]. Rows are filled in parallel; the result does
/// not depend on thread count.
///
/// # Panics
/// If `cell_size` is not positive and finite.
pub fn rasterize_intersection(constraints: &[Annulus], cell_size: f64, bounds: Option<Rect>) -> FeasibleRegion {
    assert!(cell_size.is_finite() && cell_size > 0.0, "cell size must be positive");
    let Some(cover) = covering_rect(constraints) else {
        return FeasibleRegion::empty(cell_size);
    };
    let extent = match bounds {
        Some(b) => b.union(&cover),
        None => cover,
    };
    if extent.is_empty() {
        return FeasibleRegion::empty(cell_size);
    }

    let mut cell_size = cell_size;
    let (ix0, iy0, nx, ny) = loop {
        let ix0 = (extent.min.x / cell_size).floor() as i64;
        let iy0 = (extent.min.y / cell_size).floor() as i64;
        let ix1 = (extent.max.x / cell_size).floor() as i64 + 1;
        let iy1 = (extent.max.y / cell_size).floor() as i64 + 1;
        let (nx, ny) = ((ix1 - ix0) as u64, (iy1 - iy0) as u64);
        if nx * ny <= MAX_CELLS {
            break (ix0, iy0, nx as usize, ny as usize);
        }
        cell_size *= 2.0;
    };

    let limits: Vec<(LocalPoint, f64, f64)> = constraints
        .iter()
        .map(|a| {
            let (lo, hi) = a.squared_limits(cell_size);
            (a.center, lo, hi)
        })
        .collect();
    let words_per_row = nx.div_ceil(64);
    let mut bits = vec![0u64; words_per_row * ny];
    bits.par_chunks_mut(words_per_row.max(1))
        .enumerate()
        .for_each(|(j, row)| {
            let cy = ((iy0 + j as i64) as f64 + 0.5) * cell_size;
            for i in 0..nx {
                let cx = ((ix0 + i as i64) as f64 + 0.5) * cell_size;
                let inside = limits.iter().all(|&(c, lo, hi)| {
                    let d2 = (cx - c.x).powi(2) + (cy - c.y).powi(2);
                    lo <= d2 && d2 <= hi
                });
                if inside {
                    row[i / 64] |= 1 << (i % 64);
                }
            }
        });

    let mut region = FeasibleRegion {
        cell_size,
        ix0,
        iy0,
        nx,
        ny,
        words_per_row,
        bits,
        cell_count: 0,
        centroid: None,
    };
    // Integer index sums keep the centroid exact and order-independent.
    let (mut count, mut sx, mut sy) = (0u64, 0i128, 0i128);
    for (ix, iy) in region.occupied_cells() {
        count += 1;
        sx += ix as i128;
        sy += iy as i128;
    }
    region.cell_count = count;
    if count > 0 {
        let n = count as f64;
        region.centroid = Some(LocalPoint::new(
            (sx as f64 / n + 0.5) * cell_size,
            (sy as f64 / n + 0.5) * cell_size,
        ));
    }
    region
}

/// Rejection-sampling estimate of the intersection area over [`covering_rect`].
///
/// Independent of the raster path; used as its cross-check.
pub fn monte_carlo_area(constraints: &[Annulus], samples: u64, seed: u64) -> f64 {
    let Some(rect) = covering_rect(constraints) else {
        return 0.0;
    };
    if rect.is_empty() || samples == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let p = LocalPoint::new(
            rect.min.x + rng.random::<f64>() * (rect.max.x - rect.min.x),
            rect.min.y + rng.random::<f64>() * (rect.max.y - rect.min.y),
        );
        if constraints.iter().all(|a| a.contains(p)) {
            hits += 1;
        }
    }
    rect.area() * hits as f64 / samples as f64
}

/// A labelled point rendered alongside the region (vantages, estimates).
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub label: String,
    pub point: GeoPoint,
}

impl Marker {
    pub fn new(label: impl Into<String>, point: GeoPoint) -> Self {
        Self {
            label: label.into(),
            point,
        }
    }
}

type Vertex = (i64, i64);

// Directions: east, north, west, south.
const STEPS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

fn step(v: Vertex, dir: u8) -> Vertex {
    let (dx, dy) = STEPS[dir as usize];
    (v.0 + dx, v.1 + dy)
}

/// Boundary rings of the occupied cells in lattice-vertex coordinates.
///
/// Every occupied cell contributes its counter-clockwise edges that face a
/// vacant neighbor; edges are then chained, preferring left turns, so rings of
/// cells touching only at a corner stay separate. Outer rings come out
/// counter-clockwise, holes clockwise. Collinear vertices are dropped.
fn trace_rings(region: &FeasibleRegion) -> Vec<Vec<Vertex>> {
    let mut outgoing: BTreeMap<Vertex, Vec<u8>> = BTreeMap::new();
    for (ix, iy) in region.occupied_cells() {
        let occ = |dx, dy| region.is_cell_occupied(ix + dx, iy + dy);
        if !occ(0, -1) {
            outgoing.entry((ix, iy)).or_default().push(0);
        }
        if !occ(1, 0) {
            outgoing.entry((ix + 1, iy)).or_default().push(1);
        }
        if !occ(0, 1) {
            outgoing.entry((ix + 1, iy + 1)).or_default().push(2);
        }
        if !occ(-1, 0) {
            outgoing.entry((ix, iy + 1)).or_default().push(3);
        }
    }

    let mut rings = Vec::new();
    while let Some((&start, dirs)) = outgoing.iter().next() {
        let first_dir = dirs[0];
        take_edge(&mut outgoing, start, first_dir);
        let mut ring = vec![start];
        let mut dirs_taken = vec![first_dir];
        let mut cur = step(start, first_dir);
        let mut dir = first_dir;
        loop {
            let prefs = [(dir + 1) % 4, dir, (dir + 3) % 4];
            let available = outgoing.get(&cur);
            let next = prefs
                .into_iter()
                .find(|d| (cur == start && *d == first_dir) || available.is_some_and(|a| a.contains(d)))
                .expect("boundary edges always chain into closed rings");
            if cur == start && next == first_dir {
                break;
            }
            take_edge(&mut outgoing, cur, next);
            ring.push(cur);
            dirs_taken.push(next);
            cur = step(cur, next);
            dir = next;
        }
        // Keep only corners.
        let n = ring.len();
        let corners: Vec<Vertex> = (0..n)
            .filter(|&k| dirs_taken[k] != dirs_taken[(k + n - 1) % n])
            .map(|k| ring[k])
            .collect();
        rings.push(corners);
    }
    rings
}

fn take_edge(outgoing: &mut BTreeMap<Vertex, Vec<u8>>, v: Vertex, dir: u8) {
    if let Some(dirs) = outgoing.get_mut(&v) {
        if let Some(pos) = dirs.iter().position(|d| *d == dir) {
            dirs.remove(pos);
        }
        if dirs.is_empty() {
            outgoing.remove(&v);
        }
    }
}

fn signed_area2(ring: &[Vertex]) -> i128 {
    let n = ring.len();
    (0..n)
        .map(|k| {
            let (a, b) = (ring[k], ring[(k + 1) % n]);
            a.0 as i128 * b.1 as i128 - b.0 as i128 * a.1 as i128
        })
        .sum()
}

fn ring_contains(ring: &[Vertex], x: f64, y: f64) -> bool {
    let n = ring.len();
    let mut inside = false;
    for k in 0..n {
        let (a, b) = (ring[k], ring[(k + 1) % n]);
        let (ax, ay, bx, by) = (a.0 as f64, a.1 as f64, b.0 as f64, b.1 as f64);
        if (ay > y) != (by > y) && x < ax + (y - ay) * (bx - ax) / (by - ay) {
            inside = !inside;
        }
    }
    inside
}

/// Groups traced rings into polygons: each hole joins the smallest outer ring
/// that contains it.
fn polygons(region: &FeasibleRegion) -> Vec<Vec<Vec<Vertex>>> {
    let rings = trace_rings(region);
    let (outers, holes): (Vec<_>, Vec<_>) = rings.into_iter().partition(|r| signed_area2(r) > 0);
    let mut polys: Vec<Vec<Vec<Vertex>>> = outers.into_iter().map(|r| vec![r]).collect();
    for hole in holes {
        // A probe a quarter cell to the right of the hole's first edge lies in
        // the vacant interior.
        let (a, b) = (hole[0], hole[1]);
        let (dx, dy) = ((b.0 - a.0).signum() as f64, (b.1 - a.1).signum() as f64);
        let px = (a.0 as f64 + b.0 as f64) / 2.0 + 0.25 * dy;
        let py = (a.1 as f64 + b.1 as f64) / 2.0 - 0.25 * dx;
        let owner = polys
            .iter()
            .enumerate()
            .filter(|(_, p)| ring_contains(&p[0], px, py))
            .min_by_key(|(_, p)| signed_area2(&p[0]))
            .map(|(k, _)| k);
        if let Some(k) = owner {
            polys[k].push(hole);
        }
    }
    polys
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

fn lon_lat(projection: &Projection, p: LocalPoint) -> Value {
    let g = projection.unproject_unchecked(p);
    json!([round7(g.lon), round7(g.lat)])
}

/// Renders the region as an RFC 7946 FeatureCollection.
///
/// Occupied cells become one MultiPolygon feature (omitted when the region is
/// empty); each marker becomes a Point feature. Coordinates are lon/lat
/// rounded to 7 decimal places.
pub fn export_geojson(region: &FeasibleRegion, projection: &Projection, markers: &[Marker]) -> Value {
    let mut features = Vec::new();
    if !region.is_empty() {
        let s = region.cell_size;
        let coords: Vec<Value> = polygons(region)
            .into_iter()
            .map(|poly| {
                Value::Array(
                    poly.into_iter()
                        .map(|ring| {
                            let mut pts: Vec<Value> = ring
                                .iter()
                                .map(|&(vx, vy)| lon_lat(projection, LocalPoint::new(vx as f64 * s, vy as f64 * s)))
                                .collect();
                            pts.push(pts[0].clone());
                            Value::Array(pts)
                        })
                        .collect(),
                )
            })
            .collect();
        features.push(json!({
            "type": "Feature",
            "properties": {
                "kind": "feasible_region",
                "area_m2": region.area_m2(),
                "cell_size_m": s,
                "cell_count": region.cell_count,
            },
            "geometry": { "type": "MultiPolygon", "coordinates": coords },
        }));
    }
    for m in markers {
        features.push(json!({
            "type": "Feature",
            "properties": { "kind": m.label },
            "geometry": {
                "type": "Point",
                "coordinates": [round7(m.point.lon), round7(m.point.lat)],
            },
        }));
    }
    json!({ "type": "FeatureCollection", "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(x: f64, y: f64) -> LocalPoint {
        LocalPoint::new(x, y)
    }

    #[test]
    fn disk_and_ring_areas() {
        let disk = rasterize_intersection(&[Annulus::disk(p(0.0, 0.0), 200.0)], 1.0, None);
        let expected = PI * 200.0 * 200.0;
        assert!((disk.area_m2() - expected).abs() / expected < 0.01);
        assert!(disk.contains(p(0.0, 0.0)));

        let ring = rasterize_intersection(&[Annulus::new(p(0.0, 0.0), 100.0, 200.0)], 1.0, None);
        let expected = PI * (200.0f64.powi(2) - 100.0f64.powi(2));
        assert!((ring.area_m2() - expected).abs() / expected < 0.01);
        assert!(!ring.contains(p(0.0, 0.0)));
        assert_eq!(ring.locate(p(0.0, 0.0)), CellLookup::Vacant);
        assert_eq!(ring.locate(p(5_000.0, 0.0)), CellLookup::OutOfBounds);
        let c = ring.centroid().unwrap();
        assert!(c.norm() < 1.0);
    }

    #[test]
    fn disjoint_annuli_give_empty_region() {
        let r = rasterize_intersection(
            &[
                Annulus::disk(p(0.0, 0.0), 100.0),
                Annulus::disk(p(10_000.0, 0.0), 100.0),
            ],
            1.0,
            None,
        );
        assert!(r.is_empty());
        assert_eq!(r.centroid(), None);
        assert_eq!(r.area_m2(), 0.0);
        assert_eq!(
            monte_carlo_area(
                &[
                    Annulus::disk(p(0.0, 0.0), 100.0),
                    Annulus::disk(p(10_000.0, 0.0), 100.0)
                ],
                1000,
                1
            ),
            0.0
        );
    }

    #[test]
    fn bounds_expand_raster() {
        let bounds = Rect {
            min: p(-500.0, -500.0),
            max: p(500.0, 500.0),
        };
        let r = rasterize_intersection(&[Annulus::disk(p(0.0, 0.0), 10.0)], 2.0, Some(bounds));
        assert_eq!(r.locate(p(400.0, 400.0)), CellLookup::Vacant);
        assert!(r.bounds().min.x <= -500.0 && r.bounds().max.y >= 500.0);
    }

    #[test]
    fn oversized_extent_coarsens_cells() {
        let r = rasterize_intersection(&[Annulus::disk(p(0.0, 0.0), 20_000.0)], 1.0, None);
        assert!(r.cell_size() > 1.0);
        let expected = PI * 20_000.0f64.powi(2);
        assert!((r.area_m2() - expected).abs() / expected < 0.01);
    }

    #[test]
    fn degenerate_ring_keeps_boundary_cells() {
        let r = rasterize_intersection(&[Annulus::new(p(0.0, 0.0), 100.0, 100.0)], 1.0, None);
        assert!(!r.is_empty());
        assert!(r.contains(p(100.0, 0.3)));
        assert!(!r.contains(p(0.0, 0.0)));
        // Width of the selected band is one cell diagonal.
        let expected = 2.0 * PI * 100.0 * std::f64::consts::SQRT_2;
        assert!((r.area_m2() - expected).abs() / expected < 0.05, "{}", r.area_m2());
    }

    #[test]
    fn monte_carlo_disk() {
        let a = monte_carlo_area(&[Annulus::disk(p(3.0, -4.0), 200.0)], 1_000_000, 11);
        let expected = PI * 200.0 * 200.0;
        assert!((a - expected).abs() / expected < 0.02);
    }

    #[test]
    fn adding_constraint_never_grows() {
        let a = Annulus::new(p(0.0, 0.0), 300.0, 500.0);
        let b = Annulus::new(p(400.0, 100.0), 200.0, 450.0);
        let c = Annulus::new(p(-100.0, 500.0), 250.0, 600.0);
        let one = rasterize_intersection(&[a], 2.0, None);
        let two = rasterize_intersection(&[a, b], 2.0, None);
        let three = rasterize_intersection(&[a, b, c], 2.0, None);
        assert!(two.area_m2() <= one.area_m2());
        assert!(three.area_m2() <= two.area_m2());
        for cell in three.occupied_cells() {
            assert!(two.is_cell_occupied(cell.0, cell.1));
        }
    }

    fn origin() -> Projection {
        Projection::new(GeoPoint::new(35.0235, 135.7769).unwrap()).unwrap()
    }

    #[test]
    fn empty_region_has_no_features() {
        let r = rasterize_intersection(
            &[Annulus::disk(p(0.0, 0.0), 10.0), Annulus::disk(p(100.0, 0.0), 10.0)],
            1.0,
            None,
        );
        let gj = export_geojson(&r, &origin(), &[]);
        assert_eq!(gj["type"], "FeatureCollection");
        assert_eq!(gj["features"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn single_cell_is_one_closed_square() {
        let r = rasterize_intersection(&[Annulus::disk(p(0.5, 0.5), 0.1)], 1.0, None);
        assert_eq!(r.cell_count(), 1);
        let gj = export_geojson(&r, &origin(), &[]);
        let polys = gj["features"][0]["geometry"]["coordinates"].as_array().unwrap();
        assert_eq!(polys.len(), 1);
        let ring = polys[0][0].as_array().unwrap();
        assert_eq!(ring.len(), 5);
        assert_eq!(ring[0], ring[4]);
    }

    #[test]
    fn ring_region_exports_hole() {
        let r = rasterize_intersection(&[Annulus::new(p(0.0, 0.0), 20.0, 40.0)], 1.0, None);
        let polys = polygons(&r);
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].len(), 2);
        let area: i128 = polys[0].iter().map(|ring| signed_area2(ring)).sum();
        assert_eq!(area as u64, 2 * r.cell_count());
    }

    #[test]
    fn diagonal_cells_stay_separate_polygons() {
        // Two cells touching only at a corner.
        let r = rasterize_intersection(&[Annulus::disk(p(0.0, 0.0), 2.0)], 1.0, None);
        let polys = polygons(&r);
        let total: i128 = polys.iter().flatten().map(|ring| signed_area2(ring)).sum();
        assert_eq!(total as u64, 2 * r.cell_count());

        let mut checker = r.clone();
        // Clear to a checkerboard of isolated corner-touching cells.
        for j in 0..checker.ny {
            for i in 0..checker.nx {
                if (i + j) % 2 == 1 {
                    checker.bits[j * checker.words_per_row + i / 64] &= !(1 << (i % 64));
                }
            }
        }
        checker.cell_count = checker.occupied_cells().count() as u64;
        let polys = polygons(&checker);
        assert_eq!(polys.len() as u64, checker.cell_count);
        assert!(polys.iter().all(|p| p.len() == 1 && p[0].len() == 4));
    }
}
