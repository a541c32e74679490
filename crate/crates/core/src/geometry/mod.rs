//! Planar polygon geometry in projected meters.
//!
//! Polygons are validated on construction: rings are closed, consecutive
//! duplicate vertices dropped, and self-intersecting rings rejected. After
//! construction the exterior ring is counter-clockwise and holes are
//! clockwise, which the overlay code relies on.

mod index;
mod overlay;
mod predicates;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use index::{build_index, SpatialIndex};
pub use overlay::{intersection_area, intersects_exclusion, ExclusionKind, ExclusionPolygon, ExclusionSet};
pub use predicates::{
    min_distance, point_in_polygon, point_segment_distance, segment_distance, segments_intersect, within_distance,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub(crate) fn sub(self, o: Self) -> Self {
        Point::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub(crate) fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub(crate) fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn dist(self, o: Self) -> T {
        let d = self.sub(o);
        (d.x * d.x + d.y * d.y).sqrt()
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox<T> {
    pub min: Point<T>,
    pub max: Point<T>,
}

impl<T: Scalar> Bbox<T> {
    pub fn of_points<'a, I>(pts: I) -> Self
    where
        I: IntoIterator<Item = &'a Point<T>>,
    {
        let mut min = Point::new(T::infinity(), T::infinity());
        let mut max = Point::new(T::neg_infinity(), T::neg_infinity());
        for p in pts {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Bbox { min, max }
    }

    pub fn expand(&self, by: T) -> Self {
        Bbox { min: Point::new(self.min.x - by, self.min.y - by), max: Point::new(self.max.x + by, self.max.y + by) }
    }

    pub fn intersects(&self, o: &Self) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    /// Euclidean gap between two boxes; zero when they overlap.
    pub fn distance(&self, o: &Self) -> T {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(T::zero());
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(T::zero());
        (dx * dx + dy * dy).sqrt()
    }

    pub fn extent(&self) -> T {
        (self.max.x - self.min.x).max(self.max.y - self.min.y)
    }
}

/// Simple polygon with optional holes. Rings are stored closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
#[serde(try_from = "RawPolygon<T>", into = "RawPolygon<T>")]
pub struct Polygon<T: Scalar> {
    exterior: Vec<Point<T>>,
    interiors: Vec<Vec<Point<T>>>,
    bbox: Bbox<T>,
}

#[derive(Serialize, Deserialize)]
struct RawPolygon<T> {
    exterior: Vec<Point<T>>,
    #[serde(default)]
    interiors: Vec<Vec<Point<T>>>,
}

impl<T: Scalar> TryFrom<RawPolygon<T>> for Polygon<T> {
    type Error = Error;
    fn try_from(r: RawPolygon<T>) -> Result<Self> {
        Polygon::new(r.exterior, r.interiors)
    }
}

impl<T: Scalar> From<Polygon<T>> for RawPolygon<T> {
    fn from(p: Polygon<T>) -> Self {
        RawPolygon { exterior: p.exterior, interiors: p.interiors }
    }
}

impl<T: Scalar> Polygon<T> {
    /// Validate and normalize a polygon. Open rings are closed and repeated
    /// consecutive vertices removed; nothing else is repaired.
    pub fn new(exterior: Vec<Point<T>>, interiors: Vec<Vec<Point<T>>>) -> Result<Self> {
        let mut exterior = clean_ring(exterior, "exterior")?;
        if ring_signed_area(&exterior) < T::zero() {
            exterior.reverse();
        }
        let mut holes = Vec::with_capacity(interiors.len());
        for (k, ring) in interiors.into_iter().enumerate() {
            let mut ring = clean_ring(ring, &format!("interior {k}"))?;
            if ring_signed_area(&ring) > T::zero() {
                ring.reverse();
            }
            holes.push(ring);
        }
        let bbox = Bbox::of_points(&exterior);
        let poly = Polygon { exterior, interiors: holes, bbox };
        if poly.area() <= T::zero() {
            return Err(Error::Geometry("polygon has non-positive area".into()));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle, convenient for grids and tests.
    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        Polygon::new(vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)], vec![])
    }

    pub fn exterior(&self) -> &[Point<T>] {
        &self.exterior
    }

    pub fn interiors(&self) -> &[Vec<Point<T>>] {
        &self.interiors
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point<T>]> {
        std::iter::once(self.exterior.as_slice()).chain(self.interiors.iter().map(Vec::as_slice))
    }

    pub fn bbox(&self) -> Bbox<T> {
        self.bbox
    }

    /// Shoelace area of the exterior minus the holes, in m².
    pub fn area(&self) -> T {
        let origin = self.exterior[0];
        self.rings().map(|r| ring_signed_area_about(r, origin)).fold(T::zero(), |a, b| a + b)
    }

    /// Length of the exterior ring only.
    pub fn perimeter(&self) -> T {
        ring_length(&self.exterior)
    }

    /// Perimeter² / area. At least 4π for any simple polygon.
    pub fn compactness(&self) -> T {
        let p = self.perimeter();
        p * p / self.area()
    }

    /// Area-weighted centroid.
    pub fn centroid(&self) -> Point<T> {
        let origin = self.exterior[0];
        let mut a2 = T::zero();
        let mut cx = T::zero();
        let mut cy = T::zero();
        for ring in self.rings() {
            for w in ring.windows(2) {
                let p = w[0].sub(origin);
                let q = w[1].sub(origin);
                let c = p.cross(q);
                a2 = a2 + c;
                cx = cx + (p.x + q.x) * c;
                cy = cy + (p.y + q.y) * c;
            }
        }
        let three = T::lit(3.0);
        Point::new(origin.x + cx / (three * a2), origin.y + cy / (three * a2))
    }

    pub fn map_points(&self, f: impl Fn(Point<T>) -> Point<T>) -> Result<Self> {
        Polygon::new(
            self.exterior.iter().map(|&p| f(p)).collect(),
            self.interiors.iter().map(|r| r.iter().map(|&p| f(p)).collect()).collect(),
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(|r| r.len() - 1).sum()
    }
}

pub fn polygon_area<T: Scalar>(p: &Polygon<T>) -> T {
    p.area()
}

pub fn polygon_perimeter<T: Scalar>(p: &Polygon<T>) -> T {
    p.perimeter()
}

pub fn compactness<T: Scalar>(p: &Polygon<T>) -> T {
    p.compactness()
}

pub fn centroid<T: Scalar>(p: &Polygon<T>) -> Point<T> {
    p.centroid()
}

/// Euclidean distance between projected points, in kilometres.
pub fn distance_km<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    (a.x - b.x).hypot(a.y - b.y) / T::lit(1000.0)
}

fn clean_ring<T: Scalar>(ring: Vec<Point<T>>, what: &str) -> Result<Vec<Point<T>>> {
    if let Some(bad) = ring.iter().find(|p| !p.is_finite()) {
        return Err(Error::Geometry(format!("{what} ring has non-finite vertex ({}, {})", bad.x, bad.y)));
    }
    let mut out: Vec<Point<T>> = Vec::with_capacity(ring.len() + 1);
    for p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 {
        return Err(Error::Geometry(format!("{what} ring has fewer than 3 distinct vertices")));
    }
    out.push(out[0]);
    if let Some((i, j)) = predicates::ring_self_intersection(&out) {
        return Err(Error::Geometry(format!("{what} ring self-intersects (segments {i} and {j})")));
    }
    Ok(out)
}

fn ring_signed_area<T: Scalar>(ring: &[Point<T>]) -> T {
    ring_signed_area_about(ring, ring[0])
}

fn ring_signed_area_about<T: Scalar>(ring: &[Point<T>], origin: Point<T>) -> T {
    let twice = ring.windows(2).map(|w| w[0].sub(origin).cross(w[1].sub(origin))).fold(T::zero(), |a, b| a + b);
    twice / T::lit(2.0)
}

fn ring_length<T: Scalar>(ring: &[Point<T>]) -> T {
    ring.windows(2).map(|w| w[0].dist(w[1])).fold(T::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(x: f64, y: f64, s: f64) -> Polygon<f64> {
        Polygon::rect(x, y, x + s, y + s).unwrap()
    }

    #[test]
    fn square_measures() {
        let p = square(0.0, 0.0, 100.0);
        assert_eq!(p.area(), 10_000.0);
        assert_eq!(p.perimeter(), 400.0);
        assert_eq!(p.compactness(), 16.0);
        assert_eq!(p.centroid(), Point::new(50.0, 50.0));
    }

    #[test]
    fn square_with_hole() {
        let hole = vec![Point::new(45.0, 45.0), Point::new(55.0, 45.0), Point::new(55.0, 55.0), Point::new(45.0, 55.0)];
        let p = Polygon::new(square(0.0, 0.0, 100.0).exterior().to_vec(), vec![hole]).unwrap();
        assert_eq!(p.area(), 9_900.0);
        // holes do not count toward perimeter
        assert_eq!(p.perimeter(), 400.0);
        assert_relative_eq!(p.centroid().x, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn triangle_perimeter() {
        let t = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(300.0, 0.0), Point::new(0.0, 400.0)], vec![]).unwrap();
        assert_eq!(t.perimeter(), 1200.0);
    }

    #[test]
    fn thin_rectangle_compactness() {
        let r = Polygon::rect(0.0, 0.0, 1000.0, 10.0).unwrap();
        // perimeter 2020 m, so 2020² / 10 000
        assert_relative_eq!(r.compactness(), 408.04, max_relative = 1e-12);
    }

    #[test]
    fn circle_limit() {
        let n = 1024;
        let pts = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Point::new(500.0 * a.cos(), 500.0 * a.sin())
            })
            .collect();
        let c = Polygon::new(pts, vec![]).unwrap().compactness();
        let four_pi = 4.0 * std::f64::consts::PI;
        assert!(c >= four_pi);
        assert!((c - four_pi) / four_pi < 1e-3);
    }

    #[test]
    fn hexagon_centroid() {
        let pts = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64;
                Point::new(10.0 + 7.0 * a.cos(), 20.0 + 7.0 * a.sin())
            })
            .collect();
        let c = Polygon::new(pts, vec![]).unwrap().centroid();
        assert_relative_eq!(c.x, 10.0, epsilon = 1e-12);
        assert_relative_eq!(c.y, 20.0, epsilon = 1e-12);
    }

    #[test]
    fn l_shape_centroid_by_decomposition() {
        // unit squares [0,1]x[0,1] and [1,2]x[0,1] plus [0,1]x[1,2]
        let l = Polygon::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(2.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 2.0),
                Point::new(0.0, 2.0),
            ],
            vec![],
        )
        .unwrap();
        let parts = [(0.5, 0.5, 1.0), (1.5, 0.5, 1.0), (0.5, 1.5, 1.0)];
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let ex = parts.iter().map(|p| p.0 * p.2).sum::<f64>() / total;
        let ey = parts.iter().map(|p| p.1 * p.2).sum::<f64>() / total;
        let c = l.centroid();
        assert_relative_eq!(c.x, ex, epsilon = 1e-12);
        assert_relative_eq!(c.y, ey, epsilon = 1e-12);
        assert_eq!(l.area(), 3.0);
    }

    #[test]
    fn distance_in_km() {
        assert_eq!(distance_km(Point::new(0.0, 0.0), Point::new(0.0, 0.0)), 0.0);
        assert_eq!(distance_km(Point::new(0.0, 0.0), Point::new(3000.0, 4000.0)), 5.0);
    }

    #[test]
    fn repair_closes_ring_and_drops_duplicates() {
        let p = Polygon::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(0.0, 0.0),
                Point::new(10.0, 0.0),
                Point::new(10.0, 10.0),
                Point::new(0.0, 10.0),
                Point::new(0.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(p.exterior().len(), 5);
        assert_eq!(p.exterior().first(), p.exterior().last());
    }

    #[test]
    fn degenerate_and_bowtie_rejected() {
        let two = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)], vec![]);
        assert!(matches!(two, Err(Error::Geometry(_))));
        let collinear = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)], vec![]);
        assert!(collinear.is_err());
        let bowtie =
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)], vec![]);
        assert!(matches!(bowtie, Err(Error::Geometry(m)) if m.contains("self-intersects")));
    }

    #[test]
    fn clockwise_input_normalized() {
        let cw = Polygon::new(
            vec![Point::new(0.0, 0.0), Point::new(0.0, 10.0), Point::new(10.0, 10.0), Point::new(10.0, 0.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(cw.area(), 100.0);
    }

    #[test]
    fn works_in_single_precision() {
        let p = Polygon::<f32>::rect(0.0, 0.0, 100.0, 100.0).unwrap();
        assert_eq!(p.area(), 10_000.0f32);
        assert_eq!(p.compactness(), 16.0f32);
    }
}
