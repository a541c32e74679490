use serde::{Deserialize, Serialize};

use super::predicates::{point_in_polygon, point_segment_distance};
use super::{Point, Polygon, SpatialIndex};
use crate::scalar::Scalar;

/// Area of `a ∩ b`.
///
/// Integrates `x dy - y dx` over the boundary of the intersection, which is
/// the part of each polygon's boundary lying inside the other. Boundary
/// pieces shared by both polygons are counted once when they run in the same
/// direction and dropped when they run opposite.
pub fn intersection_area<T: Scalar>(a: &Polygon<T>, b: &Polygon<T>) -> T {
    if !a.bbox().intersects(&b.bbox()) {
        return T::zero();
    }
    let origin = a.exterior()[0];
    let scale = a.bbox().extent().max(b.bbox().extent());
    let tol = scale * T::lit(1e-10);
    let mut twice = T::zero();
    for (s0, s1) in split_boundary(a, b) {
        let keep = match shared_direction(b, s0, s1, tol) {
            Some(same) => same,
            None => point_in_polygon(b, midpoint(s0, s1)),
        };
        if keep {
            twice = twice + s0.sub(origin).cross(s1.sub(origin));
        }
    }
    for (s0, s1) in split_boundary(b, a) {
        if shared_direction(a, s0, s1, tol).is_none() && point_in_polygon(a, midpoint(s0, s1)) {
            twice = twice + s0.sub(origin).cross(s1.sub(origin));
        }
    }
    (twice / T::lit(2.0)).max(T::zero())
}

fn midpoint<T: Scalar>(p: Point<T>, q: Point<T>) -> Point<T> {
    let h = T::lit(0.5);
    Point::new((p.x + q.x) * h, (p.y + q.y) * h)
}

/// If segment `s0→s1` lies along an edge of `poly`, whether it runs in the
/// same direction as that edge.
fn shared_direction<T: Scalar>(poly: &Polygon<T>, s0: Point<T>, s1: Point<T>, tol: T) -> Option<bool> {
    let dir = s1.sub(s0);
    for ring in poly.rings() {
        for w in ring.windows(2) {
            if point_segment_distance(s0, w[0], w[1]) <= tol && point_segment_distance(s1, w[0], w[1]) <= tol {
                return Some(dir.dot(w[1].sub(w[0])) > T::zero());
            }
        }
    }
    None
}

/// Edges of `a`, cut at every crossing with the boundary of `b`.
fn split_boundary<T: Scalar>(a: &Polygon<T>, b: &Polygon<T>) -> Vec<(Point<T>, Point<T>)> {
    let mut out = Vec::new();
    let mut cuts: Vec<T> = Vec::new();
    for ring in a.rings() {
        for w in ring.windows(2) {
            let (p, q) = (w[0], w[1]);
            let r = q.sub(p);
            let rr = r.dot(r);
            cuts.clear();
            cuts.push(T::zero());
            cuts.push(T::one());
            for bring in b.rings() {
                for e in bring.windows(2) {
                    edge_cuts(p, r, rr, e[0], e[1], &mut cuts);
                }
            }
            cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            cuts.dedup();
            for t in cuts.windows(2) {
                if t[1] > t[0] {
                    let s0 = Point::new(p.x + r.x * t[0], p.y + r.y * t[0]);
                    let s1 = if t[1] == T::one() { q } else { Point::new(p.x + r.x * t[1], p.y + r.y * t[1]) };
                    if s0 != s1 {
                        out.push((s0, s1));
                    }
                }
            }
        }
    }
    out
}

fn edge_cuts<T: Scalar>(p: Point<T>, r: Point<T>, rr: T, e0: Point<T>, e1: Point<T>, cuts: &mut Vec<T>) {
    let s = e1.sub(e0);
    let qp = e0.sub(p);
    let denom = r.cross(s);
    let zero = T::zero();
    let one = T::one();
    if denom != zero {
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        if t > zero && t < one && u >= zero && u <= one {
            cuts.push(t);
        }
    } else if qp.cross(r) == zero {
        // collinear: the other edge's endpoints become cut points
        for v in [e0, e1] {
            let t = v.sub(p).dot(r) / rr;
            if t > zero && t < one {
                cuts.push(t);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExclusionKind {
    Steep,
    Water,
}

impl std::str::FromStr for ExclusionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "steep" => Ok(ExclusionKind::Steep),
            "water" => Ok(ExclusionKind::Water),
            other => Err(format!("unknown exclusion tag '{other}' (expected steep|water)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExclusionPolygon<T: Scalar> {
    pub kind: ExclusionKind,
    pub polygon: Polygon<T>,
}

/// Areas where conversion to urban is forbidden.
#[derive(Debug, Clone)]
pub struct ExclusionSet<T: Scalar> {
    members: Vec<ExclusionPolygon<T>>,
    index: SpatialIndex<T>,
}

impl<T: Scalar> Default for ExclusionSet<T> {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl<T: Scalar> ExclusionSet<T> {
    pub fn new(members: Vec<ExclusionPolygon<T>>) -> Self {
        let index = SpatialIndex::from_bboxes(members.iter().map(|m| m.polygon.bbox()));
        ExclusionSet { members, index }
    }

    pub fn members(&self) -> &[ExclusionPolygon<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn count(&self, kind: ExclusionKind) -> usize {
        self.members.iter().filter(|m| m.kind == kind).count()
    }

    /// Largest fraction of `p`'s area covered by a single exclusion polygon.
    pub fn max_overlap_fraction(&self, p: &Polygon<T>) -> T {
        let area = p.area();
        self.index
            .query(&p.bbox())
            .into_iter()
            .map(|i| intersection_area(p, &self.members[i].polygon) / area)
            .fold(T::zero(), |a, b| a.max(b))
            .min(T::one())
    }

    /// True iff `p` overlaps any exclusion polygon by more than
    /// `threshold` of its own area.
    pub fn intersects(&self, p: &Polygon<T>, threshold: T) -> bool {
        !self.is_empty() && self.max_overlap_fraction(p) > threshold
    }
}

pub fn intersects_exclusion<T: Scalar>(p: &Polygon<T>, ex: &ExclusionSet<T>, threshold: T) -> bool {
    ex.intersects(p, threshold)
}
