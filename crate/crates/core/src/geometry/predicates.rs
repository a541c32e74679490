use super::{Point, Polygon};
use crate::scalar::Scalar;

#[inline]
fn orient<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    b.sub(a).cross(c.sub(a))
}

#[inline]
fn sign<T: Scalar>(v: T) -> i8 {
    if v > T::zero() {
        1
    } else if v < T::zero() {
        -1
    } else {
        0
    }
}

#[inline]
fn on_segment<T: Scalar>(a: Point<T>, b: Point<T>, p: Point<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect<T: Scalar>(a0: Point<T>, a1: Point<T>, b0: Point<T>, b1: Point<T>) -> bool {
    let d1 = sign(orient(b0, b1, a0));
    let d2 = sign(orient(b0, b1, a1));
    let d3 = sign(orient(a0, a1, b0));
    let d4 = sign(orient(a0, a1, b1));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && on_segment(b0, b1, a0))
        || (d2 == 0 && on_segment(b0, b1, a1))
        || (d3 == 0 && on_segment(a0, a1, b0))
        || (d4 == 0 && on_segment(a0, a1, b1))
}

pub fn point_segment_distance<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> T {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == T::zero() {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).max(T::zero()).min(T::one());
    let c = Point::new(a.x + t * ab.x, a.y + t * ab.y);
    p.dist(c)
}

/// Minimum distance between two closed segments. Symmetric in its arguments.
pub fn segment_distance<T: Scalar>(a0: Point<T>, a1: Point<T>, b0: Point<T>, b1: Point<T>) -> T {
    if segments_intersect(a0, a1, b0, b1) {
        return T::zero();
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

fn ring_contains<T: Scalar>(ring: &[Point<T>], p: Point<T>) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Even-odd containment test honoring holes. Points exactly on the
/// boundary may land on either side.
pub fn point_in_polygon<T: Scalar>(poly: &Polygon<T>, p: Point<T>) -> bool {
    if !ring_contains(poly.exterior(), p) {
        return false;
    }
    !poly.interiors().iter().any(|h| ring_contains(h, p))
}

/// First pair of segments `(i, j)` in a closed ring that improperly meet,
/// or `None` for a simple ring.
pub(crate) fn ring_self_intersection<T: Scalar>(ring: &[Point<T>]) -> Option<(usize, usize)> {
    let n = ring.len() - 1;
    for i in 0..n {
        let (a0, a1) = (ring[i], ring[i + 1]);
        for j in (i + 1)..n {
            let (b0, b1) = (ring[j], ring[j + 1]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // neighbours share one vertex; they must not fold back on each other
                let shared = if j == i + 1 { a1 } else { a0 };
                let (p, q) = if j == i + 1 { (a0, b1) } else { (a1, b0) };
                if orient(p, shared, q) == T::zero() && p.sub(shared).dot(q.sub(shared)) > T::zero() {
                    return Some((i, j));
                }
            } else if segments_intersect(a0, a1, b0, b1) {
                return Some((i, j));
            }
        }
    }
    None
}

fn segments<T: Scalar>(p: &Polygon<T>) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
    p.rings().flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
}

fn nested<T: Scalar>(p: &Polygon<T>, q: &Polygon<T>) -> bool {
    point_in_polygon(q, p.exterior()[0]) || point_in_polygon(p, q.exterior()[0])
}

/// Minimum Euclidean distance between the boundaries of two polygons,
/// zero when they touch, cross, or one contains the other.
pub fn min_distance<T: Scalar>(p: &Polygon<T>, q: &Polygon<T>) -> T {
    let mut best = T::infinity();
    for (a0, a1) in segments(p) {
        for (b0, b1) in segments(q) {
            best = best.min(segment_distance(a0, a1, b0, b1));
            if best == T::zero() {
                return best;
            }
        }
    }
    if nested(p, q) {
        return T::zero();
    }
    best
}

/// Equivalent to `min_distance(p, q) <= radius`, with early exit.
pub fn within_distance<T: Scalar>(p: &Polygon<T>, q: &Polygon<T>, radius: T) -> bool {
    // loose prefilter so borderline pairs fall through to the exact test
    let slack = radius * T::lit(1e-9) + T::epsilon();
    if p.bbox().distance(&q.bbox()) > radius + slack {
        return false;
    }
    for (a0, a1) in segments(p) {
        for (b0, b1) in segments(q) {
            if segment_distance(a0, a1, b0, b1) <= radius {
                return true;
            }
        }
    }
    nested(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x: f64, y: f64, s: f64) -> Polygon<f64> {
        Polygon::rect(x, y, x + s, y + s).unwrap()
    }

    #[test]
    fn shared_edge_is_zero() {
        assert_eq!(min_distance(&sq(0.0, 0.0, 1.0), &sq(1.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn corner_to_corner() {
        let d = min_distance(&sq(0.0, 0.0, 1.0), &sq(2.0, 2.0, 1.0));
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nested_is_zero() {
        assert_eq!(min_distance(&sq(0.0, 0.0, 10.0), &sq(4.0, 4.0, 1.0)), 0.0);
        assert!(within_distance(&sq(4.0, 4.0, 1.0), &sq(0.0, 0.0, 10.0), 0.5));
    }

    #[test]
    fn inside_hole_measures_to_hole_edge() {
        let outer = Polygon::new(sq(0.0, 0.0, 10.0).exterior().to_vec(), vec![sq(2.0, 2.0, 6.0).exterior().to_vec()]).unwrap();
        let island = sq(4.0, 4.0, 2.0);
        assert_eq!(min_distance(&outer, &island), 2.0);
    }

    #[test]
    fn within_matches_min_distance_at_exact_radius() {
        let a = sq(0.0, 0.0, 100.0);
        let b = sq(600.0, 0.0, 100.0);
        assert_eq!(min_distance(&a, &b), 500.0);
        assert!(within_distance(&a, &b, 500.0));
        assert!(!within_distance(&a, &b, 499.999));
        let c = sq(400.0, 500.0, 100.0);
        assert_eq!(min_distance(&a, &c), 500.0);
        assert!(within_distance(&a, &c, 500.0));
    }

    #[test]
    fn touching_segments_intersect() {
        let o = Point::new(0.0, 0.0);
        assert!(segments_intersect(o, Point::new(1.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 1.0)));
        assert!(!segments_intersect(o, Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)));
    }

    #[test]
    fn spike_rejected() {
        let ring =
            vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(2.0, 0.0), Point::new(2.0, 3.0), Point::new(0.0, 0.0)];
        assert!(ring_self_intersection(&ring).is_some());
    }
}
