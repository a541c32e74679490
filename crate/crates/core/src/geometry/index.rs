use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};

use super::{Bbox, Polygon};
use crate::scalar::Scalar;

type Entry<T> = GeomWithData<Rectangle<[T; 2]>, usize>;

/// Bulk-loaded R-tree over bounding boxes. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpatialIndex<T: Scalar> {
    tree: RTree<Entry<T>>,
}

impl<T: Scalar> SpatialIndex<T> {
    pub fn build(polygons: &[Polygon<T>]) -> Self {
        Self::from_bboxes(polygons.iter().map(Polygon::bbox))
    }

    /// Index arbitrary boxes; entry `i` reports as id `i`.
    pub fn from_bboxes(boxes: impl IntoIterator<Item = Bbox<T>>) -> Self {
        let entries = boxes
            .into_iter()
            .enumerate()
            .map(|(i, b)| GeomWithData::new(Rectangle::from_corners([b.min.x, b.min.y], [b.max.x, b.max.y]), i))
            .collect();
        SpatialIndex { tree: RTree::bulk_load(entries) }
    }

    pub fn len(&self) -> usize {
        self.tree.size()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.size() == 0
    }

    /// Ids of every indexed box meeting `window`, ascending.
    pub fn query(&self, window: &Bbox<T>) -> Vec<usize> {
        let env = AABB::from_corners([window.min.x, window.min.y], [window.max.x, window.max.y]);
        let mut ids: Vec<usize> = self.tree.locate_in_envelope_intersecting(&env).map(|e| e.data).collect();
        ids.sort_unstable();
        ids
    }
}

pub fn build_index<T: Scalar>(polygons: &[Polygon<T>]) -> SpatialIndex<T> {
    SpatialIndex::build(polygons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn grid_queries_match_scan() {
        let polys: Vec<Polygon<f64>> = (0..100)
            .map(|k| {
                let (x, y) = ((k % 10) as f64 * 10.0, (k / 10) as f64 * 10.0);
                Polygon::rect(x + 1.0, y + 1.0, x + 9.0, y + 9.0).unwrap()
            })
            .collect();
        let idx = SpatialIndex::build(&polys);
        for k in [0usize, 37, 99] {
            let w = polys[k].bbox();
            let scan: Vec<usize> = (0..polys.len()).filter(|&i| polys[i].bbox().intersects(&w)).collect();
            assert_eq!(idx.query(&w), scan);
            assert_eq!(idx.query(&w), vec![k]);
        }
        let empty = Bbox { min: Point::new(-50.0, -50.0), max: Point::new(-40.0, -40.0) };
        assert!(idx.query(&empty).is_empty());
    }
}
