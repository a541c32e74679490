use proptest::prelude::*;

use urbanca::io::{generate_synthetic, SynthSpec};
use urbanca::metrics::{confusion_matrix, confusion_precision, overlap_precision, rasterize, Grid};
use urbanca::{Error, ExpansionSet};

fn universe() -> impl Strategy<Value = Vec<(u64, f64, bool, bool)>> {
    prop::collection::vec((0.01..10.0f64, any::<bool>(), any::<bool>()), 1..60)
        .prop_map(|v| v.into_iter().enumerate().map(|(k, (a, s, o))| (k as u64, a, s, o)).collect())
}

fn pick(u: &[(u64, f64, bool, bool)], f: impl Fn(&(u64, f64, bool, bool)) -> bool) -> ExpansionSet {
    ExpansionSet::new(u.iter().filter(|e| f(e)).map(|e| (e.0, e.1))).unwrap()
}

proptest! {
    #[test]
    fn overlap_limits(u in universe()) {
        let a = pick(&u, |_| true);
        prop_assert!((overlap_precision(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        prop_assert_eq!(overlap_precision(&a, &ExpansionSet::new(Vec::new()).unwrap()).unwrap(), 0.0);
        prop_assert!(matches!(overlap_precision(&ExpansionSet::new(Vec::new()).unwrap(), &a), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn overlap_in_unit_interval(u in universe()) {
        let (s, o) = (pick(&u, |e| e.2), pick(&u, |e| e.3));
        if !o.is_empty() {
            let p = overlap_precision(&o, &s).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn confusion_swap_symmetry(u in universe()) {
        let (s, o, all) = (pick(&u, |e| e.2), pick(&u, |e| e.3), pick(&u, |_| true));
        let a = confusion_precision(&s, &o, &all).unwrap();
        let b = confusion_precision(&o, &s, &all).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let m = confusion_matrix(&s, &o, &all).unwrap();
        prop_assert!((m.total() - all.area()).abs() < 1e-9 * all.area());
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }
}

#[test]
fn outside_universe_is_rejected() {
    let all = ExpansionSet::new([(1, 1.0), (2, 1.0)]).unwrap();
    let stray = ExpansionSet::new([(3, 1.0)]).unwrap();
    assert!(matches!(confusion_matrix(&stray, &all, &all), Err(Error::Domain(_))));
}

#[test]
fn rasterizing_preserves_area() {
    let spec = SynthSpec { cities: 2, parcels_per_city: 60, parcel_size_m: 170.0, jitter: 0.25, seed: 6, ..Default::default() };
    let d = generate_synthetic(&spec).unwrap();
    let all = ExpansionSet::universe(&d.parcels).unwrap();
    let cells = rasterize(&d.parcels, &all, &Grid::new(500.0).unwrap()).unwrap();
    assert!((cells.area() - all.area()).abs() < 1e-9 * all.area());
    let half = ExpansionSet::new(all.iter().filter(|(id, _)| id % 2 == 0)).unwrap();
    let cells_half = rasterize(&d.parcels, &half, &Grid::new(500.0).unwrap()).unwrap();
    assert!((overlap_precision(&cells_half, &cells).unwrap() - 1.0).abs() < 1e-12);
}
