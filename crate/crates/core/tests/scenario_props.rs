use proptest::prelude::*;

use urbanca::scenario::{bau_rate, ntu_rate, target_areas, uao_rate, AdminLevel, ScenarioKind, ScenarioSpec};
use urbanca::{CityRecord, Point};

fn city(a07: f64, a12: f64, ua: bool) -> CityRecord {
    CityRecord {
        city_id: "x".into(),
        name: "X".into(),
        admin_level: AdminLevel::PLC,
        center: Point::new(0.0, 0.0),
        urban_area_2007: a07,
        urban_area_2012: a12,
        in_urban_agglomeration: ua,
    }
}

fn any_city() -> impl Strategy<Value = CityRecord> {
    (0.1..2000.0f64, 0.1..2000.0f64, any::<bool>()).prop_map(|(a, b, ua)| city(a, b, ua))
}

proptest! {
    #[test]
    fn targets_increase_iff_rate_positive(c in any_city(), rate in -0.5..0.5f64, horizon in 1u32..15) {
        let t = target_areas(&c, rate, horizon);
        prop_assert_eq!(t.len(), horizon as usize);
        let seq: Vec<f64> = std::iter::once(c.urban_area_2012).chain(t.iter().copied()).collect();
        if rate > 0.0 {
            prop_assert!(seq.windows(2).all(|w| w[1] > w[0]));
        } else if rate < 0.0 {
            prop_assert!(seq.windows(2).all(|w| w[1] < w[0]));
        }
        let flat = target_areas(&c, 0.0, horizon);
        prop_assert!(flat.iter().all(|&a| a == c.urban_area_2012));
    }

    #[test]
    fn every_city_gets_one_finite_rate(c in any_city()) {
        for kind in [ScenarioKind::Bau, ScenarioKind::Uao, ScenarioKind::Ntu] {
            let r = ScenarioSpec::new(kind).rate(&c).unwrap();
            prop_assert!(r.is_finite() && r > -1.0);
        }
        let bau = bau_rate(&c).unwrap();
        let back = c.urban_area_2007 * (1.0 + bau).powi(5);
        prop_assert!((back - c.urban_area_2012).abs() <= 1e-9 * c.urban_area_2012);
    }

    #[test]
    fn ntu_non_increasing_in_area(a in 0.1..2000.0f64, b in 0.1..2000.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(ntu_rate(&city(1.0, hi, false)) <= ntu_rate(&city(1.0, lo, false)));
    }

    /// If every city's historical rate exceeds 5%, UAO can only expand less.
    #[test]
    fn uao_bounded_by_fast_bau(cities in prop::collection::vec((0.1..500.0f64, 0.0501..0.3f64, any::<bool>()), 1..30)) {
        let cities: Vec<CityRecord> = cities
            .iter()
            .map(|&(a12, r, ua)| city(a12 / (1.0 + r).powi(5), a12, ua))
            .collect();
        let total = |kind| -> f64 {
            let spec = ScenarioSpec::new(kind);
            cities.iter().map(|c| target_areas(c, spec.rate(c).unwrap(), 5)[4] - c.urban_area_2012).sum()
        };
        prop_assert!(cities.iter().all(|c| bau_rate(c).unwrap() > 0.05));
        prop_assert!(total(ScenarioKind::Uao) <= total(ScenarioKind::Bau));
        prop_assert!(cities.iter().all(|c| uao_rate(c) <= 0.05));
    }
}
