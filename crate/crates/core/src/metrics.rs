//! Comparing expansion patterns and summarizing simulated growth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::SimulationResult;
use crate::error::{Error, Result};
use crate::geometry::{intersection_area, Point, Polygon};
use crate::parcel::ParcelSet;
use crate::scalar::Scalar;
use crate::scenario::{bau_rate_statistics, BauRateStatistics, CityRecord};

/// Expanded elements (parcels or raster cells) with their areas in km².
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ExpansionSet<T: Scalar> {
    areas: BTreeMap<u64, T>,
}

impl<T: Scalar> ExpansionSet<T> {
    pub fn new(items: impl IntoIterator<Item = (u64, T)>) -> Result<Self> {
        let mut areas = BTreeMap::new();
        for (id, a) in items {
            if !(a > T::zero()) || !a.is_finite() {
                return Err(Error::data(format!("element {id}"), format!("area must be positive, got {a}")));
            }
            if areas.insert(id, a).is_some() {
                return Err(Error::data(format!("element {id}"), "duplicate id"));
            }
        }
        Ok(ExpansionSet { areas })
    }

    /// Parcels converted during a simulation, weighted by parcel area.
    pub fn from_result(r: &SimulationResult<T>, parcels: &ParcelSet<T>) -> Result<Self> {
        let items = r
            .conversion_years()
            .into_keys()
            .map(|id| {
                let i = parcels.index_of(id).ok_or_else(|| Error::data(format!("parcel {id}"), "not in parcel set"))?;
                Ok((id, parcels.as_slice()[i].area_km2()))
            })
            .collect::<Result<Vec<_>>>()?;
        ExpansionSet::new(items)
    }

    /// Every parcel in the set, for use as a confusion-matrix universe.
    pub fn universe(parcels: &ParcelSet<T>) -> Result<Self> {
        ExpansionSet::new(parcels.iter().map(|p| (p.parcel_id, p.area_km2())))
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.areas.contains_key(&id)
    }

    pub fn area(&self) -> T {
        self.areas.values().copied().fold(T::zero(), |a, b| a + b)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, T)> + '_ {
        self.areas.iter().map(|(&k, &v)| (k, v))
    }

    /// Shared area; an element present in both counts with its smaller area.
    pub fn intersection_area(&self, other: &Self) -> T {
        self.areas.iter().filter_map(|(id, &a)| other.areas.get(id).map(|&b| a.min(b))).fold(T::zero(), |x, y| x + y)
    }
}

/// `area(a ∩ b) / area(a)`, with `a` as the reference pattern.
pub fn overlap_precision<T: Scalar>(a: &ExpansionSet<T>, b: &ExpansionSet<T>) -> Result<T> {
    if a.is_empty() {
        return Err(Error::UndefinedMetric("overlap precision with an empty reference set".into()));
    }
    Ok(a.intersection_area(b) / a.area())
}

/// Area-weighted 2×2 agreement table over a fixed universe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix<T> {
    pub both_expanded: T,
    pub simulated_only: T,
    pub observed_only: T,
    pub neither: T,
}

impl<T: Scalar> ConfusionMatrix<T> {
    pub fn total(&self) -> T {
        self.both_expanded + self.simulated_only + self.observed_only + self.neither
    }

    pub fn overall_precision(&self) -> T {
        (self.both_expanded + self.neither) / self.total()
    }
}

pub fn confusion_matrix<T: Scalar>(
    simulated: &ExpansionSet<T>,
    observed: &ExpansionSet<T>,
    universe: &ExpansionSet<T>,
) -> Result<ConfusionMatrix<T>> {
    if universe.is_empty() {
        return Err(Error::UndefinedMetric("empty universe".into()));
    }
    for (name, set) in [("simulated", simulated), ("observed", observed)] {
        if let Some((id, _)) = set.iter().find(|&(id, _)| !universe.contains(id)) {
            return Err(Error::Domain(format!("{name} element {id} is outside the universe")));
        }
    }
    let mut m =
        ConfusionMatrix { both_expanded: T::zero(), simulated_only: T::zero(), observed_only: T::zero(), neither: T::zero() };
    for (id, a) in universe.iter() {
        let cell = match (simulated.contains(id), observed.contains(id)) {
            (true, true) => &mut m.both_expanded,
            (true, false) => &mut m.simulated_only,
            (false, true) => &mut m.observed_only,
            (false, false) => &mut m.neither,
        };
        *cell = *cell + a;
    }
    Ok(m)
}

/// Share of the universe's area where simulation and observation agree.
pub fn confusion_precision<T: Scalar>(
    simulated: &ExpansionSet<T>,
    observed: &ExpansionSet<T>,
    universe: &ExpansionSet<T>,
) -> Result<T> {
    Ok(confusion_matrix(simulated, observed, universe)?.overall_precision())
}

/// Square grid anchored at the projected origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub cell_m: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(cell_m: T) -> Result<Self> {
        if !(cell_m > T::zero()) || !cell_m.is_finite() {
            return Err(Error::Config(format!("grid cell size must be positive, got {cell_m}")));
        }
        Ok(Grid { cell_m })
    }

    /// Cell id packing `(row, col)` as two offset 32-bit halves.
    pub fn cell_id(row: i64, col: i64) -> u64 {
        let r = (row + (1 << 31)) as u64 & 0xffff_ffff;
        let c = (col + (1 << 31)) as u64 & 0xffff_ffff;
        (r << 32) | c
    }

    pub fn cell_of(&self, p: Point<T>) -> (i64, i64) {
        ((p.y / self.cell_m).floor().to_i64().unwrap_or(0), (p.x / self.cell_m).floor().to_i64().unwrap_or(0))
    }

    fn cell_polygon(&self, row: i64, col: i64) -> Polygon<T> {
        let s = self.cell_m;
        let x0 = T::lit(col as f64) * s;
        let y0 = T::lit(row as f64) * s;
        Polygon::rect(x0, y0, x0 + s, y0 + s).expect("grid cell is a valid rectangle")
    }
}

/// Spread the listed parcels over grid cells by exact overlap area, so that
/// parcel patterns can be compared with raster model output.
pub fn rasterize<T: Scalar>(parcels: &ParcelSet<T>, ids: &ExpansionSet<T>, grid: &Grid<T>) -> Result<ExpansionSet<T>> {
    let mut cells: BTreeMap<u64, T> = BTreeMap::new();
    for (id, _) in ids.iter() {
        let i = parcels.index_of(id).ok_or_else(|| Error::data(format!("parcel {id}"), "not in parcel set"))?;
        let poly = &parcels.as_slice()[i].polygon;
        let b = poly.bbox();
        let (r0, c0) = grid.cell_of(b.min);
        let (r1, c1) = grid.cell_of(b.max);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let a = intersection_area(poly, &grid.cell_polygon(row, col)) / T::lit(1e6);
                if a > T::zero() {
                    let e = cells.entry(Grid::<T>::cell_id(row, col)).or_insert(T::zero());
                    *e = *e + a;
                }
            }
        }
    }
    ExpansionSet::new(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    UrbanAgglomeration,
    AdminLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: String,
    pub cities: usize,
    pub initial_km2: f64,
    pub final_km2: f64,
    pub growth_km2: f64,
    pub growth_pct: f64,
    pub shortfall: bool,
}

impl SummaryRow {
    fn new(key: String, cities: usize, initial: f64, fin: f64, shortfall: bool) -> Self {
        SummaryRow {
            key,
            cities,
            initial_km2: initial,
            final_km2: fin,
            growth_km2: fin - initial,
            growth_pct: if initial > 0.0 { (fin - initial) / initial * 100.0 } else { 0.0 },
            shortfall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub horizon_years: u32,
    pub cities: Vec<SummaryRow>,
    pub groups: Vec<SummaryRow>,
    pub total: SummaryRow,
    /// Labelled so the two readings of "average growth" are not confused.
    pub bau_rates: Option<BauRateStatistics>,
}

/// Per-city, per-group, and total growth accounts.
pub fn summarize<T: Scalar>(r: &SimulationResult<T>, cities: &[CityRecord<T>], group_by: Option<GroupBy>) -> Result<Summary> {
    let by_id: BTreeMap<&str, &CityRecord<T>> = cities.iter().map(|c| (c.city_id.as_str(), c)).collect();
    let mut rows = Vec::with_capacity(r.cities.len());
    let mut groups: BTreeMap<String, (usize, f64, f64, bool)> = BTreeMap::new();
    for c in &r.cities {
        let init = c.initial_area_km2.as_f64();
        let fin = c.final_area_km2().as_f64();
        let short = c.has_shortfall();
        rows.push(SummaryRow::new(c.city_id.clone(), 1, init, fin, short));
        if let Some(g) = group_by {
            let rec = by_id
                .get(c.city_id.as_str())
                .ok_or_else(|| Error::data(format!("city {}", c.city_id), "missing from city table"))?;
            let key = match g {
                GroupBy::UrbanAgglomeration => if rec.in_urban_agglomeration { "UA" } else { "non-UA" }.to_string(),
                GroupBy::AdminLevel => rec.admin_level.as_str().to_string(),
            };
            let e = groups.entry(key).or_insert((0, 0.0, 0.0, false));
            e.0 += 1;
            e.1 += init;
            e.2 += fin;
            e.3 |= short;
        }
    }
    let total = SummaryRow::new(
        "total".into(),
        rows.len(),
        rows.iter().map(|x| x.initial_km2).sum(),
        rows.iter().map(|x| x.final_km2).sum(),
        rows.iter().any(|x| x.shortfall),
    );
    Ok(Summary {
        scenario: r.scenario.as_str().to_string(),
        horizon_years: r.horizon_years,
        cities: rows,
        groups: groups.into_iter().map(|(k, (n, i, f, s))| SummaryRow::new(k, n, i, f, s)).collect(),
        total,
        bau_rates: bau_rate_statistics(cities).ok(),
    })
}

impl Summary {
    /// CSV with km² to 3 decimals and percents to 1 decimal.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,key,cities,initial_km2,final_km2,growth_km2,growth_pct,shortfall\n");
        let mut emit = |level: &str, r: &SummaryRow| {
            writeln!(
                s,
                "{level},{},{},{:.3},{:.3},{:.3},{:.1},{}",
                r.key,
                r.cities,
                r.initial_km2,
                r.final_km2,
                r.growth_km2,
                r.growth_pct,
                u8::from(r.shortfall)
            )
            .unwrap();
        };
        for r in &self.cities {
            emit("city", r);
        }
        for r in &self.groups {
            emit("group", r);
        }
        emit("total", &self.total);
        s
    }
}
