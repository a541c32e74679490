//! Per-city constrained vector cellular automaton.
//!
//! Each year every non-urban parcel gets a score
//! `P_l · P_Ω · con · P_r`. Parcels scoring above the threshold are ranked
//! and converted greedily until the city's target area for that year is
//! met. Cities share no mutable state and run in parallel.

use std::collections::{BTreeMap, HashMap};

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{local_potential, Coefficients};
use crate::error::{Error, Result};
use crate::neighbors::NeighborGraph;
use crate::parcel::{LandState, ParcelRecord, ParcelSet};
use crate::scalar::Scalar;
use crate::scenario::{target_areas, CityRecord, ScenarioKind, ScenarioSpec};

pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_P_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disturbance {
    #[default]
    On,
    /// Force `P_r = 1`.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaParams<T> {
    pub coefficients: Coefficients<T>,
    /// Disturbance exponent, within [0, 10].
    pub beta: T,
    /// Conversion threshold on the score, within [0, 1].
    pub p_threshold: T,
    pub rng_seed: u64,
    pub disturbance: Disturbance,
}

impl<T: Scalar> Default for CaParams<T> {
    fn default() -> Self {
        CaParams {
            coefficients: Coefficients::default(),
            beta: T::lit(DEFAULT_BETA),
            p_threshold: T::lit(DEFAULT_P_THRESHOLD),
            rng_seed: 0,
            disturbance: Disturbance::On,
        }
    }
}

impl<T: Scalar> CaParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= T::zero() && self.beta <= T::lit(10.0)) {
            return Err(Error::Config(format!("beta must lie in [0, 10], got {}", self.beta)));
        }
        if !(self.p_threshold >= T::zero() && self.p_threshold <= T::one()) {
            return Err(Error::Config(format!("p_threshold must lie in [0, 1], got {}", self.p_threshold)));
        }
        if !self.coefficients.is_finite() {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Share of a parcel's neighbors that are urban; 0 for isolated parcels.
pub fn neighborhood_potential<T: Scalar>(i: usize, g: &NeighborGraph, states: &[LandState]) -> Result<T> {
    let ns = g.neighbors(i)?;
    fraction(ns, |j| states.get(j).map(|s| s.is_urban()).ok_or(Error::Lookup(j)))
}

fn fraction<T: Scalar>(ns: &[u32], mut is_urban: impl FnMut(usize) -> Result<bool>) -> Result<T> {
    if ns.is_empty() {
        return Ok(T::zero());
    }
    let mut urban = 0usize;
    for &j in ns {
        if is_urban(j as usize)? {
            urban += 1;
        }
    }
    Ok(T::lit(urban as f64) / T::lit(ns.len() as f64))
}

/// `1 + (−ln γ)^β`. Always at least 1, so it only ever amplifies a score.
pub fn stochastic_disturbance<T: Scalar>(gamma: T, beta: T) -> Result<T> {
    if !(gamma > T::zero() && gamma < T::one()) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(beta >= T::zero() && beta <= T::lit(10.0)) {
        return Err(Error::Domain(format!("beta must lie in [0, 10], got {beta}")));
    }
    Ok(T::one() + (-gamma.ln()).powf(beta))
}

/// Combine the four factors. `allowed == false` forces zero.
#[inline]
pub fn combine_score<T: Scalar>(local: T, neighborhood: T, allowed: bool, disturbance: T) -> T {
    let con = if allowed { T::one() } else { T::zero() };
    local * neighborhood * con * disturbance
}

/// Score of parcel `i` turning urban, given year-start states and a drawn
/// `gamma` (ignored when the disturbance is off). Not a probability: the
/// disturbance factor can push it above 1.
pub fn transition_probability<T: Scalar>(
    i: usize,
    parcels: &ParcelSet<T>,
    states: &[LandState],
    g: &NeighborGraph,
    params: &CaParams<T>,
    gamma: T,
) -> Result<T> {
    let p = parcels.get(i).ok_or(Error::Lookup(i))?;
    let features = p.features.as_ref().ok_or_else(|| Error::State(format!("parcel {} has no cached features", p.parcel_id)))?;
    let local = local_potential(features, &params.coefficients);
    let omega = neighborhood_potential(i, g, states)?;
    let pr = match params.disturbance {
        Disturbance::On => stochastic_disturbance(gamma, params.beta)?,
        Disturbance::Off => T::one(),
    };
    Ok(combine_score(local, omega, !p.excluded, pr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct YearOutcome<T: Scalar> {
    /// 1-based step index.
    pub year: u32,
    pub target_km2: T,
    pub realized_km2: T,
    /// Converted parcel ids in conversion order.
    pub converted: Vec<u64>,
    /// Unmet area when candidates ran out before the target.
    pub shortfall_km2: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct CityResult<T: Scalar> {
    pub city_id: String,
    pub rate: T,
    /// Urban area the targets grow from (the city table's 2012 value).
    pub initial_area_km2: T,
    /// Urban area of the city's urban parcels at the start, for reference.
    pub initial_parcel_urban_km2: T,
    pub max_parcel_area_km2: T,
    pub years: Vec<YearOutcome<T>>,
    /// Parcel ids urban after the last step, ascending.
    pub final_urban: Vec<u64>,
}

impl<T: Scalar> CityResult<T> {
    pub fn final_area_km2(&self) -> T {
        self.years.last().map_or(self.initial_area_km2, |y| y.realized_km2)
    }

    pub fn converted(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.years.iter().flat_map(|y| y.converted.iter().map(move |&id| (y.year, id)))
    }

    pub fn has_shortfall(&self) -> bool {
        self.years.iter().any(|y| y.shortfall_km2.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SimulationResult<T: Scalar> {
    pub scenario: ScenarioKind,
    pub horizon_years: u32,
    pub rng_seed: u64,
    /// Sorted by city id.
    pub cities: Vec<CityResult<T>>,
}

impl<T: Scalar> SimulationResult<T> {
    pub fn city(&self, city_id: &str) -> Option<&CityResult<T>> {
        self.cities.binary_search_by(|c| c.city_id.as_str().cmp(city_id)).ok().map(|i| &self.cities[i])
    }

    pub fn has_shortfall(&self) -> bool {
        self.cities.iter().any(CityResult::has_shortfall)
    }

    /// `(city_id, year, missing km²)` for every unmet city-year.
    pub fn shortfalls(&self) -> Vec<(&str, u32, T)> {
        self.cities
            .iter()
            .flat_map(|c| c.years.iter().filter_map(move |y| y.shortfall_km2.map(|s| (c.city_id.as_str(), y.year, s))))
            .collect()
    }

    /// Conversion step per converted parcel id.
    pub fn conversion_years(&self) -> BTreeMap<u64, u32> {
        self.cities.iter().flat_map(|c| c.converted()).map(|(y, id)| (id, y)).collect()
    }
}

/// Random stream for one city, derived only from the run seed and city id.
pub fn city_rng(seed: u64, city_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(city_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Mutable simulation state of one city.
pub struct CityState<'a, T: Scalar> {
    parcels: &'a [ParcelRecord<T>],
    graph: &'a NeighborGraph,
    /// Canonical parcel indices belonging to the city, ascending.
    members: Vec<usize>,
    local_of: HashMap<usize, usize>,
    urban: Vec<bool>,
    local_potential: Vec<T>,
    realized_km2: T,
}

impl<'a, T: Scalar> CityState<'a, T> {
    /// `members` must be canonical indices of this city's parcels.
    pub fn new(
        parcels: &'a ParcelSet<T>,
        graph: &'a NeighborGraph,
        mut members: Vec<usize>,
        coefficients: &Coefficients<T>,
        initial_area_km2: T,
    ) -> Result<Self> {
        members.sort_unstable();
        let list = parcels.as_slice();
        let mut local_potential_v = Vec::with_capacity(members.len());
        for &i in &members {
            let p = list.get(i).ok_or(Error::Lookup(i))?;
            let f = p.features.as_ref().ok_or_else(|| Error::State(format!("parcel {} has no cached features", p.parcel_id)))?;
            local_potential_v.push(local_potential(f, coefficients));
        }
        Ok(CityState {
            parcels: list,
            graph,
            local_of: members.iter().enumerate().map(|(l, &g)| (g, l)).collect(),
            urban: members.iter().map(|&i| list[i].state.is_urban()).collect(),
            members,
            local_potential: local_potential_v,
            realized_km2: initial_area_km2,
        })
    }

    pub fn realized_km2(&self) -> T {
        self.realized_km2
    }

    pub fn urban_ids(&self) -> Vec<u64> {
        self.members.iter().zip(&self.urban).filter(|(_, &u)| u).map(|(&i, _)| self.parcels[i].parcel_id).collect()
    }

    fn omega(&self, local: usize) -> Result<T> {
        let ns = self.graph.neighbors(self.members[local])?;
        fraction(ns, |j| {
            self.local_of.get(&j).map(|&l| self.urban[l]).ok_or_else(|| {
                Error::State(format!(
                    "neighbor {} of parcel {} lies outside its city",
                    self.parcels.get(j).map_or(j as u64, |p| p.parcel_id),
                    self.parcels[self.members[local]].parcel_id
                ))
            })
        })
    }

    /// Scores of all non-urban parcels from the current state, as
    /// `(local index, score)` in ascending local order.
    pub fn scores(&self, params: &CaParams<T>, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, T)>> {
        let candidates: Vec<usize> = (0..self.members.len()).filter(|&l| !self.urban[l]).collect();
        let disturbances: Vec<T> = match params.disturbance {
            Disturbance::Off => vec![T::one(); candidates.len()],
            Disturbance::On => candidates
                .iter()
                .map(|_| {
                    let gamma: f64 = rng.sample(Open01);
                    stochastic_disturbance(T::lit(gamma), params.beta)
                })
                .collect::<Result<_>>()?,
        };
        candidates
            .par_iter()
            .zip(disturbances.par_iter())
            .map(|(&l, &pr)| {
                let p = &self.parcels[self.members[l]];
                let omega = self.omega(l)?;
                Ok((l, combine_score(self.local_potential[l], omega, !p.excluded, pr)))
            })
            .collect()
    }

    /// One synchronous annual step toward `target_km2`. Returns converted
    /// parcel ids and the unmet area, if any.
    pub fn step(&mut self, target_km2: T, params: &CaParams<T>, rng: &mut ChaCha8Rng) -> Result<(Vec<u64>, Option<T>)> {
        if self.realized_km2 >= target_km2 {
            return Ok((Vec::new(), None));
        }
        let mut ranked: Vec<(usize, T)> =
            self.scores(params, rng)?.into_iter().filter(|&(_, s)| s > params.p_threshold).collect();
        // local order follows canonical order, which is parcel id order
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut converted = Vec::new();
        for (l, _) in ranked {
            if self.realized_km2 >= target_km2 {
                break;
            }
            let p = &self.parcels[self.members[l]];
            self.urban[l] = true;
            self.realized_km2 = self.realized_km2 + p.area_km2();
            converted.push(p.parcel_id);
        }
        let shortfall = (self.realized_km2 < target_km2).then(|| target_km2 - self.realized_km2);
        Ok((converted, shortfall))
    }
}

/// Run every city for the scenario horizon.
pub fn simulate<T: Scalar>(
    cities: &[CityRecord<T>],
    parcels: &ParcelSet<T>,
    graph: &NeighborGraph,
    scenario: &ScenarioSpec<T>,
    params: &CaParams<T>,
) -> Result<SimulationResult<T>> {
    let current = parcels.digest();
    if graph.digest() != current {
        return Err(Error::StaleCache { stored: graph.digest().to_string(), current });
    }
    if graph.parcel_count() != parcels.len() {
        return Err(Error::State("graph and parcel set sizes differ".into()));
    }
    params.validate()?;
    scenario.validate()?;

    let mut by_city: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for c in cities {
        c.validate()?;
        if by_city.insert(c.city_id.as_str(), Vec::new()).is_some() {
            return Err(Error::data(format!("city {}", c.city_id), "duplicate city id"));
        }
    }
    for (i, p) in parcels.iter().enumerate() {
        by_city
            .get_mut(p.city_id.as_str())
            .ok_or_else(|| Error::data(format!("parcel {}", p.parcel_id), format!("unknown city '{}'", p.city_id)))?
            .push(i);
    }
    let mut ordered: Vec<&CityRecord<T>> = cities.iter().collect();
    ordered.sort_by(|a, b| a.city_id.cmp(&b.city_id));

    let results = ordered
        .par_iter()
        .map(|city| {
            let members = by_city[city.city_id.as_str()].clone();
            simulate_city(city, parcels, graph, members, scenario, params)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimulationResult {
        scenario: scenario.kind,
        horizon_years: scenario.horizon_years,
        rng_seed: params.rng_seed,
        cities: results,
    })
}

fn simulate_city<T: Scalar>(
    city: &CityRecord<T>,
    parcels: &ParcelSet<T>,
    graph: &NeighborGraph,
    members: Vec<usize>,
    scenario: &ScenarioSpec<T>,
    params: &CaParams<T>,
) -> Result<CityResult<T>> {
    let rate = scenario.rate(city)?;
    let list = parcels.as_slice();
    let initial_parcel_urban_km2 =
        members.iter().filter(|&&i| list[i].state.is_urban()).map(|&i| list[i].area_km2()).fold(T::zero(), |a, b| a + b);
    let max_parcel_area_km2 = members.iter().map(|&i| list[i].area_km2()).fold(T::zero(), |a, b| a.max(b));
    let mut state = CityState::new(parcels, graph, members, &params.coefficients, city.urban_area_2012)?;
    let mut rng = city_rng(params.rng_seed, &city.city_id);
    let mut years = Vec::with_capacity(scenario.horizon_years as usize);
    for (t, target) in target_areas(city, rate, scenario.horizon_years).into_iter().enumerate() {
        let (converted, shortfall_km2) = state.step(target, params, &mut rng)?;
        if let Some(s) = shortfall_km2 {
            log::warn!("city {} year {}: quota shortfall of {} km²", city.city_id, t + 1, s);
        }
        years.push(YearOutcome {
            year: t as u32 + 1,
            target_km2: target,
            realized_km2: state.realized_km2(),
            converted,
            shortfall_km2,
        });
    }
    Ok(CityResult {
        city_id: city.city_id.clone(),
        rate,
        initial_area_km2: city.urban_area_2012,
        initial_parcel_urban_km2,
        max_parcel_area_km2,
        years,
        final_urban: state.urban_ids(),
    })
}
