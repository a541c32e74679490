//! Local-potential model: parcel features, the logistic link, and
//! maximum-likelihood fitting from labelled expansion samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_km, ExclusionSet};
use crate::parcel::{ParcelRecord, ParcelSet};
use crate::scalar::Scalar;
use crate::scenario::CityRecord;

pub const FEATURE_NAMES: [&str; 4] = ["size_ln", "compact", "center_km", "density_std"];

/// Inputs to the local potential, in the fixed order of [`FEATURE_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    /// ln(parcel area in hectares)
    pub size_ln: T,
    /// perimeter² / area
    pub compact: T,
    /// distance from parcel centroid to city centre, km
    pub center_km: T,
    /// log-standardized POI density in [0, 1]
    pub density_std: T,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(size_ln: T, compact: T, center_km: T, density_std: T) -> Self {
        FeatureVector { size_ln, compact, center_km, density_std }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.size_ln, self.compact, self.center_km, self.density_std]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        FeatureVector::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeUnit {
    /// ln of parcel area in hectares
    #[default]
    LnHectares,
}

/// Logistic coefficients, bound to the feature order of [`FeatureVector`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients<T> {
    pub a0: T,
    pub size_ln: T,
    pub compact: T,
    pub center_km: T,
    pub density_std: T,
    #[serde(default)]
    pub size_unit: SizeUnit,
}

impl<T: Scalar> Default for Coefficients<T> {
    /// Beijing parcel calibration, applied to every city.
    fn default() -> Self {
        Coefficients {
            a0: T::lit(2.224),
            size_ln: T::lit(-0.197),
            compact: T::lit(1.933),
            center_km: T::lit(-0.101),
            density_std: T::lit(2.230),
            size_unit: SizeUnit::LnHectares,
        }
    }
}

impl<T: Scalar> Coefficients<T> {
    pub fn zero() -> Self {
        Coefficients::from_vec(&[T::zero(); 5])
    }

    /// `[a0, size_ln, compact, center_km, density_std]`
    pub fn to_vec(&self) -> [T; 5] {
        [self.a0, self.size_ln, self.compact, self.center_km, self.density_std]
    }

    pub fn from_vec(v: &[T]) -> Self {
        Coefficients {
            a0: v[0],
            size_ln: v[1],
            compact: v[2],
            center_km: v[3],
            density_std: v[4],
            size_unit: SizeUnit::LnHectares,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    pub fn linear(&self, f: &FeatureVector<T>) -> T {
        self.a0
            + self.size_ln * f.size_ln
            + self.compact * f.compact
            + self.center_km * f.center_km
            + self.density_std * f.density_std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample<T> {
    pub features: FeatureVector<T>,
    pub expanded: bool,
}

/// `log(raw) / log(max)`, with raw densities at or below 1 mapped to 0.
pub fn standardize_density<T: Scalar>(raw: T, max: T) -> Result<T> {
    if !(max > T::one()) || !max.is_finite() {
        return Err(Error::Config(format!("maximum density must exceed 1, got {max}")));
    }
    if !raw.is_finite() || raw < T::zero() {
        return Err(Error::Domain(format!("raw density must be finite and non-negative, got {raw}")));
    }
    if raw <= T::one() {
        return Ok(T::zero());
    }
    Ok((raw.ln() / max.ln()).max(T::zero()).min(T::one()))
}

pub fn extract_features<T: Scalar>(p: &ParcelRecord<T>, city: &CityRecord<T>, max_density: T) -> Result<FeatureVector<T>> {
    let hectares = p.polygon.area() / T::lit(1e4);
    Ok(FeatureVector {
        size_ln: hectares.ln(),
        compact: p.polygon.compactness(),
        center_km: distance_km(p.polygon.centroid(), city.center),
        density_std: standardize_density(p.raw_density, max_density).map_err(|e| match e {
            Error::Domain(m) => Error::data(format!("parcel {}", p.parcel_id), m),
            other => other,
        })?,
    })
}

/// Largest raw density in the set, the normalizer for [`standardize_density`].
pub fn max_density<T: Scalar>(parcels: &ParcelSet<T>) -> T {
    parcels.iter().map(|p| p.raw_density).fold(T::zero(), |a, b| a.max(b))
}

/// Fill cached features and exclusion flags for every parcel.
pub fn prepare_parcels<T: Scalar>(
    parcels: &mut ParcelSet<T>,
    cities: &[CityRecord<T>],
    exclusions: &ExclusionSet<T>,
    max_density: T,
    overlap_threshold: T,
) -> Result<()> {
    let by_id: std::collections::HashMap<&str, &CityRecord<T>> = cities.iter().map(|c| (c.city_id.as_str(), c)).collect();
    parcels.parcels_mut().par_iter_mut().try_for_each(|p| {
        let city = by_id
            .get(p.city_id.as_str())
            .ok_or_else(|| Error::data(format!("parcel {}", p.parcel_id), format!("unknown city '{}'", p.city_id)))?;
        p.features = Some(extract_features(p, city, max_density)?);
        p.excluded = exclusions.intersects(&p.polygon, overlap_threshold);
        Ok(())
    })
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Logistic local potential in (0, 1).
pub fn local_potential<T: Scalar>(f: &FeatureVector<T>, w: &Coefficients<T>) -> T {
    sigmoid(w.linear(f))
}

/// Dense design for a logistic fit: `rows` is row-major with `width`
/// columns, the first being the constant 1.
#[derive(Debug, Clone)]
pub struct Design<T> {
    width: usize,
    rows: Vec<T>,
    labels: Vec<bool>,
}

impl<T: Scalar> Design<T> {
    /// Prepends the intercept column to each feature row.
    pub fn new(features: &[Vec<T>], labels: &[bool]) -> Result<Self> {
        let k = features.first().map_or(0, Vec::len);
        if features.len() != labels.len() {
            return Err(Error::Domain("feature and label counts differ".into()));
        }
        let mut rows = Vec::with_capacity(features.len() * (k + 1));
        for (i, f) in features.iter().enumerate() {
            if f.len() != k {
                return Err(Error::Domain(format!("sample {i} has {} features, expected {k}", f.len())));
            }
            rows.push(T::one());
            rows.extend_from_slice(f);
        }
        Ok(Design { width: k + 1, rows, labels: labels.to_vec() })
    }

    pub fn from_samples(samples: &[CalibrationSample<T>]) -> Self {
        let mut rows = Vec::with_capacity(samples.len() * 5);
        for s in samples {
            rows.push(T::one());
            rows.extend_from_slice(&s.features.to_array());
        }
        Design { width: 5, rows, labels: samples.iter().map(|s| s.expanded).collect() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    /// Sum of log-likelihood, gradient, and negative Hessian, reduced in a
    /// fixed chunk order so results do not depend on thread count.
    fn accumulate(&self, beta: &[T], want_hessian: bool) -> (T, Vec<T>, Vec<T>) {
        let k = self.width;
        const CHUNK: usize = 4096;
        let parts: Vec<(T, Vec<T>, Vec<T>)> = (0..self.len())
            .into_par_iter()
            .step_by(CHUNK)
            .map(|start| {
                let end = (start + CHUNK).min(self.len());
                let mut ll = T::zero();
                let mut g = vec![T::zero(); k];
                let mut h = if want_hessian { vec![T::zero(); k * k] } else { Vec::new() };
                for i in start..end {
                    let x = self.row(i);
                    let z = x.iter().zip(beta).fold(T::zero(), |a, (&xi, &bi)| a + xi * bi);
                    ll = ll + log_likelihood_term(z, self.labels[i]);
                    let p = sigmoid(z);
                    let y = if self.labels[i] { T::one() } else { T::zero() };
                    let r = y - p;
                    for a in 0..k {
                        g[a] = g[a] + r * x[a];
                    }
                    if want_hessian {
                        let w = p * (T::one() - p);
                        for a in 0..k {
                            let wa = w * x[a];
                            for b in a..k {
                                h[a * k + b] = h[a * k + b] + wa * x[b];
                            }
                        }
                    }
                }
                (ll, g, h)
            })
            .collect();
        let mut ll = T::zero();
        let mut g = vec![T::zero(); k];
        let mut h = if want_hessian { vec![T::zero(); k * k] } else { Vec::new() };
        for (pl, pg, ph) in parts {
            ll = ll + pl;
            for a in 0..k {
                g[a] = g[a] + pg[a];
            }
            for (dst, src) in h.iter_mut().zip(ph) {
                *dst = *dst + src;
            }
        }
        if want_hessian {
            for a in 0..k {
                for b in 0..a {
                    h[a * k + b] = h[b * k + a];
                }
            }
        }
        (ll, g, h)
    }

    pub fn log_likelihood(&self, beta: &[T]) -> T {
        self.accumulate(beta, false).0
    }

    /// Gradient of [`Design::log_likelihood`].
    pub fn gradient(&self, beta: &[T]) -> Vec<T> {
        self.accumulate(beta, false).1
    }
}

/// `y·log σ(z) + (1−y)·log(1−σ(z))`, stable for large |z|.
fn log_likelihood_term<T: Scalar>(z: T, y: bool) -> T {
    // log σ(z) = -softplus(-z); log(1-σ(z)) = -softplus(z)
    let softplus = |v: T| {
        if v > T::zero() {
            v + (-v).exp().ln_1p()
        } else {
            v.exp().ln_1p()
        }
    };
    if y {
        -softplus(-z)
    } else {
        -softplus(z)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    /// L2 penalty on slopes (not the intercept). Zero gives plain MLE.
    pub ridge: T,
    /// Converged when every coefficient moves less than this.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions { ridge: T::zero(), tolerance: T::solver_tolerance(), max_iterations: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport<T> {
    /// Best iterate found, intercept first.
    pub beta: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: T,
    /// Infinity norm of the (penalized) score at `beta`.
    pub gradient_norm: T,
}

impl<T: Scalar> FitReport<T> {
    /// Coefficients for the four-feature model.
    pub fn coefficients(&self) -> Coefficients<T> {
        Coefficients::from_vec(&self.beta)
    }
}

/// Newton-Raphson (IRLS) maximum likelihood on an arbitrary design.
pub fn fit_design<T: Scalar>(d: &Design<T>, opts: &FitOptions<T>) -> Result<FitReport<T>> {
    let k = d.width();
    let positives = d.labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == d.len() {
        return Err(Error::Domain("need at least one sample of each label".into()));
    }
    for c in 1..k {
        let first = d.row(0)[c];
        if (0..d.len()).all(|i| d.row(i)[c] == first) {
            return Err(Error::Rank(format!("column {c} is constant across all samples")));
        }
    }
    let penalized = |beta: &[T], ll: T, g: &mut [T], h: Option<&mut [T]>| -> T {
        let mut pen = T::zero();
        if opts.ridge > T::zero() {
            for a in 1..k {
                pen = pen + opts.ridge * beta[a] * beta[a] / T::lit(2.0);
                g[a] = g[a] - opts.ridge * beta[a];
            }
            if let Some(h) = h {
                for a in 1..k {
                    h[a * k + a] = h[a * k + a] + opts.ridge;
                }
            }
        }
        ll - pen
    };

    let mut beta = vec![T::zero(); k];
    let (ll0, mut g, mut h) = d.accumulate(&beta, true);
    let mut obj = penalized(&beta, ll0, &mut g, Some(&mut h));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let step = match solve(&h, &g, k) {
            Some(s) => s,
            None if iterations == 1 => return Err(Error::Rank("information matrix is singular at the start point".into())),
            // information vanishes as coefficients diverge under separation
            None => break,
        };
        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + scale * s).collect();
            let (ll, mut tg, mut th) = d.accumulate(&trial, true);
            let tobj = penalized(&trial, ll, &mut tg, Some(&mut th));
            if tobj.is_finite() && tobj >= obj - obj.abs() * T::epsilon() * T::lit(16.0) {
                accepted = Some((trial, tobj, tg, th));
                break;
            }
            scale = scale / T::lit(2.0);
        }
        let Some((trial, tobj, tg, th)) = accepted else { break };
        let delta = beta.iter().zip(&trial).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        beta = trial;
        obj = tobj;
        g = tg;
        h = th;
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }
    let gradient_norm = g.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    Ok(FitReport { beta, converged, iterations, log_likelihood: obj, gradient_norm })
}

/// Fit the four-feature local-potential model.
pub fn fit_logistic<T: Scalar>(samples: &[CalibrationSample<T>], opts: &FitOptions<T>) -> Result<FitReport<T>> {
    fit_design(&Design::from_samples(samples), opts)
}

/// Fraction of samples where `potential > cutoff` agrees with the label.
pub fn classification_precision<T: Scalar>(w: &Coefficients<T>, samples: &[CalibrationSample<T>], cutoff: T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::UndefinedMetric("precision of an empty sample set".into()));
    }
    let hits = samples.iter().filter(|s| (local_potential(&s.features, w) > cutoff) == s.expanded).count();
    Ok(T::lit(hits as f64) / T::lit(samples.len() as f64))
}

/// Solve `h · x = g` by Gaussian elimination with partial pivoting.
fn solve<T: Scalar>(h: &[T], g: &[T], k: usize) -> Option<Vec<T>> {
    let mut a: Vec<T> = h.to_vec();
    let mut b: Vec<T> = g.to_vec();
    let scale = (0..k).fold(T::zero(), |m, i| m.max(a[i * k + i].abs()));
    if !(scale > T::zero()) {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(64.0);
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i * k + col].abs().partial_cmp(&a[j * k + col].abs()).unwrap())?;
        if !(a[piv * k + col].abs() > tiny) {
            return None;
        }
        if piv != col {
            for c in 0..k {
                a.swap(piv * k + c, col * k + c);
            }
            b.swap(piv, col);
        }
        for r in (col + 1)..k {
            let f = a[r * k + col] / a[col * k + col];
            for c in col..k {
                a[r * k + c] = a[r * k + c] - f * a[col * k + c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); k];
    for r in (0..k).rev() {
        let s = ((r + 1)..k).fold(b[r], |s, c| s - a[r * k + c] * x[c]);
        x[r] = s / a[r * k + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
