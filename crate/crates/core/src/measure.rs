//! Discrete probability measures on ℝᵈ.
//!
//! A [`DiscreteMeasure`] is a weighted point cloud. It stands for the data
//! measure being approximated and for every discretized candidate measure
//! the solver produces. Weights are normalized to total mass one on
//! construction unless a raw constructor is used.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the declared total mass before a renormalization warning is logged.
pub const MASS_TOL: f64 = 1e-12;

/// A point of ℝᵈ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        dist_sq(&self.0, &other.0)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|c| c * s).collect())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `|x - y|^p`, with the square root skipped for `p == 2`.
pub(crate) fn cost_pow(a: &[f64], b: &[f64], p: f64) -> f64 {
    let d2 = dist_sq(a, b);
    if p == 2.0 {
        d2
    } else if p == 1.0 {
        d2.sqrt()
    } else {
        d2.sqrt().powf(p)
    }
}

/// Weighted point cloud in ℝᵈ.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a probability measure: zero weights are pruned and the rest
    /// normalized to sum to one.
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let raw = Self::new_raw(points, weights)?;
        raw.normalized()
    }

    /// Builds a measure without normalizing; total mass is whatever the weights sum to.
    pub fn new_raw(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Malformed(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points.first().map(Point::dim).unwrap_or(0);
        for (i, (p, &w)) in points.iter().zip(&weights).enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::NegativeWeight { index: i, value: w });
            }
        }
        Ok(DiscreteMeasure {
            dim,
            points,
            weights,
        })
    }

    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn dirac(point: Point) -> Self {
        DiscreteMeasure {
            dim: point.dim(),
            points: vec![point],
            weights: vec![1.0],
        }
    }

    /// Unchecked constructor for internally produced data; allows empty measures.
    pub(crate) fn from_parts(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), weights.len());
        DiscreteMeasure { dim, points, weights }
    }

    /// Prunes zero weights and rescales to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        let keep: Vec<bool> = self.weights.iter().map(|&w| w > 0.0).collect();
        if keep.iter().any(|k| !k) {
            let mut it = keep.iter();
            self.points.retain(|_| *it.next().unwrap());
            self.weights.retain(|&w| w > 0.0);
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.is_empty() || total <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        if (total - 1.0).abs() > MASS_TOL {
            log::debug!("renormalizing measure with total mass {total}");
        }
        for w in &mut self.weights {
            *w /= total;
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted barycenter (the 2-mean).
    pub fn mean(&self) -> Point {
        let mut m = vec![0.0; self.dim];
        let total = self.total_mass();
        for (p, w) in self.iter() {
            for (acc, c) in m.iter_mut().zip(p.coords()) {
                *acc += w * c;
            }
        }
        Point(m.into_iter().map(|c| c / total).collect())
    }

    /// Diameter of the support.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                best = best.max(self.points[i].dist_sq(&self.points[j]));
            }
        }
        best.sqrt()
    }

    /// Merges coincident points, summing their weights. Order of first occurrence is kept.
    pub fn merge_coincident(&self, tol: f64) -> DiscreteMeasure {
        let mut points: Vec<Point> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let tol_sq = tol * tol;
        for (p, w) in self.iter() {
            match points.iter().position(|q| q.dist_sq(p) <= tol_sq) {
                Some(k) => weights[k] += w,
                None => {
                    points.push(p.clone());
                    weights.push(w);
                }
            }
        }
        DiscreteMeasure {
            dim: self.dim,
            points,
            weights,
        }
    }

    fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        Ok(())
    }
}

/// On-disk JSON layout of a measure.
#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureFile {
    pub dimension: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MeasureFile {
    pub fn into_measure(self, raw: bool) -> Result<DiscreteMeasure> {
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != self.dimension {
                return Err(Error::Malformed(format!(
                    "point {i} has {} coordinates, expected {}",
                    p.len(),
                    self.dimension
                )));
            }
        }
        let n = self.points.len();
        let weights = self.weights.unwrap_or_else(|| vec![1.0; n]);
        if weights.len() != n {
            return Err(Error::Malformed(format!(
                "{} points but {} weights",
                n,
                weights.len()
            )));
        }
        let points = self.points.into_iter().map(Point).collect();
        if raw {
            DiscreteMeasure::new_raw(points, weights)
        } else {
            DiscreteMeasure::new(points, weights)
        }
    }
}

impl From<&DiscreteMeasure> for MeasureFile {
    fn from(m: &DiscreteMeasure) -> Self {
        MeasureFile {
            dimension: m.dim,
            points: m.points.iter().map(|p| p.0.clone()).collect(),
            weights: Some(m.weights.clone()),
        }
    }
}

/// Where to read a measure from.
#[derive(Debug, Clone)]
pub enum MeasureSource<'a> {
    Path(&'a Path),
    /// Inline JSON in the measure-file layout.
    Inline(&'a str),
}

/// Reads a measure from a `.json` or `.csv` file, or from inline JSON.
///
/// CSV input needs a header row; a last column named `weight` (or `w`)
/// carries weights, otherwise points are equally weighted.
pub fn load_measure(source: MeasureSource<'_>, raw: bool) -> Result<DiscreteMeasure> {
    match source {
        MeasureSource::Inline(text) => parse_measure_json(text, raw),
        MeasureSource::Path(path) => {
            let is_csv = path
                .extension()
                .map(|e| e.eq_ignore_ascii_case("csv"))
                .unwrap_or(false);
            let text = std::fs::read_to_string(path)?;
            if is_csv {
                parse_measure_csv(&text, raw)
            } else {
                parse_measure_json(&text, raw)
            }
        }
    }
}

pub fn parse_measure_json(text: &str, raw: bool) -> Result<DiscreteMeasure> {
    let file: MeasureFile = serde_json::from_str(text)?;
    file.into_measure(raw)
}

pub fn parse_measure_csv(text: &str, raw: bool) -> Result<DiscreteMeasure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Malformed("csv header row is empty".into()));
    }
    let has_weight = headers
        .iter()
        .last()
        .map(|h| h.eq_ignore_ascii_case("weight") || h.eq_ignore_ascii_case("w"))
        .unwrap_or(false);
    let dim = if has_weight {
        headers.len() - 1
    } else {
        headers.len()
    };
    if dim == 0 {
        return Err(Error::Malformed("csv has no coordinate columns".into()));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Malformed(format!(
                "row {} has {} fields, expected {}",
                row + 1,
                record.len(),
                headers.len()
            )));
        }
        let values: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(col, s)| {
                s.parse::<f64>().map_err(|_| {
                    Error::Malformed(format!("row {} column {}: cannot parse {s:?}", row + 1, col + 1))
                })
            })
            .collect::<Result<_>>()?;
        let (coords, w) = if has_weight {
            (values[..dim].to_vec(), values[dim])
        } else {
            (values, 1.0)
        };
        points.push(Point(coords));
        weights.push(w);
    }
    if raw {
        DiscreteMeasure::new_raw(points, weights)
    } else {
        DiscreteMeasure::new(points, weights)
    }
}

/// Writes the measure as JSON with 17 significant digits per value.
pub fn save_measure(measure: &DiscreteMeasure, path: &Path) -> Result<()> {
    let text = crate::io::to_json_string(&MeasureFile::from(measure))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Supported sampling families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DensitySpec {
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    UniformSegment { a: Vec<f64>, b: Vec<f64> },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub spec: DensitySpec,
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::UniformBox { lo, .. } => lo.len(),
            DensitySpec::Gaussian { mean, .. } => mean.len(),
            DensitySpec::UniformSegment { a, .. } => a.len(),
            DensitySpec::Mixture { components } => {
                components.first().map(|c| c.spec.dim()).unwrap_or(0)
            }
        }
    }

    /// Isotropic Gaussian with the given standard deviation.
    pub fn isotropic_gaussian(mean: Vec<f64>, std: f64) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { std * std } else { 0.0 }).collect())
            .collect();
        DensitySpec::Gaussian { mean, cov }
    }
}

enum Sampler {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        chol: nalgebra::DMatrix<f64>,
    },
    Segment {
        a: Point,
        b: Point,
    },
    Mixture {
        index: WeightedIndex<f64>,
        parts: Vec<Sampler>,
    },
}

impl Sampler {
    fn build(spec: &DensitySpec) -> Result<Sampler> {
        let dim = spec.dim();
        if dim == 0 {
            return Err(Error::InvalidParameter("zero-dimensional density".into()));
        }
        match spec {
            DensitySpec::UniformBox { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        found: hi.len(),
                    });
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
                    return Err(Error::InvalidParameter("box needs lo <= hi".into()));
                }
                Ok(Sampler::Box {
                    lo: lo.clone(),
                    hi: hi.clone(),
                })
            }
            DensitySpec::Gaussian { mean, cov } => {
                if cov.len() != dim || cov.iter().any(|row| row.len() != dim) {
                    return Err(Error::InvalidParameter(format!(
                        "covariance must be {dim}x{dim}"
                    )));
                }
                let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| cov[i][j]);
                if (&m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
                    return Err(Error::InvalidParameter("covariance is not symmetric".into()));
                }
                let chol = nalgebra::Cholesky::new(m).ok_or_else(|| {
                    Error::InvalidParameter("covariance is not positive definite".into())
                })?;
                Ok(Sampler::Gaussian {
                    mean: mean.clone(),
                    chol: chol.l(),
                })
            }
            DensitySpec::UniformSegment { a, b } => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch {
                        expected: a.len(),
                        found: b.len(),
                    });
                }
                Ok(Sampler::Segment {
                    a: Point(a.clone()),
                    b: Point(b.clone()),
                })
            }
            DensitySpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("mixture without components".into()));
                }
                if components.iter().any(|c| c.spec.dim() != dim) {
                    return Err(Error::InvalidParameter(
                        "mixture components differ in dimension".into(),
                    ));
                }
                let index = WeightedIndex::new(components.iter().map(|c| c.weight))
                    .map_err(|e| Error::InvalidParameter(format!("mixture weights: {e}")))?;
                let parts = components
                    .iter()
                    .map(|c| Sampler::build(&c.spec))
                    .collect::<Result<_>>()?;
                Ok(Sampler::Mixture { index, parts })
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Point {
        match self {
            Sampler::Box { lo, hi } => Point(
                lo.iter()
                    .zip(hi)
                    .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                    .collect(),
            ),
            Sampler::Gaussian { mean, chol } => {
                let d = mean.len();
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                Point(
                    (0..d)
                        .map(|i| mean[i] + (0..=i).map(|j| chol[(i, j)] * z[j]).sum::<f64>())
                        .collect(),
                )
            }
            Sampler::Segment { a, b } => a.lerp(b, rng.random::<f64>()),
            Sampler::Mixture { index, parts } => parts[index.sample(rng)].draw(rng),
        }
    }
}

/// Draws `n` equally weighted points from the given family. Deterministic in `seed`.
pub fn sample_density(spec: &DensitySpec, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let sampler = Sampler::build(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| sampler.draw(&mut rng)).collect();
    DiscreteMeasure::uniform(points)
}

/// `Σᵢ wᵢ |xᵢ − y|^p`.
pub fn p_moment_cost(rho: &DiscreteMeasure, y: &Point, p: f64) -> Result<f64> {
    rho.check_dim(y)?;
    Ok(moment(rho, y.coords(), p))
}

fn moment(rho: &DiscreteMeasure, y: &[f64], p: f64) -> f64 {
    rho.iter().map(|(x, w)| w * cost_pow(x.coords(), y, p)).sum()
}

const P_MEAN_MAX_ITERS: usize = 20_000;
const WEISZFELD_EPS: f64 = 1e-9;

/// A minimizer of `y ↦ Σᵢ wᵢ |xᵢ − y|^p`.
///
/// `p = 2` is the weighted mean. `p = 1` runs a smoothed Weiszfeld iteration
/// and also tries every support point, since geometric medians frequently
/// sit on data points. Other exponents use gradient descent with Armijo
/// backtracking from the mean.
pub fn p_mean(rho: &DiscreteMeasure, p: f64, tol: f64) -> Result<Point> {
    if rho.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must be >= 1")));
    }
    if p == 2.0 {
        return Ok(rho.mean());
    }
    if rho.len() == 1 {
        return Ok(rho.points()[0].clone());
    }
    if p == 1.0 {
        weiszfeld(rho, tol)
    } else {
        gradient_descent(rho, p, tol)
    }
}

fn weiszfeld(rho: &DiscreteMeasure, tol: f64) -> Result<Point> {
    let d = rho.dim();
    let mut y = rho.mean().0;
    let mut fy = moment(rho, &y, 1.0);
    let mut converged = false;
    for _ in 0..P_MEAN_MAX_ITERS {
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        for (x, w) in rho.iter() {
            let r = (dist_sq(x.coords(), &y) + WEISZFELD_EPS * WEISZFELD_EPS).sqrt();
            let c = w / r;
            den += c;
            for (acc, xc) in num.iter_mut().zip(x.coords()) {
                *acc += c * xc;
            }
        }
        let target: Vec<f64> = num.iter().map(|v| v / den).collect();
        // damping: halve the step until the objective does not increase
        let mut step = 1.0;
        let mut next = target.clone();
        let mut fnext = moment(rho, &next, 1.0);
        while fnext > fy && step > 1e-6 {
            step *= 0.5;
            next = y.iter().zip(&target).map(|(a, b)| a + step * (b - a)).collect();
            fnext = moment(rho, &next, 1.0);
        }
        let decrease = fy - fnext;
        if fnext <= fy {
            y = next;
            fy = fnext;
        }
        if decrease <= tol * 1e-3 {
            converged = true;
            break;
        }
    }
    // a support point may beat the smoothed limit
    if rho.len() <= 4096 {
        for x in rho.points() {
            let fx = moment(rho, x.coords(), 1.0);
            if fx < fy {
                fy = fx;
                y = x.0.clone();
                converged = true;
            }
        }
    }
    if converged {
        Ok(Point(y))
    } else {
        Err(Error::NoConvergence {
            iterations: P_MEAN_MAX_ITERS,
            best_point: y,
            best_value: fy,
        })
    }
}

fn gradient_descent(rho: &DiscreteMeasure, p: f64, tol: f64) -> Result<Point> {
    let d = rho.dim();
    let mut y = rho.mean().0;
    let mut fy = moment(rho, &y, p);
    let mut step = 1.0;
    for _ in 0..P_MEAN_MAX_ITERS {
        let mut grad = vec![0.0; d];
        for (x, w) in rho.iter() {
            let r = dist_sq(x.coords(), &y).sqrt();
            if r == 0.0 {
                continue;
            }
            let c = w * p * r.powf(p - 2.0);
            for ((g, yc), xc) in grad.iter_mut().zip(&y).zip(x.coords()) {
                *g += c * (yc - xc);
            }
        }
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 {
            return Ok(Point(y));
        }
        let mut accepted = false;
        step *= 2.0;
        while step > 1e-16 {
            let cand: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let fc = moment(rho, &cand, p);
            if fc <= fy - 1e-4 * step * gnorm2 {
                let decrease = fy - fc;
                y = cand;
                fy = fc;
                accepted = true;
                if decrease <= tol * 1e-3 {
                    return Ok(Point(y));
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Ok(Point(y));
        }
    }
    Err(Error::NoConvergence {
        iterations: P_MEAN_MAX_ITERS,
        best_point: y,
        best_value: fy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            points.iter().map(|&x| Point(vec![x])).collect(),
            weights.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn loads_two_dirac_json() {
        let m = parse_measure_json(r#"{"dimension":1,"points":[[-1],[1]],"weights":[0.5,0.5]}"#, false)
            .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert_eq!(m.points()[0], Point(vec![-1.0]));
    }

    #[test]
    fn single_atom_and_normalization() {
        let m = parse_measure_json(r#"{"dimension":2,"points":[[3,4]],"weights":[1]}"#, false).unwrap();
        assert_eq!(m.weights(), &[1.0]);
        let m = parse_measure_json(r#"{"dimension":1,"points":[[0],[1]],"weights":[1,3]}"#, false)
            .unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        let raw = parse_measure_json(r#"{"dimension":1,"points":[[0],[1]],"weights":[1,3]}"#, true)
            .unwrap();
        assert_eq!(raw.total_mass(), 4.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let neg = parse_measure_json(r#"{"dimension":1,"points":[[0],[1]],"weights":[1,-3]}"#, false);
        assert!(matches!(neg, Err(Error::NegativeWeight { index: 1, .. })));
        let dim = parse_measure_json(r#"{"dimension":2,"points":[[0,1],[1]]}"#, false);
        assert!(matches!(dim, Err(Error::Malformed(_))));
        assert!(parse_measure_json("{not json", false).is_err());
    }

    #[test]
    fn zero_weights_are_pruned() {
        let m = line(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn csv_with_and_without_weights() {
        let m = parse_measure_csv("x,y,weight\n0,0,1\n1,0,3\n", false).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.weights(), &[0.25, 0.75]);
        let m = parse_measure_csv("x,y\n0,0\n1,0\n", false).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert!(parse_measure_csv("x,y\n0,zz\n", false).is_err());
    }

    #[test]
    fn sampling_families() {
        let bx = DensitySpec::UniformBox {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        let m = sample_density(&bx, 4, 7).unwrap();
        assert_eq!(m.weights(), &[0.25; 4]);
        assert!(m
            .points()
            .iter()
            .all(|p| p.coords().iter().all(|&c| (0.0..=1.0).contains(&c))));
        assert_eq!(m, sample_density(&bx, 4, 7).unwrap());

        let g = DensitySpec::isotropic_gaussian(vec![0.0, 0.0], 1.0);
        let m = sample_density(&g, 1000, 1).unwrap();
        for c in m.mean().coords() {
            assert!(c.abs() < 0.1, "empirical mean {c}");
        }

        let seg = DensitySpec::UniformSegment {
            a: vec![0.0, 0.0],
            b: vec![1.0, 0.0],
        };
        let m = sample_density(&seg, 10, 3).unwrap();
        assert!(m.points().iter().all(|p| p.coords()[1] == 0.0));

        let mix = DensitySpec::Mixture {
            components: vec![
                MixtureComponent { weight: 1.0, spec: bx.clone() },
                MixtureComponent { weight: 2.0, spec: seg.clone() },
            ],
        };
        assert_eq!(sample_density(&mix, 50, 9).unwrap().len(), 50);
    }

    #[test]
    fn sampling_errors() {
        let bad = DensitySpec::Gaussian {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
        };
        assert!(matches!(sample_density(&bad, 3, 0), Err(Error::InvalidParameter(_))));
        let bad_json: std::result::Result<DensitySpec, _> =
            serde_json::from_str(r#"{"family":"cauchy"}"#);
        assert!(bad_json.is_err());
        let bx = DensitySpec::UniformBox { lo: vec![0.0], hi: vec![1.0] };
        assert!(sample_density(&bx, 0, 0).is_err());
    }

    #[test]
    fn moment_costs() {
        let two = line(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(p_moment_cost(&two, &Point(vec![0.0]), 2.0).unwrap(), 1.0);
        assert_eq!(p_moment_cost(&two, &Point(vec![0.5]), 1.0).unwrap(), 1.0);
        let a = DiscreteMeasure::dirac(Point(vec![2.0, -1.0]));
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(p_moment_cost(&a, &Point(vec![2.0, -1.0]), p).unwrap(), 0.0);
        }
        assert!(matches!(
            p_moment_cost(&two, &Point(vec![0.0, 0.0]), 2.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn p_means_on_small_examples() {
        let two = line(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(p_mean(&two, 2.0, 1e-9).unwrap(), Point(vec![0.0]));
        let a = DiscreteMeasure::dirac(Point(vec![3.0]));
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert_eq!(p_mean(&a, p, 1e-9).unwrap(), Point(vec![3.0]));
        }
    }

    #[test]
    fn weighted_median_matches_grid_search() {
        // oracle: brute-force grid over [0, 10] at step 1e-4
        let rho = line(&[0.0, 1.0, 10.0], &[1.0, 1.0, 1.0]);
        let (mut best_y, mut best_f) = (0.0, f64::INFINITY);
        for k in 0..=100_000 {
            let y = k as f64 * 1e-4;
            let f = p_moment_cost(&rho, &Point(vec![y]), 1.0).unwrap();
            if f < best_f {
                best_f = f;
                best_y = y;
            }
        }
        assert!((best_y - 1.0).abs() < 1e-9);
        let m = p_mean(&rho, 1.0, 1e-9).unwrap();
        assert!((m.coords()[0] - 1.0).abs() < 1e-6);
        assert!(p_moment_cost(&rho, &m, 1.0).unwrap() <= best_f + 1e-9);
    }

    #[test]
    fn p_mean_with_ties_compares_objective() {
        // 1-means of two equal atoms form the whole segment between them
        let rho = line(&[0.0, 2.0], &[1.0, 1.0]);
        let m = p_mean(&rho, 1.0, 1e-9).unwrap();
        assert!((p_moment_cost(&rho, &m, 1.0).unwrap() - 1.0).abs() < 1e-9);
    }
}
