//! Kernel density estimation, Nadaraya-Watson regression and conditional
//! CDF estimation for continuous, binary and multi-category instruments,
//! plus the sample and curve containers they operate on.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::par;
use crate::stats;

/// Floor guarding divisions by estimated densities. Estimated densities may
/// vanish even where the population density is bounded away from zero.
pub const EPS_DENSITY: f64 = 1e-10;

/// Instrument observations: either raw continuous values or small-integer
/// category codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Instrument {
    Continuous(Vec<f64>),
    Discrete {
        codes: Vec<usize>,
        categories: usize,
    },
}

impl Instrument {
    /// Discrete instrument from codes; infers the category count and
    /// requires every category 0..L−1 nonempty.
    pub fn discrete(codes: Vec<usize>) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::DegenerateSample("empty instrument".into()));
        }
        let categories = codes.iter().max().unwrap() + 1;
        let mut counts = vec![0usize; categories];
        for &c in &codes {
            counts[c] += 1;
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::MissingCategory(missing));
        }
        Ok(Instrument::Discrete { codes, categories })
    }

    pub fn continuous(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample(
                "non-finite instrument value".into(),
            ));
        }
        Ok(Instrument::Continuous(values))
    }

    pub fn len(&self) -> usize {
        match self {
            Instrument::Continuous(v) => v.len(),
            Instrument::Discrete { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Instrument::Discrete { .. })
    }

    /// Number of categories (discrete only).
    pub fn categories(&self) -> Option<usize> {
        match self {
            Instrument::Discrete { categories, .. } => Some(*categories),
            Instrument::Continuous(_) => None,
        }
    }

    pub fn codes(&self) -> Option<&[usize]> {
        match self {
            Instrument::Discrete { codes, .. } => Some(codes),
            Instrument::Continuous(_) => None,
        }
    }

    pub fn continuous_values(&self) -> Option<&[f64]> {
        match self {
            Instrument::Continuous(v) => Some(v),
            Instrument::Discrete { .. } => None,
        }
    }

    /// Observation i as a real number (codes cast for discrete instruments).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Instrument::Continuous(v) => v[i],
            Instrument::Discrete { codes, .. } => codes[i] as f64,
        }
    }

    /// Per-category observation counts (discrete only).
    pub fn category_counts(&self) -> Option<Vec<usize>> {
        match self {
            Instrument::Discrete { codes, categories } => {
                let mut counts = vec![0usize; *categories];
                for &c in codes {
                    counts[c] += 1;
                }
                Some(counts)
            }
            Instrument::Continuous(_) => None,
        }
    }
}

/// Minimum usable sample size.
pub const MIN_SAMPLE: usize = 10;

/// An observed IID sample of (y, z, w) triplets with an optional binary
/// covariate x.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    y: Vec<f64>,
    z: Vec<f64>,
    w: Instrument,
    x: Option<Vec<u8>>,
}

impl Sample {
    pub fn new(y: Vec<f64>, z: Vec<f64>, w: Instrument, x: Option<Vec<u8>>) -> Result<Self> {
        let n = y.len();
        if n < MIN_SAMPLE {
            return Err(Error::DegenerateSample(format!(
                "need at least {MIN_SAMPLE} observations, got {n}"
            )));
        }
        if z.len() != n {
            return Err(Error::ShapeMismatch {
                what: "z",
                expected: n,
                got: z.len(),
            });
        }
        if w.len() != n {
            return Err(Error::ShapeMismatch {
                what: "w",
                expected: n,
                got: w.len(),
            });
        }
        if let Some(x) = &x {
            if x.len() != n {
                return Err(Error::ShapeMismatch {
                    what: "x",
                    expected: n,
                    got: x.len(),
                });
            }
            if x.iter().any(|&v| v > 1) {
                return Err(Error::DegenerateSample("x must be 0/1".into()));
            }
        }
        if y.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite y or z entry".into()));
        }
        if let Instrument::Continuous(v) = &w {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::DegenerateSample("non-finite w entry".into()));
            }
        }
        Ok(Self { y, z, w, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn w(&self) -> &Instrument {
        &self.w
    }

    pub fn x(&self) -> Option<&[u8]> {
        self.x.as_deref()
    }

    /// Default evaluation grid: `points` equispaced values spanning the
    /// observed z-range.
    pub fn default_grid(&self, points: usize) -> Result<Vec<f64>> {
        let lo = self.z.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::DegenerateSample(
                "z has no spread; cannot build a grid".into(),
            ));
        }
        Ok(linspace(lo, hi, points))
    }

    /// Split by the binary covariate; errors when either stratum is too
    /// small to estimate on.
    pub fn stratify_by_x(&self) -> Result<(Sample, Sample)> {
        let x = self.x.as_ref().ok_or_else(|| {
            Error::InvalidConfig("sample has no x covariate to stratify on".into())
        })?;
        let mut parts: [(Vec<f64>, Vec<f64>, Vec<usize>, Vec<f64>); 2] = Default::default();
        for i in 0..self.n() {
            let s = x[i] as usize;
            parts[s].0.push(self.y[i]);
            parts[s].1.push(self.z[i]);
            match &self.w {
                Instrument::Discrete { codes, .. } => parts[s].2.push(codes[i]),
                Instrument::Continuous(v) => parts[s].3.push(v[i]),
            }
        }
        for (stratum, p) in parts.iter().enumerate() {
            let n = p.0.len();
            if n < MIN_SAMPLE {
                return Err(Error::InsufficientStratum {
                    stratum: stratum as u8,
                    n,
                    needed: MIN_SAMPLE,
                });
            }
        }
        let mk = |p: (Vec<f64>, Vec<f64>, Vec<usize>, Vec<f64>)| -> Result<Sample> {
            let w = if self.w.is_discrete() {
                Instrument::discrete(p.2)?
            } else {
                Instrument::continuous(p.3)?
            };
            Sample::new(p.0, p.1, w, None)
        };
        let [p0, p1] = parts;
        Ok((mk(p0)?, mk(p1)?))
    }
}

/// `count` equispaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "a grid needs at least two points");
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect()
}

/// Default number of grid points for curve estimates.
pub const DEFAULT_GRID_POINTS: usize = 101;

/// A function estimate: values on a strictly increasing grid plus values at
/// the sample's z-points.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    grid: Vec<f64>,
    values: Vec<f64>,
    at_sample: Vec<f64>,
}

impl CurveEstimate {
    /// Build from exact evaluations at both the grid and the sample points.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, at_sample: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                what: "curve values",
                expected: grid.len(),
                got: values.len(),
            });
        }
        if !grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig(
                "curve grid must be strictly increasing".into(),
            ));
        }
        if values.iter().chain(at_sample.iter()).any(|v| !v.is_finite())
            || grid.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Numerical("non-finite curve entry".into()));
        }
        Ok(Self {
            grid,
            values,
            at_sample,
        })
    }

    /// Build from grid values only; sample-point values are filled in by
    /// linear interpolation (clamped at the grid ends).
    pub fn from_grid(grid: Vec<f64>, values: Vec<f64>, z: &[f64]) -> Result<Self> {
        let partial = Self::new(grid, values, Vec::new())?;
        let at_sample = z.iter().map(|&zi| partial.interp(zi)).collect();
        Self::new(partial.grid, partial.values, at_sample)
    }

    /// The zero function on `grid` for a sample of size `n`.
    pub fn zero(grid: Vec<f64>, n: usize) -> Result<Self> {
        let values = vec![0.0; grid.len()];
        Self::new(grid, values, vec![0.0; n])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_sample(&self) -> &[f64] {
        &self.at_sample
    }

    /// Linear interpolation on the grid, constant beyond its ends.
    pub fn interp(&self, z: f64) -> f64 {
        let g = &self.grid;
        let v = &self.values;
        if z <= g[0] {
            return v[0];
        }
        if z >= g[g.len() - 1] {
            return v[v.len() - 1];
        }
        let idx = match g.binary_search_by(|p| p.partial_cmp(&z).unwrap()) {
            Ok(i) => return v[i],
            Err(i) => i,
        };
        let (z0, z1) = (g[idx - 1], g[idx]);
        let t = (z - z0) / (z1 - z0);
        v[idx - 1] + t * (v[idx] - v[idx - 1])
    }

    /// Pointwise linear combination `self + scale · other` (same grid).
    pub fn axpy(&self, scale: f64, other: &CurveEstimate) -> Result<CurveEstimate> {
        if other.grid != self.grid {
            return Err(Error::InvalidConfig(
                "curves live on different grids".into(),
            ));
        }
        if other.at_sample.len() != self.at_sample.len() {
            return Err(Error::ShapeMismatch {
                what: "curve at_sample",
                expected: self.at_sample.len(),
                got: other.at_sample.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        let at_sample = self
            .at_sample
            .iter()
            .zip(&other.at_sample)
            .map(|(a, b)| a + scale * b)
            .collect();
        CurveEstimate::new(self.grid.clone(), values, at_sample)
    }

    /// Add a constant to the whole curve.
    pub fn shift(&mut self, c: f64) {
        for v in &mut self.values {
            *v += c;
        }
        for v in &mut self.at_sample {
            *v += c;
        }
    }
}

/// Smoothing choice for a CDF axis: an integrated kernel or the raw step
/// function / point mass it converges to as the bandwidth vanishes.
#[derive(Debug, Clone, PartialEq)]
pub enum Smoother {
    Kernel(KernelSpec),
    /// On the residual axis: the step function 1{uᵢ ≤ u}.
    /// On the instrument axis: a point mass at zero distance.
    Indicator,
}

impl Smoother {
    /// Integrated-kernel weight C̄((u − uᵢ)/h), or the step function.
    #[inline]
    pub fn cdf_weight(&self, diff: f64) -> f64 {
        match self {
            Smoother::Kernel(k) => k.cdf(diff),
            Smoother::Indicator => {
                if diff >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Density weight K((w − wᵢ)/h)/h, or a point mass.
    #[inline]
    pub fn density_weight(&self, diff: f64) -> f64 {
        match self {
            Smoother::Kernel(k) => k.eval(diff),
            Smoother::Indicator => {
                if diff == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Kernel density estimate at each evaluation point, clamped below at
/// [`EPS_DENSITY`].
pub fn kde(values: &[f64], spec: &KernelSpec, eval_points: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::DegenerateSample("kde of an empty sample".into()));
    }
    Ok(par::map_slice(eval_points, |&u| kde_at(values, spec, u)))
}

/// Scalar kernel density estimate, clamped below at [`EPS_DENSITY`].
pub fn kde_at(values: &[f64], spec: &KernelSpec, u: f64) -> f64 {
    let n = values.len() as f64;
    let s: f64 = values.iter().map(|&v| spec.eval(u - v)).sum();
    (s / n).max(EPS_DENSITY)
}

/// Nadaraya-Watson regression of `y_in` on `x_in` at each evaluation point.
/// Falls back to the global mean of `y_in` where the local density is below
/// [`EPS_DENSITY`].
pub fn nw_regression(
    x_in: &[f64],
    y_in: &[f64],
    spec: &KernelSpec,
    eval_points: &[f64],
) -> Result<Vec<f64>> {
    if x_in.len() != y_in.len() {
        return Err(Error::ShapeMismatch {
            what: "nw_regression inputs",
            expected: x_in.len(),
            got: y_in.len(),
        });
    }
    if x_in.is_empty() {
        return Err(Error::DegenerateSample("regression on empty sample".into()));
    }
    let fallback = stats::mean(y_in);
    let n = x_in.len() as f64;
    Ok(par::map_slice(eval_points, |&x| {
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, yi) in x_in.iter().zip(y_in) {
            let w = spec.eval(x - xi);
            num += w * yi;
            den += w;
        }
        if den / n < EPS_DENSITY {
            fallback
        } else {
            num / den
        }
    }))
}

/// Unconditional smoothed CDF (1/n)Σ C̄((u − uᵢ)/h) of `u_vals` at `eval_u`.
pub fn unconditional_cdf(u_vals: &[f64], u_smoother: &Smoother, eval_u: f64) -> f64 {
    let s: f64 = u_vals
        .iter()
        .map(|&ui| u_smoother.cdf_weight(eval_u - ui))
        .sum();
    s / u_vals.len() as f64
}

/// Kernel-weighted conditional CDF of `u_vals` given a continuous
/// instrument at `eval_w`.
///
/// Returns the estimate and a flag marking that the instrument-weight
/// denominator fell below [`EPS_DENSITY`], in which case the unconditional
/// CDF is returned instead.
pub fn conditional_cdf_continuous(
    u_vals: &[f64],
    w_vals: &[f64],
    u_smoother: &Smoother,
    w_smoother: &Smoother,
    eval_u: f64,
    eval_w: f64,
) -> Result<(f64, bool)> {
    if u_vals.len() != w_vals.len() {
        return Err(Error::ShapeMismatch {
            what: "conditional cdf inputs",
            expected: u_vals.len(),
            got: w_vals.len(),
        });
    }
    let n = u_vals.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&ui, &wi) in u_vals.iter().zip(w_vals) {
        let w = w_smoother.density_weight(eval_w - wi);
        num += w * u_smoother.cdf_weight(eval_u - ui);
        den += w;
    }
    if den / n < EPS_DENSITY {
        Ok((unconditional_cdf(u_vals, u_smoother, eval_u), true))
    } else {
        Ok((num / den, false))
    }
}

/// Sorting-based conditional CDF for a discrete instrument:
/// (1/nⱼ) Σ_{i: wᵢ = j} C̄((u − uᵢ)/h).
pub fn conditional_cdf_discrete(
    u_vals: &[f64],
    w_codes: &[usize],
    u_smoother: &Smoother,
    eval_u: f64,
    category: usize,
) -> Result<f64> {
    if u_vals.len() != w_codes.len() {
        return Err(Error::ShapeMismatch {
            what: "conditional cdf inputs",
            expected: u_vals.len(),
            got: w_codes.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&ui, &ci) in u_vals.iter().zip(w_codes) {
        if ci == category {
            sum += u_smoother.cdf_weight(eval_u - ui);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::MissingCategory(category));
    }
    Ok(sum / count as f64)
}

/// Category-smoothed conditional CDF: own category gets weight 1−λ, every
/// other category λ/(L−1). λ = 0 reduces exactly to
/// [`conditional_cdf_discrete`]; λ = (L−1)/L recovers the unconditional CDF.
pub fn conditional_cdf_multicat(
    u_vals: &[f64],
    w_codes: &[usize],
    u_smoother: &Smoother,
    eval_u: f64,
    category: usize,
    lambda_w: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda_w) {
        return Err(Error::InvalidConfig(format!(
            "lambda_w must lie in [0, 1), got {lambda_w}"
        )));
    }
    if lambda_w == 0.0 {
        return conditional_cdf_discrete(u_vals, w_codes, u_smoother, eval_u, category);
    }
    if u_vals.len() != w_codes.len() {
        return Err(Error::ShapeMismatch {
            what: "conditional cdf inputs",
            expected: u_vals.len(),
            got: w_codes.len(),
        });
    }
    let categories = w_codes.iter().max().map_or(0, |&m| m + 1);
    if !w_codes.iter().any(|&c| c == category) {
        return Err(Error::MissingCategory(category));
    }
    let off = lambda_w / (categories as f64 - 1.0);
    let own = 1.0 - lambda_w;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&ui, &ci) in u_vals.iter().zip(w_codes) {
        let w = if ci == category { own } else { off };
        num += w * u_smoother.cdf_weight(eval_u - ui);
        den += w;
    }
    Ok(num / den)
}
