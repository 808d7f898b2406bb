//! Parametric baseline for a binary instrument: φ(z) = b(z)θ with θ chosen
//! to minimize the Cramér-von Mises distance between the two
//! category-conditional CDFs of the centered residuals (or, optionally, the
//! distance between their empirical characteristic functions).
//!
//! The objective is piecewise-smooth in θ through the kernel CDFs, so the
//! minimization is derivative-free: Nelder-Mead from a least-squares warm
//! start plus seeded random restarts. Because residual centering absorbs
//! constants, the objective cannot pin the level of b(z)θ; the fitted
//! coefficients are shifted afterwards so the fitted residuals average
//! zero, mirroring the E(Y) = E(φ) normalization.

use crate::error::{Error, Result};
use crate::kernels::{silverman_bandwidth, BandwidthKind, KernelSpec};
use crate::par;
use crate::rng::Stream;
use crate::smoothing::{conditional_cdf_discrete, Instrument, Sample, Smoother};
use crate::stats;
use nalgebra::{DMatrix, DVector};

/// Basis families for the parametric curve.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    /// Raw powers 1, z, z², …, z^{k−1}.
    Polynomial,
    /// Clamped cubic B-splines on equispaced knots over [lo, hi].
    BSpline { lo: f64, hi: f64 },
}

/// A k-dimensional basis z ↦ b(z) ∈ ℝᵏ.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    kind: BasisKind,
    k: usize,
}

const SPLINE_DEGREE: usize = 3;

impl BasisSpec {
    pub fn polynomial(k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidConfig("basis needs k >= 1".into()));
        }
        Ok(Self {
            kind: BasisKind::Polynomial,
            k,
        })
    }

    /// Cubic B-spline basis with k functions on [lo, hi]; needs k ≥ 4.
    pub fn bspline(k: usize, lo: f64, hi: f64) -> Result<Self> {
        if k < SPLINE_DEGREE + 1 {
            return Err(Error::InvalidConfig(format!(
                "cubic B-spline basis needs k >= {}, got {k}",
                SPLINE_DEGREE + 1
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "B-spline range must be a finite interval, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            kind: BasisKind::BSpline { lo, hi },
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// Evaluate the basis vector b(z).
    pub fn eval(&self, z: f64) -> Vec<f64> {
        match &self.kind {
            BasisKind::Polynomial => {
                let mut out = Vec::with_capacity(self.k);
                let mut p = 1.0;
                for _ in 0..self.k {
                    out.push(p);
                    p *= z;
                }
                out
            }
            BasisKind::BSpline { lo, hi } => bspline_row(self.k, *lo, *hi, z),
        }
    }

    /// b(z)·θ.
    pub fn dot(&self, theta: &[f64], z: f64) -> f64 {
        self.eval(z).iter().zip(theta).map(|(b, t)| b * t).sum()
    }

    /// Add a constant to the represented function by adjusting θ in place.
    /// Possible for both families: polynomials carry an explicit intercept
    /// and B-splines sum to one.
    fn absorb_constant(&self, theta: &mut [f64], shift: f64) {
        match &self.kind {
            BasisKind::Polynomial => theta[0] += shift,
            BasisKind::BSpline { .. } => {
                for t in theta.iter_mut() {
                    *t += shift;
                }
            }
        }
    }
}

/// All k clamped cubic B-splines at z, by the Cox-de Boor recursion.
fn bspline_row(k: usize, lo: f64, hi: f64, z: f64) -> Vec<f64> {
    let d = SPLINE_DEGREE;
    // Clamped knot vector: d+1 copies of each end, k−d−1 interior knots.
    let interior = k - d - 1;
    let mut knots = Vec::with_capacity(k + d + 2);
    for _ in 0..=d {
        knots.push(lo);
    }
    for i in 1..=interior {
        knots.push(lo + (hi - lo) * i as f64 / (interior + 1) as f64);
    }
    for _ in 0..=d {
        knots.push(hi);
    }
    let z = z.clamp(lo, hi);
    let m = knots.len() - 1;
    let mut b = vec![0.0; m];
    for i in 0..m {
        let right_closed = knots[i + 1] >= hi && knots[i] < hi;
        if (z >= knots[i] && z < knots[i + 1]) || (right_closed && z >= hi) {
            b[i] = 1.0;
        }
    }
    for deg in 1..=d {
        for i in 0..(m - deg) {
            let den1 = knots[i + deg] - knots[i];
            let den2 = knots[i + deg + 1] - knots[i + 1];
            let left = if den1 > 0.0 {
                (z - knots[i]) / den1 * b[i]
            } else {
                0.0
            };
            let right = if den2 > 0.0 {
                (knots[i + deg + 1] - z) / den2 * b[i + 1]
            } else {
                0.0
            };
            b[i] = left + right;
        }
    }
    b.truncate(k);
    b
}

/// Distance between the two category-conditional residual distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveKind {
    /// Σⱼ (F̂_θ(ũⱼ|1) − F̂_θ(ũⱼ|0))² over the residual grid.
    #[default]
    CramerVonMises,
    /// Σⱼ |ĉf₁(tⱼ) − ĉf₀(tⱼ)|² over t ∈ {±0.5, ±1, ±2}.
    CharacteristicFn,
}

/// Evaluation points for the characteristic-function variant.
pub const CHARFN_GRID: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

/// Centered residuals Uᵢ(θ) = yᵢ − b(zᵢ)θ − mean(·).
fn centered_residuals(design: &DMatrix<f64>, y: &[f64], theta: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut u: Vec<f64> = (0..n)
        .map(|i| {
            let fit: f64 = (0..theta.len()).map(|j| design[(i, j)] * theta[j]).sum();
            y[i] - fit
        })
        .collect();
    let m = stats::mean(&u);
    for v in &mut u {
        *v -= m;
    }
    let tail = stats::mean(&u);
    for v in &mut u {
        *v -= tail;
    }
    u
}

fn binary_codes(sample: &Sample) -> Result<&[usize]> {
    match sample.w() {
        Instrument::Discrete { codes, categories } if *categories == 2 => Ok(codes),
        Instrument::Discrete { categories, .. } => Err(Error::UnsupportedInstrument(format!(
            "the parametric fit needs a binary instrument, got {categories} categories"
        ))),
        Instrument::Continuous(_) => Err(Error::UnsupportedInstrument(
            "the parametric fit needs a binary instrument, got a continuous one".into(),
        )),
    }
}

fn design_matrix(sample: &Sample, basis: &BasisSpec) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = sample.z().iter().map(|&z| basis.eval(z)).collect();
    DMatrix::from_fn(sample.n(), basis.k(), |i, j| rows[i][j])
}

/// The Cramér-von Mises objective at θ (or its characteristic-function
/// variant), over `grid_u`.
pub fn cvm_objective(
    sample: &Sample,
    basis: &BasisSpec,
    theta: &[f64],
    u_smoother: &Smoother,
    grid_u: &[f64],
    kind: ObjectiveKind,
) -> Result<f64> {
    if theta.len() != basis.k() {
        return Err(Error::ShapeMismatch {
            what: "theta",
            expected: basis.k(),
            got: theta.len(),
        });
    }
    let codes = binary_codes(sample)?;
    let design = design_matrix(sample, basis);
    let u = centered_residuals(&design, sample.y(), theta);
    objective_from_residuals(&u, codes, u_smoother, grid_u, kind)
}

fn objective_from_residuals(
    u: &[f64],
    codes: &[usize],
    u_smoother: &Smoother,
    grid_u: &[f64],
    kind: ObjectiveKind,
) -> Result<f64> {
    match kind {
        ObjectiveKind::CramerVonMises => {
            let mut total = 0.0;
            for &point in grid_u {
                let f1 = conditional_cdf_discrete(u, codes, u_smoother, point, 1)?;
                let f0 = conditional_cdf_discrete(u, codes, u_smoother, point, 0)?;
                total += (f1 - f0) * (f1 - f0);
            }
            Ok(total)
        }
        ObjectiveKind::CharacteristicFn => {
            let (n0, n1) = codes.iter().fold((0usize, 0usize), |(a, b), &c| {
                if c == 0 {
                    (a + 1, b)
                } else {
                    (a, b + 1)
                }
            });
            let mut total = 0.0;
            for &t in &CHARFN_GRID {
                let mut re = [0.0f64; 2];
                let mut im = [0.0f64; 2];
                for (&ui, &ci) in u.iter().zip(codes) {
                    re[ci] += (t * ui).cos();
                    im[ci] += (t * ui).sin();
                }
                re[0] /= n0 as f64;
                im[0] /= n0 as f64;
                re[1] /= n1 as f64;
                im[1] /= n1 as f64;
                total += (re[1] - re[0]).powi(2) + (im[1] - im[0]).powi(2);
            }
            Ok(total)
        }
    }
}

/// Options for [`fit_parametric`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub objective: ObjectiveKind,
    /// Kernel C̄ for the residual CDFs; rule-of-thumb order-8 Gaussian on
    /// the warm-start residuals when unset.
    pub u_kernel: Option<KernelSpec>,
    /// Residual evaluation grid; warm-start residual quantiles
    /// 0.05, 0.10, …, 0.95 when unset.
    pub grid_u: Option<Vec<f64>>,
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            objective: ObjectiveKind::default(),
            u_kernel: None,
            grid_u: None,
            restarts: 10,
            seed: 0,
            max_iterations: 400,
            tolerance: 1e-12,
        }
    }
}

/// Result of the parametric minimum-distance fit.
#[derive(Debug, Clone)]
pub struct ParametricFit {
    /// Minimizer, re-centered so fitted residuals average zero.
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Least-squares warm start.
    pub theta_init: Vec<f64>,
    pub objective_init: f64,
    /// Best objective per iteration of the winning optimizer run.
    pub trace: Vec<f64>,
    /// Residual grid the objective was evaluated on.
    pub grid_u: Vec<f64>,
    /// Smoother used for the residual CDFs.
    pub u_smoother: Smoother,
}

/// Minimize the distance objective over θ by Nelder-Mead from a
/// least-squares warm start with seeded random restarts (run in parallel).
pub fn fit_parametric(
    sample: &Sample,
    basis: &BasisSpec,
    opts: &FitOptions,
) -> Result<ParametricFit> {
    let codes = binary_codes(sample)?.to_vec();
    let design = design_matrix(sample, basis);
    let k = basis.k();

    // Warm start: least squares of y on the basis; the rank check doubles
    // as the linear-independence invariant of the basis on this sample.
    let y = DVector::from_column_slice(sample.y());
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.rank(smax * 1e-10) < k {
        return Err(Error::DegenerateSample(
            "basis functions are linearly dependent on the sample z-values".into(),
        ));
    }
    let theta_init: Vec<f64> = svd
        .solve(&y, smax * 1e-10)
        .map_err(|e| Error::Numerical(format!("least-squares warm start failed: {e}")))?
        .iter()
        .copied()
        .collect();

    let warm_resid = centered_residuals(&design, sample.y(), &theta_init);
    // A (near-)perfect warm-start fit already zeroes the nonnegative
    // objective; the residual quantile grid would be degenerate and the
    // optimizer would only chase rounding noise.
    if stats::sample_std(&warm_resid) <= 1e-10 * stats::sample_std(sample.y()) {
        let mut theta = theta_init.clone();
        let fitted_mean = stats::mean(
            &(0..sample.n())
                .map(|i| sample.y()[i] - (0..k).map(|j| design[(i, j)] * theta[j]).sum::<f64>())
                .collect::<Vec<f64>>(),
        );
        basis.absorb_constant(&mut theta, fitted_mean);
        let grid_u = opts.grid_u.clone().unwrap_or_else(|| vec![0.0]);
        let objective =
            objective_from_residuals(&warm_resid, &codes, &Smoother::Indicator, &grid_u,
                                     opts.objective)?;
        return Ok(ParametricFit {
            theta,
            objective,
            theta_init,
            objective_init: objective,
            trace: vec![objective],
            grid_u,
            u_smoother: Smoother::Indicator,
        });
    }
    let u_smoother = match &opts.u_kernel {
        Some(kern) => Smoother::Kernel(kern.clone()),
        None => {
            let order = crate::operator::DEFAULT_RESIDUAL_ORDER;
            match silverman_bandwidth(&warm_resid, BandwidthKind::Cdf { order }) {
                Ok(h) => Smoother::Kernel(KernelSpec::gaussian_high_order(order, h)?),
                // A perfect warm-start fit leaves no residual spread to set
                // a bandwidth from; the h → 0 limit is the step function.
                Err(Error::DegenerateSample(_)) => Smoother::Indicator,
                Err(e) => return Err(e),
            }
        }
    };
    let grid_u = match &opts.grid_u {
        Some(g) => g.clone(),
        None => {
            let mut sorted = warm_resid.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (0..19)
                .map(|j| stats::quantile_sorted(&sorted, 0.05 + 0.05 * j as f64))
                .collect()
        }
    };

    let objective = |theta: &[f64]| -> f64 {
        let u = centered_residuals(&design, sample.y(), theta);
        objective_from_residuals(&u, &codes, &u_smoother, &grid_u, opts.objective)
            .unwrap_or(f64::INFINITY)
    };
    let objective_init = objective(&theta_init);
    if !objective_init.is_finite() {
        return Err(Error::Numerical(
            "objective is non-finite at the warm start".into(),
        ));
    }

    // Start points: the warm start plus seeded Gaussian perturbations.
    let scale: Vec<f64> = theta_init.iter().map(|t| 0.5 * t.abs().max(0.5)).collect();
    let starts: Vec<Vec<f64>> = std::iter::once(theta_init.clone())
        .chain((0..opts.restarts).map(|r| {
            let mut stream = Stream::new(opts.seed).substream(r as u64 + 1);
            theta_init
                .iter()
                .zip(&scale)
                .map(|(t, s)| t + s * stream.next_normal())
                .collect()
        }))
        .collect();

    let runs: Vec<(Vec<f64>, f64, Vec<f64>)> = par::map_slice(&starts, |start| {
        nelder_mead(&objective, start, opts.max_iterations, opts.tolerance)
    });
    let best_idx = runs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| i)
        .expect("at least the warm start ran");
    let (mut theta, mut best_obj, trace) = runs[best_idx].clone();

    // Warm-start dominance: never report anything worse than θ_init.
    if objective_init < best_obj {
        theta = theta_init.clone();
        best_obj = objective_init;
    }

    // Pin the level: the objective is invariant to constants, the mean
    // normalization is not.
    let fitted_mean = stats::mean(
        &(0..sample.n())
            .map(|i| {
                sample.y()[i] - (0..k).map(|j| design[(i, j)] * theta[j]).sum::<f64>()
            })
            .collect::<Vec<f64>>(),
    );
    basis.absorb_constant(&mut theta, fitted_mean);

    Ok(ParametricFit {
        theta,
        objective: best_obj,
        theta_init,
        objective_init,
        trace,
        grid_u,
        u_smoother,
    })
}

/// Standard Nelder-Mead on ℝᵏ. Returns (best point, best value,
/// per-iteration best-value trace).
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    max_iterations: usize,
    tolerance: f64,
) -> (Vec<f64>, f64, Vec<f64>) {
    let k = start.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..k {
        let mut v = start.to_vec();
        v[i] += if v[i] != 0.0 { 0.05 * v[i] } else { 0.00025 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut trace = Vec::new();

    for _ in 0..max_iterations {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);

        if (values[k] - values[0]).abs() <= tolerance {
            break;
        }

        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|v| v[j]).sum::<f64>() / k as f64)
            .collect();
        let worst = simplex[k].clone();
        let reflect: Vec<f64> = (0..k)
            .map(|j| centroid[j] + alpha * (centroid[j] - worst[j]))
            .collect();
        let f_r = f(&reflect);

        if f_r < values[0] {
            let expand: Vec<f64> = (0..k)
                .map(|j| centroid[j] + gamma * (reflect[j] - centroid[j]))
                .collect();
            let f_e = f(&expand);
            if f_e < f_r {
                simplex[k] = expand;
                values[k] = f_e;
            } else {
                simplex[k] = reflect;
                values[k] = f_r;
            }
        } else if f_r < values[k - 1] {
            simplex[k] = reflect;
            values[k] = f_r;
        } else {
            let contract: Vec<f64> = (0..k)
                .map(|j| centroid[j] + rho * (worst[j] - centroid[j]))
                .collect();
            let f_c = f(&contract);
            if f_c < values[k] {
                simplex[k] = contract;
                values[k] = f_c;
            } else {
                for i in 1..=k {
                    for j in 0..k {
                        simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    trace.push(values[best]);
    (simplex[best].clone(), values[best], trace)
}
