//! Seeded simulation designs with a continuous endogenous regressor and a
//! binary instrument, plus the Monte Carlo driver producing mean curves and
//! pointwise bands.
//!
//! The designs share Zᵢ = α + σUᵢ + (β + σUᵢ)Wᵢ + εᵢ with U, ε standard
//! normal, W ∈ {0, 1} with P(W = 1) = 2/3, α = 1, β = 2 and σ = 0.5, so Z
//! is endogenous (it loads on U) while W stays fully independent of U. The
//! response is either quadratic, y = a + bZ + cZ² + U with
//! (a, b, c) = (0, −1.5, 0.3), or sinusoidal, y = 1.5·sin(0.5πZ) + U. Both
//! put the noise-to-signal ratio near one.
//!
//! Draws consume a counter-based stream ([`crate::rng`]) in a fixed layout
//! (u, ε, w per observation), so any implementation of the same stream
//! reproduces the samples bit for bit.

use crate::error::{Error, Result};
use crate::parametric::{fit_parametric, BasisSpec, FitOptions};
use crate::rng::Stream;
use crate::smoothing::{linspace, CurveEstimate, Instrument, Sample, DEFAULT_GRID_POINTS};
use crate::solver::{landweber_fit, SolverConfig, StoppedBy};
use crate::stats;
use crate::{ident, par};

/// Which structural curve generates the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpId {
    /// y = a + bZ + cZ² + U.
    Quadratic,
    /// y = 1.5·sin(0.5πZ) + U.
    Sine,
}

/// A fully parameterized simulation design.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub dgp: DgpId,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    /// P(W = 1).
    pub w_prob_one: f64,
    /// (a, b, c) for the quadratic design.
    pub quad_coeffs: (f64, f64, f64),
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(dgp: DgpId, n: usize, seed: u64) -> Self {
        Self {
            dgp,
            n,
            alpha: 1.0,
            beta: 2.0,
            sigma: 0.5,
            w_prob_one: 2.0 / 3.0,
            quad_coeffs: (0.0, -1.5, 0.3),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < crate::smoothing::MIN_SAMPLE {
            return Err(Error::InvalidConfig(format!(
                "simulation needs n >= {}, got {}",
                crate::smoothing::MIN_SAMPLE,
                self.n
            )));
        }
        if !(self.w_prob_one > 0.0 && self.w_prob_one < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "P(W=1) must lie strictly inside (0,1), got {}",
                self.w_prob_one
            )));
        }
        Ok(())
    }

    /// The structural curve φ†.
    pub fn true_phi(&self, z: f64) -> f64 {
        match self.dgp {
            DgpId::Quadratic => {
                let (a, b, c) = self.quad_coeffs;
                a + b * z + c * z * z
            }
            DgpId::Sine => 1.5 * (0.5 * std::f64::consts::PI * z).sin(),
        }
    }

    /// Population mean and standard deviation of Z under this design.
    pub fn z_moments(&self) -> (f64, f64) {
        let p = self.w_prob_one;
        // Z | W=w ~ N(α + βw, σ²(1+w)² + 1)
        let m0 = self.alpha;
        let m1 = self.alpha + self.beta;
        let v0 = self.sigma * self.sigma + 1.0;
        let v1 = 4.0 * self.sigma * self.sigma + 1.0;
        let mean = (1.0 - p) * m0 + p * m1;
        let second = (1.0 - p) * (v0 + m0 * m0) + p * (v1 + m1 * m1);
        (mean, (second - mean * mean).sqrt())
    }

    /// Common evaluation grid for Monte Carlo aggregation: equispaced over
    /// the population ±3σ range of Z.
    pub fn mc_grid(&self) -> Vec<f64> {
        let (mean, sd) = self.z_moments();
        linspace(mean - 3.0 * sd, mean + 3.0 * sd, DEFAULT_GRID_POINTS)
    }

    /// Draw a sample together with the true curve on the default grid and
    /// the realized structural errors.
    pub fn generate_full(&self) -> Result<DgpDraw> {
        self.validate()?;
        let mut stream = Stream::new(self.seed);
        let n = self.n;
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        let mut codes = Vec::with_capacity(n);
        let mut errors = Vec::with_capacity(n);
        for _ in 0..n {
            let u = stream.next_normal();
            let eps = stream.next_normal();
            let w = usize::from(stream.next_uniform() < self.w_prob_one);
            let zi = self.alpha + self.sigma * u + (self.beta + self.sigma * u) * w as f64 + eps;
            y.push(self.true_phi(zi) + u);
            z.push(zi);
            codes.push(w);
            errors.push(u);
        }
        let sample = Sample::new(y, z, Instrument::discrete(codes)?, None)?;
        let grid = sample.default_grid(DEFAULT_GRID_POINTS)?;
        let values: Vec<f64> = grid.iter().map(|&g| self.true_phi(g)).collect();
        let at_sample: Vec<f64> = sample.z().iter().map(|&g| self.true_phi(g)).collect();
        let truth = CurveEstimate::new(grid, values, at_sample)?;
        Ok(DgpDraw {
            sample,
            truth,
            structural_errors: errors,
        })
    }

    /// Draw a sample and the true curve on the default grid.
    pub fn generate(&self) -> Result<(Sample, CurveEstimate)> {
        let draw = self.generate_full()?;
        Ok((draw.sample, draw.truth))
    }
}

/// One simulated draw with its unobservables kept for diagnostics.
#[derive(Debug, Clone)]
pub struct DgpDraw {
    pub sample: Sample,
    pub truth: CurveEstimate,
    /// The realized structural errors Uᵢ (not observable to estimators).
    pub structural_errors: Vec<f64>,
}

/// Which estimator the Monte Carlo driver runs on each replication.
#[derive(Debug, Clone)]
pub enum McEstimator {
    Landweber(SolverConfig),
    Parametric {
        basis: BasisSpec,
        options: FitOptions,
    },
    /// Pseudo-true value of the mean-independence problem, from kernel
    /// density estimates.
    PseudoTrueMi,
}

/// Aggregated Monte Carlo output on a common grid.
#[derive(Debug, Clone)]
pub struct McSummary {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub mean_curve: Vec<f64>,
    /// Pointwise 2.5% Monte Carlo percentile.
    pub lo95: Vec<f64>,
    /// Pointwise 97.5% Monte Carlo percentile.
    pub hi95: Vec<f64>,
    /// Per-replication interior MISE of the initial curve.
    pub mise_initial: Vec<f64>,
    /// Per-replication interior MISE of the final curve.
    pub mise_final: Vec<f64>,
    /// Per-replication stopping index.
    pub n_stop: Vec<usize>,
    /// Per-replication stopping reason (Landweber runs only).
    pub stopped_by: Vec<StoppedBy>,
    /// Replications that failed (divergence or estimation error).
    pub failures: usize,
}

/// Interior slice bounds trimming 5% of grid points on each side.
pub fn interior_bounds(len: usize) -> (usize, usize) {
    let lo = ((len - 1) as f64 * 0.05).ceil() as usize;
    let hi = ((len - 1) as f64 * 0.95).floor() as usize;
    (lo, hi)
}

/// ∫(est − truth)² over the interior 90% of the grid, by the trapezoid
/// rule.
pub fn interior_mise(grid: &[f64], est: &[f64], truth: &[f64]) -> f64 {
    let (lo, hi) = interior_bounds(grid.len());
    let sq: Vec<f64> = (lo..=hi)
        .map(|i| (est[i] - truth[i]) * (est[i] - truth[i]))
        .collect();
    stats::trapezoid(&grid[lo..=hi], &sq)
}

struct RepOutcome {
    curve: Vec<f64>,
    initial: Vec<f64>,
    n_stop: usize,
    stopped_by: Option<StoppedBy>,
}

/// Run `reps` seeded replications (seedᵢ = base seed + i) of `estimator` on
/// the design, aggregating on the common grid. Replications run in
/// parallel; failed replications are recorded and tolerated up to 20%.
pub fn run_monte_carlo(
    spec: &DgpSpec,
    reps: usize,
    estimator: &McEstimator,
) -> Result<McSummary> {
    spec.validate()?;
    if reps < 2 {
        return Err(Error::InvalidConfig(format!(
            "Monte Carlo needs reps >= 2, got {reps}"
        )));
    }
    let grid = spec.mc_grid();
    let truth: Vec<f64> = grid.iter().map(|&z| spec.true_phi(z)).collect();

    let outcomes: Vec<std::result::Result<RepOutcome, String>> = par::map_indexed(reps, |r| {
        let mut rep_spec = spec.clone();
        rep_spec.seed = spec.seed.wrapping_add(r as u64);
        run_one_rep(&rep_spec, estimator, &grid).map_err(|e| e.to_string())
    });

    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures * 5 > reps {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err())
            .cloned()
            .unwrap_or_default();
        return Err(Error::Numerical(format!(
            "{failures}/{reps} replications failed (first error: {first})"
        )));
    }
    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();

    let g = grid.len();
    let mut mean_curve = vec![0.0; g];
    let mut lo95 = vec![0.0; g];
    let mut hi95 = vec![0.0; g];
    for point in 0..g {
        let mut vals: Vec<f64> = ok.iter().map(|o| o.curve[point]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        mean_curve[point] = stats::mean(&vals);
        lo95[point] = stats::quantile_sorted(&vals, 0.025);
        hi95[point] = stats::quantile_sorted(&vals, 0.975);
    }
    let mise_initial = ok
        .iter()
        .map(|o| interior_mise(&grid, &o.initial, &truth))
        .collect();
    let mise_final = ok
        .iter()
        .map(|o| interior_mise(&grid, &o.curve, &truth))
        .collect();
    let n_stop = ok.iter().map(|o| o.n_stop).collect();
    let stopped_by = ok.iter().filter_map(|o| o.stopped_by).collect();

    Ok(McSummary {
        grid,
        truth,
        mean_curve,
        lo95,
        hi95,
        mise_initial,
        mise_final,
        n_stop,
        stopped_by,
        failures,
    })
}

fn run_one_rep(spec: &DgpSpec, estimator: &McEstimator, grid: &[f64]) -> Result<RepOutcome> {
    let (sample, _) = spec.generate()?;
    match estimator {
        McEstimator::Landweber(cfg) => {
            let mut cfg = cfg.clone();
            cfg.grid = Some(grid.to_vec());
            let fit = landweber_fit(&sample, &cfg)?;
            Ok(RepOutcome {
                curve: fit.curve.values().to_vec(),
                initial: fit.initial_curve.values().to_vec(),
                n_stop: fit.n_stop,
                stopped_by: Some(fit.stopped_by),
            })
        }
        McEstimator::Parametric { basis, options } => {
            let fit = fit_parametric(&sample, basis, options)?;
            let curve = grid.iter().map(|&z| basis.dot(&fit.theta, z)).collect();
            let initial = grid
                .iter()
                .map(|&z| basis.dot(&fit.theta_init, z))
                .collect();
            Ok(RepOutcome {
                curve,
                initial,
                n_stop: fit.trace.len(),
                stopped_by: None,
            })
        }
        McEstimator::PseudoTrueMi => {
            let model = ident::estimate_density_model(&sample, None)?;
            let res = ident::pseudo_true(&model, grid)?;
            Ok(RepOutcome {
                curve: res.curve.values().to_vec(),
                initial: vec![0.0; grid.len()],
                n_stop: 0,
                stopped_by: None,
            })
        }
    }
}

/// Median final-curve MISE per sample size.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub n: usize,
    pub median_mise_initial: f64,
    pub median_mise_final: f64,
    pub median_n_stop: f64,
}

/// Run the Monte Carlo at each n in `n_list` (strictly increasing) and
/// report median interior MISEs.
pub fn rate_study(
    spec: &DgpSpec,
    n_list: &[usize],
    reps: usize,
    solver: &SolverConfig,
) -> Result<Vec<RateRow>> {
    if n_list.is_empty() || !n_list.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidConfig(
            "n_list must be nonempty and strictly increasing".into(),
        ));
    }
    if reps < 2 {
        return Err(Error::InvalidConfig(format!(
            "rate study needs reps >= 2, got {reps}"
        )));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut s = spec.clone();
        s.n = n;
        let summary = run_monte_carlo(&s, reps, &McEstimator::Landweber(solver.clone()))?;
        let n_stop_f: Vec<f64> = summary.n_stop.iter().map(|&v| v as f64).collect();
        rows.push(RateRow {
            n,
            median_mise_initial: stats::median(&summary.mise_initial),
            median_mise_final: stats::median(&summary.mise_final),
            median_n_stop: stats::median(&n_stop_f),
        });
    }
    Ok(rows)
}
