//! Landweber-Fridman iteration with an initializer menu, the N_max budget
//! rule, and the minimum-norm stopping rule.
//!
//! Each iteration moves the current curve against the adjoint image of the
//! operator, φ̂_{j+1} = φ̂_j − c·T̂′*(T̂(φ̂_j)), and records the empirical
//! squared norm of T̂(φ̂_j). Iteration stops at the first norm increase
//! (or, with `scan_full_trace`, at the global minimum over the full budget).
//! The iteration count is the regularization parameter: stopping early is
//! what keeps the ill-posed problem stable.
//!
//! Bandwidths are computed once from iteration-0 residuals and frozen, so a
//! fit is a deterministic function of the sample and the configuration.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::operator::{
    self, compute_residuals, pairwise_stats, OperatorConfig, DEFAULT_RESIDUAL_ORDER,
};
use crate::par;
use crate::smoothing::{
    nw_regression, CurveEstimate, Instrument, Sample, DEFAULT_GRID_POINTS, EPS_DENSITY,
};
use crate::stats;

/// Starting point of the iteration.
#[derive(Debug, Clone, Default)]
pub enum Initializer {
    /// Nadaraya-Watson regression of y on z. Biased under endogeneity but
    /// usually shape-preserving.
    #[default]
    NwOfYOnZ,
    /// The zero curve.
    Zero,
    /// A caller-supplied curve; its grid must cover the sample z-range.
    UserCurve(CurveEstimate),
}

/// Solver configuration. Defaults follow the reference settings: c = 0.5,
/// α = 1, ρ = 8, ν = 0.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Step constant in (0, 1).
    pub c: f64,
    /// Scale of the N_max budget constant α(y_max − y_min)/c.
    pub alpha: f64,
    /// Kernel order for the residual CDF/pdf smoothing.
    pub rho: u32,
    /// Tail-decay exponent ν ∈ [0, 1/3) in the budget rule (0 = compact
    /// support).
    pub nu: f64,
    /// Hard budget override. 0 evaluates the initializer without iterating
    /// (the pass-through protocol used by Monte Carlo baselines).
    pub n_max_override: Option<usize>,
    pub initializer: Initializer,
    /// Optional bandwidth overrides; rule-of-thumb values otherwise.
    pub h_u: Option<f64>,
    pub h_w: Option<f64>,
    pub h_z: Option<f64>,
    /// Pick the global trace minimum instead of stopping at the first
    /// increase.
    pub scan_full_trace: bool,
    /// Explicit evaluation grid; defaults to `grid_points` equispaced
    /// points over the sample z-range.
    pub grid: Option<Vec<f64>>,
    pub grid_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c: 0.5,
            alpha: 1.0,
            rho: DEFAULT_RESIDUAL_ORDER,
            nu: 0.0,
            n_max_override: None,
            initializer: Initializer::default(),
            h_u: None,
            h_w: None,
            h_z: None,
            scan_full_trace: false,
            grid: None,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "step constant c must lie in (0, 1), got {}",
                self.c
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0 / 3.0).contains(&self.nu) {
            return Err(Error::InvalidConfig(format!(
                "nu must lie in [0, 1/3), got {}",
                self.nu
            )));
        }
        if self.rho < 2 || self.rho % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "rho must be even and >= 2, got {}",
                self.rho
            )));
        }
        for (name, h) in [("h_u", self.h_u), ("h_w", self.h_w), ("h_z", self.h_z)] {
            if let Some(h) = h {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "bandwidth override {name} must be positive, got {h}"
                    )));
                }
            }
        }
        if self.grid.is_none() && self.grid_points < 2 {
            return Err(Error::InvalidConfig(
                "grid_points must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Why the iteration returned when it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppedBy {
    /// The empirical norm rose between consecutive iterations.
    NormIncrease,
    /// The N_max budget was exhausted while the norm was still falling.
    NMax,
    /// The update vanished identically (no identifying variation in the
    /// instrument), so further iterations cannot move the curve.
    Stationary,
}

/// Frozen bandwidths and counters describing one fit.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub h_u: f64,
    pub h_z: f64,
    pub h_w: Option<f64>,
    /// Times the residual-density floor was binding across all iterations.
    pub density_floor_hits: u64,
    /// Evaluation points whose z-neighborhood was empty (global-mean
    /// fallback in the adjoint smoothing).
    pub empty_neighborhood_points: usize,
    /// Constant added to the final curve so fitted residuals average zero.
    pub recenter_shift: f64,
}

/// Outcome of a Landweber fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Empirical squared norm of T̂(φ̂_j) for j = 0.. (one entry past the
    /// stopping index when stopped by a norm increase).
    pub trace: Vec<f64>,
    /// Selected stopping index N₀.
    pub n_stop: usize,
    /// Iteration budget.
    pub n_max: usize,
    /// φ̂ at N₀, re-centered so fitted residuals average zero.
    pub curve: CurveEstimate,
    /// The initializer curve (not re-centered).
    pub initial_curve: CurveEstimate,
    pub stopped_by: StoppedBy,
    pub diagnostics: FitDiagnostics,
}

/// N_max from n, ρ, ν and the y-range: the largest integer with
/// N·ln N ≤ [α(y_max − y_min)/c · n^{(ρ(1−3ν)−3)/(3ρ)}]², floored at 1.
pub fn compute_n_max(sample: &Sample, cfg: &SolverConfig) -> Result<usize> {
    cfg.validate()?;
    let y = sample.y();
    let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let constant = cfg.alpha * (y_max - y_min) / cfg.c;
    let rho = cfg.rho as f64;
    let exponent = (rho * (1.0 - 3.0 * cfg.nu) - 3.0) / (3.0 * rho);
    let target = (constant * (sample.n() as f64).powf(exponent)).powi(2);
    Ok(solve_n_log_n(target))
}

/// Largest N ≥ 1 with N·ln N ≤ target (N = 1 contributes 0 ≤ target), by
/// doubling bracket plus integer bisection on the monotone map N ↦ N·ln N.
pub(crate) fn solve_n_log_n(target: f64) -> usize {
    let f = |n: usize| (n as f64) * (n as f64).ln();
    if target < f(2) {
        return 1;
    }
    let mut hi = 2usize;
    while f(hi) <= target {
        hi *= 2;
    }
    let mut lo = hi / 2; // f(lo) <= target < f(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Build the starting curve on `grid`.
pub fn initialize(sample: &Sample, cfg: &SolverConfig, grid: &[f64]) -> Result<CurveEstimate> {
    match &cfg.initializer {
        Initializer::Zero => CurveEstimate::zero(grid.to_vec(), sample.n()),
        Initializer::NwOfYOnZ => {
            let h = match cfg.h_z {
                Some(h) => h,
                None => crate::kernels::silverman_bandwidth(
                    sample.z(),
                    crate::kernels::BandwidthKind::Regression,
                )?,
            };
            let kernel = KernelSpec::gaussian(h)?;
            let values = nw_regression(sample.z(), sample.y(), &kernel, grid)?;
            let at_sample = nw_regression(sample.z(), sample.y(), &kernel, sample.z())?;
            CurveEstimate::new(grid.to_vec(), values, at_sample)
        }
        Initializer::UserCurve(curve) => {
            let z_lo = sample.z().iter().cloned().fold(f64::INFINITY, f64::min);
            let z_hi = sample.z().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let g = curve.grid();
            if g[0] > z_lo || g[g.len() - 1] < z_hi {
                return Err(Error::InvalidConfig(format!(
                    "user curve grid [{}, {}] does not cover the sample z-range [{z_lo}, {z_hi}]",
                    g[0],
                    g[g.len() - 1]
                )));
            }
            let values = if curve.grid() == grid {
                curve.values().to_vec()
            } else {
                grid.iter().map(|&z| curve.interp(z)).collect()
            };
            let at_sample = if curve.at_sample().len() == sample.n() {
                curve.at_sample().to_vec()
            } else if curve.at_sample().is_empty() {
                sample.z().iter().map(|&z| curve.interp(z)).collect()
            } else {
                return Err(Error::ShapeMismatch {
                    what: "user curve at_sample",
                    expected: sample.n(),
                    got: curve.at_sample().len(),
                });
            };
            CurveEstimate::new(grid.to_vec(), values, at_sample)
        }
    }
}

/// Iterate explodes beyond this sup-norm → divergence error.
const DIVERGENCE_GUARD: f64 = 1e12;

/// Above this many weight-matrix elements the z-smoothing weights are
/// recomputed per iteration instead of stored.
const MAX_STORED_WEIGHTS: usize = 40_000_000;

/// NW smoothing of per-observation values onto fixed evaluation points,
/// with the kernel weights precomputed once where memory allows.
enum ZSmoother<'a> {
    Stored {
        rows: Vec<Vec<f64>>,
        dens: Vec<f64>,
        fallback: Vec<bool>,
    },
    OnTheFly {
        points: Vec<f64>,
        z: &'a [f64],
        kernel: KernelSpec,
    },
}

impl<'a> ZSmoother<'a> {
    fn new(points: Vec<f64>, z: &'a [f64], kernel: KernelSpec) -> Self {
        let n = z.len();
        if points.len().saturating_mul(n) > MAX_STORED_WEIGHTS {
            return ZSmoother::OnTheFly { points, z, kernel };
        }
        let rows: Vec<Vec<f64>> =
            par::map_slice(&points, |&p| z.iter().map(|&zi| kernel.eval(p - zi)).collect());
        let dens: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
        let fallback = dens.iter().map(|&d| d / (n as f64) < EPS_DENSITY).collect();
        ZSmoother::Stored {
            rows,
            dens,
            fallback,
        }
    }

    fn fallback_points(&self) -> usize {
        match self {
            ZSmoother::Stored { fallback, .. } => fallback.iter().filter(|&&b| b).count(),
            ZSmoother::OnTheFly { .. } => 0,
        }
    }

    fn apply(&self, a: &[f64]) -> Vec<f64> {
        match self {
            ZSmoother::Stored {
                rows,
                dens,
                fallback,
            } => {
                let mean_a = stats::mean(a);
                par::map_indexed(rows.len(), |p| {
                    if fallback[p] {
                        mean_a
                    } else {
                        let num: f64 = rows[p].iter().zip(a).map(|(w, ai)| w * ai).sum();
                        num / dens[p]
                    }
                })
            }
            ZSmoother::OnTheFly { points, z, kernel } => operator::nw_smooth(z, a, kernel, points),
        }
    }
}

/// Per-iteration operator machinery for a fixed sample: frozen bandwidths,
/// instrument weights and z-smoothing weights.
struct Engine<'a> {
    sample: &'a Sample,
    op_cfg: OperatorConfig,
    /// Category shares (discrete instruments).
    probs: Vec<f64>,
    /// Row-normalized weights V[i][k] = K_w(wᵢ − w_k)/Σ (continuous
    /// instruments), with empty-neighborhood rows flagged.
    v_rows: Option<(Vec<Vec<f64>>, Vec<bool>)>,
    /// g_k = Σ_{i'} K_w(w_{i'} − w_k)/D_{i'} over well-covered rows plus the
    /// count of flagged rows, for the continuous E_W term.
    g_mix: Option<(Vec<f64>, usize)>,
    grid_smoother: ZSmoother<'a>,
    sample_smoother: ZSmoother<'a>,
    floor_hits: u64,
}

/// One iteration's evaluations.
struct StepEval {
    /// Empirical squared norm of T̂ at the current iterate.
    norm: f64,
    /// aᵢ = (T̂ᵢ − E_W T̂(ûᵢ, ·)) f̂_U(ûᵢ), the values the adjoint smooths
    /// over z.
    weights: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(
        sample: &'a Sample,
        cfg: &SolverConfig,
        phi0: &CurveEstimate,
        grid: &[f64],
    ) -> Result<Self> {
        let mut op_cfg = OperatorConfig::from_initial_residuals(sample, phi0, cfg.rho)?;
        if let Some(h) = cfg.h_u {
            let k = if cfg.rho == 2 {
                KernelSpec::gaussian(h)?
            } else {
                KernelSpec::gaussian_high_order(cfg.rho, h)?
            };
            op_cfg.u_cdf = crate::smoothing::Smoother::Kernel(k.clone());
            op_cfg.u_pdf = k;
        }
        if let Some(h) = cfg.h_z {
            op_cfg.z_kernel = KernelSpec::gaussian(h)?;
        }
        if let Some(h) = cfg.h_w {
            if sample.w().is_discrete() {
                return Err(Error::InvalidConfig(
                    "h_w override is only meaningful for a continuous instrument".into(),
                ));
            }
            op_cfg.w_kernel = Some(KernelSpec::gaussian(h)?);
        }

        let probs = sample
            .w()
            .category_counts()
            .map(|counts| {
                counts
                    .iter()
                    .map(|&c| c as f64 / sample.n() as f64)
                    .collect()
            })
            .unwrap_or_default();

        let (v_rows, g_mix) = match sample.w() {
            Instrument::Discrete { .. } => (None, None),
            Instrument::Continuous(w_vals) => {
                let kernel = op_cfg.w_kernel.as_ref().expect("set above");
                let n = w_vals.len();
                let raw: Vec<Vec<f64>> = par::map_slice(w_vals, |&wi| {
                    w_vals.iter().map(|&wk| kernel.eval(wi - wk)).collect()
                });
                let mut rows = Vec::with_capacity(n);
                let mut flags = vec![false; n];
                let mut g = vec![0.0; n];
                let mut flagged = 0usize;
                for (i, mut row) in raw.into_iter().enumerate() {
                    let den: f64 = row.iter().sum();
                    if den / (n as f64) < EPS_DENSITY {
                        flags[i] = true;
                        flagged += 1;
                        row.iter_mut().for_each(|v| *v = 0.0);
                    } else {
                        row.iter_mut().for_each(|v| *v /= den);
                        for (gk, v) in g.iter_mut().zip(&row) {
                            *gk += v;
                        }
                    }
                    rows.push(row);
                }
                (Some((rows, flags)), Some((g, flagged)))
            }
        };

        let grid_smoother = ZSmoother::new(grid.to_vec(), sample.z(), op_cfg.z_kernel.clone());
        let sample_smoother =
            ZSmoother::new(sample.z().to_vec(), sample.z(), op_cfg.z_kernel.clone());
        Ok(Self {
            sample,
            op_cfg,
            probs,
            v_rows,
            g_mix,
            grid_smoother,
            sample_smoother,
            floor_hits: 0,
        })
    }

    fn step(&mut self, u_hat: &[f64]) -> StepEval {
        let n = u_hat.len();
        match self.sample.w() {
            Instrument::Discrete { codes, categories } => {
                let pw = pairwise_stats(u_hat, codes, *categories, &self.op_cfg);
                self.floor_hits += pw.floor_hits;
                let mut norm = 0.0;
                let mut weights = Vec::with_capacity(n);
                for i in 0..n {
                    let t_i = pw.cond[codes[i]][i] - pw.uncond[i];
                    norm += t_i * t_i;
                    let mut e_w = 0.0;
                    for (j, p) in self.probs.iter().enumerate() {
                        e_w += p * (pw.cond[j][i] - pw.uncond[i]);
                    }
                    weights.push((t_i - e_w) * pw.pdf[i]);
                }
                StepEval {
                    norm: norm / n as f64,
                    weights,
                }
            }
            Instrument::Continuous(_) => {
                let (v_rows, v_flags) = self.v_rows.as_ref().expect("continuous");
                let (g_mix, flagged) = self.g_mix.as_ref().expect("continuous");
                let cfg = &self.op_cfg;
                let fused = matches!(&cfg.u_cdf, crate::smoothing::Smoother::Kernel(k) if *k == cfg.u_pdf);
                let kernel = cfg.u_pdf.clone();
                let h = kernel.bandwidth();
                let rows: Vec<(f64, f64, u64)> = par::map_indexed(n, |i| {
                    let ui = u_hat[i];
                    let mut cond = 0.0;
                    let mut unc = 0.0;
                    let mut mix = 0.0;
                    let mut dens = 0.0;
                    for k in 0..n {
                        let (cb, kv) = if fused {
                            kernel.cdf_pdf_raw((ui - u_hat[k]) / h)
                        } else {
                            (
                                cfg.u_cdf.cdf_weight(ui - u_hat[k]),
                                kernel.eval_raw((ui - u_hat[k]) / h),
                            )
                        };
                        cond += v_rows[i][k] * cb;
                        unc += cb;
                        mix += g_mix[k] * cb;
                        dens += kv;
                    }
                    unc /= n as f64;
                    if v_flags[i] {
                        cond = unc;
                    }
                    let mut floor = 0u64;
                    let mut fu = dens / (n as f64 * h);
                    if fu < EPS_DENSITY {
                        fu = EPS_DENSITY;
                        floor = 1;
                    }
                    let t_i = cond - unc;
                    // (1/n)Σ_{i'} T̂(ûᵢ, w_{i'}) with flagged rows falling
                    // back to the unconditional CDF.
                    let e_w = (mix + *flagged as f64 * unc) / n as f64 - unc;
                    ((t_i - e_w) * fu, t_i, floor)
                });
                let mut norm = 0.0;
                let mut weights = Vec::with_capacity(n);
                for (a, t, fl) in rows {
                    norm += t * t;
                    weights.push(a);
                    self.floor_hits += fl;
                }
                StepEval {
                    norm: norm / n as f64,
                    weights,
                }
            }
        }
    }
}

/// Run the Landweber-Fridman iteration on `sample`.
pub fn landweber_fit(sample: &Sample, cfg: &SolverConfig) -> Result<FitResult> {
    cfg.validate()?;
    let grid = match &cfg.grid {
        Some(g) => {
            if g.len() < 2 || !g.windows(2).all(|w| w[1] > w[0]) {
                return Err(Error::InvalidConfig(
                    "explicit grid must be strictly increasing with >= 2 points".into(),
                ));
            }
            g.clone()
        }
        None => sample.default_grid(cfg.grid_points)?,
    };
    let initial = initialize(sample, cfg, &grid)?;
    let n_max = match cfg.n_max_override {
        Some(n) => n,
        None => compute_n_max(sample, cfg)?,
    };
    let mut engine = Engine::new(sample, cfg, &initial, &grid)?;

    let mut current = initial.clone();
    let mut previous = initial.clone();
    let mut trace = Vec::with_capacity(n_max + 2);
    let stopped_by;
    let n_stop;
    // Best iterate so far, for the full-trace scan.
    let mut best_index = 0usize;
    let mut best = initial.clone();

    let mut j = 0usize;
    loop {
        let residuals = compute_residuals(sample, &current)?;
        let eval = engine.step(&residuals.u_hat);
        let sup = current
            .at_sample()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if !eval.norm.is_finite() || sup > DIVERGENCE_GUARD {
            return Err(Error::Divergence {
                iteration: j,
                norm: if eval.norm.is_finite() { sup } else { eval.norm },
            });
        }
        trace.push(eval.norm);

        if cfg.scan_full_trace {
            if eval.norm < trace[best_index] {
                best_index = j;
                best = current.clone();
            }
        } else if j > 0 && eval.norm > trace[j - 1] {
            n_stop = j - 1;
            stopped_by = StoppedBy::NormIncrease;
            current = previous;
            break;
        }
        if j >= n_max {
            n_stop = n_max;
            stopped_by = StoppedBy::NMax;
            break;
        }

        let update_grid = engine.grid_smoother.apply(&eval.weights);
        let update_sample = engine.sample_smoother.apply(&eval.weights);
        if update_grid.iter().chain(&update_sample).all(|&v| v == 0.0) {
            n_stop = j;
            stopped_by = StoppedBy::Stationary;
            break;
        }
        previous = current.clone();
        let step_curve = CurveEstimate::new(grid.clone(), update_grid, update_sample)?;
        current = current.axpy(-cfg.c, &step_curve)?;
        j += 1;
    }

    let (mut final_curve, n_stop, stopped_by) = if cfg.scan_full_trace {
        let sb = if best_index == n_max {
            StoppedBy::NMax
        } else {
            StoppedBy::NormIncrease
        };
        (best, best_index, sb)
    } else {
        (current, n_stop, stopped_by)
    };

    // E(Y) = E(φ) normalization: shift so fitted residuals average zero.
    let raw_residuals: Vec<f64> = sample
        .y()
        .iter()
        .zip(final_curve.at_sample())
        .map(|(y, f)| y - f)
        .collect();
    let shift = stats::mean(&raw_residuals);
    final_curve.shift(shift);

    let diagnostics = FitDiagnostics {
        h_u: engine.op_cfg.u_pdf.bandwidth(),
        h_z: engine.op_cfg.z_kernel.bandwidth(),
        h_w: engine.op_cfg.w_kernel.as_ref().map(|k| k.bandwidth()),
        density_floor_hits: engine.floor_hits,
        empty_neighborhood_points: engine.grid_smoother.fallback_points()
            + engine.sample_smoother.fallback_points(),
        recenter_shift: shift,
    };
    Ok(FitResult {
        trace,
        n_stop,
        n_max,
        curve: final_curve,
        initial_curve: initial,
        stopped_by,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn simple_sample(n: usize) -> Sample {
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.711).sin() * 2.0).collect();
        let z: Vec<f64> = (0..n).map(|i| (i as f64 * 0.391).cos() * 3.0).collect();
        let codes: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % 2).collect();
        Sample::new(y, z, Instrument::discrete(codes).unwrap(), None).unwrap()
    }

    #[test]
    fn n_max_brute_force_and_anchor() {
        let brute = |target: f64| -> usize {
            if target < 2.0 * (2.0f64).ln() {
                return 1;
            }
            let mut n = 2;
            while (n as f64) * (n as f64).ln() <= target {
                n += 1;
            }
            n - 1
        };
        for &t in &[0.0, 0.5, 1.39, 5.0, 100.0, 5761.6, 1e7] {
            assert_eq!(solve_n_log_n(t), brute(t), "target {t}");
        }
        // Defaults at n = 1000 with y-range 9: C = 18, target = (18·1000^{5/24})²;
        // the brute-force scan gives 853.
        let mut y = vec![0.0; 1000];
        y[0] = -4.5;
        y[1] = 4.5;
        let z: Vec<f64> = (0..1000).map(|i| i as f64 / 100.0).collect();
        let codes: Vec<usize> = (0..1000).map(|i| i % 2).collect();
        let s = Sample::new(y, z, Instrument::discrete(codes).unwrap(), None).unwrap();
        let n_max = compute_n_max(&s, &SolverConfig::default()).unwrap();
        assert_eq!(n_max, 853);
        let target = (18.0 * (1000.0f64).powf(5.0 / 24.0)).powi(2);
        assert_eq!(n_max, brute(target));
    }

    #[test]
    fn n_max_floor_clamp() {
        let mut y = vec![0.0; 12];
        y[0] = 1e-4; // tiny y-range → target below 2 ln 2
        let z: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let codes: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let s = Sample::new(y, z, Instrument::discrete(codes).unwrap(), None).unwrap();
        assert_eq!(compute_n_max(&s, &SolverConfig::default()).unwrap(), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig {
            c: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.c = 0.5;
        cfg.nu = 0.34;
        assert!(cfg.validate().is_err());
        cfg.nu = 0.0;
        cfg.rho = 5;
        assert!(cfg.validate().is_err());
        cfg.rho = 8;
        cfg.h_u = Some(-0.1);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn initialize_zero_and_constant_nw() {
        let s = simple_sample(20);
        let grid = s.default_grid(11).unwrap();
        let cfg = SolverConfig {
            initializer: Initializer::Zero,
            ..Default::default()
        };
        let c = initialize(&s, &cfg, &grid).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));

        let y = vec![2.0; 20];
        let z: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let codes: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let s = Sample::new(y, z, Instrument::discrete(codes).unwrap(), None).unwrap();
        let grid = s.default_grid(11).unwrap();
        let c = initialize(&s, &SolverConfig::default(), &grid).unwrap();
        for v in c.values() {
            assert_abs_diff_eq!(*v, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn user_curve_must_cover_range() {
        let s = simple_sample(20);
        let grid = s.default_grid(11).unwrap();
        let narrow = CurveEstimate::from_grid(vec![-0.1, 0.1], vec![0.0, 0.0], &[]).unwrap();
        let cfg = SolverConfig {
            initializer: Initializer::UserCurve(narrow),
            ..Default::default()
        };
        assert!(matches!(
            initialize(&s, &cfg, &grid),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn single_category_instrument_is_stationary() {
        let n = 16;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.57).sin()).collect();
        let z: Vec<f64> = (0..n).map(|i| i as f64 * 0.3).collect();
        let s = Sample::new(y, z, Instrument::discrete(vec![0; n]).unwrap(), None).unwrap();
        let fit = landweber_fit(&s, &SolverConfig::default()).unwrap();
        assert_eq!(fit.n_stop, 0);
        assert_eq!(fit.stopped_by, StoppedBy::Stationary);
        for (a, b) in fit.curve.values().iter().zip(fit.initial_curve.values()) {
            assert_abs_diff_eq!(*a, b + fit.diagnostics.recenter_shift, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_iteration_override_passes_through() {
        let s = simple_sample(24);
        let cfg = SolverConfig {
            n_max_override: Some(0),
            ..Default::default()
        };
        let fit = landweber_fit(&s, &cfg).unwrap();
        assert_eq!(fit.n_stop, 0);
        assert_eq!(fit.stopped_by, StoppedBy::NMax);
        assert_eq!(fit.trace.len(), 1);
    }

    #[test]
    fn fitted_residuals_average_zero() {
        let s = simple_sample(40);
        let cfg = SolverConfig {
            n_max_override: Some(5),
            ..Default::default()
        };
        let fit = landweber_fit(&s, &cfg).unwrap();
        let mean_resid: f64 = s
            .y()
            .iter()
            .zip(fit.curve.at_sample())
            .map(|(y, f)| y - f)
            .sum::<f64>()
            / s.n() as f64;
        assert!(mean_resid.abs() < 1e-8, "mean residual {mean_resid}");
    }

    #[test]
    fn one_engine_step_matches_public_operator_path() {
        let s = simple_sample(30);
        let cfg = SolverConfig {
            n_max_override: Some(1),
            ..Default::default()
        };
        let grid = s.default_grid(cfg.grid_points).unwrap();
        let initial = initialize(&s, &cfg, &grid).unwrap();

        let mut engine = Engine::new(&s, &cfg, &initial, &grid).unwrap();
        let residuals = compute_residuals(&s, &initial).unwrap();
        let eval = engine.step(&residuals.u_hat);
        let upd = engine.grid_smoother.apply(&eval.weights);

        // Public route: ψ = T̂(φ₀) through the conditional-CDF machinery.
        let op_cfg = engine.op_cfg.clone();
        let u_hat = residuals.u_hat.clone();
        let psi =
            |u: f64, w: f64| operator::apply_t_at(&s, &u_hat, &op_cfg, u, w).expect("psi eval");
        let adj = operator::apply_adjoint(&s, &initial, &psi, &op_cfg, &grid).unwrap();
        for (a, b) in upd.iter().zip(adj.values()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
        let direct = operator::apply_t(&s, &initial, &op_cfg).unwrap();
        assert_abs_diff_eq!(eval.norm, direct.empirical_sq_norm, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_traces() {
        let s = simple_sample(30);
        let cfg = SolverConfig {
            n_max_override: Some(8),
            ..Default::default()
        };
        let a = landweber_fit(&s, &cfg).unwrap();
        let b = landweber_fit(&s, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.curve.values(), b.curve.values());
    }
}
