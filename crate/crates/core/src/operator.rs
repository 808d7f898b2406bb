//! The nonlinear operator T̂(φ) — the gap between the conditional and
//! unconditional CDFs of the centered residuals — and the adjoint of its
//! Fréchet derivative, both evaluated from a sample.
//!
//! T̂(φ)(u, w) compares the residual distribution within an instrument
//! stratum against the pooled one; it vanishes identically when the
//! residuals are independent of the instrument. The adjoint maps a function
//! ψ(u, w) back to a function of z:
//!
//!   (T̂′*ψ)(z) = Σᵢ (ψ(ûᵢ, wᵢ) − E_W ψ(ûᵢ, ·)) f̂_U(ûᵢ) C_h(z − zᵢ) / Σᵢ C_h(z − zᵢ),
//!
//! with E_W the sample average over instrument values (category frequencies
//! when the instrument is discrete).

use crate::error::{Error, Result};
use crate::kernels::{silverman_bandwidth, BandwidthKind, KernelSpec};
use crate::par;
use crate::smoothing::{CurveEstimate, Instrument, Sample, Smoother, EPS_DENSITY};
use crate::stats;

/// Kernel/bandwidth configuration for one operator evaluation. Bandwidths
/// are computed once (from iteration-0 residuals in the solver) and frozen.
#[derive(Debug, Clone)]
pub struct OperatorConfig {
    /// Smoothing of the residual-axis CDFs (C̄ with bandwidth h_u).
    pub u_cdf: Smoother,
    /// Kernel for the residual density f̂_U (bandwidth h_u).
    pub u_pdf: KernelSpec,
    /// Weight kernel on a continuous instrument (bandwidth h_w).
    pub w_kernel: Option<KernelSpec>,
    /// Kernel for the conditional expectation given Z (bandwidth h).
    pub z_kernel: KernelSpec,
}

/// Default kernel order for the residual CDF/pdf smoothing.
pub const DEFAULT_RESIDUAL_ORDER: u32 = 8;

impl OperatorConfig {
    /// Rule-of-thumb configuration: order-`rho` Gaussian kernel with a
    /// CDF-kind Silverman bandwidth on the residuals of `phi0`, an order-2
    /// Gaussian with a regression-kind bandwidth on z, and a density-kind
    /// bandwidth on a continuous instrument.
    pub fn from_initial_residuals(sample: &Sample, phi0: &CurveEstimate, rho: u32) -> Result<Self> {
        let residuals = compute_residuals(sample, phi0)?;
        let h_u = silverman_bandwidth(&residuals.u_hat, BandwidthKind::Cdf { order: rho })?;
        let u_kernel = if rho == 2 {
            KernelSpec::gaussian(h_u)?
        } else {
            KernelSpec::gaussian_high_order(rho, h_u)?
        };
        let h_z = silverman_bandwidth(sample.z(), BandwidthKind::Regression)?;
        let w_kernel = match sample.w() {
            Instrument::Continuous(w) => {
                let h_w = silverman_bandwidth(w, BandwidthKind::Density)?;
                Some(KernelSpec::gaussian(h_w)?)
            }
            Instrument::Discrete { .. } => None,
        };
        Ok(Self {
            u_cdf: Smoother::Kernel(u_kernel.clone()),
            u_pdf: u_kernel,
            w_kernel,
            z_kernel: KernelSpec::gaussian(h_z)?,
        })
    }

    /// The shared (C̄, K) kernel when the CDF and pdf smoothing coincide,
    /// enabling the fused pairwise pass.
    fn fused_kernel(&self) -> Option<&KernelSpec> {
        match &self.u_cdf {
            Smoother::Kernel(k) if *k == self.u_pdf => Some(k),
            _ => None,
        }
    }
}

/// Centered fitted residuals ûᵢ = yᵢ − φ(zᵢ) − mean(y − φ(z)).
#[derive(Debug, Clone)]
pub struct Residuals {
    pub u_hat: Vec<f64>,
    /// The subtracted mean of the raw residuals.
    pub mean_removed: f64,
}

pub fn compute_residuals(sample: &Sample, phi: &CurveEstimate) -> Result<Residuals> {
    let n = sample.n();
    if phi.at_sample().len() != n {
        return Err(Error::ShapeMismatch {
            what: "phi.at_sample",
            expected: n,
            got: phi.at_sample().len(),
        });
    }
    let mut u_hat: Vec<f64> = sample
        .y()
        .iter()
        .zip(phi.at_sample())
        .map(|(y, f)| y - f)
        .collect();
    let mean = stats::mean(&u_hat);
    for u in &mut u_hat {
        *u -= mean;
    }
    // One more pass nails the mean to machine precision.
    let tail = stats::mean(&u_hat);
    for u in &mut u_hat {
        *u -= tail;
    }
    Ok(Residuals {
        u_hat,
        mean_removed: mean + tail,
    })
}

/// T̂(φ) evaluated at every sample point (ûᵢ, wᵢ), with its empirical
/// squared norm (1/n) Σ T̂(φ)(ûᵢ, wᵢ)².
#[derive(Debug, Clone)]
pub struct OperatorEval {
    pub at_points: Vec<f64>,
    pub empirical_sq_norm: f64,
}

impl OperatorEval {
    fn from_points(at_points: Vec<f64>) -> Self {
        let norm = at_points.iter().map(|t| t * t).sum::<f64>() / at_points.len() as f64;
        Self {
            at_points,
            empirical_sq_norm: norm,
        }
    }
}

/// Per-observation CDF and density sums from one pairwise pass over the
/// residuals.
pub(crate) struct PairwiseStats {
    /// cond[j][i] = F̂(ûᵢ | W = j), per category j (discrete instruments).
    pub cond: Vec<Vec<f64>>,
    /// uncond[i] = F̂(ûᵢ), the pooled smoothed CDF.
    pub uncond: Vec<f64>,
    /// pdf[i] = f̂_U(ûᵢ), clamped at [`EPS_DENSITY`].
    pub pdf: Vec<f64>,
    /// How often the density floor was binding.
    pub floor_hits: u64,
}

/// One pass over unordered residual pairs, exploiting kernel symmetry
/// (C̄(−t) = 1 − C̄(t), K(−t) = K(t)) so every pair costs a single fused
/// (C̄, K) evaluation. The accumulation order is fixed, so results are
/// bitwise reproducible.
pub(crate) fn pairwise_stats(
    u_hat: &[f64],
    codes: &[usize],
    categories: usize,
    cfg: &OperatorConfig,
) -> PairwiseStats {
    let n = u_hat.len();
    let mut counts = vec![0usize; categories];
    for &c in codes {
        counts[c] += 1;
    }
    let mut cond = vec![vec![0.0; n]; categories];
    let mut pdf = vec![0.0; n];

    if let Some(kernel) = cfg.fused_kernel() {
        // Triangle pass over unordered pairs. Row i collects its incoming
        // contributions in local per-category accumulators (flushed once),
        // while the symmetric contributions to rows k > i land in the
        // single category row owned by codes[i]; both access patterns stay
        // sequential in k.
        let h_inv = 1.0 / kernel.bandwidth();
        let (cb0, kv0) = kernel.cdf_pdf_raw(0.0);
        let mut acc = vec![0.0f64; categories];
        for i in 0..n {
            let ui = u_hat[i];
            let ci = codes[i];
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut pdf_i = kv0;
            acc[ci] = cb0;
            {
                let row_ci = &mut cond[ci];
                for k in (i + 1)..n {
                    let t = (ui - u_hat[k]) * h_inv;
                    let (cb, kv) = kernel.cdf_pdf_raw(t);
                    acc[codes[k]] += cb;
                    row_ci[k] += 1.0 - cb;
                    pdf_i += kv;
                    pdf[k] += kv;
                }
            }
            for (j, a) in acc.iter().enumerate() {
                cond[j][i] += a;
            }
            pdf[i] += pdf_i;
        }
    } else {
        // Separate smoothers (e.g. an indicator C̄): evaluate directly,
        // row by row.
        for i in 0..n {
            let ui = u_hat[i];
            for k in 0..n {
                cond[codes[k]][i] += cfg.u_cdf.cdf_weight(ui - u_hat[k]);
                pdf[i] += cfg.u_pdf.eval(ui - u_hat[k]);
            }
        }
    }

    let nf = n as f64;
    let mut uncond = vec![0.0; n];
    for col in &cond {
        for (u, c) in uncond.iter_mut().zip(col) {
            *u += c;
        }
    }
    for v in &mut uncond {
        *v /= nf;
    }
    for (j, col) in cond.iter_mut().enumerate() {
        let cj = counts[j] as f64;
        for v in col.iter_mut() {
            *v /= cj;
        }
    }
    let hu = cfg.u_pdf.bandwidth();
    let mut floor_hits = 0;
    for v in &mut pdf {
        let d = *v / (nf * hu);
        if d < EPS_DENSITY {
            floor_hits += 1;
            *v = EPS_DENSITY;
        } else {
            *v = d;
        }
    }
    PairwiseStats {
        cond,
        uncond,
        pdf,
        floor_hits,
    }
}

/// T̂(φ)(u, w) at one arbitrary point; dispatches on the instrument type.
pub fn apply_t_at(
    sample: &Sample,
    u_hat: &[f64],
    cfg: &OperatorConfig,
    eval_u: f64,
    eval_w: f64,
) -> Result<f64> {
    let uncond = crate::smoothing::unconditional_cdf(u_hat, &cfg.u_cdf, eval_u);
    match sample.w() {
        Instrument::Discrete { codes, categories } => {
            let cat = eval_w.round();
            if cat < 0.0 || cat as usize >= *categories || (eval_w - cat).abs() > 1e-9 {
                return Err(Error::UnsupportedInstrument(format!(
                    "discrete instrument: w must be a category code in 0..{categories}, got {eval_w}"
                )));
            }
            let f = crate::smoothing::conditional_cdf_discrete(
                u_hat,
                codes,
                &cfg.u_cdf,
                eval_u,
                cat as usize,
            )?;
            Ok(f - uncond)
        }
        Instrument::Continuous(w_vals) => {
            let w_kernel = cfg.w_kernel.as_ref().ok_or_else(|| {
                Error::InvalidConfig("continuous instrument needs a w kernel".into())
            })?;
            let (f, _) = crate::smoothing::conditional_cdf_continuous(
                u_hat,
                w_vals,
                &cfg.u_cdf,
                &Smoother::Kernel(w_kernel.clone()),
                eval_u,
                eval_w,
            )?;
            Ok(f - uncond)
        }
    }
}

/// T̂(φ) at every sample point (ûᵢ, wᵢ) and its empirical squared norm.
pub fn apply_t(sample: &Sample, phi: &CurveEstimate, cfg: &OperatorConfig) -> Result<OperatorEval> {
    let residuals = compute_residuals(sample, phi)?;
    let u_hat = &residuals.u_hat;
    match sample.w() {
        Instrument::Discrete { codes, categories } => {
            let stats = pairwise_stats(u_hat, codes, *categories, cfg);
            let at_points = (0..sample.n())
                .map(|i| stats.cond[codes[i]][i] - stats.uncond[i])
                .collect();
            Ok(OperatorEval::from_points(at_points))
        }
        Instrument::Continuous(w_vals) => {
            let at_points = par::map_indexed(sample.n(), |i| {
                apply_t_at(sample, u_hat, cfg, u_hat[i], w_vals[i]).unwrap_or(f64::NAN)
            });
            if at_points.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(
                    "non-finite operator evaluation".into(),
                ));
            }
            Ok(OperatorEval::from_points(at_points))
        }
    }
}

/// T̂(φ) on an arbitrary (u, w) product grid, for plotting and for
/// quadrature oracles. Rows follow `eval_u`, columns `eval_w` (category
/// codes as reals when the instrument is discrete).
pub fn apply_t_direct(
    sample: &Sample,
    phi: &CurveEstimate,
    cfg: &OperatorConfig,
    eval_u: &[f64],
    eval_w: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let residuals = compute_residuals(sample, phi)?;
    let rows = par::map_slice(eval_u, |&u| {
        eval_w
            .iter()
            .map(|&w| apply_t_at(sample, &residuals.u_hat, cfg, u, w))
            .collect::<Result<Vec<f64>>>()
    });
    rows.into_iter().collect()
}

/// The adjoint of the Fréchet derivative applied to ψ, evaluated on `grid`
/// and at the sample's z-points.
///
/// ψ must be evaluable at (ûᵢ, w) for any instrument value w; for a
/// discrete instrument the second argument receives the category code cast
/// to f64. For the Landweber step ψ = T̂(φ), see [`crate::solver`].
pub fn apply_adjoint<F>(
    sample: &Sample,
    phi: &CurveEstimate,
    psi: &F,
    cfg: &OperatorConfig,
    grid: &[f64],
) -> Result<CurveEstimate>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let residuals = compute_residuals(sample, phi)?;
    let weighted = adjoint_weights(sample, &residuals.u_hat, psi, cfg)?;
    let values = nw_smooth(sample.z(), &weighted, &cfg.z_kernel, grid);
    let at_sample = nw_smooth(sample.z(), &weighted, &cfg.z_kernel, sample.z());
    CurveEstimate::new(grid.to_vec(), values, at_sample)
}

/// aᵢ = (ψ(ûᵢ, wᵢ) − E_W ψ(ûᵢ, ·)) · f̂_U(ûᵢ), the quantity the adjoint
/// regresses on z.
pub(crate) fn adjoint_weights<F>(
    sample: &Sample,
    u_hat: &[f64],
    psi: &F,
    cfg: &OperatorConfig,
) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let n = sample.n();
    let own: Vec<f64> = (0..n)
        .map(|i| psi(u_hat[i], sample.w().value(i)))
        .collect();
    let mean_w: Vec<f64> = match sample.w() {
        Instrument::Discrete { categories, .. } => {
            let counts = sample.w().category_counts().expect("discrete");
            let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            par::map_indexed(n, |i| {
                (0..*categories)
                    .map(|j| probs[j] * psi(u_hat[i], j as f64))
                    .sum()
            })
        }
        Instrument::Continuous(w_vals) => par::map_indexed(n, |i| {
            w_vals.iter().map(|&w| psi(u_hat[i], w)).sum::<f64>() / n as f64
        }),
    };
    let fu: Vec<f64> = par::map_indexed(n, |i| crate::smoothing::kde_at(u_hat, &cfg.u_pdf, u_hat[i]));
    Ok((0..n)
        .map(|i| (own[i] - mean_w[i]) * fu[i])
        .collect())
}

/// NW smoothing of per-observation weights onto evaluation points; empty
/// neighborhoods fall back to the global mean, mirroring
/// [`crate::smoothing::nw_regression`].
pub(crate) fn nw_smooth(
    z: &[f64],
    weights: &[f64],
    kernel: &KernelSpec,
    eval_points: &[f64],
) -> Vec<f64> {
    let fallback = stats::mean(weights);
    let n = z.len() as f64;
    par::map_slice(eval_points, |&point| {
        let mut num = 0.0;
        let mut den = 0.0;
        for (zi, ai) in z.iter().zip(weights) {
            let w = kernel.eval(point - zi);
            num += w * ai;
            den += w;
        }
        if den / n < EPS_DENSITY {
            fallback
        } else {
            num / den
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::linspace;
    use approx::assert_abs_diff_eq;

    fn fixture_sample() -> Sample {
        // 12 rows so the n ≥ 10 floor is met; first 4 rows replicate the
        // hand fixture, the rest are a benign filler category pattern.
        let y = vec![-1.0, 0.0, 1.0, 2.0, -1.0, 0.0, 1.0, 2.0, -1.0, 0.0, 1.0, 2.0];
        let z: Vec<f64> = (0..12).map(|i| i as f64 * 0.25).collect();
        let codes = vec![0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1];
        Sample::new(y, z, Instrument::discrete(codes).unwrap(), None).unwrap()
    }

    fn indicator_cfg() -> OperatorConfig {
        OperatorConfig {
            u_cdf: Smoother::Indicator,
            u_pdf: KernelSpec::gaussian(1.0).unwrap(),
            w_kernel: None,
            z_kernel: KernelSpec::gaussian(1.0).unwrap(),
        }
    }

    #[test]
    fn residuals_centering() {
        let s = fixture_sample();
        let grid = s.default_grid(11).unwrap();
        let zero = CurveEstimate::zero(grid.clone(), s.n()).unwrap();
        let r = compute_residuals(&s, &zero).unwrap();
        assert!(stats::mean(&r.u_hat).abs() < 1e-13);
        assert_abs_diff_eq!(r.mean_removed, 0.5, epsilon = 1e-12);
        // φ̂ = y exactly → û = 0
        let exact =
            CurveEstimate::new(grid.clone(), vec![0.0; grid.len()], s.y().to_vec()).unwrap();
        let r = compute_residuals(&s, &exact).unwrap();
        assert!(r.u_hat.iter().all(|&u| u.abs() < 1e-14));
    }

    #[test]
    fn residuals_hand_example() {
        // y = {3, 5}, φ̂(z) = {1, 1} → pre-center {2, 4}, mean 3, û = {−1, 1}
        // (padded to 12 rows by repeating the pattern).
        let y: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 3.0 } else { 5.0 }).collect();
        let z: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let w = Instrument::discrete((0..12).map(|i| i % 2).collect()).unwrap();
        let s = Sample::new(y, z, w, None).unwrap();
        let grid = s.default_grid(5).unwrap();
        let phi =
            CurveEstimate::new(grid.clone(), vec![1.0; grid.len()], vec![1.0; 12]).unwrap();
        let r = compute_residuals(&s, &phi).unwrap();
        assert_abs_diff_eq!(r.mean_removed, 3.0, epsilon = 1e-12);
        for (i, u) in r.u_hat.iter().enumerate() {
            let expect = if i % 2 == 0 { -1.0 } else { 1.0 };
            assert_abs_diff_eq!(*u, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn apply_t_enumeration_fixture() {
        // Four distinct y values {−1,0,1,2} with φ = 0 center to
        // û = {−1.5,−0.5,0.5,1.5}; with the indicator C̄ the conditional and
        // unconditional CDFs are exact counts. Repeating the pattern three
        // times leaves every CDF value unchanged.
        let s = fixture_sample();
        let grid = s.default_grid(11).unwrap();
        let zero = CurveEstimate::zero(grid, s.n()).unwrap();
        let cfg = indicator_cfg();
        let eval = apply_t(&s, &zero, &cfg).unwrap();
        // Enumeration oracle values per residual pattern position:
        // uncond = (.25, .5, .75, 1), cond(w=0) = (.5, 1, 1, 1),
        // cond(w=1) = (0, 0, .5, 1).
        let expect = [0.25, 0.5, -0.25, 0.0];
        for (i, t) in eval.at_points.iter().enumerate() {
            assert_abs_diff_eq!(*t, expect[i % 4], epsilon = 1e-12);
        }
        let norm_expect = (0.0625 + 0.25 + 0.0625 + 0.0) / 4.0;
        assert_abs_diff_eq!(eval.empirical_sq_norm, norm_expect, epsilon = 1e-12);
    }

    #[test]
    fn apply_t_matches_scalar_path() {
        // The fused pairwise pass must agree with the scalar CDF functions.
        let s = fixture_sample();
        let grid = s.default_grid(11).unwrap();
        let zero = CurveEstimate::zero(grid, s.n()).unwrap();
        let k = KernelSpec::gaussian_high_order(8, 0.8).unwrap();
        let cfg = OperatorConfig {
            u_cdf: Smoother::Kernel(k.clone()),
            u_pdf: k,
            w_kernel: None,
            z_kernel: KernelSpec::gaussian(1.0).unwrap(),
        };
        let eval = apply_t(&s, &zero, &cfg).unwrap();
        let r = compute_residuals(&s, &zero).unwrap();
        for i in 0..s.n() {
            let direct = apply_t_at(
                &s,
                &r.u_hat,
                &cfg,
                r.u_hat[i],
                s.w().value(i),
            )
            .unwrap();
            assert_abs_diff_eq!(eval.at_points[i], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_single_category_is_zero() {
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let z: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let s = Sample::new(y, z, Instrument::discrete(vec![0; 12]).unwrap(), None).unwrap();
        let grid = s.default_grid(7).unwrap();
        let zero = CurveEstimate::zero(grid, s.n()).unwrap();
        let eval = apply_t(&s, &zero, &indicator_cfg()).unwrap();
        assert!(eval.at_points.iter().all(|&t| t.abs() < 1e-14));
        assert!(eval.empirical_sq_norm < 1e-14);
    }

    #[test]
    fn adjoint_constant_psi_is_zero_curve() {
        let s = fixture_sample();
        let grid = linspace(0.0, 2.75, 12);
        let zero = CurveEstimate::zero(grid.clone(), s.n()).unwrap();
        let cfg = OperatorConfig {
            u_cdf: Smoother::Kernel(KernelSpec::gaussian(0.7).unwrap()),
            u_pdf: KernelSpec::gaussian(0.7).unwrap(),
            w_kernel: None,
            z_kernel: KernelSpec::gaussian(0.5).unwrap(),
        };
        let out = apply_adjoint(&s, &zero, &|_, _| 3.25, &cfg, &grid).unwrap();
        for v in out.values().iter().chain(out.at_sample()) {
            assert!(v.abs() < 1e-12, "constant psi gave {v}");
        }
        // ψ(u, w) = g(u) with exact category weights also annihilates.
        let out = apply_adjoint(&s, &zero, &|u, _| u * u - 0.3 * u, &cfg, &grid).unwrap();
        for v in out.values().iter().chain(out.at_sample()) {
            assert!(v.abs() < 1e-12, "w-free psi gave {v}");
        }
    }

    #[test]
    fn adjoint_zero_psi_and_linearity() {
        let s = fixture_sample();
        let grid = linspace(0.0, 2.75, 8);
        let zero = CurveEstimate::zero(grid.clone(), s.n()).unwrap();
        let cfg = OperatorConfig {
            u_cdf: Smoother::Kernel(KernelSpec::gaussian(0.7).unwrap()),
            u_pdf: KernelSpec::gaussian(0.7).unwrap(),
            w_kernel: None,
            z_kernel: KernelSpec::gaussian(0.5).unwrap(),
        };
        let out = apply_adjoint(&s, &zero, &|_, _| 0.0, &cfg, &grid).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));

        let psi1 = |u: f64, w: f64| u.sin() + w;
        let psi2 = |u: f64, w: f64| 0.2 * u * w - 1.0;
        let (a, b) = (0.7, -2.3);
        let combo = |u: f64, w: f64| a * psi1(u, w) + b * psi2(u, w);
        let lhs = apply_adjoint(&s, &zero, &combo, &cfg, &grid).unwrap();
        let r1 = apply_adjoint(&s, &zero, &psi1, &cfg, &grid).unwrap();
        let r2 = apply_adjoint(&s, &zero, &psi2, &cfg, &grid).unwrap();
        for i in 0..grid.len() {
            let rhs = a * r1.values()[i] + b * r2.values()[i];
            assert_abs_diff_eq!(lhs.values()[i], rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn t_direct_saturates_and_mixes_to_zero() {
        let s = fixture_sample();
        let grid = s.default_grid(9).unwrap();
        let zero = CurveEstimate::zero(grid, s.n()).unwrap();
        let k = KernelSpec::gaussian_high_order(8, 0.8).unwrap();
        let cfg = OperatorConfig {
            u_cdf: Smoother::Kernel(k.clone()),
            u_pdf: k,
            w_kernel: None,
            z_kernel: KernelSpec::gaussian(1.0).unwrap(),
        };
        let m = apply_t_direct(&s, &zero, &cfg, &[1e8], &[0.0, 1.0]).unwrap();
        for v in &m[0] {
            assert!(v.abs() < 1e-6);
        }
        // category-share-weighted mixture of T̂(u, ·) vanishes at any u
        let m = apply_t_direct(&s, &zero, &cfg, &[-0.8, 0.1, 0.9], &[0.0, 1.0]).unwrap();
        for row in &m {
            let mix = 0.5 * row[0] + 0.5 * row[1];
            assert!(mix.abs() < 1e-10, "mixture {mix}");
        }
    }
}
