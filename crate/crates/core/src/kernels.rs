//! Kernel functions of arbitrary even order, their integrated (CDF) forms,
//! and rule-of-thumb bandwidths.
//!
//! Higher-order Gaussian kernels are built as P(x)·φ(x) with P an even
//! polynomial solving the vanishing-moment linear system, so the
//! coefficients are derived rather than copied from tables. The integrated
//! kernel C̄ is closed form for every supported family: the Gaussian via the
//! error function, the polynomial×Gaussian terms via the recursion
//! Iₘ(x) = −x^{m−1}φ(x) + (m−1)·Iₘ₋₂(x), and the Epanechnikov via its
//! antiderivative.

use crate::error::{Error, Result};
use crate::stats;
use nalgebra::{DMatrix, DVector};


const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    normal_cdf_with_exp(x, (-0.5 * x * x).exp())
}

/// Standard normal CDF given a precomputed exp(−x²/2).
///
/// Hart's rational approximation (double-precision form), which needs only
/// the exponential already evaluated for the density: the pairwise operator
/// sums evaluate both at every residual pair, so sharing the exponential
/// roughly halves their cost. Verified against an independent erf

/// implementation to 2e-15 in the tests.
#[inline]
fn normal_cdf_with_exp(x: f64, exp_half: f64) -> f64 {
    let ax = x.abs();
    let cum = if ax > 37.0 {
        0.0
    } else if ax < 7.07106781186547 {
        let num = (((((3.52624965998911e-2 * ax + 0.700383064443688) * ax
            + 6.37396220353165)
            * ax
            + 33.912866078383)
            * ax
            + 112.079291497871)
            * ax
            + 221.213596169931)
            * ax
            + 220.206867912376;
        let den = ((((((8.83883476483184e-2 * ax + 1.75566716318264) * ax
            + 16.064177579207)
            * ax
            + 86.7807322029461)
            * ax
            + 296.564248779674)
            * ax
            + 637.333633378831)
            * ax
            + 793.826512519948)
            * ax
            + 440.413735824752;
        exp_half * num / den
    } else {
        let mut build = ax + 0.65;
        build = ax + 4.0 / build;
        build = ax + 3.0 / build;
        build = ax + 2.0 / build;
        build = ax + 1.0 / build;
        exp_half / build / SQRT_2PI
    };
    if x > 0.0 {
        1.0 - cum
    } else {
        cum
    }
}

/// Supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// Standard normal density; order 2.
    Gaussian,
    /// 0.75(1 − x²) on [−1, 1]; order 2 only.
    Epanechnikov,
    /// P(x)·φ(x) with vanishing moments up to the requested order.
    GaussianHighOrder,
}

/// A validated kernel: family, even order ρ ≥ 2 and positive bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    order: u32,
    bandwidth: f64,
    /// Coefficients of the even polynomial P(x) = Σ aⱼ x^{2j}
    /// (empty unless `GaussianHighOrder`).
    poly: Vec<f64>,
}

/// Largest supported order for the polynomial×Gaussian construction.
pub const MAX_HIGH_ORDER: u32 = 16;

impl KernelSpec {
    pub fn new(family: KernelFamily, order: u32, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if order < 2 || order % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "kernel order must be even and >= 2, got {order}"
            )));
        }
        let poly = match family {
            KernelFamily::Gaussian | KernelFamily::Epanechnikov => {
                if order != 2 {
                    return Err(Error::InvalidSpec(format!(
                        "{family:?} only admits order 2, got {order}"
                    )));
                }
                Vec::new()
            }
            KernelFamily::GaussianHighOrder => {
                if order > MAX_HIGH_ORDER {
                    return Err(Error::InvalidSpec(format!(
                        "gaussian high-order kernels support order <= {MAX_HIGH_ORDER}, got {order}"
                    )));
                }
                high_order_coefficients(order)
            }
        };
        Ok(Self {
            family,
            order,
            bandwidth,
            poly,
        })
    }

    /// Order-2 Gaussian kernel.
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, 2, bandwidth)
    }

    /// Epanechnikov kernel on [−1, 1].
    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, 2, bandwidth)
    }

    /// Polynomial×Gaussian kernel of even order ρ ≥ 4.
    pub fn gaussian_high_order(order: u32, bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::GaussianHighOrder, order, bandwidth)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Same kernel with a different bandwidth.
    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        Self::new(self.family, self.order, bandwidth)
    }

    /// K(u) on the pre-scaled axis.
    pub fn eval_raw(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => normal_pdf(u),
            KernelFamily::Epanechnikov => {
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    0.75 * (1.0 - u * u)
                }
            }
            KernelFamily::GaussianHighOrder => even_poly(&self.poly, u * u) * normal_pdf(u),
        }
    }

    /// K(x/h)/h, the density-scaled form.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_raw(x / self.bandwidth) / self.bandwidth
    }

    /// C̄(u) = ∫_{−∞}^{u} K(t) dt on the pre-scaled axis.
    pub fn cdf_raw(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => normal_cdf(u),
            KernelFamily::Epanechnikov => {
                if u <= -1.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    0.75 * (u - u * u * u / 3.0) + 0.5
                }
            }
            KernelFamily::GaussianHighOrder => self.cdf_pdf_raw(u).0,
        }
    }

    /// C̄(x/h); the integrated kernel needs no 1/h factor.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_raw(x / self.bandwidth)
    }

    /// (C̄(u), K(u)) in one pass, sharing the φ(u) evaluation.
    ///
    /// The inner loops of the operator sums evaluate both the integrated and
    /// the plain kernel at every pairwise difference; fusing them roughly
    /// halves the transcendental work.
    pub fn cdf_pdf_raw(&self, u: f64) -> (f64, f64) {
        match self.family {
            KernelFamily::Gaussian => {
                let e = (-0.5 * u * u).exp();
                (normal_cdf_with_exp(u, e), e / SQRT_2PI)
            }
            KernelFamily::Epanechnikov => (self.cdf_raw(u), self.eval_raw(u)),
            KernelFamily::GaussianHighOrder => {
                let e = (-0.5 * u * u).exp();
                let p = e / SQRT_2PI;
                let cum = normal_cdf_with_exp(u, e);
                let u2 = u * u;
                // C̄ = Σ aⱼ I_{2j}(u) with I_0 = Φ(u) and
                // I_m = −u^{m−1} φ(u) + (m−1) I_{m−2}. The order-8 case is
                // unrolled: it sits in the innermost pairwise loops.
                if let [a0, a1, a2, a3] = self.poly[..] {
                    let pdf = (a0 + u2 * (a1 + u2 * (a2 + u2 * a3))) * p;
                    let i2 = -u * p + cum;
                    let i4 = -u2 * u * p + 3.0 * i2;
                    let i6 = -u2 * u2 * u * p + 5.0 * i4;
                    return (a0 * cum + a1 * i2 + a2 * i4 + a3 * i6, pdf);
                }
                let pdf = even_poly(&self.poly, u2) * p;
                let mut i_m = cum;
                let mut acc = self.poly[0] * i_m;
                let mut u_pow_odd = u; // u^{m−1} for the next m
                for (j, &a) in self.poly.iter().enumerate().skip(1) {
                    let m = 2 * j;
                    i_m = -u_pow_odd * p + (m as f64 - 1.0) * i_m;
                    acc += a * i_m;
                    u_pow_odd *= u2;
                }
                (acc, pdf)
            }
        }
    }
}

#[inline]
fn even_poly(coeffs: &[f64], u2: f64) -> f64 {
    let mut acc = 0.0;
    for &a in coeffs.iter().rev() {
        acc = acc * u2 + a;
    }
    acc
}

/// Double factorial (2k − 1)!!, the 2k-th moment of the standard normal.
fn double_factorial_odd(k: usize) -> f64 {
    let mut r = 1.0;
    let mut i = 1;
    while i < 2 * k {
        r *= i as f64;
        i += 2;
    }
    r
}

/// Solve the vanishing-moment system for P(x) = Σ aⱼ x^{2j} such that
/// ∫P·φ = 1 and ∫x^m P·φ = 0 for m = 2, 4, …, ρ−2.
fn high_order_coefficients(order: u32) -> Vec<f64> {
    let m = (order / 2) as usize;
    let mut a = DMatrix::zeros(m, m);
    for row in 0..m {
        for col in 0..m {
            a[(row, col)] = double_factorial_odd(row + col);
        }
    }
    let mut b = DVector::zeros(m);
    b[0] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .expect("vanishing-moment system is nonsingular for even order");
    sol.iter().copied().collect()
}

/// What a bandwidth is for; selects the sample-size exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthKind {
    /// Density estimation with a second-order kernel: n^{−1/5}.
    Density,
    /// Nadaraya-Watson regression: n^{−1/5}.
    Regression,
    /// Smoothed-CDF estimation paired with an order-ρ kernel: n^{−1/(2ρ+1)}.
    Cdf { order: u32 },
}

/// Silverman's rule of thumb: 1.06·σ̂·n^e with σ̂ = min(sample std, IQR/1.349)
/// and the exponent set by `kind`.
pub fn silverman_bandwidth(values: &[f64], kind: BandwidthKind) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 values for a bandwidth, got {n}"
        )));
    }
    let std = stats::sample_std(values);
    let iqr = stats::quantile(values, 0.75) - stats::quantile(values, 0.25);
    let spread = if iqr > 0.0 {
        std.min(iqr / 1.349)
    } else {
        std
    };
    if !(spread.is_finite() && spread > 0.0) {
        return Err(Error::DegenerateSample(
            "all values equal: no spread to set a bandwidth from".into(),
        ));
    }
    let exponent = match kind {
        BandwidthKind::Density | BandwidthKind::Regression => -0.2,
        BandwidthKind::Cdf { order } => -1.0 / (2.0 * order as f64 + 1.0),
    };
    Ok(1.06 * spread * (n as f64).powf(exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_specs() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Gaussian, 3, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Gaussian, 4, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Epanechnikov, 4, 1.0).is_err());
        assert!(KernelSpec::gaussian_high_order(7, 1.0).is_err());
    }

    #[test]
    fn gaussian_at_zero() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_abs_diff_eq!(k.eval(0.0), 0.3989422804014327, epsilon = 1e-12);
    }

    #[test]
    fn epanechnikov_outside_support() {
        let k = KernelSpec::epanechnikov(1.0).unwrap();
        assert_eq!(k.eval(2.0), 0.0);
        assert_eq!(k.cdf_raw(2.0), 1.0);
        assert_eq!(k.cdf_raw(-2.0), 0.0);
    }

    #[test]
    fn order4_coefficients_solve_moment_system() {
        // Oracle: the 2×2 system [[1,1],[1,3]]·a = (1,0) gives a = (3/2, −1/2).
        let k = KernelSpec::gaussian_high_order(4, 1.0).unwrap();
        assert_abs_diff_eq!(k.poly[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(k.poly[1], -0.5, epsilon = 1e-12);
        // (3 − 0)/2 · φ(0)
        assert_abs_diff_eq!(k.eval_raw(0.0), 0.5984134206021491, epsilon = 1e-12);
    }

    #[test]
    fn order8_matches_independent_solve() {
        // 4×4 double-factorial system solved by hand elimination beforehand:
        // a = (35/16, −35/16, 7/16, −1/48).
        let k = KernelSpec::gaussian_high_order(8, 1.0).unwrap();
        let expect = [35.0 / 16.0, -35.0 / 16.0, 7.0 / 16.0, -1.0 / 48.0];
        for (a, e) in k.poly.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn cdf_symmetry_and_known_values() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_abs_diff_eq!(g.cdf_raw(0.0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g.cdf_raw(30.0), 1.0, epsilon = 1e-12);
        // Quadrature oracle over (3 − t²)/2·φ(t) on (−∞, 1].
        let k4 = KernelSpec::gaussian_high_order(4, 1.0).unwrap();
        assert_abs_diff_eq!(k4.cdf_raw(1.0), 0.9623301083281146, epsilon = 1e-9);
        // Saturation at infinity for every family.
        for k in [
            KernelSpec::gaussian(1.0).unwrap(),
            KernelSpec::epanechnikov(1.0).unwrap(),
            KernelSpec::gaussian_high_order(8, 1.0).unwrap(),
        ] {
            assert_abs_diff_eq!(k.cdf_raw(40.0), 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(k.cdf_raw(-40.0), 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn fused_cdf_pdf_matches_separate_paths() {
        for order in [4_u32, 6, 8] {
            let k = KernelSpec::gaussian_high_order(order, 1.0).unwrap();
            for i in -40..=40 {
                let u = i as f64 * 0.2;
                let (c, p) = k.cdf_pdf_raw(u);
                assert_abs_diff_eq!(p, k.eval_raw(u), epsilon = 1e-14);
                assert_abs_diff_eq!(c, k.cdf_raw(u), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn scaled_forms() {
        let k = KernelSpec::gaussian_high_order(8, 0.37).unwrap();
        let x = 0.81;
        assert_abs_diff_eq!(k.eval(x), k.eval_raw(x / 0.37) / 0.37, epsilon = 1e-15);
        assert_abs_diff_eq!(k.cdf(x), k.cdf_raw(x / 0.37), epsilon = 1e-15);
    }

    #[test]
    fn silverman_two_points() {
        // σ̂ = min(std, IQR/1.349) = min(0.7071, 0.5/1.349) = 0.37064...
        let h = silverman_bandwidth(&[0.0, 1.0], BandwidthKind::Density).unwrap();
        let sigma = (0.5f64 / 1.349).min((0.5f64).sqrt());
        assert_abs_diff_eq!(h, 1.06 * sigma * (2.0f64).powf(-0.2), epsilon = 1e-12);
    }

    #[test]
    fn silverman_degenerate() {
        assert!(matches!(
            silverman_bandwidth(&[1.0, 1.0, 1.0], BandwidthKind::Density),
            Err(Error::DegenerateSample(_))
        ));
        assert!(silverman_bandwidth(&[1.0], BandwidthKind::Density).is_err());
    }

    #[test]
    fn silverman_cdf_kind_exponent() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 * 0.7).sin()).collect();
        let hd = silverman_bandwidth(&v, BandwidthKind::Density).unwrap();
        let hc = silverman_bandwidth(&v, BandwidthKind::Cdf { order: 8 }).unwrap();
        let ratio = hc / hd;
        let expect = (100.0f64).powf(-1.0 / 17.0) / (100.0f64).powf(-0.2);
        assert_abs_diff_eq!(ratio, expect, epsilon = 1e-12);
    }
}
