//! Portable, counter-based random streams.
//!
//! Draws are produced by the SplitMix64 mixer on a seed-plus-counter state,
//! so the k-th variate of a stream is a pure function of (seed, k): streams
//! can be replayed, split and reproduced from the same seed in any
//! language. Normal variates use the inverse-CDF transform with Wichura's
//! PPND16 rational approximation (AS 241, accurate to ~1e-15), keeping the
//! mapping from uniforms to normals explicit and portable.

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A seeded counter-based stream of random variates.
#[derive(Debug, Clone, Copy)]
pub struct Stream {
    seed: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// The k-th raw word of the stream, independent of cursor position.
    #[inline]
    pub fn word_at(&self, k: u64) -> u64 {
        mix(self
            .seed
            .wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let w = self.word_at(self.counter);
        self.counter += 1;
        w
    }

    /// Uniform draw strictly inside (0, 1): (w₅₃ + 0.5)·2⁻⁵³.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via the inverse CDF.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        normal_quantile(self.next_uniform())
    }

    /// A statistically independent stream derived from this one's seed.
    pub fn substream(&self, index: u64) -> Stream {
        Stream::new(mix(self.seed ^ mix(index.wrapping_add(0x5851F42D4C957F2D))))
    }
}

/// Wichura's PPND16 (AS 241): the standard normal quantile function.
/// `p` must lie strictly inside (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
            + 6.7265770927008700853e4)
            * r
            + 4.5921953931549871457e4)
            * r
            + 1.3731693765509461125e4)
            * r
            + 1.9715909503065514427e3)
            * r
            + 1.3314166789178437745e2)
            * r
            + 3.3871328727963666080e0;
        let den = ((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
            + 3.9307895800092710610e4)
            * r
            + 2.1213794301586595867e4)
            * r
            + 5.3941960214247511077e3)
            * r
            + 6.8718700749205790830e2)
            * r
            + 4.2313330701600911252e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
            + 2.41780725177450611770e-1)
            * r
            + 1.27045825245236838258e0)
            * r
            + 3.64784832476320460504e0)
            * r
            + 5.76949722146069140550e0)
            * r
            + 4.63033784615654529590e0)
            * r
            + 1.42343711074968357734e0;
        let den = ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
            + 1.51986665636164571966e-2)
            * r
            + 1.48103976427480074590e-1)
            * r
            + 6.89767334985100004550e-1)
            * r
            + 1.67638483018380384940e0)
            * r
            + 2.05319162663775882187e0)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 1.24266094738807843860e-3)
            * r
            + 2.65321895265761230930e-2)
            * r
            + 2.96560571828504891230e-1)
            * r
            + 1.78482653991729133580e0)
            * r
            + 5.46378491116411436990e0)
            * r
            + 6.65790464350110377720e0;
        let den = ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
            + 1.84631831751005468180e-5)
            * r
            + 7.86869131145613259100e-4)
            * r
            + 1.48753612908506148525e-2)
            * r
            + 1.36929880922735805310e-1)
            * r
            + 5.99832206555887937690e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::normal_cdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantile_round_trips_through_cdf() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            assert_abs_diff_eq!(normal_cdf(normal_quantile(p)), p, epsilon = 1e-12);
        }
        for &p in &[1e-12, 1e-8, 1.0 - 1e-8] {
            assert_abs_diff_eq!(normal_cdf(normal_quantile(p)), p, epsilon = 1e-13);
        }
    }

    #[test]
    fn quantile_known_points() {
        assert_abs_diff_eq!(normal_quantile(0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959963984540054, epsilon = 1e-12);
        assert_abs_diff_eq!(
            normal_quantile(0.025),
            -1.959963984540054,
            epsilon = 1e-12
        );
    }

    #[test]
    fn stream_is_counter_based_and_reproducible() {
        let mut a = Stream::new(42);
        let seq: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let b = Stream::new(42);
        for (k, &expect) in seq.iter().enumerate() {
            assert_eq!(b.word_at(k as u64), expect);
        }
        let mut c = Stream::new(43);
        assert_ne!(c.next_u64(), seq[0]);
    }

    #[test]
    fn uniforms_strictly_inside_unit_interval() {
        let mut s = Stream::new(7);
        for _ in 0..10_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_moments_sane() {
        let mut s = Stream::new(11);
        let n = 50_000;
        let draws: Vec<f64> = (0..n).map(|_| s.next_normal()).collect();
        let mean = crate::stats::mean(&draws);
        let sd = crate::stats::sample_std(&draws);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((sd - 1.0).abs() < 0.02, "sd {sd}");
    }

    #[test]
    fn substreams_differ() {
        let s = Stream::new(3);
        let mut s0 = s.substream(0);
        let mut s1 = s.substream(1);
        assert_ne!(s0.next_u64(), s1.next_u64());
    }
}
