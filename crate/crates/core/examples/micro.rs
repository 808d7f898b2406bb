use npiv::kernels::KernelSpec;
use std::time::Instant;
fn main() {
    let k = KernelSpec::gaussian_high_order(8, 1.0).unwrap();
    let xs: Vec<f64> = (0..1_000_000).map(|i| (i as f64 * 1e-5) - 5.0).collect();
    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..5 {
        for &x in &xs {
            let (c, p) = k.cdf_pdf_raw(x);
            acc += c + p;
        }
    }
    println!("cdf_pdf_raw: {:?}/1M ({acc})", t.elapsed() / 5);
    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..5 {
        for &x in &xs {
            acc += libm::erf(x) + (-0.5 * x * x).exp();
        }
    }
    println!("erf+exp floor: {:?}/1M ({acc})", t.elapsed() / 5);
}
