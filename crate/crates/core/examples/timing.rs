use npiv::simulate::{DgpId, DgpSpec, McEstimator, run_monte_carlo, interior_mise};
use npiv::solver::{landweber_fit, SolverConfig};
use std::time::Instant;

fn main() {
    for (dgp, seed) in [(DgpId::Quadratic, 8u64), (DgpId::Sine, 9u64)] {
        let spec = DgpSpec::new(dgp, 1000, seed);
        let (sample, truth) = spec.generate().unwrap();
        let t = Instant::now();
        let fit = landweber_fit(&sample, &SolverConfig::default()).unwrap();
        let el = t.elapsed();
        let mise0 = interior_mise(truth.grid(), fit.initial_curve.values(), truth.values());
        let mise1 = interior_mise(truth.grid(), fit.curve.values(), truth.values());
        println!(
            "{dgp:?} seed {seed}: n_max={} n_stop={} stopped_by={:?} mise {:.4} -> {:.4} in {el:.2?} ({:.1} ms/iter)",
            fit.n_max, fit.n_stop, fit.stopped_by, mise0, mise1,
            el.as_secs_f64() * 1e3 / (fit.trace.len() as f64)
        );
    }
    // small MC to sanity-check parallel reps
    let spec = DgpSpec::new(DgpId::Quadratic, 1000, 1000);
    let t = Instant::now();
    let s = run_monte_carlo(&spec, 4, &McEstimator::Landweber(SolverConfig::default())).unwrap();
    println!("4-rep MC in {:.1?}; n_stops {:?}", t.elapsed(), s.n_stop);
}
