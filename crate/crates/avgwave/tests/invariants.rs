//! Cross-module statistical invariants: ensemble means of path functionals
//! against their closed-form expectations, and Fourier-side consistency of
//! the covariance model.

use avgwave::covariance::{free_kernel_simplex_mean, SchoenbergMeasure};
use avgwave::ensemble::substream_seed;
use avgwave::paths::{
    clark_ocone_gamma, evaluate_batch, intersection_time_binned, mixture_functional,
    mixture_functional_direct, sample_path, PathFunctionalBatch,
};
use num_complex::Complex64;
use std::f64::consts::PI;

struct Stats {
    mean: Complex64,
    stderr: f64,
}

fn stats(samples: &[Complex64]) -> Stats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    let var = samples.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    Stats { mean, stderr: (var / n).sqrt() }
}

#[test]
fn oscillatory_functional_mean_matches_closed_form() {
    let n_paths = 4000;
    let n_steps = 1024;
    for dim in [1usize, 2] {
        for &tau in &[0.1, 0.01] {
            for &t in &[0.5, 1.0] {
                let target = free_kernel_simplex_mean(dim, tau, t).unwrap();
                let samples: Vec<Complex64> = (0..n_paths)
                    .map(|j| {
                        let path =
                            sample_path(dim, t, n_steps, substream_seed(31, "inv-x", j)).unwrap();
                        let batch =
                            PathFunctionalBatch { taus: &[tau], moll_eps: None, mixture: None };
                        evaluate_batch(&path, &batch).unwrap().x_tau[0]
                    })
                    .collect();
                let s = stats(&samples);
                let dist = (s.mean - target).norm();
                assert!(
                    dist <= 3.0 * s.stderr + 2e-3,
                    "dim {dim} tau {tau} t {t}: |mean - target| = {dist:.2e}, 3se = {:.2e}",
                    3.0 * s.stderr
                );
            }
        }
    }
}

#[test]
fn centered_functionals_have_zero_mean() {
    let n_paths = 10_000;
    let t = 1.0;
    for dim in [1usize, 2] {
        let moll = 0.01;
        // The d=1 estimator is a histogram whose self-pair bias scales like
        // dt / bin width, so it needs a finer time grid than d=2 (where the
        // lag-mean centering is exact at any resolution). The Clark-Ocone
        // integral is centered by construction at either resolution.
        let n_steps = if dim == 1 { 20_000 } else { 512 };
        let mut gamma = Vec::with_capacity(n_paths);
        let mut co = Vec::with_capacity(n_paths);
        for j in 0..n_paths {
            let path = sample_path(dim, t, n_steps, substream_seed(32, "inv-c", j as u64)).unwrap();
            if dim == 1 {
                let batch = PathFunctionalBatch { taus: &[], moll_eps: Some(moll), mixture: None };
                gamma.push(Complex64::new(
                    evaluate_batch(&path, &batch).unwrap().gamma.unwrap(),
                    0.0,
                ));
                let coarse = sample_path(dim, t, 512, substream_seed(32, "inv-cc", j as u64)).unwrap();
                co.push(Complex64::new(clark_ocone_gamma(&coarse), 0.0));
            } else {
                let batch = PathFunctionalBatch { taus: &[], moll_eps: Some(moll), mixture: None };
                gamma.push(Complex64::new(
                    evaluate_batch(&path, &batch).unwrap().gamma.unwrap(),
                    0.0,
                ));
                co.push(Complex64::new(clark_ocone_gamma(&path), 0.0));
            }
        }
        for (name, samples) in [("gamma", &gamma), ("clark-ocone", &co)] {
            let s = stats(samples);
            assert!(
                s.mean.norm() <= 3.0 * s.stderr + 5e-3,
                "dim {dim} {name}: mean {:.3e}, 3se {:.3e}",
                s.mean.norm(),
                3.0 * s.stderr
            );
        }
    }
}

#[test]
fn local_time_square_integral_mean() {
    // E[2 beta(t)] = E[int l^2 dx] = 8 t^{3/2} / (3 sqrt(2 pi)) at t = 1
    let n_paths = 4000;
    let target = 8.0 / (3.0 * (2.0 * PI).sqrt());
    let samples: Vec<Complex64> = (0..n_paths)
        .map(|j| {
            let path = sample_path(1, 1.0, 20_000, substream_seed(33, "inv-l", j)).unwrap();
            Complex64::new(2.0 * intersection_time_binned(&path, 5e-3).unwrap(), 0.0)
        })
        .collect();
    let s = stats(&samples);
    let dist = (s.mean.re - target).abs();
    assert!(
        dist <= 3.0 * s.stderr + 0.02,
        "mean {:.4} vs {target:.4}, 3se {:.4}",
        s.mean.re,
        3.0 * s.stderr
    );
}

#[test]
fn mixture_functional_routes_agree_on_random_paths() {
    let m = SchoenbergMeasure::new(vec![(0.7, 0.4), (1.3, 1.1), (2.0, 0.2)]).unwrap();
    for dim in [1usize, 2] {
        for j in 0..20 {
            let path = sample_path(dim, 0.7, 300, substream_seed(34, "inv-m", j)).unwrap();
            let a = mixture_functional(&path, &m, 0.2).unwrap();
            let b = mixture_functional_direct(&path, &m, 0.2).unwrap();
            assert!(
                (a - b).norm() <= 1e-10 * a.norm().max(1.0),
                "dim {dim} path {j}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn spectral_density_is_the_fourier_transform_of_the_correlation() {
    // rho(r) = (2 pi)^{-d} int rhohat(p) e^{i p r} dp, checked by direct
    // quadrature on a radial grid in d = 1
    let m = SchoenbergMeasure::new(vec![(0.8, 0.5), (1.6, 1.2)]).unwrap();
    for &r in &[0.0, 0.3, 1.1, 2.4] {
        let inv = avgwave::quad::integrate(
            |p: f64| {
                Complex64::new(m.spectral_density(1, &[p]), 0.0)
                    * Complex64::new(0.0, p * r).exp()
            },
            -40.0,
            40.0,
            1e-12,
        ) / (2.0 * PI);
        let direct = m.correlation(r);
        assert!(
            (inv.re - direct).abs() <= 1e-9 && inv.im.abs() <= 1e-9,
            "r = {r}: {inv} vs {direct}"
        );
    }
}
