//! Low-order perturbative oracle. The averaged wave function expands in
//! powers of the covariance; order zero is the free propagator and order one
//! is a pairing integral evaluated here by deterministic quadrature,
//! independent of any Monte Carlo machinery. Used to validate the path
//! evaluators at weak coupling.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::covariance::SchoenbergMeasure;
use crate::ensemble::{par_map_seeded, pairwise_sum, EnsembleEstimate};
use crate::error::{Error, Result};
use crate::paths::{evaluate_batch, sample_path, PathFunctionalBatch};
use crate::profile::InitialProfile;
use crate::quad::integrate;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DuhamelTerm {
    /// Number of covariance pairings (0 = free term).
    pub order: usize,
    pub value: Complex64,
    /// Difference between the working and a coarser quadrature tolerance.
    pub quadrature_error: f64,
}

/// Number of pairings of `2n` elements, `(2n - 1)!!`.
pub fn pairing_count(n: u32) -> u128 {
    let mut acc: u128 = 1;
    let mut k: u128 = 1;
    while k <= 2 * n as u128 - 1 {
        acc *= k;
        k += 2;
    }
    acc
}

/// Free term `phi_hat_0(xi) exp(-i |xi|^2 t / 2)`.
pub fn free_term(t: f64, xi: &[f64], profile: &InitialProfile) -> Result<DuhamelTerm> {
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    Ok(DuhamelTerm {
        order: 0,
        value: profile.fourier_amplitude(xi)? * Complex64::new(0.0, -xi2 * t / 2.0).exp(),
        quadrature_error: 0.0,
    })
}

/// Time-simplex factor `int_0^t ds1 int_0^{s1} e^{-i a (s1 - s2)} ds2
///   = (1 - e^{-i a t} - i a t) / a^2`, with a series fallback near `a = 0`.
fn simplex_phase_integral(a: f64, t: f64) -> Complex64 {
    let at = a * t;
    if at.abs() < 1e-4 {
        // t^2/2 - i a t^3/6 - a^2 t^4/24 + i a^3 t^5/120
        Complex64::new(t * t / 2.0 - a * a * t.powi(4) / 24.0,
                       -a * t.powi(3) / 6.0 + a.powi(3) * t.powi(5) / 120.0)
    } else {
        (Complex64::new(1.0, 0.0) - Complex64::new(0.0, -at).exp()
            - Complex64::new(0.0, at))
            / (a * a)
    }
}

fn momentum_integral(
    m: &SchoenbergMeasure,
    dim: usize,
    eps: f64,
    t: f64,
    xi: &[f64],
    tol: f64,
) -> Complex64 {
    // the scaled spectral density decays like exp(-(eps p)^2 / (2 max_lambda^2));
    // truncate where it falls below 1e-12 of its peak
    let p_max = m.max_lambda() * (2.0 * 12.0 * std::f64::consts::LN_10).sqrt() / eps;
    match dim {
        1 => integrate(
            |p| {
                let a = ((xi[0] - p).powi(2) - xi[0] * xi[0]) / 2.0;
                m.spectral_density(1, &[eps * p]) * simplex_phase_integral(a, t)
            },
            -p_max,
            p_max,
            tol,
        ),
        _ => integrate(
            |py| {
                integrate(
                    |px| {
                        let a = ((xi[0] - px).powi(2) + (xi[1] - py).powi(2)
                            - (xi[0] * xi[0] + xi[1] * xi[1]))
                            / 2.0;
                        m.spectral_density(2, &[eps * px, eps * py])
                            * simplex_phase_integral(a, t)
                    },
                    -p_max,
                    p_max,
                    tol / 4.0,
                )
            },
            -p_max,
            p_max,
            tol,
        ),
    }
}

/// First pairing term of the expansion:
/// `-phi_hat_0(xi) e^{-i|xi|^2 t/2} (2 pi)^{-d} int rho_hat(eps p)
///   I((|xi - p|^2 - |xi|^2)/2) dp`
/// with `I` the simplex phase factor above. The renormalization counterterm
/// is not included; combine with the exact `e^{-i C_eps t}` prefactor.
pub fn first_order_term(
    m: &SchoenbergMeasure,
    dim: usize,
    eps: f64,
    t: f64,
    xi: &[f64],
    profile: &InitialProfile,
) -> Result<DuhamelTerm> {
    if !(eps > 0.0) || !(t > 0.0) {
        return Err(Error::invalid("eps and t must be > 0"));
    }
    if xi.len() != dim {
        return Err(Error::DimensionMismatch { required: dim, got: xi.len() });
    }
    if m.is_zero() {
        return Ok(DuhamelTerm { order: 1, value: Complex64::new(0.0, 0.0), quadrature_error: 0.0 });
    }
    let free = free_term(t, xi, profile)?.value;
    let scale = -(2.0 * PI).powf(-(dim as f64));
    let fine = momentum_integral(m, dim, eps, t, xi, 1e-10);
    let coarse = momentum_integral(m, dim, eps, t, xi, 1e-7);
    Ok(DuhamelTerm {
        order: 1,
        value: free * scale * fine,
        quadrature_error: (free * scale).norm() * (fine - coarse).norm(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakCouplingRow {
    pub coupling: f64,
    /// Path-MC estimate of the averaged wave function at this coupling.
    pub fk: EnsembleEstimate,
    /// Free term plus first pairing term (with the exact renormalization
    /// phase factored in).
    pub prediction: Complex64,
    /// |fk - prediction|, estimated with the free-term noise cancelled.
    pub residual: f64,
    pub residual_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakCouplingReport {
    pub rows: Vec<WeakCouplingRow>,
    /// residual(c/2) / residual(c) for consecutive halvings.
    pub ratios: Vec<f64>,
    /// All ratios in [0.15, 0.4] (second-order residual of a first-order
    /// truncation).
    pub pass: bool,
}

/// Weak-coupling consistency check: scale the measure's weights by each
/// coupling `c`, compare the path-MC average against free + first-order, and
/// test that the residual scales like `c^2`.
///
/// All couplings share one path ensemble; the per-path functional is linear
/// in the weights, so it is computed once at unit coupling. The residual is
/// estimated as `|phi_hat prefactor| |mean(e^{i theta}(e^{-cX} - 1)) - (first
/// order)/pref|`, cancelling the O(1) free-term sampling noise.
#[allow(clippy::too_many_arguments)]
pub fn weak_coupling_check(
    m: &SchoenbergMeasure,
    dim: usize,
    eps: f64,
    t: f64,
    xi: &[f64],
    profile: &InitialProfile,
    couplings: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<WeakCouplingReport> {
    if couplings.is_empty() || couplings.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("couplings must be positive and strictly decreasing"));
    }
    if !(couplings[couplings.len() - 1] > 0.0) {
        return Err(Error::invalid("couplings must be positive"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths must be >= 2"));
    }
    // per-path endpoint phase and unit-coupling mixture functional
    let per_path: Vec<(Complex64, Complex64)> =
        par_map_seeded(seed, "wc", n_paths, |_, s| -> Result<(Complex64, Complex64)> {
            let path = sample_path(dim, t, n_steps, s)?;
            let batch = PathFunctionalBatch { taus: &[], moll_eps: None, mixture: Some((m, eps)) };
            let values = evaluate_batch(&path, &batch)?;
            let dot: f64 = xi.iter().zip(path.endpoint()).map(|(a, b)| a * b).sum();
            Ok(((crate::covariance::I_POW_3_2 * dot).exp(), values.mixture.unwrap()))
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let phi0 = profile.fourier_amplitude(xi)?;
    let free = free_term(t, xi, profile)?.value;
    let first_unit = first_order_term(m, dim, eps, t, xi, profile)?.value;

    let mut rows = Vec::new();
    for &c in couplings {
        let scaled = m.scaled(c);
        let c_eps = scaled.renorm_constant(dim, eps)?;
        let shift = Complex64::new(0.0, -c_eps * t).exp();

        let full_samples: Vec<Complex64> = per_path
            .iter()
            .map(|(phase, x)| phase * (-c * x).exp())
            .collect();
        let fk_est = EnsembleEstimate::from_samples(&full_samples);
        let fk = EnsembleEstimate {
            mean: phi0 * shift * fk_est.mean,
            stderr: phi0.norm() * fk_est.stderr,
            n_samples: fk_est.n_samples,
        };

        let prediction = shift * (free + c * first_unit);

        // control variate: subtract the endpoint-only phase so the O(1)
        // free-term noise cancels from the residual
        let diff_samples: Vec<Complex64> = per_path
            .iter()
            .map(|(phase, x)| phase * ((-c * x).exp() - 1.0))
            .collect();
        let diff = pairwise_sum(&diff_samples) / n_paths as f64;
        let resid_mean = phi0 * shift * diff - shift * c * first_unit;
        let sq: Vec<f64> = diff_samples
            .iter()
            .map(|z| (phi0 * shift * (z - diff)).norm_sqr())
            .collect();
        let var = sq.iter().sum::<f64>() / (n_paths as f64 - 1.0);
        rows.push(WeakCouplingRow {
            coupling: c,
            fk,
            prediction,
            residual: resid_mean.norm(),
            residual_stderr: (var / n_paths as f64).sqrt(),
        });
    }

    let mut ratios = Vec::new();
    for w in rows.windows(2) {
        ratios.push(w[1].residual / w[0].residual.max(1e-300));
    }
    let pass = ratios.iter().all(|r| (0.15..=0.4).contains(r));
    Ok(WeakCouplingReport { rows, ratios, pass })
}
