//! Monte Carlo evaluators of the averaged wave function: the finite-eps
//! path representation, its mean/fluctuation split (an exact algebraic
//! identity on shared randomness), the limiting representation built on the
//! renormalized self-intersection local time, and the three-route
//! cross-comparison report.

use num_complex::Complex64;
use serde::Serialize;

use crate::covariance::{
    free_kernel_simplex_mean, neg_two_pi_i_pow, ModelConstants, SchoenbergMeasure, I_POW_3_2,
};
use crate::ensemble::{par_map_seeded, EnsembleEstimate};
use crate::error::{Error, Result};
use crate::paths::{clark_ocone_gamma, evaluate_batch, sample_path, PathFunctionalBatch};
use crate::pde::{ensemble_average_fourier, suggested_dt, TorusGrid};
use crate::profile::InitialProfile;

/// Per-path data shared by the path-representation evaluators: the endpoint
/// and the free-kernel functional of each mixture atom.
struct PathSample {
    endpoint: Vec<f64>,
    x_tau: Vec<Complex64>,
    gamma: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn sample_ensemble(
    m: &SchoenbergMeasure,
    dim: usize,
    eps: Option<f64>,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    moll_eps: Option<f64>,
    use_clark_ocone: bool,
    tag: &str,
    seed: u64,
    mirror: bool,
) -> Result<Vec<PathSample>> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths must be >= 2"));
    }
    let taus: Vec<f64> = match eps {
        Some(e) => {
            if !(e > 0.0) {
                return Err(Error::invalid(format!("eps must be > 0, got {e}")));
            }
            m.atoms()
                .iter()
                .map(|a| e * e / (a.lambda * a.lambda))
                .collect()
        }
        None => Vec::new(),
    };
    par_map_seeded(seed, tag, n_paths, |_, s| {
        let sampled = sample_path(dim, t, n_steps, s)?;
        let path = if mirror { sampled.mirrored() } else { sampled };
        let batch = PathFunctionalBatch {
            taus: &taus,
            moll_eps: if use_clark_ocone { None } else { moll_eps },
            mixture: None,
        };
        let values = evaluate_batch(&path, &batch)?;
        let gamma = if use_clark_ocone {
            Some(clark_ocone_gamma(&path))
        } else {
            values.gamma
        };
        Ok(PathSample {
            endpoint: path.endpoint().to_vec(),
            x_tau: values.x_tau,
            gamma,
        })
    })
    .into_iter()
    .collect()
}

fn endpoint_exponent(xi: &[f64], endpoint: &[f64]) -> Complex64 {
    let dot: f64 = xi.iter().zip(endpoint).map(|(a, b)| a * b).sum();
    I_POW_3_2 * dot
}

/// Recombine the per-atom functionals into the mixture exponent
/// `(-2 pi i)^{d/2} sum_k w_k lambda_k^{-d} conj(x_k)`.
fn mixture_exponent(m: &SchoenbergMeasure, dim: usize, x: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (atom, v) in m.atoms().iter().zip(x) {
        acc += atom.weight * atom.lambda.powi(-(dim as i32)) * v.conj();
    }
    neg_two_pi_i_pow(dim) * acc
}

/// Finite-eps path representation of the averaged wave function at one
/// frequency:
/// `phi_hat_0(xi) e^{-i C_eps t} E_B[exp(i^{3/2} xi . B_t - X_eps)]`.
#[allow(clippy::too_many_arguments)]
pub fn fk_average(
    m: &SchoenbergMeasure,
    dim: usize,
    eps: f64,
    t: f64,
    xi: &[f64],
    profile: &InitialProfile,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<EnsembleEstimate> {
    Ok(fk_average_multi(m, dim, eps, t, &[xi.to_vec()], profile, n_paths, n_steps, seed, false)?
        .remove(0))
}

/// [`fk_average`] over several frequencies sharing one path ensemble (the
/// expensive per-path functional is computed once). `mirror` reflects every
/// path through the origin, which leaves each sample invariant under
/// `xi -> -xi` (used by the symmetry checks).
#[allow(clippy::too_many_arguments)]
pub fn fk_average_multi(
    m: &SchoenbergMeasure,
    dim: usize,
    eps: f64,
    t: f64,
    xi_list: &[Vec<f64>],
    profile: &InitialProfile,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    mirror: bool,
) -> Result<Vec<EnsembleEstimate>> {
    let ensemble = sample_ensemble(
        m, dim, Some(eps), t, n_paths, n_steps, None, false, "fk", seed, mirror,
    )?;
    let c_eps = m.renorm_constant(dim, eps)?;
    let shift = Complex64::new(0.0, -c_eps * t).exp();
    xi_list
        .iter()
        .map(|xi| {
            if xi.len() != dim {
                return Err(Error::DimensionMismatch { required: dim, got: xi.len() });
            }
            let samples: Vec<Complex64> = ensemble
                .iter()
                .map(|p| {
                    (endpoint_exponent(xi, &p.endpoint) - mixture_exponent(m, dim, &p.x_tau)).exp()
                })
                .collect();
            let est = EnsembleEstimate::from_samples(&samples);
            let pref = profile.fourier_amplitude(xi)? * shift;
            Ok(EnsembleEstimate {
                mean: pref * est.mean,
                stderr: pref.norm() * est.stderr,
                n_samples: est.n_samples,
            })
        })
        .collect()
}

/// Mean/fluctuation split of [`fk_average`]: the deterministic exponential of
/// the mixture mean is factored out and the Monte Carlo average runs over the
/// centered functionals. Equal to `fk_average` to round-off on the same seed.
#[allow(clippy::too_many_arguments)]
pub fn split_average(
    m: &SchoenbergMeasure,
    dim: usize,
    eps: f64,
    t: f64,
    xi: &[f64],
    profile: &InitialProfile,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<EnsembleEstimate> {
    let ensemble = sample_ensemble(
        m, dim, Some(eps), t, n_paths, n_steps, None, false, "fk", seed, false,
    )?;
    let c_eps = m.renorm_constant(dim, eps)?;
    let means: Vec<Complex64> = m
        .atoms()
        .iter()
        .map(|a| free_kernel_simplex_mean(dim, eps * eps / (a.lambda * a.lambda), t))
        .collect::<Result<_>>()?;
    let mean_exponent = mixture_exponent(m, dim, &means);
    let prefactor = profile.fourier_amplitude(xi)?
        * (Complex64::new(0.0, -c_eps * t) - mean_exponent).exp();
    let samples: Vec<Complex64> = ensemble
        .iter()
        .map(|p| {
            let centered: Vec<Complex64> =
                p.x_tau.iter().zip(&means).map(|(x, mu)| x - mu).collect();
            (endpoint_exponent(xi, &p.endpoint) - mixture_exponent(m, dim, &centered)).exp()
        })
        .collect();
    let est = EnsembleEstimate::from_samples(&samples);
    Ok(EnsembleEstimate {
        mean: prefactor * est.mean,
        stderr: prefactor.norm() * est.stderr,
        n_samples: est.n_samples,
    })
}

/// Limiting representation:
/// `phi_hat_0(xi) e^{rho_d(t)} E_B[exp(i^{3/2} xi . B_t - i^{3d/2} rbar_d gamma)]`
/// with `gamma` the renormalized self-intersection estimator (mollified by
/// default, Clark-Ocone on request).
#[allow(clippy::too_many_arguments)]
pub fn limit_average(
    m: &SchoenbergMeasure,
    dim: usize,
    t: f64,
    xi: &[f64],
    profile: &InitialProfile,
    n_paths: usize,
    n_steps: usize,
    moll_eps: f64,
    use_clark_ocone: bool,
    seed: u64,
) -> Result<EnsembleEstimate> {
    if xi.len() != dim {
        return Err(Error::DimensionMismatch { required: dim, got: xi.len() });
    }
    let constants = ModelConstants::new(m, dim)?;
    let gamma_coeff = constants.i_pow_3d_2 * constants.rbar;
    let ensemble = sample_ensemble(
        m,
        dim,
        None,
        t,
        n_paths,
        n_steps,
        Some(moll_eps),
        use_clark_ocone,
        "limit",
        seed,
        false,
    )?;
    let samples: Vec<Complex64> = ensemble
        .iter()
        .map(|p| {
            (endpoint_exponent(xi, &p.endpoint) - gamma_coeff * p.gamma.unwrap_or(0.0)).exp()
        })
        .collect();
    let est = EnsembleEstimate::from_samples(&samples);
    let pref = profile.fourier_amplitude(xi)? * m.limit_exponent(dim, t)?.exp();
    Ok(EnsembleEstimate {
        mean: pref * est.mean,
        stderr: pref.norm() * est.stderr,
        n_samples: est.n_samples,
    })
}

/// Resource knobs for [`compare_routes`].
#[derive(Debug, Clone, Copy)]
pub struct RouteBudgets {
    pub n_paths: usize,
    pub n_steps: usize,
    pub n_fields: usize,
    pub grid: TorusGrid,
    /// Solver step; `None` picks [`suggested_dt`].
    pub dt: Option<f64>,
    /// Mollification width for the limit route; `None` picks `4 dt_path`.
    pub moll_eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteRow {
    pub eps: f64,
    pub xi: Vec<f64>,
    pub fk: EnsembleEstimate,
    pub pde: EnsembleEstimate,
    pub limit: EnsembleEstimate,
    /// |fk - pde| in combined standard errors.
    pub fk_pde_sigma: f64,
    /// |pde - limit| absolute.
    pub pde_limit_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteReport {
    pub rows: Vec<RouteRow>,
    /// Every (xi, eps): |fk - pde| within 3 combined stderr.
    pub fk_pde_compatible: bool,
    /// For each xi, |pde - limit| nonincreasing as eps decreases (one
    /// combined-stderr slack).
    pub limit_gap_shrinks: bool,
}

/// Run all three routes on a shared frequency list (snapped to the grid's
/// dual lattice so every route sees identical frequencies) and compare.
/// `eps_list` must be strictly decreasing.
#[allow(clippy::too_many_arguments)]
pub fn compare_routes(
    m: &SchoenbergMeasure,
    dim: usize,
    t: f64,
    xi_list: &[Vec<f64>],
    eps_list: &[f64],
    profile: &InitialProfile,
    budgets: &RouteBudgets,
    seed: u64,
) -> Result<RouteReport> {
    if xi_list.is_empty() || eps_list.is_empty() {
        return Err(Error::invalid("xi_list and eps_list must be nonempty"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps_list must be strictly decreasing"));
    }
    let grid = budgets.grid;
    let snapped: Vec<Vec<f64>> = xi_list
        .iter()
        .map(|xi| grid.snap_frequency(xi).map(|(_, s, _)| s))
        .collect::<Result<_>>()?;
    let moll = budgets
        .moll_eps
        .unwrap_or(4.0 * t / budgets.n_steps as f64);

    let limits: Vec<EnsembleEstimate> = snapped
        .iter()
        .map(|xi| {
            limit_average(
                m,
                dim,
                t,
                xi,
                profile,
                budgets.n_paths,
                budgets.n_steps,
                moll,
                false,
                seed,
            )
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &eps in eps_list {
        let dt = match budgets.dt {
            Some(v) => v,
            None => suggested_dt(m, dim, eps)?,
        };
        let fk = fk_average_multi(
            m,
            dim,
            eps,
            t,
            &snapped,
            profile,
            budgets.n_paths,
            budgets.n_steps,
            seed,
            false,
        )?;
        let pde = ensemble_average_fourier(
            m,
            eps,
            t,
            &snapped,
            profile,
            grid,
            budgets.n_fields,
            dt,
            seed,
        )?;
        for ((xi, f), p) in snapped.iter().zip(fk).zip(pde) {
            let limit = limits[snapped.iter().position(|s| s == xi).unwrap()];
            rows.push(RouteRow {
                eps,
                xi: xi.clone(),
                fk: f,
                pde: p.estimate,
                limit,
                fk_pde_sigma: f.sigma_distance(&p.estimate),
                pde_limit_gap: (p.estimate.mean - limit.mean).norm(),
            });
        }
    }

    let fk_pde_compatible = rows.iter().all(|r| r.fk_pde_sigma <= 3.0);
    let mut limit_gap_shrinks = true;
    for xi in &snapped {
        let seq: Vec<&RouteRow> = rows.iter().filter(|r| &r.xi == xi).collect();
        for w in seq.windows(2) {
            let slack = w[0].pde.stderr + w[1].pde.stderr + 2.0 * w[0].limit.stderr;
            if w[1].pde_limit_gap > w[0].pde_limit_gap + slack {
                limit_gap_shrinks = false;
            }
        }
    }
    Ok(RouteReport { rows, fk_pde_compatible, limit_gap_shrinks })
}
