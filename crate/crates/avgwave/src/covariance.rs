//! Scale-mixture-of-Gaussians (Schoenberg class) covariances and the
//! deterministic constants derived from them.
//!
//! A measure `mu` with finite atom list `{(lambda_k, w_k)}` defines the
//! isotropic correlation `rho(r) = sum_k w_k exp(-(lambda_k r)^2 / 2)`.
//! Everything else in this module (integrated covariance, renormalization
//! shift, limit exponents, spectral density, simplex means of the free
//! Schrodinger kernel) is a closed-form function of the atoms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One Gaussian scale in the mixture: inverse length `lambda`, mass `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lambda: f64,
    pub weight: f64,
}

/// Finite atomic measure defining a Schoenberg-class covariance.
///
/// The empty atom list is the zero measure; it is accepted explicitly so
/// that free-evolution checks can run through the same code paths.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SchoenbergMeasure {
    atoms: Vec<Atom>,
}

impl SchoenbergMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(lambda, weight) in &atoms {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::invalid(format!("atom lambda must be > 0, got {lambda}")));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::invalid(format!("atom weight must be > 0, got {weight}")));
            }
        }
        Ok(Self {
            atoms: atoms
                .into_iter()
                .map(|(lambda, weight)| Atom { lambda, weight })
                .collect(),
        })
    }

    /// The zero measure: no atoms, zero covariance, free evolution.
    pub fn zero() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total mass of the measure, `rho(0)`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Largest atom scale; sets the shortest correlation length.
    pub fn max_lambda(&self) -> f64 {
        self.atoms.iter().map(|a| a.lambda).fold(0.0, f64::max)
    }

    /// Uniform scaling of all weights (the weak-coupling knob).
    pub fn scaled(&self, coupling: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { lambda: a.lambda, weight: coupling * a.weight })
                .collect(),
        }
    }

    /// `rho(r) = sum_k w_k exp(-(lambda_k r)^2/2)`, the two-point correlation
    /// at distance `r >= 0`.
    pub fn correlation(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        self.atoms
            .iter()
            .map(|a| a.weight * (-0.5 * (a.lambda * r).powi(2)).exp())
            .sum()
    }

    /// The covariance extended along the `sqrt(i)` ray: `rho(sqrt(i) r) =
    /// sum_k w_k exp(-i lambda_k^2 r^2 / 2)`, `r >= 0`.
    pub fn correlation_complex(&self, r: f64) -> Complex64 {
        debug_assert!(r >= 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            let phase = -0.5 * a.lambda * a.lambda * r * r;
            acc += a.weight * Complex64::new(phase.cos(), phase.sin());
        }
        acc
    }

    /// Integrated covariance `(2 pi)^{d/2} sum_k w_k lambda_k^{-d}`.
    pub fn integrated_covariance(&self, dim: usize) -> Result<f64> {
        check_dim(dim)?;
        Ok((2.0 * PI).powf(dim as f64 / 2.0)
            * self
                .atoms
                .iter()
                .map(|a| a.weight * a.lambda.powi(-(dim as i32)))
                .sum::<f64>())
    }

    /// The logarithmic moment `2 pi sum_k w_k log(lambda_k) / lambda_k^2`
    /// entering the d=2 limit exponent.
    pub fn log_moment_2d(&self) -> f64 {
        2.0 * PI
            * self
                .atoms
                .iter()
                .map(|a| a.weight * a.lambda.ln() / (a.lambda * a.lambda))
                .sum::<f64>()
    }

    /// Renormalization shift added to the potential: zero in d=1,
    /// `(rbar_2 / pi) log(1/eps)` in d=2.
    pub fn renorm_constant(&self, dim: usize, eps: f64) -> Result<f64> {
        check_dim(dim)?;
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
        }
        match dim {
            1 => Ok(0.0),
            _ => Ok(self.integrated_covariance(2)? / PI * (1.0 / eps).ln()),
        }
    }

    /// Deterministic exponent of the limiting representation.
    ///
    /// d=1: `-rbar_1 (2t)^{3/2} / (3 sqrt(i pi))` with `sqrt(i pi) = sqrt(pi) sqrt(i)`.
    /// d=2: `rbar_2 [ (it/2pi) log(t/e) - t/4 ] + rbar_2' it/pi`.
    pub fn limit_exponent(&self, dim: usize, t: f64) -> Result<Complex64> {
        check_dim(dim)?;
        if !(t > 0.0) {
            return Err(Error::invalid(format!("t must be > 0, got {t}")));
        }
        match dim {
            1 => {
                let rbar = self.integrated_covariance(1)?;
                let sqrt_i_pi = PI.sqrt() * SQRT_I;
                Ok(-rbar * (2.0 * t).powf(1.5) / (3.0 * sqrt_i_pi))
            }
            _ => {
                let rbar = self.integrated_covariance(2)?;
                let rbar_log = self.log_moment_2d();
                let main = rbar
                    * (Complex64::new(0.0, t / (2.0 * PI)) * (t / std::f64::consts::E).ln()
                        - Complex64::new(t / 4.0, 0.0));
                Ok(main + Complex64::new(0.0, rbar_log * t / PI))
            }
        }
    }

    /// Finite-eps counterpart of [`limit_exponent`](Self::limit_exponent):
    /// `-(-2 pi i)^{d/2} sum_k w_k lambda_k^{-d} conj(E_B[X_{eps^2/lambda_k^2}(t)])
    ///  - i C_eps t`, which converges to the limit exponent as `eps -> 0`.
    pub fn regularized_limit_exponent(&self, dim: usize, eps: f64, t: f64) -> Result<Complex64> {
        check_dim(dim)?;
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            let tau = eps * eps / (a.lambda * a.lambda);
            let mean = free_kernel_simplex_mean(dim, tau, t)?;
            acc += a.weight * a.lambda.powi(-(dim as i32)) * mean.conj();
        }
        let c_eps = self.renorm_constant(dim, eps)?;
        Ok(-neg_two_pi_i_pow(dim) * acc - Complex64::new(0.0, c_eps * t))
    }

    /// Fourier transform of the covariance:
    /// `(2 pi)^{d/2} sum_k w_k lambda_k^{-d} exp(-|p|^2 / (2 lambda_k^2))`.
    pub fn spectral_density(&self, dim: usize, p: &[f64]) -> f64 {
        let p2: f64 = p.iter().map(|x| x * x).sum();
        (2.0 * PI).powf(dim as f64 / 2.0)
            * self
                .atoms
                .iter()
                .map(|a| {
                    a.weight * a.lambda.powi(-(dim as i32))
                        * (-p2 / (2.0 * a.lambda * a.lambda)).exp()
                })
                .sum::<f64>()
    }
}

/// `sqrt(i) = (1 + i)/sqrt(2)`, fixed once for the whole crate.
pub const SQRT_I: Complex64 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);

/// `i^{3/2} = i * sqrt(i) = (-1 + i)/sqrt(2)`.
pub const I_POW_3_2: Complex64 =
    Complex64::new(-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);

/// Fixed complex constants of the model in dimension `dim`.
#[derive(Debug, Clone, Copy)]
pub struct ModelConstants {
    pub dim: usize,
    /// Integrated covariance of the measure in this dimension.
    pub rbar: f64,
    /// Logarithmic moment, d=2 only (zero in d=1).
    pub rbar2_prime: f64,
    pub sqrt_i: Complex64,
    pub i_pow_3_2: Complex64,
    /// `i^{3d/2}`: `i^{3/2}` in d=1, `i^3 = -i` in d=2.
    pub i_pow_3d_2: Complex64,
}

impl ModelConstants {
    pub fn new(measure: &SchoenbergMeasure, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            rbar: measure.integrated_covariance(dim)?,
            rbar2_prime: if dim == 2 { measure.log_moment_2d() } else { 0.0 },
            sqrt_i: SQRT_I,
            i_pow_3_2: I_POW_3_2,
            i_pow_3d_2: if dim == 1 { I_POW_3_2 } else { Complex64::new(0.0, -1.0) },
        })
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::BadDimension(dim))
    }
}

/// Branch choice `(2 pi i)^{-d/2} := (2 pi)^{-d/2} e^{-i pi d / 4}`.
pub fn two_pi_i_pow_neg(dim: usize) -> Complex64 {
    let modulus = (2.0 * PI).powf(-(dim as f64) / 2.0);
    let phase = -(dim as f64) * PI / 4.0;
    modulus * Complex64::new(phase.cos(), phase.sin())
}

/// Branch choice `(-2 pi i)^{d/2} := (2 pi)^{d/2} e^{-i pi d / 4}`, matched to
/// `s_tau = (2 pi i tau)^{-d/2}` so that the mixture identity is exact.
pub fn neg_two_pi_i_pow(dim: usize) -> Complex64 {
    let modulus = (2.0 * PI).powf(dim as f64 / 2.0);
    let phase = -(dim as f64) * PI / 4.0;
    modulus * Complex64::new(phase.cos(), phase.sin())
}

/// Prefactor of the free Schrodinger kernel, `(2 pi i tau)^{-d/2}`.
pub fn free_kernel_prefactor(dim: usize, tau: f64) -> Complex64 {
    let modulus = (2.0 * PI * tau).powf(-(dim as f64) / 2.0);
    let phase = -(dim as f64) * PI / 4.0;
    modulus * Complex64::new(phase.cos(), phase.sin())
}

/// `E_B[X_tau(t)] = (2 pi i)^{-d/2} int_0^t (t - u) (tau - i u)^{-d/2} du`,
/// evaluated in closed form (principal branch; `Re(tau - iu) > 0` throughout).
pub fn free_kernel_simplex_mean(dim: usize, tau: f64, t: f64) -> Result<Complex64> {
    check_dim(dim)?;
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("t must be > 0, got {t}")));
    }
    match dim {
        1 => {
            // int_0^t (t-u)(tau - iu)^{-1/2} du
            //   = -2 i t sqrt(tau) - (4/3) [ (tau - it)^{3/2} - tau^{3/2} ]
            let z = Complex64::new(tau, -t);
            let z32 = z.sqrt() * z;
            let inner = Complex64::new(0.0, -2.0 * t * tau.sqrt())
                - 4.0 / 3.0 * (z32 - Complex64::new(tau.powf(1.5), 0.0));
            Ok(two_pi_i_pow_neg(1) * inner)
        }
        _ => {
            // [(t + i tau) Log(1 - i t / tau) - t] / (2 pi)
            let log_term = Complex64::new(1.0, -t / tau).ln();
            Ok((Complex64::new(t, tau) * log_term - Complex64::new(t, 0.0)) / (2.0 * PI))
        }
    }
}
