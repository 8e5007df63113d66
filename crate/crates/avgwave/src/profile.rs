//! Initial wave profiles. The workhorse is a Gaussian packet, smooth and
//! effectively compactly supported, with closed forms in both space and
//! frequency; a tabulated variant carries externally supplied frequency
//! samples.
//!
//! Fourier convention: `f_hat(xi) = int f(x) exp(-i xi . x) dx`, so
//! `int |f_hat|^2 dxi = (2 pi)^d int |f|^2 dx`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum InitialProfile {
    /// `phi_0(x) = exp(-|x - center|^2 / (2 width^2)) exp(i k . x)`.
    GaussianPacket {
        center: Vec<f64>,
        width: f64,
        wavevector: Vec<f64>,
    },
    /// Frequency-domain samples `(xi, phi_hat(xi))`; queries must hit a
    /// stored node.
    Tabulated { entries: Vec<(Vec<f64>, Complex64)> },
}

impl InitialProfile {
    pub fn packet(center: Vec<f64>, width: f64, wavevector: Vec<f64>) -> Result<Self> {
        if center.len() != wavevector.len() || center.is_empty() || center.len() > 2 {
            return Err(Error::invalid("center and wavevector must share length 1 or 2"));
        }
        if !(width > 0.0) {
            return Err(Error::invalid("width must be > 0"));
        }
        Ok(InitialProfile::GaussianPacket { center, width, wavevector })
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialProfile::GaussianPacket { center, .. } => center.len(),
            InitialProfile::Tabulated { entries } => {
                entries.first().map(|(xi, _)| xi.len()).unwrap_or(0)
            }
        }
    }

    /// `phi_hat_0(xi)`. For the packet:
    /// `(2 pi w^2)^{d/2} exp(-w^2 |xi - k|^2 / 2) exp(-i (xi - k) . c)`.
    pub fn fourier_amplitude(&self, xi: &[f64]) -> Result<Complex64> {
        match self {
            InitialProfile::GaussianPacket { center, width, wavevector } => {
                if xi.len() != center.len() {
                    return Err(Error::DimensionMismatch { required: center.len(), got: xi.len() });
                }
                let d = center.len() as f64;
                let mut q2 = 0.0;
                let mut qc = 0.0;
                for i in 0..center.len() {
                    let q = xi[i] - wavevector[i];
                    q2 += q * q;
                    qc += q * center[i];
                }
                let amp = (2.0 * PI * width * width).powf(d / 2.0)
                    * (-width * width * q2 / 2.0).exp();
                Ok(amp * Complex64::new(0.0, -qc).exp())
            }
            InitialProfile::Tabulated { entries } => {
                for (node, value) in entries {
                    if node.len() == xi.len()
                        && node.iter().zip(xi).all(|(a, b)| (a - b).abs() <= 1e-12)
                    {
                        return Ok(*value);
                    }
                }
                Err(Error::invalid(format!("no tabulated value at xi = {xi:?}")))
            }
        }
    }

    /// `phi_0(x)` in space; tabulated profiles have no spatial form.
    pub fn real_space(&self, x: &[f64]) -> Result<Complex64> {
        match self {
            InitialProfile::GaussianPacket { center, width, wavevector } => {
                if x.len() != center.len() {
                    return Err(Error::DimensionMismatch { required: center.len(), got: x.len() });
                }
                let mut r2 = 0.0;
                let mut kx = 0.0;
                for i in 0..center.len() {
                    let d = x[i] - center[i];
                    r2 += d * d;
                    kx += wavevector[i] * x[i];
                }
                Ok((-r2 / (2.0 * width * width)).exp() * Complex64::new(0.0, kx).exp())
            }
            InitialProfile::Tabulated { .. } => {
                Err(Error::invalid("tabulated profile has no spatial representation"))
            }
        }
    }

    /// `int |phi_0|^2 dx = (pi w^2)^{d/2}` for the packet.
    pub fn l2_norm_sq(&self) -> Result<f64> {
        match self {
            InitialProfile::GaussianPacket { center, width, .. } => {
                Ok((PI * width * width).powf(center.len() as f64 / 2.0))
            }
            InitialProfile::Tabulated { .. } => {
                Err(Error::invalid("tabulated profile has no spatial norm"))
            }
        }
    }

    /// `int |phi_hat_0|^2 dxi = (2 pi)^d int |phi_0|^2 dx`.
    pub fn fourier_norm_sq(&self) -> Result<f64> {
        let d = self.dim() as f64;
        Ok((2.0 * PI).powf(d) * self.l2_norm_sq()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use approx::assert_relative_eq;

    fn packet_1d() -> InitialProfile {
        InitialProfile::packet(vec![0.4], 0.7, vec![1.3]).unwrap()
    }

    #[test]
    fn packet_validation() {
        assert!(InitialProfile::packet(vec![0.0], 0.0, vec![0.0]).is_err());
        assert!(InitialProfile::packet(vec![0.0, 0.0], 1.0, vec![0.0]).is_err());
        assert!(InitialProfile::packet(vec![0.0; 3], 1.0, vec![0.0; 3]).is_err());
    }

    #[test]
    fn fourier_amplitude_matches_quadrature() {
        let p = packet_1d();
        for &xi in &[0.0, 0.7, -2.0, 3.5] {
            let closed = p.fourier_amplitude(&[xi]).unwrap();
            let direct = integrate(
                |x| {
                    p.real_space(&[x]).unwrap() * Complex64::new(0.0, -xi * x).exp()
                },
                -12.0,
                12.0,
                1e-12,
            );
            assert!((closed - direct).norm() < 1e-10, "xi={xi}: {closed} vs {direct}");
        }
    }

    #[test]
    fn packet_2d_factorizes() {
        let p = InitialProfile::packet(vec![0.1, -0.3], 0.5, vec![1.0, 2.0]).unwrap();
        let px = InitialProfile::packet(vec![0.1], 0.5, vec![1.0]).unwrap();
        let py = InitialProfile::packet(vec![-0.3], 0.5, vec![2.0]).unwrap();
        let v = p.fourier_amplitude(&[0.4, -1.1]).unwrap();
        let f = px.fourier_amplitude(&[0.4]).unwrap() * py.fourier_amplitude(&[-1.1]).unwrap();
        assert!((v - f).norm() < 1e-13);
    }

    #[test]
    fn norms() {
        let p = packet_1d();
        assert_relative_eq!(p.l2_norm_sq().unwrap(), (PI * 0.49).sqrt(), max_relative = 1e-14);
        // Plancherel against quadrature of |phi_hat|^2
        let direct = integrate(
            |xi| Complex64::new(p.fourier_amplitude(&[xi]).unwrap().norm_sqr(), 0.0),
            -15.0,
            18.0,
            1e-12,
        );
        assert_relative_eq!(p.fourier_norm_sq().unwrap(), direct.re, max_relative = 1e-9);
    }

    #[test]
    fn tabulated_lookup() {
        let t = InitialProfile::Tabulated {
            entries: vec![(vec![1.0], Complex64::new(2.0, -1.0))],
        };
        assert_eq!(t.fourier_amplitude(&[1.0]).unwrap(), Complex64::new(2.0, -1.0));
        assert!(t.fourier_amplitude(&[2.0]).is_err());
        assert!(t.real_space(&[0.0]).is_err());
    }
}
