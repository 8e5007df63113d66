//! Brownian path generation and the path functionals built on the ordered
//! time simplex: occupation/local time (d=1), intersection time, the
//! mollified renormalized self-intersection local time, oscillatory
//! free-kernel functionals and their Schoenberg mixtures, and the
//! Clark-Ocone stochastic-integral estimator.
//!
//! Simplex convention: both time variables run over the left grid points
//! `t_j = j dt`, `j = 0..n`. Off-diagonal ordered pairs carry weight `dt^2`,
//! the diagonal carries `dt^2 / 2` and is kept for bounded kernels (total
//! weight exactly `t^2/2`). The singular Clark-Ocone integrand excludes the
//! diagonal.
//!
//! Every functional has an exact `O(n^2)` pair scan. For large ensembles the
//! kernels that depend on the pair separation only are also evaluated
//! through [`PairSeparationBins`], a binned quadrature over `|dB|^2` with a
//! second-order moment correction; `tests` pin its agreement with the exact
//! scan.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::covariance::{check_dim, free_kernel_prefactor, free_kernel_simplex_mean, neg_two_pi_i_pow, SchoenbergMeasure};
use crate::error::{Error, Result};

/// Discretized d-dimensional Brownian trajectory on a uniform time grid,
/// started at the origin.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    dim: usize,
    t_end: f64,
    n_steps: usize,
    /// Flat row-major positions, `(n_steps + 1) * dim` entries.
    positions: Vec<f64>,
    seed: u64,
}

impl BrownianPath {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
    /// Position at grid index `i` (0..=n_steps).
    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }
    pub fn endpoint(&self) -> &[f64] {
        self.point(self.n_steps)
    }

    /// Path with externally supplied positions (test fixtures).
    pub fn from_positions(dim: usize, t_end: f64, positions: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if positions.len() % dim != 0 || positions.len() < 2 * dim {
            return Err(Error::invalid("positions length must be a multiple of dim, at least two points"));
        }
        let n_steps = positions.len() / dim - 1;
        Ok(Self { dim, t_end, n_steps, positions, seed: 0 })
    }

    /// All positions at the origin; kernels see zero increments everywhere.
    pub fn zero_fixture(dim: usize, t_end: f64, n_steps: usize) -> Self {
        Self {
            dim,
            t_end,
            n_steps,
            positions: vec![0.0; (n_steps + 1) * dim],
            seed: 0,
        }
    }

    /// Path reflected through the origin (drives the conjugation symmetry).
    pub fn mirrored(&self) -> Self {
        Self {
            dim: self.dim,
            t_end: self.t_end,
            n_steps: self.n_steps,
            positions: self.positions.iter().map(|x| -x).collect(),
            seed: self.seed,
        }
    }
}

/// Sample a standard Brownian path; a deterministic function of `seed`.
pub fn sample_path(dim: usize, t_end: f64, n_steps: usize, seed: u64) -> Result<BrownianPath> {
    check_dim(dim)?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be >= 1"));
    }
    if !(t_end > 0.0) {
        return Err(Error::invalid(format!("t_end must be > 0, got {t_end}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = t_end / n_steps as f64;
    let sigma = dt.sqrt();
    let mut positions = vec![0.0; (n_steps + 1) * dim];
    for i in 1..=n_steps {
        for c in 0..dim {
            let g: f64 = StandardNormal.sample(&mut rng);
            positions[i * dim + c] = positions[(i - 1) * dim + c] + sigma * g;
        }
    }
    Ok(BrownianPath { dim, t_end, n_steps, positions, seed })
}

/// Occupation measure of a d=1 path over spatial bins of width `bin_width`;
/// each left grid point contributes `dt` to its bin.
#[derive(Debug, Clone)]
pub struct LocalTimeProfile {
    pub bin_width: f64,
    pub bins: HashMap<i64, f64>,
}

impl LocalTimeProfile {
    pub fn total_mass(&self) -> f64 {
        self.bins.values().sum()
    }
}

pub fn local_time_profile(path: &BrownianPath, bin_width: f64) -> Result<LocalTimeProfile> {
    if path.dim != 1 {
        return Err(Error::DimensionMismatch { required: 1, got: path.dim });
    }
    if !(bin_width > 0.0) {
        return Err(Error::invalid("bin_width must be > 0"));
    }
    let dt = path.dt();
    let mut bins = HashMap::new();
    for i in 0..path.n_steps {
        let idx = (path.positions[i] / bin_width).floor() as i64;
        *bins.entry(idx).or_insert(0.0) += dt;
    }
    Ok(LocalTimeProfile { bin_width, bins })
}

/// Intersection time `(1/2) int l^2(t, x) dx` from the binned local time.
pub fn intersection_time_binned(path: &BrownianPath, bin_width: f64) -> Result<f64> {
    let profile = local_time_profile(path, bin_width)?;
    Ok(0.5 * profile.bins.values().map(|m| m * m).sum::<f64>() / bin_width)
}

/// Intersection time as the simplex sum `(1/eps) sum f(dB/eps) dt^2` with `f`
/// the standard Gaussian density. Pairs farther apart than `8 eps` contribute
/// below 1e-14 of the kernel peak and are skipped via a sorted sweep.
pub fn intersection_time_kernel(path: &BrownianPath, eps_kernel: f64) -> Result<f64> {
    if path.dim != 1 {
        return Err(Error::DimensionMismatch { required: 1, got: path.dim });
    }
    if !(eps_kernel > 0.0) {
        return Err(Error::invalid("eps_kernel must be > 0"));
    }
    let n = path.n_steps;
    let dt = path.dt();
    let cutoff = 8.0 * eps_kernel;
    let inv_two_eps2 = 1.0 / (2.0 * eps_kernel * eps_kernel);
    let norm = 1.0 / ((2.0 * PI).sqrt() * eps_kernel);

    let mut values: Vec<f64> = path.positions[..n].to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // off-diagonal unordered pairs within the cutoff window
    let mut acc = 0.0;
    for i in 0..n {
        let xi = values[i];
        for j in (i + 1)..n {
            let d = values[j] - xi;
            if d > cutoff {
                break;
            }
            acc += (-d * d * inv_two_eps2).exp();
        }
    }
    // diagonal carries half weight
    Ok(norm * dt * dt * (acc + 0.5 * n as f64))
}

/// Exact mean of the d=1 intersection time, `4 t^{3/2} / (3 sqrt(2 pi))`.
pub fn intersection_time_mean_1d(t: f64) -> f64 {
    4.0 * t.powf(1.5) / (3.0 * (2.0 * PI).sqrt())
}

/// Analytic mean of the mollified self-intersection sum on this grid:
/// `sum_{pairs} dt^2 E[q_eps(dB)]` with `E[q_eps(dB_m)] = (2 pi (eps + m dt))^{-d/2}`
/// (Gaussian convolution identity); the diagonal enters with half weight.
pub fn mollified_pair_mean(dim: usize, n: usize, dt: f64, moll_eps: f64) -> f64 {
    let d2 = dim as f64 / 2.0;
    let mut acc = 0.5 * n as f64 / (2.0 * PI * moll_eps).powf(d2);
    for m in 1..n {
        acc += (n - m) as f64 / (2.0 * PI * (moll_eps + m as f64 * dt)).powf(d2);
    }
    acc * dt * dt
}

/// Renormalized self-intersection local time.
///
/// d=2: simplex sum of `q_eps(dB) - E[q_eps(dB)]` (exact analytic centering).
/// d=1: binned intersection time (bin width `moll_eps`) minus its exact mean.
pub fn gamma_renormalized(path: &BrownianPath, moll_eps: f64) -> Result<f64> {
    if !(moll_eps > 0.0) {
        return Err(Error::invalid("moll_eps must be > 0"));
    }
    match path.dim {
        1 => Ok(intersection_time_binned(path, moll_eps)? - intersection_time_mean_1d(path.t_end)),
        _ => {
            let n = path.n_steps;
            let dt = path.dt();
            let c = 1.0 / (2.0 * moll_eps);
            let q_sum = gaussian_pair_sum_exact(path, c) / (2.0 * PI * moll_eps) * dt * dt
                + 0.5 * n as f64 * dt * dt / (2.0 * PI * moll_eps);
            Ok(q_sum - mollified_pair_mean(2, n, dt, moll_eps))
        }
    }
}

/// `X_tau(t)`: simplex sum of the free Schrodinger kernel
/// `(2 pi i tau)^{-d/2} exp(-|dB|^2 / (2 i tau))`.
pub fn schrodinger_functional(path: &BrownianPath, tau: f64) -> Result<Complex64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be > 0"));
    }
    let n = path.n_steps;
    let dt = path.dt();
    let off_diag = phase_pair_sum_exact(path, 1.0 / (2.0 * tau));
    let total = off_diag + Complex64::new(0.5 * n as f64, 0.0);
    Ok(free_kernel_prefactor(path.dim, tau) * dt * dt * total)
}

/// `X_tau(t) - E_B[X_tau(t)]` with exact analytic centering.
pub fn centered_schrodinger_functional(path: &BrownianPath, tau: f64) -> Result<Complex64> {
    Ok(schrodinger_functional(path, tau)? - free_kernel_simplex_mean(path.dim, tau, path.t_end)?)
}

/// The Schoenberg-mixture functional
/// `X_eps = (-2 pi i)^{d/2} sum_k w_k lambda_k^{-d} conj(X_{eps^2/lambda_k^2})`.
pub fn mixture_functional(
    path: &BrownianPath,
    measure: &SchoenbergMeasure,
    eps: f64,
) -> Result<Complex64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be > 0"));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for atom in measure.atoms() {
        let tau = eps * eps / (atom.lambda * atom.lambda);
        acc += atom.weight
            * atom.lambda.powi(-(path.dim as i32))
            * schrodinger_functional(path, tau)?.conj();
    }
    Ok(neg_two_pi_i_pow(path.dim) * acc)
}

/// The same functional evaluated directly as the simplex sum of the scaled
/// complex covariance `eps^{-d} rho(sqrt(i) |dB| / eps)`; agrees with
/// [`mixture_functional`] to round-off (the branch choices make the identity
/// exact).
pub fn mixture_functional_direct(
    path: &BrownianPath,
    measure: &SchoenbergMeasure,
    eps: f64,
) -> Result<Complex64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be > 0"));
    }
    let n = path.n_steps;
    let dt = path.dt();
    let scale = eps.powi(-(path.dim as i32));
    let mut acc = Complex64::new(0.0, 0.0);
    for atom in measure.atoms() {
        let b = -atom.lambda * atom.lambda / (2.0 * eps * eps);
        let off = phase_pair_sum_exact(path, b);
        acc += atom.weight * (off + Complex64::new(0.5 * n as f64, 0.0));
    }
    Ok(scale * dt * dt * acc)
}

/// Clark-Ocone estimator of the renormalized self-intersection local time:
/// the left-point Ito sum `sum_j chi_0(t, r_j) . (B_{j+1} - B_j)` with the
/// closed-form integrand (diagonal `u = r` excluded; the integrand has an
/// integrable singularity there).
pub fn clark_ocone_gamma(path: &BrownianPath) -> f64 {
    let n = path.n_steps;
    let dt = path.dt();
    let t = path.t_end;
    let mut acc = 0.0;
    match path.dim {
        1 => {
            let pos = &path.positions;
            for j in 1..n {
                let r = j as f64 * dt;
                let br = pos[j];
                let inv = 1.0 / (2.0 * (t - r)).sqrt();
                let mut chi = 0.0;
                for k in 0..j {
                    let x = br - pos[k];
                    chi -= x.signum() * erfc(x.abs() * inv);
                }
                chi *= dt;
                acc += chi * (pos[j + 1] - pos[j]);
            }
        }
        _ => {
            let pos = &path.positions;
            for j in 1..n {
                let r = j as f64 * dt;
                let brx = pos[2 * j];
                let bry = pos[2 * j + 1];
                let c = 1.0 / (2.0 * (t - r));
                let mut chi_x = 0.0;
                let mut chi_y = 0.0;
                for k in 0..j {
                    let dx = brx - pos[2 * k];
                    let dy = bry - pos[2 * k + 1];
                    let r2 = dx * dx + dy * dy;
                    let w = (-r2 * c).exp() / r2;
                    chi_x -= dx * w;
                    chi_y -= dy * w;
                }
                let scale = dt / PI;
                acc += scale * (chi_x * (pos[2 * j + 2] - pos[2 * j]) + chi_y * (pos[2 * j + 3] - pos[2 * j + 1]));
            }
        }
    }
    acc
}

/// Closed-form time-integrated kernel gradient `int_0^T grad q_sigma(x) dsigma`
/// used by the Clark-Ocone integrand; exposed for the quadrature cross-check.
pub fn integrated_kernel_gradient(dim: usize, x: &[f64], t_window: f64) -> Vec<f64> {
    match dim {
        1 => {
            let x0 = x[0];
            vec![-x0.signum() * erfc(x0.abs() / (2.0 * t_window).sqrt())]
        }
        _ => {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let w = (-r2 / (2.0 * t_window)).exp() / (PI * r2);
            vec![-x[0] * w, -x[1] * w]
        }
    }
}

// ---------------------------------------------------------------------------
// Exact pair scans
// ---------------------------------------------------------------------------

/// `sum_{0 <= k < j <= n-1} exp(i b |B_j - B_k|^2)` over the left grid points.
pub fn phase_pair_sum_exact(path: &BrownianPath, b: f64) -> Complex64 {
    let n = path.n_steps;
    let pos = &path.positions;
    let mut re = 0.0;
    let mut im = 0.0;
    match path.dim {
        1 => {
            for j in 1..n {
                let pj = pos[j];
                for k in 0..j {
                    let d = pj - pos[k];
                    let (s, c) = (b * d * d).sin_cos();
                    re += c;
                    im += s;
                }
            }
        }
        _ => {
            for j in 1..n {
                let px = pos[2 * j];
                let py = pos[2 * j + 1];
                for k in 0..j {
                    let dx = px - pos[2 * k];
                    let dy = py - pos[2 * k + 1];
                    let (s, c) = (b * (dx * dx + dy * dy)).sin_cos();
                    re += c;
                    im += s;
                }
            }
        }
    }
    Complex64::new(re, im)
}

/// `sum_{0 <= k < j <= n-1} exp(-c |B_j - B_k|^2)`.
pub fn gaussian_pair_sum_exact(path: &BrownianPath, c: f64) -> f64 {
    let n = path.n_steps;
    let pos = &path.positions;
    let mut acc = 0.0;
    match path.dim {
        1 => {
            for j in 1..n {
                let pj = pos[j];
                for k in 0..j {
                    let d = pj - pos[k];
                    acc += (-c * d * d).exp();
                }
            }
        }
        _ => {
            for j in 1..n {
                let px = pos[2 * j];
                let py = pos[2 * j + 1];
                for k in 0..j {
                    let dx = px - pos[2 * k];
                    let dy = py - pos[2 * k + 1];
                    acc += (-c * (dx * dx + dy * dy)).exp();
                }
            }
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Binned pair-separation quadrature
// ---------------------------------------------------------------------------

/// Histogram of squared pair separations `|B_j - B_k|^2`, `k < j`, carrying
/// zeroth/first/second moments per bin. A kernel `K(r^2)` is then summed as
/// `K(c) count + K'(c) S1 + K''(c) S2 / 2` per bin, exact through second
/// order in the within-bin spread; the residual per pair is bounded by
/// `|K'''| (width/2)^3 / 6`.
pub struct PairSeparationBins {
    width: f64,
    count: Vec<u32>,
    sum1: Vec<f64>,
    sum2: Vec<f64>,
    pub n_points: usize,
}

impl PairSeparationBins {
    /// Bin width resolving curvature scale `a` (largest `|b|` or `c` among
    /// the kernels to be evaluated) to per-pair tolerance `tol`.
    pub fn width_for(a: f64, tol: f64) -> f64 {
        (48.0 * tol).cbrt() / a.max(1e-12)
    }

    pub fn build(path: &BrownianPath, width: f64) -> Self {
        const MAX_BINS: usize = 6_000_000;
        let n = path.n_steps;
        let pos = &path.positions;
        // r <= 2 max |B|, computed in O(n)
        let mut max_norm2: f64 = 0.0;
        for i in 0..n {
            let p = path.point(i);
            let m: f64 = p.iter().map(|x| x * x).sum();
            max_norm2 = max_norm2.max(m);
        }
        let r2_max = (4.0 * max_norm2).max(width);
        let mut width = width;
        let mut n_bins = (r2_max / width).ceil() as usize + 2;
        if n_bins > MAX_BINS {
            n_bins = MAX_BINS;
            width = r2_max / (MAX_BINS as f64 - 2.0);
        }
        let mut count = vec![0u32; n_bins];
        let mut sum1 = vec![0.0f64; n_bins];
        let mut sum2 = vec![0.0f64; n_bins];
        let inv_w = 1.0 / width;
        match path.dim {
            1 => {
                for j in 1..n {
                    let pj = pos[j];
                    for k in 0..j {
                        let d = pj - pos[k];
                        let r2 = d * d;
                        let idx = (r2 * inv_w) as usize;
                        let delta = r2 - (idx as f64 + 0.5) * width;
                        count[idx] += 1;
                        sum1[idx] += delta;
                        sum2[idx] += delta * delta;
                    }
                }
            }
            _ => {
                for j in 1..n {
                    let px = pos[2 * j];
                    let py = pos[2 * j + 1];
                    for k in 0..j {
                        let dx = px - pos[2 * k];
                        let dy = py - pos[2 * k + 1];
                        let r2 = dx * dx + dy * dy;
                        let idx = (r2 * inv_w) as usize;
                        let delta = r2 - (idx as f64 + 0.5) * width;
                        count[idx] += 1;
                        sum1[idx] += delta;
                        sum2[idx] += delta * delta;
                    }
                }
            }
        }
        Self { width, count, sum1, sum2, n_points: n }
    }

    /// `sum_{k<j} exp(i b r^2)` from the binned moments.
    pub fn phase_sum(&self, b: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, &cnt) in self.count.iter().enumerate() {
            if cnt == 0 {
                continue;
            }
            let x = (idx as f64 + 0.5) * self.width;
            let (s, c) = (b * x).sin_cos();
            let k = Complex64::new(c, s);
            // K + K' d + K'' d^2/2 with K' = i b K, K'' = -b^2 K
            let corr = Complex64::new(
                cnt as f64 - 0.5 * b * b * self.sum2[idx],
                b * self.sum1[idx],
            );
            acc += k * corr;
        }
        acc
    }

    /// `sum_{k<j} exp(-c r^2)` from the binned moments.
    pub fn gaussian_sum(&self, c: f64) -> f64 {
        let mut acc = 0.0;
        for (idx, &cnt) in self.count.iter().enumerate() {
            if cnt == 0 {
                continue;
            }
            let x = (idx as f64 + 0.5) * self.width;
            let k = (-c * x).exp();
            if k < 1e-18 {
                continue;
            }
            acc += k * (cnt as f64 - c * self.sum1[idx] + 0.5 * c * c * self.sum2[idx]);
        }
        acc
    }
}

/// One-pass evaluation of the per-path functionals an ensemble needs:
/// `X_tau` for every requested tau, the mollified self-intersection, and the
/// Schoenberg-mixture functional. Uses the binned quadrature for large paths
/// and the exact scans otherwise.
pub struct PathFunctionalBatch<'a> {
    pub taus: &'a [f64],
    pub moll_eps: Option<f64>,
    pub mixture: Option<(&'a SchoenbergMeasure, f64)>,
}

pub struct PathFunctionalValues {
    pub x_tau: Vec<Complex64>,
    pub gamma: Option<f64>,
    pub mixture: Option<Complex64>,
}

/// Per-pair tolerance of the binned backend.
const BIN_TOL: f64 = 2.0e-6;
/// Below this step count the exact scans are cheap enough.
const BIN_THRESHOLD: usize = 1500;

pub fn evaluate_batch(path: &BrownianPath, batch: &PathFunctionalBatch) -> Result<PathFunctionalValues> {
    let n = path.n_steps;
    let dt = path.dt();
    let dim = path.dim;
    let half_diag = 0.5 * n as f64;

    // largest curvature scale among requested kernels
    let mut a_max: f64 = 0.0;
    for &tau in batch.taus {
        if !(tau > 0.0) {
            return Err(Error::invalid("tau must be > 0"));
        }
        a_max = a_max.max(1.0 / (2.0 * tau));
    }
    if let Some(eps) = batch.moll_eps {
        if !(eps > 0.0) {
            return Err(Error::invalid("moll_eps must be > 0"));
        }
        if dim == 2 {
            a_max = a_max.max(1.0 / (2.0 * eps));
        }
    }
    if let Some((m, eps)) = batch.mixture {
        if !(eps > 0.0) {
            return Err(Error::invalid("eps must be > 0"));
        }
        for atom in m.atoms() {
            a_max = a_max.max(atom.lambda * atom.lambda / (2.0 * eps * eps));
        }
    }

    // Only the phase/Gaussian pair sums need the separation histogram; the
    // d=1 local-time route does not touch pairs at all.
    let needs_pairs = !batch.taus.is_empty()
        || batch.mixture.is_some()
        || (dim == 2 && batch.moll_eps.is_some());
    let bins = if needs_pairs && n >= BIN_THRESHOLD {
        Some(PairSeparationBins::build(
            path,
            PairSeparationBins::width_for(a_max, BIN_TOL),
        ))
    } else {
        None
    };
    let phase = |b: f64| match &bins {
        Some(h) => h.phase_sum(b),
        None => phase_pair_sum_exact(path, b),
    };

    let x_tau: Vec<Complex64> = batch
        .taus
        .iter()
        .map(|&tau| {
            let total = phase(1.0 / (2.0 * tau)) + Complex64::new(half_diag, 0.0);
            free_kernel_prefactor(dim, tau) * dt * dt * total
        })
        .collect();

    let gamma = match batch.moll_eps {
        None => None,
        Some(eps) if dim == 1 => Some(gamma_renormalized(path, eps)?),
        Some(eps) => {
            let g = match &bins {
                Some(h) => h.gaussian_sum(1.0 / (2.0 * eps)),
                None => gaussian_pair_sum_exact(path, 1.0 / (2.0 * eps)),
            };
            let q_sum = (g + half_diag) * dt * dt / (2.0 * PI * eps);
            Some(q_sum - mollified_pair_mean(2, n, dt, eps))
        }
    };

    let mixture = match batch.mixture {
        None => None,
        Some((m, eps)) => {
            let scale = eps.powi(-(dim as i32));
            let mut acc = Complex64::new(0.0, 0.0);
            for atom in m.atoms() {
                let b = -atom.lambda * atom.lambda / (2.0 * eps * eps);
                acc += atom.weight * (phase(b) + Complex64::new(half_diag, 0.0));
            }
            Some(scale * dt * dt * acc)
        }
    };

    Ok(PathFunctionalValues { x_tau, gamma, mixture })
}
