//! Monte Carlo check of the zero-frequency spectra.
//!
//! The c-number equations `dq = A q dt + B dW` have an indefinite diffusion
//! matrix `D`, so `B` is complex with `B Bᵀ = D` and trajectories live in
//! complex space. Products of trajectory values average to normally ordered
//! moments.
//!
//! Each step is exact: the augmented state `(q, ∫q dt)` is propagated with
//! `exp(F dt)` and a complex Gaussian increment whose (transpose) covariance
//! is the exact one-step noise integral. The zero-frequency estimate for a
//! trajectory of length `T` is `I Iᵀ / T` with `I = ∫ q dt` taken after a
//! burn-in span.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{
    basis_change, Basis, BasisTransform, Quantity, SpectralCovariance, TransformKind,
};
use crate::error::{Error, Result};
use crate::langevin::{build_system, zero_freq_covariance_closed, DriftDiffusion, SystemParams};

type C64 = Complex<f64>;

/// Trajectory count that keeps every nonzero closed-form entry at the
/// reference point below 5% relative standard error.
pub const DEFAULT_TRAJECTORIES: usize = 4000;
pub const DEFAULT_SEED: u64 = 2024;

/// Complex factor `B` of a real symmetric (possibly indefinite) matrix, `B Bᵀ = D`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseFactor {
    pub b: DMatrix<C64>,
}

impl NoiseFactor {
    /// `B Bᵀ` (plain transpose).
    pub fn reconstruct(&self) -> DMatrix<C64> {
        &self.b * self.b.transpose()
    }

    pub fn is_real(&self) -> bool {
        self.b.iter().all(|z| z.im == 0.0)
    }
}

pub fn factor_diffusion(d: &DMatrix<f64>) -> Result<NoiseFactor> {
    if !d.is_square() {
        return Err(Error::invalid("diffusion matrix must be square"));
    }
    let scale = d.amax();
    let asym = (d - d.transpose()).amax();
    if asym > 1e-12 * scale.max(1e-300) {
        return Err(Error::invalid(format!(
            "diffusion matrix is not symmetric (deviation {asym:.3e})"
        )));
    }
    let n = d.nrows();
    let eig = SymmetricEigen::new(d.clone());
    let b = DMatrix::from_fn(n, n, |i, k| {
        let l = eig.eigenvalues[k];
        let root = if l >= 0.0 {
            C64::new(l.sqrt(), 0.0)
        } else {
            C64::new(0.0, (-l).sqrt())
        };
        root * eig.eigenvectors[(i, k)]
    });
    Ok(NoiseFactor { b })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub gamma: f64,
    pub mu: f64,
    pub xi: f64,
    /// Time step (same units as `1/γ`).
    pub dt: f64,
    /// Integration span per trajectory after burn-in.
    pub t_total: f64,
    pub burn_in: f64,
    pub n_traj: usize,
    pub seed: u64,
}

impl SimulationConfig {
    /// Slowest relaxation time `1/(γ(1 − ρ))`, `ρ = √(2μ² + ξ²)`.
    pub fn correlation_time(params: &SystemParams) -> f64 {
        1.0 / (params.gamma * (1.0 - params.threshold_expression().sqrt()))
    }

    /// `dt = 0.05/γ`, 200 correlation times per trajectory, 10 of burn-in.
    pub fn default_for(params: &SystemParams, n_traj: usize, seed: u64) -> Self {
        let tau = Self::correlation_time(params);
        Self {
            gamma: params.gamma,
            mu: params.mu,
            xi: params.xi,
            dt: 0.05 / params.gamma,
            t_total: 200.0 * tau,
            burn_in: 10.0 * tau,
            n_traj,
            seed,
        }
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.gamma, self.mu, self.xi)
    }

    pub fn validate(&self) -> Result<SystemParams> {
        let params = self.params()?;
        params.require_below_threshold()?;
        if !(self.dt > 0.0 && self.dt * self.gamma < 0.1) {
            return Err(Error::invalid(format!(
                "dt·γ must lie in (0, 0.1), got {}",
                self.dt * self.gamma
            )));
        }
        let tau = Self::correlation_time(&params);
        if !(self.t_total >= 10.0 * tau) {
            return Err(Error::invalid(format!(
                "t_total = {} is too short for correlation time {tau:.3} (need at least 10×)",
                self.t_total
            )));
        }
        if !(self.burn_in >= 0.0) {
            return Err(Error::invalid("burn_in must be non-negative"));
        }
        if self.n_traj < 100 {
            return Err(Error::invalid(format!(
                "n_traj must be at least 100, got {}",
                self.n_traj
            )));
        }
        Ok(params)
    }
}

/// One-step propagator of the augmented state `(q, ∫q)`.
struct Stepper {
    phi: DMatrix<f64>,
    noise_re: DMatrix<f64>,
    noise_im: DMatrix<f64>,
}

impl Stepper {
    fn new(dd: &DriftDiffusion, dt: f64) -> Result<Self> {
        let n = dd.dim();
        let m = 2 * n;
        // F = [[A, 0], [I, 0]], G Gᵀ = [[D, 0], [0, 0]]
        let mut f = DMatrix::zeros(m, m);
        f.view_mut((0, 0), (n, n)).copy_from(&dd.drift);
        f.view_mut((n, 0), (n, n)).fill_with_identity();
        let mut q = DMatrix::zeros(m, m);
        q.view_mut((0, 0), (n, n)).copy_from(&dd.diffusion);
        // Van Loan: exp([[-F, Q], [0, Fᵀ]] dt) = [[·, E12], [0, E22]]
        let mut c = DMatrix::zeros(2 * m, 2 * m);
        c.view_mut((0, 0), (m, m)).copy_from(&(-&f * dt));
        c.view_mut((0, m), (m, m)).copy_from(&(q * dt));
        c.view_mut((m, m), (m, m)).copy_from(&(f.transpose() * dt));
        let e = c.exp();
        let phi = e.view((m, m), (m, m)).transpose();
        let sigma = &phi * e.view((0, m), (m, m));
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let factor = factor_diffusion(&sigma)?;
        Ok(Self {
            phi,
            noise_re: factor.b.map(|z| z.re),
            noise_im: factor.b.map(|z| z.im),
        })
    }
}

/// Per-trajectory estimates, stored over the stacked `(x..., y...)` ordering.
#[derive(Clone, Debug)]
pub struct MonteCarloEstimate {
    pub config: SimulationConfig,
    pub labels: Vec<String>,
    /// `I Iᵀ / T` per trajectory.
    pub spectral_samples: Vec<DMatrix<C64>>,
    /// Time-averaged `q qᵀ` per trajectory (equal-time normally ordered moments).
    pub equal_time_samples: Vec<DMatrix<C64>>,
}

/// Mean and standard error of the real and imaginary parts.
#[derive(Clone, Debug)]
pub struct EstimateSummary {
    pub mean: SpectralCovariance,
    pub std_error: SpectralCovariance,
    pub imag_mean: DMatrix<f64>,
    pub imag_std_error: DMatrix<f64>,
}

fn stacked_permutation(n_modes: usize) -> Vec<usize> {
    // stacked index s -> interleaved index
    (0..2 * n_modes)
        .map(|s| {
            if s < n_modes {
                2 * s
            } else {
                2 * (s - n_modes) + 1
            }
        })
        .collect()
}

fn run_trajectory(
    stepper: &Stepper,
    cfg: &SimulationConfig,
    index: u64,
    dim: usize,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let m = 2 * dim;
    let mut re = DVector::<f64>::zeros(m);
    let mut im = DVector::<f64>::zeros(m);
    let mut next_re = DVector::<f64>::zeros(m);
    let mut next_im = DVector::<f64>::zeros(m);
    let mut xi = DVector::<f64>::zeros(m);
    let n_burn = (cfg.burn_in / cfg.dt).ceil() as usize;
    let n_steps = (cfg.t_total / cfg.dt).round() as usize;
    let mut equal_time = DMatrix::<C64>::zeros(dim, dim);

    for step in 0..n_burn + n_steps {
        if step == n_burn {
            re.rows_mut(dim, dim).fill(0.0);
            im.rows_mut(dim, dim).fill(0.0);
        }
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        next_re.gemv(1.0, &stepper.phi, &re, 0.0);
        next_re.gemv(1.0, &stepper.noise_re, &xi, 1.0);
        next_im.gemv(1.0, &stepper.phi, &im, 0.0);
        next_im.gemv(1.0, &stepper.noise_im, &xi, 1.0);
        std::mem::swap(&mut re, &mut next_re);
        std::mem::swap(&mut im, &mut next_im);
        if step >= n_burn {
            for i in 0..dim {
                let zi = C64::new(re[i], im[i]);
                for j in i..dim {
                    equal_time[(i, j)] += zi * C64::new(re[j], im[j]);
                }
            }
        }
        if step % 256 == 0 && !(re.amax() < 1e150 && im.amax() < 1e150) {
            return Err(Error::Divergent {
                seed: cfg.seed,
                trajectory: index,
            });
        }
    }
    if !(re.iter().chain(im.iter()).all(|v| v.is_finite())) {
        return Err(Error::Divergent {
            seed: cfg.seed,
            trajectory: index,
        });
    }

    let t = n_steps as f64 * cfg.dt;
    let perm = stacked_permutation(dim / 2);
    let integral: Vec<C64> = (0..dim)
        .map(|i| C64::new(re[dim + i], im[dim + i]))
        .collect();
    let spectral = DMatrix::from_fn(dim, dim, |a, b| integral[perm[a]] * integral[perm[b]] / t);
    let equal = DMatrix::from_fn(dim, dim, |a, b| {
        let (i, j) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
        equal_time[(i, j)] / n_steps as f64
    });
    Ok((spectral, equal))
}

/// Runs `n_traj` independent trajectories in parallel. Results depend only
/// on the configuration (trajectory `k` uses stream `k` of the seeded generator).
pub fn simulate(cfg: &SimulationConfig) -> Result<MonteCarloEstimate> {
    let params = cfg.validate()?;
    let dd = build_system(&params);
    let stepper = Stepper::new(&dd, cfg.dt)?;
    let dim = dd.dim();
    let results = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|k| run_trajectory(&stepper, cfg, k, dim))
        .collect::<Result<Vec<_>>>()?;
    let (spectral_samples, equal_time_samples) = results.into_iter().unzip();
    Ok(MonteCarloEstimate {
        config: cfg.clone(),
        labels: crate::covariance::original_labels(&dd.modes),
        spectral_samples,
        equal_time_samples,
    })
}

fn quadrature_matrix(t: &BasisTransform) -> DMatrix<f64> {
    match &t.kind {
        TransformKind::Modewise(m) => {
            let (r, c) = m.shape();
            let mut o = DMatrix::zeros(2 * r, 2 * c);
            o.view_mut((0, 0), (r, c)).copy_from(m);
            o.view_mut((r, c), (r, c)).copy_from(m);
            o
        }
        TransformKind::Quadrature(m) => m.clone(),
    }
}

fn summarize(
    samples: &[DMatrix<C64>],
    target: &BasisTransform,
    quantity: Quantity,
) -> Result<EstimateSummary> {
    let o = quadrature_matrix(target).map(|v| C64::new(v, 0.0));
    let n = samples.len() as f64;
    let dim = o.nrows();
    let mut sum_re = DMatrix::<f64>::zeros(dim, dim);
    let mut sum_im = DMatrix::<f64>::zeros(dim, dim);
    let mut sq_re = DMatrix::<f64>::zeros(dim, dim);
    let mut sq_im = DMatrix::<f64>::zeros(dim, dim);
    for s in samples {
        let t = &o * s * o.transpose();
        for (k, z) in t.iter().enumerate() {
            sum_re[k] += z.re;
            sum_im[k] += z.im;
            sq_re[k] += z.re * z.re;
            sq_im[k] += z.im * z.im;
        }
    }
    let se = |sum: &DMatrix<f64>, sq: &DMatrix<f64>| {
        sum.zip_map(sq, |s, q| {
            let mean = s / n;
            ((q / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
        })
    };
    let mean_re = &sum_re / n;
    let se_re = se(&sum_re, &sq_re);
    let labels = target.labels.clone();
    Ok(EstimateSummary {
        mean: SpectralCovariance::from_stacked(target.target, quantity, labels.clone(), &mean_re)?,
        std_error: SpectralCovariance::from_stacked(target.target, quantity, labels, &se_re)?,
        imag_mean: &sum_im / n,
        imag_std_error: se(&sum_im, &sq_im),
    })
}

impl MonteCarloEstimate {
    /// Zero-frequency intracavity estimate in the basis of `target`.
    pub fn spectral(&self, target: &BasisTransform) -> Result<EstimateSummary> {
        summarize(&self.spectral_samples, target, Quantity::Intracavity)
    }

    pub fn spectral_original(&self) -> Result<EstimateSummary> {
        self.spectral(&BasisTransform::identity(
            Basis::Original,
            self.labels.clone(),
        ))
    }

    /// Equal-time normally ordered covariance in the basis of `target`.
    pub fn equal_time(&self, target: &BasisTransform) -> Result<EstimateSummary> {
        summarize(&self.equal_time_samples, target, Quantity::Intracavity)
    }

    /// Integrated correlation time `S(0)/(2 C(0))` of quadrature `index`
    /// (stacked ordering) in the basis of `target`.
    pub fn integrated_correlation_time(
        &self,
        target: &BasisTransform,
        index: usize,
    ) -> Result<f64> {
        let s = self.spectral(target)?.mean.stacked();
        let c = self.equal_time(target)?.mean.stacked();
        Ok(s[(index, index)] / (2.0 * c[(index, index)]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryCheck {
    pub block: String,
    pub row: String,
    pub col: String,
    pub analytic: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub imag: f64,
    pub imag_std_error: f64,
    pub imag_z_score: f64,
}

impl EntryCheck {
    pub fn relative_std_error(&self) -> f64 {
        self.std_error / self.analytic.abs()
    }
}

fn z(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config: SimulationConfig,
    pub basis: Basis,
    pub entries: Vec<EntryCheck>,
    pub max_abs_z: f64,
    pub max_abs_imag_z: f64,
    /// Largest relative standard error over entries with a nonzero analytic value.
    pub max_relative_std_error: f64,
    pub z_limit: f64,
    pub passed: bool,
}

/// Compares a simulation with the closed-form covariance in the sum/difference
/// basis, entry by entry (upper triangles of the x and y blocks, full xy block).
pub fn verify_against_closed_form(
    est: &MonteCarloEstimate,
    z_limit: f64,
) -> Result<VerificationReport> {
    let params = est.config.params()?;
    let analytic = zero_freq_covariance_closed(&params)?;
    let sd = BasisTransform::sum_diff();
    let summary = est.spectral(&sd)?;
    let labels = &analytic.ordering;
    let n = labels.len();
    let mut entries = Vec::new();
    let blocks: [(
        &str,
        &DMatrix<f64>,
        &DMatrix<f64>,
        &DMatrix<f64>,
        (usize, usize),
        bool,
    ); 3] = [
        (
            "x",
            &analytic.x_block,
            &summary.mean.x_block,
            &summary.std_error.x_block,
            (0, 0),
            true,
        ),
        (
            "y",
            &analytic.y_block,
            &summary.mean.y_block,
            &summary.std_error.y_block,
            (n, n),
            true,
        ),
        (
            "xy",
            &analytic.xy_block,
            &summary.mean.xy_block,
            &summary.std_error.xy_block,
            (0, n),
            false,
        ),
    ];
    for (name, a, m, s, (r0, c0), upper) in blocks {
        for i in 0..n {
            for j in if upper { i } else { 0 }..n {
                let (im, ise) = (
                    summary.imag_mean[(r0 + i, c0 + j)],
                    summary.imag_std_error[(r0 + i, c0 + j)],
                );
                entries.push(EntryCheck {
                    block: name.into(),
                    row: labels[i].clone(),
                    col: labels[j].clone(),
                    analytic: a[(i, j)],
                    estimate: m[(i, j)],
                    std_error: s[(i, j)],
                    z_score: z(m[(i, j)] - a[(i, j)], s[(i, j)]),
                    imag: im,
                    imag_std_error: ise,
                    imag_z_score: z(im, ise),
                });
            }
        }
    }
    let max_abs_z = entries.iter().map(|e| e.z_score.abs()).fold(0.0, f64::max);
    let max_abs_imag_z = entries
        .iter()
        .map(|e| e.imag_z_score.abs())
        .fold(0.0, f64::max);
    let max_relative_std_error = entries
        .iter()
        .filter(|e| e.analytic != 0.0)
        .map(|e| e.relative_std_error())
        .fold(0.0, f64::max);
    Ok(VerificationReport {
        config: est.config.clone(),
        basis: Basis::SumDiff,
        passed: max_abs_z <= z_limit && max_abs_imag_z <= z_limit,
        entries,
        max_abs_z,
        max_abs_imag_z,
        max_relative_std_error,
        z_limit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub t_total: f64,
    pub n_traj: usize,
    /// `1/√(n_traj·T)`
    pub inverse_root_budget: f64,
    /// Estimate, standard error and analytic value of `⟨x̃_0²⟩`.
    pub sum0_estimate: f64,
    pub sum0_std_error: f64,
    pub sum0_analytic: f64,
    pub max_abs_z: f64,
    pub max_relative_std_error: f64,
}

/// Runs every configuration and tabulates the error against `dt` and budget.
pub fn convergence_report(configs: &[SimulationConfig]) -> Result<Vec<ConvergenceRow>> {
    configs
        .iter()
        .map(|cfg| {
            let est = simulate(cfg)?;
            let rep = verify_against_closed_form(&est, f64::INFINITY)?;
            let e = &rep.entries[0];
            Ok(ConvergenceRow {
                dt: cfg.dt,
                t_total: cfg.t_total,
                n_traj: cfg.n_traj,
                inverse_root_budget: 1.0 / (cfg.n_traj as f64 * cfg.t_total).sqrt(),
                sum0_estimate: e.estimate,
                sum0_std_error: e.std_error,
                sum0_analytic: e.analytic,
                max_abs_z: rep.max_abs_z,
                max_relative_std_error: rep.max_relative_std_error,
            })
        })
        .collect()
}

/// Original-basis analytic covariance expressed through the same summary
/// machinery, for side-by-side reports.
pub fn analytic_original(params: &SystemParams) -> Result<SpectralCovariance> {
    let closed = zero_freq_covariance_closed(params)?;
    let back = BasisTransform::sum_diff().inverse(
        Basis::Original,
        crate::covariance::original_labels(&params.modes()),
    )?;
    basis_change(&closed, &back)
}
