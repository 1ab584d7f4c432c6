//! Truncated below-threshold Langevin system for the down-converted OAM
//! modes and its zero-frequency solution.
//!
//! Quadratures are interleaved as `(x_0, y_0, x_1, y_1, ...)` over the mode
//! ordering `l = 0, +1, -1, +2, -2, ...`. A pair of modes `(l, m)` couples
//! when `l + m = ±1`; the pairs `(-n, n+1)` and `(n, -n-1)` form "rung" `n`,
//! so rung 0 carries `μ` and rung 1 carries `ξ`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::covariance::{original_labels, sum_diff_labels, Basis, Quantity, SpectralCovariance};
use crate::error::{Error, Result};
use crate::lg_overlap;

/// Physical configuration of the pumped cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Common decay rate of the retained modes.
    pub gamma: f64,
    /// `2 χ_{0,1} B / γ`
    pub mu: f64,
    /// `2 χ_{1,2} B / γ`
    pub xi: f64,
    /// Highest retained `|l|`.
    pub truncation_k: usize,
    /// Dimensionless couplings of rungs 2, 3, ... (only used when `truncation_k > 2`).
    pub higher_rungs: Vec<f64>,
}

impl SystemParams {
    pub fn new(gamma: f64, mu: f64, xi: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!(
                "decay rate must be positive, got {gamma}"
            )));
        }
        for (name, v) in [("mu", mu), ("xi", xi)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be a non-negative number, got {v}"
                )));
            }
        }
        Ok(Self {
            gamma,
            mu,
            xi,
            truncation_k: 2,
            higher_rungs: Vec::new(),
        })
    }

    /// Keeps modes up to `|l| = k`; rungs beyond the supplied list are uncoupled.
    pub fn with_truncation(mut self, k: usize, higher_rungs: Vec<f64>) -> Result<Self> {
        if higher_rungs.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("rung couplings must be non-negative"));
        }
        self.truncation_k = k;
        self.higher_rungs = higher_rungs;
        Ok(self)
    }

    /// Pump parameters for a waist ratio `r`, with every rung scaled by its
    /// overlap integral relative to `χ(1;0,1)`.
    pub fn from_waist_ratio(gamma: f64, mu: f64, r: f64, truncation_k: usize) -> Result<Self> {
        let base =
            lg_overlap::coupling_constant(&lg_overlap::CouplingQuery::new(1, 0, 1, r))?.value;
        let rung = |n: i32| -> Result<f64> {
            let c =
                lg_overlap::coupling_constant(&lg_overlap::CouplingQuery::new(1, -n, n + 1, r))?
                    .value;
            Ok(mu * c / base)
        };
        let xi = rung(1)?;
        let higher = (2..truncation_k.max(2) as i32)
            .map(rung)
            .collect::<Result<Vec<_>>>()?;
        Self::new(gamma, mu, xi)?.with_truncation(truncation_k, higher)
    }

    pub fn modes(&self) -> Vec<i32> {
        let mut modes = vec![0];
        for l in 1..=self.truncation_k as i32 {
            modes.push(l);
            modes.push(-l);
        }
        modes
    }

    /// Dimensionless coupling of rung `n`.
    pub fn rung(&self, n: usize) -> f64 {
        match n {
            0 => self.mu,
            1 => self.xi,
            _ => self.higher_rungs.get(n - 2).copied().unwrap_or(0.0),
        }
    }

    /// Symmetric dimensionless mode-coupling pattern `K` (zero diagonal).
    pub fn mode_coupling(&self) -> DMatrix<f64> {
        let modes = self.modes();
        let n = modes.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (modes[i], modes[j]);
            if a + b == 1 || a + b == -1 {
                // rung index: the non-positive member of (a, b) for pump +1, mirrored for -1
                let rung = if a + b == 1 { -a.min(b) } else { a.max(b) };
                self.rung(rung as usize)
            } else {
                0.0
            }
        })
    }

    /// Effective `2μ²+ξ²`: the squared spectral radius of the coupling pattern.
    pub fn threshold_expression(&self) -> f64 {
        if self.truncation_k == 2 {
            2.0 * self.mu * self.mu + self.xi * self.xi
        } else {
            let k = self.mode_coupling();
            let rho = SymmetricEigen::new(k).eigenvalues.amax();
            rho * rho
        }
    }

    pub fn threshold_margin(&self) -> f64 {
        1.0 - self.threshold_expression()
    }

    pub fn is_below_threshold(&self) -> bool {
        self.threshold_margin() > 0.0
    }

    pub(crate) fn require_below_threshold(&self) -> Result<()> {
        if self.is_below_threshold() {
            Ok(())
        } else {
            Err(Error::threshold(self.threshold_expression()))
        }
    }
}

/// Fixed ratio between the two pump parameters set by the waist ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// `r = √2`: `μ² = 2ξ²`.
    Sqrt2,
    /// `r = 1`: `μ² = (9/8)ξ²`.
    Unity,
    /// Arbitrary `μ²/ξ²`.
    Custom { mu_sq_over_xi_sq: f64 },
}

impl Regime {
    pub fn mu_sq_over_xi_sq(&self) -> f64 {
        match *self {
            Regime::Sqrt2 => 2.0,
            Regime::Unity => 9.0 / 8.0,
            Regime::Custom { mu_sq_over_xi_sq } => mu_sq_over_xi_sq,
        }
    }

    pub fn xi_for(&self, mu: f64) -> f64 {
        mu / self.mu_sq_over_xi_sq().sqrt()
    }

    /// Largest below-threshold `μ`: `1/√(2 + ξ²/μ²)`.
    pub fn threshold_mu(&self) -> f64 {
        match self {
            Regime::Sqrt2 => (2.0f64 / 5.0).sqrt(),
            Regime::Unity => (9.0f64 / 26.0).sqrt(),
            Regime::Custom { .. } => 1.0 / (2.0 + 1.0 / self.mu_sq_over_xi_sq()).sqrt(),
        }
    }

    /// Regime implied by the overlap integrals at waist ratio `r`.
    pub fn from_waist_ratio(r: f64) -> Result<Self> {
        let ratio = lg_overlap::pump_parameter_ratio(r)?;
        Ok(Regime::Custom {
            mu_sq_over_xi_sq: ratio * ratio,
        })
    }

    pub fn name(&self) -> String {
        match self {
            Regime::Sqrt2 => "sqrt2".into(),
            Regime::Unity => "unity".into(),
            Regime::Custom { mu_sq_over_xi_sq } => format!("custom({mu_sq_over_xi_sq})"),
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt2" | "r_sqrt2" => Ok(Regime::Sqrt2),
            "unity" | "r_unity" => Ok(Regime::Unity),
            other => Err(Error::invalid(format!(
                "unknown regime '{other}' (expected sqrt2 or unity)"
            ))),
        }
    }
}

/// Pump strength `μ` together with the waist regime that fixes `ξ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaistCoupledParams {
    pub mu: f64,
    pub regime: Regime,
}

impl WaistCoupledParams {
    pub fn new(mu: f64, regime: Regime) -> Self {
        Self { mu, regime }
    }

    pub fn xi(&self) -> f64 {
        self.regime.xi_for(self.mu)
    }

    pub fn to_system(&self, gamma: f64) -> Result<SystemParams> {
        SystemParams::new(gamma, self.mu, self.xi())
    }
}

/// Linear drift and (indefinite) c-number diffusion over interleaved quadratures.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftDiffusion {
    pub modes: Vec<i32>,
    pub gamma: f64,
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    /// Set when the parameters are at or above threshold; such a system can
    /// be inspected but not solved for stationary spectra.
    pub above_threshold: bool,
    /// Effective `2μ²+ξ²` of the parameters that built this system.
    pub threshold_expression: f64,
}

impl DriftDiffusion {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn x_index(mode_pos: usize) -> usize {
        2 * mode_pos
    }

    pub fn y_index(mode_pos: usize) -> usize {
        2 * mode_pos + 1
    }
}

/// Drift `ẋ = -γx + γKx`, `ẏ = -γy - γKy` and noise correlators
/// `<f'f'> = (γ/2)K`, `<f''f''> = -(γ/2)K`.
pub fn build_system(params: &SystemParams) -> DriftDiffusion {
    let modes = params.modes();
    let n = modes.len();
    let k = params.mode_coupling();
    let g = params.gamma;
    let mut drift = DMatrix::zeros(2 * n, 2 * n);
    let mut diffusion = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        drift[(2 * i, 2 * i)] = -g;
        drift[(2 * i + 1, 2 * i + 1)] = -g;
        for j in 0..n {
            let c = k[(i, j)];
            if c != 0.0 {
                drift[(2 * i, 2 * j)] = g * c;
                drift[(2 * i + 1, 2 * j + 1)] = -g * c;
                diffusion[(2 * i, 2 * j)] = 0.5 * g * c;
                diffusion[(2 * i + 1, 2 * j + 1)] = -0.5 * g * c;
            }
        }
    }
    DriftDiffusion {
        modes,
        gamma: g,
        drift,
        diffusion,
        above_threshold: !params.is_below_threshold(),
        threshold_expression: params.threshold_expression(),
    }
}

/// Zero-frequency spectral covariance `drift⁻¹ · diffusion · drift⁻ᵀ` in the
/// original mode basis, by a generic linear solve.
pub fn zero_freq_covariance_numeric(dd: &DriftDiffusion) -> Result<SpectralCovariance> {
    if dd.above_threshold {
        return Err(Error::threshold(dd.threshold_expression));
    }
    let lu = dd.drift.clone().lu();
    // X = A⁻¹ D, then S = X A⁻ᵀ = (A⁻¹ Xᵀ)ᵀ
    let x = lu
        .solve(&dd.diffusion)
        .ok_or_else(|| Error::threshold(dd.threshold_expression))?;
    let s = lu
        .solve(&x.transpose())
        .ok_or_else(|| Error::threshold(dd.threshold_expression))?
        .transpose();
    let s = (&s + s.transpose()) * 0.5;

    let n = dd.modes.len();
    let mut cov = SpectralCovariance::zeros(
        Basis::Original,
        Quantity::Intracavity,
        original_labels(&dd.modes),
    );
    for i in 0..n {
        for j in 0..n {
            cov.x_block[(i, j)] = s[(2 * i, 2 * j)];
            cov.y_block[(i, j)] = s[(2 * i + 1, 2 * j + 1)];
            cov.xy_block[(i, j)] = s[(2 * i, 2 * j + 1)];
        }
    }
    Ok(cov)
}

/// Closed-form zero-frequency covariance of the five-mode system in the
/// sum/difference basis `(x̃_0, x̃_1, x̃_2, x̃_1^-, x̃_2^-)`.
pub fn zero_freq_covariance_closed(params: &SystemParams) -> Result<SpectralCovariance> {
    if params.truncation_k != 2 {
        return Err(Error::invalid(
            "closed forms exist only for the five-mode truncation",
        ));
    }
    params.require_below_threshold()?;
    let SystemParams { gamma, mu, xi, .. } = *params;
    let sqrt2 = std::f64::consts::SQRT_2;
    let (mu2, xi2) = (mu * mu, xi * xi);

    // sum sector, common factor γ(1 - ξ² - 2μ²)²
    let g = gamma * (1.0 - xi2 - 2.0 * mu2).powi(2);
    let s00 = 2.0 * mu2 / g;
    let s22 = xi2 / g;
    let s11 = s00 + s22;
    let growth = 1.0 + 2.0 * mu2 + xi2;
    let s01 = mu * growth / (sqrt2 * g);
    let s12 = xi * growth / (2.0 * g);
    let s02 = sqrt2 * mu * xi / g;

    // difference sector depends on ξ only
    let h = gamma * (1.0 - xi2).powi(2);
    let d11 = xi2 / h;
    let d12 = -xi * (1.0 + xi2) / (2.0 * h);

    let mut cov =
        SpectralCovariance::zeros(Basis::SumDiff, Quantity::Intracavity, sum_diff_labels());
    let set = |m: &mut DMatrix<f64>, i: usize, j: usize, v: f64| {
        m[(i, j)] = v;
        m[(j, i)] = v;
    };
    for (i, v) in [s00, s11, s22, d11, d11].into_iter().enumerate() {
        cov.x_block[(i, i)] = v;
        cov.y_block[(i, i)] = v;
    }
    set(&mut cov.x_block, 0, 1, s01);
    set(&mut cov.x_block, 1, 2, s12);
    set(&mut cov.x_block, 0, 2, s02);
    set(&mut cov.x_block, 3, 4, d12);
    // y: anti-correlated across the (0,2)|(1) bipartition, equal within it
    set(&mut cov.y_block, 0, 1, -s01);
    set(&mut cov.y_block, 1, 2, -s12);
    set(&mut cov.y_block, 0, 2, s02);
    set(&mut cov.y_block, 3, 4, -d12);
    Ok(cov)
}
