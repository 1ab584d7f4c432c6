//! Zero-frequency quadrature covariances and the orthogonal basis changes
//! between the original OAM modes, the sum/difference modes, the supermodes
//! and the cluster nodes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named mode basis a covariance is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Original,
    SumDiff,
    Supermode,
    Cluster,
}

/// What the spectral densities describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Normally ordered intracavity densities (units of `1/γ`).
    Intracavity,
    /// Measurable extracavity densities (dimensionless, vacuum = 1/4).
    Extracavity,
}

/// Zero-frequency spectral covariance split into quadrature blocks.
///
/// `x_block[i][j] = <δx_i δx_j>`, `y_block` likewise and
/// `xy_block[i][j] = <δx_i δy_j>`; `ordering[i]` names mode `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "CovarianceJson", try_from = "CovarianceJson")]
pub struct SpectralCovariance {
    pub basis: Basis,
    pub quantity: Quantity,
    pub ordering: Vec<String>,
    pub x_block: DMatrix<f64>,
    pub y_block: DMatrix<f64>,
    pub xy_block: DMatrix<f64>,
}

impl SpectralCovariance {
    pub fn zeros(basis: Basis, quantity: Quantity, ordering: Vec<String>) -> Self {
        let n = ordering.len();
        Self {
            basis,
            quantity,
            ordering,
            x_block: DMatrix::zeros(n, n),
            y_block: DMatrix::zeros(n, n),
            xy_block: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.ordering.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.ordering.iter().position(|l| l == label)
    }

    /// Full `2N×2N` covariance over the stacked vector `(x_0..x_{N-1}, y_0..y_{N-1})`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut full = DMatrix::zeros(2 * n, 2 * n);
        full.view_mut((0, 0), (n, n)).copy_from(&self.x_block);
        full.view_mut((n, n), (n, n)).copy_from(&self.y_block);
        full.view_mut((0, n), (n, n)).copy_from(&self.xy_block);
        full.view_mut((n, 0), (n, n))
            .copy_from(&self.xy_block.transpose());
        full
    }

    pub fn from_stacked(
        basis: Basis,
        quantity: Quantity,
        ordering: Vec<String>,
        full: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = ordering.len();
        if full.nrows() != 2 * n || full.ncols() != 2 * n {
            return Err(Error::Dimension {
                expected: 2 * n,
                found: full.nrows(),
            });
        }
        Ok(Self {
            basis,
            quantity,
            ordering,
            x_block: full.view((0, 0), (n, n)).into_owned(),
            y_block: full.view((n, n), (n, n)).into_owned(),
            xy_block: full.view((0, n), (n, n)).into_owned(),
        })
    }

    /// Largest absolute entry over all three blocks.
    pub fn max_abs(&self) -> f64 {
        [&self.x_block, &self.y_block, &self.xy_block]
            .iter()
            .flat_map(|m| m.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Wire form: `{basis, ordering, x_block[][], y_block[][], xy_block[][]}`.
#[derive(Serialize, Deserialize)]
pub(crate) struct CovarianceJson {
    basis: Basis,
    quantity: Quantity,
    ordering: Vec<String>,
    x_block: Vec<Vec<f64>>,
    y_block: Vec<Vec<f64>>,
    xy_block: Vec<Vec<f64>>,
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            found: rows.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl From<&SpectralCovariance> for CovarianceJson {
    fn from(c: &SpectralCovariance) -> Self {
        Self {
            basis: c.basis,
            quantity: c.quantity,
            ordering: c.ordering.clone(),
            x_block: matrix_rows(&c.x_block),
            y_block: matrix_rows(&c.y_block),
            xy_block: matrix_rows(&c.xy_block),
        }
    }
}

impl From<SpectralCovariance> for CovarianceJson {
    fn from(c: SpectralCovariance) -> Self {
        (&c).into()
    }
}

impl TryFrom<CovarianceJson> for SpectralCovariance {
    type Error = Error;

    fn try_from(raw: CovarianceJson) -> Result<Self> {
        let n = raw.ordering.len();
        Ok(Self {
            basis: raw.basis,
            quantity: raw.quantity,
            x_block: matrix_from_rows(&raw.x_block, n)?,
            y_block: matrix_from_rows(&raw.y_block, n)?,
            xy_block: matrix_from_rows(&raw.xy_block, n)?,
            ordering: raw.ordering,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TransformKind {
    /// Real `M×N` matrix with orthonormal rows, applied identically to the
    /// x and y quadratures.
    Modewise(DMatrix<f64>),
    /// Real `2M×2N` matrix with orthonormal rows acting on the stacked
    /// quadrature vector `(x; y)`; needed when a complex mode transform
    /// mixes x and y.
    Quadrature(DMatrix<f64>),
}

/// Orthonormal change of mode basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisTransform {
    pub target: Basis,
    pub labels: Vec<String>,
    pub kind: TransformKind,
}

const ORTHONORMAL_TOL: f64 = 1e-10;

impl BasisTransform {
    pub fn modewise(target: Basis, labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != labels.len() {
            return Err(Error::Dimension {
                expected: labels.len(),
                found: matrix.nrows(),
            });
        }
        check_orthonormal_rows(&matrix)?;
        Ok(Self {
            target,
            labels,
            kind: TransformKind::Modewise(matrix),
        })
    }

    pub fn quadrature(target: Basis, labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != 2 * labels.len() {
            return Err(Error::Dimension {
                expected: 2 * labels.len(),
                found: matrix.nrows(),
            });
        }
        check_orthonormal_rows(&matrix)?;
        Ok(Self {
            target,
            labels,
            kind: TransformKind::Quadrature(matrix),
        })
    }

    pub fn identity(basis: Basis, labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            target: basis,
            labels,
            kind: TransformKind::Modewise(DMatrix::identity(n, n)),
        }
    }

    /// Map from the original five modes `(0, +1, -1, +2, -2)` to
    /// `(x̃_0, x̃_1, x̃_2, x̃_1^-, x̃_2^-)` with `x̃_k = (x_k ± x_{-k})/√2`.
    pub fn sum_diff() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        #[rustfmt::skip]
        let t = DMatrix::from_row_slice(5, 5, &[
            1.0, 0.0, 0.0, 0.0, 0.0,
            0.0,   h,   h, 0.0, 0.0,
            0.0, 0.0, 0.0,   h,   h,
            0.0,   h,  -h, 0.0, 0.0,
            0.0, 0.0, 0.0,   h,  -h,
        ]);
        Self {
            target: Basis::SumDiff,
            labels: sum_diff_labels(),
            kind: TransformKind::Modewise(t),
        }
    }

    /// Inverse of a square transform, landing in `basis` with `labels`.
    pub fn inverse(&self, basis: Basis, labels: Vec<String>) -> Result<Self> {
        let m = match &self.kind {
            TransformKind::Modewise(m) | TransformKind::Quadrature(m) => m,
        };
        if !m.is_square() {
            return Err(Error::invalid("only square transforms can be inverted"));
        }
        let kind = match &self.kind {
            TransformKind::Modewise(m) => TransformKind::Modewise(m.transpose()),
            TransformKind::Quadrature(m) => TransformKind::Quadrature(m.transpose()),
        };
        Ok(Self {
            target: basis,
            labels,
            kind,
        })
    }

    fn input_dim(&self) -> usize {
        match &self.kind {
            TransformKind::Modewise(m) => m.ncols(),
            TransformKind::Quadrature(m) => m.ncols() / 2,
        }
    }
}

fn check_orthonormal_rows(m: &DMatrix<f64>) -> Result<()> {
    let gram = m * m.transpose();
    let dev = (gram - DMatrix::identity(m.nrows(), m.nrows())).amax();
    if dev > ORTHONORMAL_TOL {
        return Err(Error::invalid(format!(
            "transform rows are not orthonormal (max deviation {dev:.3e})"
        )));
    }
    Ok(())
}

pub fn original_labels(modes: &[i32]) -> Vec<String> {
    modes
        .iter()
        .map(|&l| format!("l{l:+}").replace("l+0", "l0"))
        .collect()
}

pub fn sum_diff_labels() -> Vec<String> {
    ["sum0", "sum1", "sum2", "diff1", "diff2"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Congruence transform of all quadrature blocks into `target`'s basis.
pub fn basis_change(
    cov: &SpectralCovariance,
    target: &BasisTransform,
) -> Result<SpectralCovariance> {
    if target.input_dim() != cov.dim() {
        return Err(Error::Dimension {
            expected: cov.dim(),
            found: target.input_dim(),
        });
    }
    match &target.kind {
        TransformKind::Modewise(t) => Ok(SpectralCovariance {
            basis: target.target,
            quantity: cov.quantity,
            ordering: target.labels.clone(),
            x_block: t * &cov.x_block * t.transpose(),
            y_block: t * &cov.y_block * t.transpose(),
            xy_block: t * &cov.xy_block * t.transpose(),
        }),
        TransformKind::Quadrature(o) => {
            let full = o * cov.stacked() * o.transpose();
            SpectralCovariance::from_stacked(
                target.target,
                cov.quantity,
                target.labels.clone(),
                &full,
            )
        }
    }
}

/// Input–output relation at zero frequency: every variance becomes
/// `1/4 + 2γ·v`, every cross-correlator `2γ·c`.
pub fn extracavity_spectrum(cov: &SpectralCovariance, gamma: f64) -> Result<SpectralCovariance> {
    if cov.quantity != Quantity::Intracavity {
        return Err(Error::invalid(
            "extracavity conversion expects an intracavity covariance",
        ));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!(
            "decay rate must be positive, got {gamma}"
        )));
    }
    let n = cov.dim();
    let vacuum = DMatrix::<f64>::identity(n, n) * 0.25;
    Ok(SpectralCovariance {
        basis: cov.basis,
        quantity: Quantity::Extracavity,
        ordering: cov.ordering.clone(),
        x_block: &vacuum + &cov.x_block * (2.0 * gamma),
        y_block: &vacuum + &cov.y_block * (2.0 * gamma),
        xy_block: &cov.xy_block * (2.0 * gamma),
    })
}
