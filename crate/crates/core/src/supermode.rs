//! Coupling-matrix eigenmodes ("supermodes") and their zero-frequency squeezing.
//!
//! `M = (γ/4)K` where `K` is the dimensionless coupling pattern of
//! [`SystemParams::mode_coupling`]. A supermode with eigenvalue `Λ` has
//! `Λ̃ = 4|Λ|/γ`; negative eigenvalues squeeze x, positive ones squeeze y.
//!
//! For the five-mode system the eigenvectors are labelled `S1..S5`:
//!
//! | label | eigenvalue          | vector over `(0, +1, -1, +2, -2)` |
//! |-------|---------------------|-----------------------------------|
//! | S1    | 0                   | `(-ξ, 0, 0, μ, μ)`                |
//! | S2    | `-γξ/4`             | `(0, -1, 1, -1, 1)`               |
//! | S3    | `+γξ/4`             | `(0, 1, -1, -1, 1)`               |
//! | S4    | `-γR/4`             | `(2μ, -R, -R, ξ, ξ)`              |
//! | S5    | `+γR/4`             | `(2μ, R, R, ξ, ξ)`                |
//!
//! with `R = √(2μ²+ξ²)`. Degenerate eigenspaces are resolved by projecting
//! these reference vectors, so labels stay meaningful at `μ = ξ`, `μ = 0`
//! or `ξ = 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::covariance::{Basis, BasisTransform};
use crate::error::{Error, Result};
use crate::langevin::SystemParams;

const FIVE_MODES: [i32; 5] = [0, 1, -1, 2, -2];

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    /// Entries in units of the decay rate (already multiplied by `γ/4`).
    pub entries: DMatrix<f64>,
    pub mode_ordering: Vec<i32>,
    pub gamma: f64,
}

impl CouplingMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `(μ, ξ)` if this is the standard five-mode pattern.
    fn five_mode_pumps(&self) -> Option<(f64, f64)> {
        if self.mode_ordering != FIVE_MODES {
            return None;
        }
        let scale = 4.0 / self.gamma;
        Some((self.entries[(0, 1)] * scale, self.entries[(1, 4)] * scale))
    }
}

pub fn coupling_matrix(params: &SystemParams) -> CouplingMatrix {
    CouplingMatrix {
        entries: params.mode_coupling() * (params.gamma / 4.0),
        mode_ordering: params.modes(),
        gamma: params.gamma,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqueezeOrientation {
    XSqueezed,
    YSqueezed,
    Vacuum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Supermode {
    /// `S1..S5` for the five-mode system, `M1..Mn` (ascending) otherwise.
    pub label: String,
    pub eigenvalue: f64,
    /// Unit-norm coefficients over the original modes; the first entry that
    /// is not numerically zero is positive.
    pub coefficients: DVector<f64>,
    pub orientation: SqueezeOrientation,
}

impl Supermode {
    fn new(label: String, eigenvalue: f64, coefficients: DVector<f64>, zero_tol: f64) -> Self {
        let coefficients = fix_sign(coefficients.normalize());
        let orientation = if eigenvalue.abs() <= zero_tol {
            SqueezeOrientation::Vacuum
        } else if eigenvalue < 0.0 {
            SqueezeOrientation::XSqueezed
        } else {
            SqueezeOrientation::YSqueezed
        };
        Self {
            label,
            eigenvalue,
            coefficients,
            orientation,
        }
    }
}

fn fix_sign(v: DVector<f64>) -> DVector<f64> {
    match v.iter().find(|c| c.abs() > 1e-12) {
        Some(c) if *c < 0.0 => -v,
        _ => v,
    }
}

/// Reference eigenvectors `S1..S5` (unnormalized) and their eigenvalues in units of `γ/4`.
pub fn reference_supermodes(mu: f64, xi: f64) -> [(DVector<f64>, f64); 5] {
    // At μ = ξ = 0 every direction is an eigenvector; any fixed ratio keeps the set orthogonal.
    let (m, x) = if mu == 0.0 && xi == 0.0 {
        (1.0, 1.0)
    } else {
        (mu, xi)
    };
    let r = (2.0 * m * m + x * x).sqrt();
    let v = |c: [f64; 5]| DVector::from_row_slice(&c);
    let rr = (2.0 * mu * mu + xi * xi).sqrt();
    [
        (v([-x, 0.0, 0.0, m, m]), 0.0),
        (v([0.0, -1.0, 1.0, -1.0, 1.0]), -xi),
        (v([0.0, 1.0, -1.0, -1.0, 1.0]), xi),
        (v([2.0 * m, -r, -r, x, x]), -rr),
        (v([2.0 * m, r, r, x, x]), rr),
    ]
}

/// Eigen-decomposition of `M`, sorted by ascending eigenvalue.
pub fn supermode_decomposition(m: &CouplingMatrix) -> Vec<Supermode> {
    let n = m.dim();
    let scale = m.entries.amax().max(m.gamma);
    let zero_tol = 1e-12 * scale;
    let eig = SymmetricEigen::new(m.entries.clone());

    let mut modes = match m.five_mode_pumps() {
        Some((mu, xi)) => labelled_five_mode(m, &eig, mu, xi, zero_tol),
        None => (0..n)
            .map(|i| {
                Supermode::new(
                    String::new(),
                    eig.eigenvalues[i],
                    eig.eigenvectors.column(i).into_owned(),
                    zero_tol,
                )
            })
            .collect(),
    };
    modes.sort_by(|a, b| {
        a.eigenvalue
            .total_cmp(&b.eigenvalue)
            .then_with(|| a.label.cmp(&b.label))
    });
    if m.five_mode_pumps().is_none() {
        for (i, sm) in modes.iter_mut().enumerate() {
            sm.label = format!("M{}", i + 1);
        }
    }
    modes
}

/// Projects each reference vector onto the numerical eigenspace of its
/// eigenvalue and orthogonalizes within shared eigenspaces.
fn labelled_five_mode(
    m: &CouplingMatrix,
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    mu: f64,
    xi: f64,
    zero_tol: f64,
) -> Vec<Supermode> {
    let quarter = m.gamma / 4.0;
    let cluster_tol = 1e-9 * m.entries.amax().max(m.gamma);
    let mut chosen: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut out = Vec::with_capacity(5);
    for (k, (reference, lambda)) in reference_supermodes(mu, xi).into_iter().enumerate() {
        let target = lambda * quarter;
        let mut v = DVector::zeros(5);
        for i in 0..5 {
            if (eig.eigenvalues[i] - target).abs() <= cluster_tol {
                let col = eig.eigenvectors.column(i);
                v += col * col.dot(&reference);
            }
        }
        for (prev, prev_lambda) in &chosen {
            if (prev_lambda - target).abs() <= cluster_tol {
                v -= prev * prev.dot(&v);
            }
        }
        let v = v.normalize();
        let eigenvalue = (m.entries.clone() * &v).dot(&v);
        chosen.push((v.clone(), target));
        out.push(Supermode::new(
            format!("S{}", k + 1),
            eigenvalue,
            v,
            zero_tol,
        ));
    }
    out
}

/// Looks up a supermode by label.
pub fn find<'a>(modes: &'a [Supermode], label: &str) -> Option<&'a Supermode> {
    modes.iter().find(|s| s.label == label)
}

/// Extracavity zero-frequency `(Var x, Var y)` of a supermode.
pub fn supermode_squeezing(sm: &Supermode, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!(
            "decay rate must be positive, got {gamma}"
        )));
    }
    let lt = 4.0 * sm.eigenvalue.abs() / gamma;
    if lt >= 1.0 {
        return Err(Error::threshold(lt * lt));
    }
    let squeezed = (lt - 1.0).powi(2) / (4.0 * (lt + 1.0).powi(2));
    let anti = (lt + 1.0).powi(2) / (4.0 * (lt - 1.0).powi(2));
    Ok(match sm.orientation {
        SqueezeOrientation::Vacuum => (0.25, 0.25),
        SqueezeOrientation::XSqueezed => (squeezed, anti),
        SqueezeOrientation::YSqueezed => (anti, squeezed),
    })
}

/// `1 − (2μ² + ξ²)`; positive below threshold.
pub fn threshold_margin(params: &SystemParams) -> f64 {
    params.threshold_margin()
}

/// Mode-wise transform from the original basis into the supermodes, rows in the given order.
pub fn supermode_transform(modes: &[Supermode]) -> Result<BasisTransform> {
    let n = modes.len();
    let dim = modes.first().map_or(0, |s| s.coefficients.len());
    let matrix = DMatrix::from_fn(n, dim, |i, j| modes[i].coefficients[j]);
    BasisTransform::modewise(
        Basis::Supermode,
        modes.iter().map(|s| s.label.clone()).collect(),
        matrix,
    )
}

/// `10·log₁₀(value/reference)`.
pub fn db(value: f64, reference: f64) -> f64 {
    10.0 * (value / reference).log10()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupermodeEntry {
    pub label: String,
    pub eigenvalue: f64,
    pub coefficients: Vec<f64>,
    pub orientation: SqueezeOrientation,
    pub var_x: f64,
    pub var_y: f64,
    pub db_x: f64,
    pub db_y: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupermodeReport {
    pub gamma: f64,
    pub mu: f64,
    pub xi: f64,
    pub mode_ordering: Vec<i32>,
    pub threshold_margin: f64,
    pub db_reference: f64,
    pub supermodes: Vec<SupermodeEntry>,
}

pub fn supermode_report(params: &SystemParams) -> Result<SupermodeReport> {
    params.require_below_threshold()?;
    let cm = coupling_matrix(params);
    let supermodes = supermode_decomposition(&cm)
        .into_iter()
        .map(|sm| {
            let (var_x, var_y) = supermode_squeezing(&sm, params.gamma)?;
            Ok(SupermodeEntry {
                label: sm.label.clone(),
                eigenvalue: sm.eigenvalue,
                coefficients: sm.coefficients.iter().copied().collect(),
                orientation: sm.orientation,
                var_x,
                var_y,
                db_x: db(var_x, 0.25),
                db_y: db(var_y, 0.25),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SupermodeReport {
        gamma: params.gamma,
        mu: params.mu,
        xi: params.xi,
        mode_ordering: cm.mode_ordering,
        threshold_margin: params.threshold_margin(),
        db_reference: 0.25,
        supermodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{basis_change, extracavity_spectrum};
    use crate::langevin::{build_system, zero_freq_covariance_numeric};
    use proptest::prelude::*;

    fn params(mu: f64, xi: f64) -> SystemParams {
        SystemParams::new(1.0, mu, xi).unwrap()
    }

    fn eigenvalues(mu: f64, xi: f64) -> Vec<f64> {
        supermode_decomposition(&coupling_matrix(&params(mu, xi)))
            .iter()
            .map(|s| s.eigenvalue)
            .collect()
    }

    #[test]
    fn matrix_entries() {
        let m = coupling_matrix(&params(0.4, 0.2));
        assert_eq!(m.entries, m.entries.transpose());
        assert!((m.entries[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((m.entries[(0, 2)] - 0.1).abs() < 1e-15);
        assert!((m.entries[(1, 4)] - 0.05).abs() < 1e-15);
        assert!((m.entries[(2, 3)] - 0.05).abs() < 1e-15);
        assert_eq!(m.entries[(1, 3)], 0.0);
        assert!(coupling_matrix(&params(0.0, 0.0))
            .entries
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn spectrum_at_reference_point() {
        let ev = eigenvalues(0.4, 0.2);
        for (a, b) in ev.iter().zip([-0.15, -0.05, 0.0, 0.05, 0.15]) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
        assert!(eigenvalues(0.0, 0.0).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn ascending_order_is_s4_s2_s1_s3_s5() {
        let modes = supermode_decomposition(&coupling_matrix(&params(0.4, 0.2)));
        let labels: Vec<_> = modes.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["S4", "S2", "S1", "S3", "S5"]);
    }

    #[test]
    fn reference_vectors_up_to_sign() {
        let (mu, xi) = (0.4, 0.2);
        let modes = supermode_decomposition(&coupling_matrix(&params(mu, xi)));
        for (k, (reference, _)) in reference_supermodes(mu, xi).into_iter().enumerate() {
            let sm = find(&modes, &format!("S{}", k + 1)).unwrap();
            let overlap = sm.coefficients.dot(&reference.normalize()).abs();
            assert!(
                (overlap - 1.0).abs() < 1e-12,
                "S{} overlap {overlap}",
                k + 1
            );
        }
        let s2 = find(&modes, "S2").unwrap();
        let h = 0.5;
        for (a, b) in s2.coefficients.iter().zip([0.0, h, -h, h, -h]) {
            assert!((a - b).abs() < 1e-12);
        }
        let s1 = find(&modes, "S1").unwrap();
        let ratio = s1.coefficients[0] / s1.coefficients[3];
        assert!((ratio + xi / mu).abs() < 1e-12);
    }

    #[test]
    fn degenerate_points_keep_labels() {
        for (mu, xi) in [(0.3, 0.3), (0.0, 0.4), (0.4, 0.0), (0.0, 0.0)] {
            let modes = supermode_decomposition(&coupling_matrix(&params(mu, xi)));
            let t = supermode_transform(&modes).unwrap();
            assert_eq!(t.labels.len(), 5);
            let m = coupling_matrix(&params(mu, xi));
            for sm in &modes {
                let residual =
                    (&m.entries * &sm.coefficients - &sm.coefficients * sm.eigenvalue).amax();
                assert!(residual < 1e-12, "{} at ({mu},{xi})", sm.label);
            }
        }
    }

    #[test]
    fn orientation_and_vacuum() {
        let modes = supermode_decomposition(&coupling_matrix(&params(0.4, 0.2)));
        let o = |l: &str| find(&modes, l).unwrap().orientation;
        assert_eq!(o("S1"), SqueezeOrientation::Vacuum);
        assert_eq!(o("S2"), SqueezeOrientation::XSqueezed);
        assert_eq!(o("S4"), SqueezeOrientation::XSqueezed);
        assert_eq!(o("S3"), SqueezeOrientation::YSqueezed);
        assert_eq!(o("S5"), SqueezeOrientation::YSqueezed);
        assert_eq!(
            supermode_squeezing(find(&modes, "S1").unwrap(), 1.0).unwrap(),
            (0.25, 0.25)
        );
    }

    #[test]
    fn threshold_limit_of_s2() {
        let xi = 1.0 / 5f64.sqrt();
        let sm = Supermode::new("S2".into(), -xi / 4.0, DVector::from_element(5, 1.0), 1e-12);
        let (vx, _) = supermode_squeezing(&sm, 1.0).unwrap();
        assert!((vx - (7.0 - 3.0 * 5f64.sqrt()) / 8.0).abs() < 1e-14);
        let near = Supermode::new(
            "S4".into(),
            -0.25 * (1.0 - 1e-9),
            DVector::from_element(5, 1.0),
            1e-12,
        );
        assert!(supermode_squeezing(&near, 1.0).unwrap().0 < 1e-18);
        let over = Supermode::new("S4".into(), -0.25, DVector::from_element(5, 1.0), 1e-12);
        assert!(matches!(
            supermode_squeezing(&over, 1.0),
            Err(Error::Threshold { .. })
        ));
    }

    #[test]
    fn threshold_margins() {
        assert_eq!(threshold_margin(&params(0.0, 0.0)), 1.0);
        let mu = (0.4f64).sqrt();
        assert!(threshold_margin(&params(mu, mu / 2f64.sqrt())).abs() < 1e-15);
        let mu = (9.0f64 / 26.0).sqrt();
        assert!(threshold_margin(&params(mu, (8.0f64 / 9.0).sqrt() * mu)).abs() < 1e-15);
    }

    #[test]
    fn report_serializes() {
        let rep = supermode_report(&params(0.3, 0.2)).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"x_squeezed\""));
        assert_eq!(rep.supermodes.len(), 5);
        assert!(supermode_report(&params(0.7, 0.2)).is_err());
    }

    fn below_threshold() -> impl Strategy<Value = (f64, f64, f64)> {
        (0.2f64..5.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..0.98).prop_map(|(g, a, b, rad)| {
            // uniform direction on the (√2μ, ξ) quarter circle, scaled inside the threshold
            let norm = (a * a + b * b).sqrt().max(1e-9);
            let rad = rad.sqrt();
            (g, rad * a / norm / 2f64.sqrt(), rad * b / norm)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn reconstruction_and_spectrum((g, mu, xi) in below_threshold()) {
            let p = SystemParams::new(g, mu, xi).unwrap();
            let m = coupling_matrix(&p);
            let modes = supermode_decomposition(&m);
            let mut rebuilt = DMatrix::zeros(5, 5);
            for sm in &modes {
                prop_assert!((sm.coefficients.norm() - 1.0).abs() < 1e-12);
                rebuilt += &sm.coefficients * sm.coefficients.transpose() * sm.eigenvalue;
            }
            prop_assert!((rebuilt - &m.entries).amax() < 1e-12);
            let r = (2.0 * mu * mu + xi * xi).sqrt();
            let expect = [-g * r / 4.0, -g * xi / 4.0, 0.0, g * xi / 4.0, g * r / 4.0];
            let mut got: Vec<f64> = modes.iter().map(|s| s.eigenvalue).collect();
            got.sort_by(f64::total_cmp);
            for (a, b) in got.iter().zip(expect) {
                prop_assert!((a - b).abs() < 1e-12, "{:?}", got);
            }
        }

        #[test]
        fn supermode_basis_diagonalizes((g, mu, xi) in below_threshold()) {
            let p = SystemParams::new(g, mu, xi).unwrap();
            let modes = supermode_decomposition(&coupling_matrix(&p));
            let inside = zero_freq_covariance_numeric(&build_system(&p)).unwrap();
            let out = extracavity_spectrum(&inside, g).unwrap();
            let sm = basis_change(&out, &supermode_transform(&modes).unwrap()).unwrap();
            let scale = sm.max_abs().max(1.0);
            for i in 0..5 {
                for j in 0..5 {
                    if i != j {
                        prop_assert!(sm.x_block[(i, j)].abs() < 1e-10 * scale);
                        prop_assert!(sm.y_block[(i, j)].abs() < 1e-10 * scale);
                    }
                    prop_assert!(sm.xy_block[(i, j)].abs() < 1e-10 * scale);
                }
                let (vx, vy) = supermode_squeezing(&modes[i], g).unwrap();
                prop_assert!((sm.x_block[(i, i)] - vx).abs() < 1e-10 * scale, "{} x", modes[i].label);
                prop_assert!((sm.y_block[(i, i)] - vy).abs() < 1e-10 * scale, "{} y", modes[i].label);
            }
        }

        #[test]
        fn pairs_swap_quadratures((g, mu, xi) in below_threshold()) {
            let p = SystemParams::new(g, mu, xi).unwrap();
            let modes = supermode_decomposition(&coupling_matrix(&p));
            for (neg, pos) in [("S2", "S3"), ("S4", "S5")] {
                let a = supermode_squeezing(find(&modes, neg).unwrap(), g).unwrap();
                let b = supermode_squeezing(find(&modes, pos).unwrap(), g).unwrap();
                prop_assert!((a.0 - b.1).abs() <= 1e-12 * a.1.max(1.0));
                prop_assert!((a.1 - b.0).abs() <= 1e-12 * a.1.max(1.0));
            }
            prop_assert_eq!(supermode_squeezing(find(&modes, "S1").unwrap(), g).unwrap(), (0.25, 0.25));
        }
    }
}
