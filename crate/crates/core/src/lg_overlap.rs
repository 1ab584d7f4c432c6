//! Laguerre–Gaussian transverse modes and the three-wave overlap integrals
//! that set the down-conversion coupling constants.
//!
//! All modes are evaluated in the thin-crystal plane `z = 0`. The signal and
//! idler waist is fixed to 1 and the pump waist is `1 / r`, where `r` is the
//! waist ratio `w_s / w_p`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::quadrature;

/// One Laguerre–Gaussian mode: radial index `p`, azimuthal (OAM) index `l`
/// and waist `w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LGModeSpec {
    pub p: u32,
    pub l: i32,
    pub w: f64,
}

impl LGModeSpec {
    pub fn new(p: u32, l: i32, w: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!(
                "mode waist must be positive, got {w}"
            )));
        }
        Ok(Self { p, l, w })
    }

    /// `p = 0` mode with unit waist.
    pub fn signal(l: i32) -> Self {
        Self { p: 0, l, w: 1.0 }
    }

    /// Normalisation constant `sqrt(2 p! / (π (p+|l|)!))`.
    pub fn norm_constant(&self) -> f64 {
        let al = self.l.unsigned_abs();
        // p!/(p+|l|)! as a running product keeps it finite for large p.
        let ratio: f64 = (self.p + 1..=self.p + al).map(|k| 1.0 / k as f64).product();
        (2.0 * ratio / PI).sqrt()
    }

    /// Real radial profile (amplitude at φ = 0).
    pub fn radial(&self, rho: f64) -> f64 {
        let al = self.l.unsigned_abs();
        let s = rho / self.w;
        let arg = 2.0 * s * s;
        self.norm_constant() / self.w
            * (std::f64::consts::SQRT_2 * s).powi(al as i32)
            * laguerre(self.p, al as f64, arg)
            * (-s * s).exp()
    }
}

/// Generalised Laguerre polynomial `L_p^α(x)` by the three-term recurrence.
pub fn laguerre(p: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Complex amplitude `U_{p,l}(ρ, φ)` of a unit-normalised LG mode.
pub fn lg_amplitude(mode: &LGModeSpec, rho: f64, phi: f64) -> Result<Complex<f64>> {
    if !(rho >= 0.0) {
        return Err(Error::invalid(format!(
            "radial coordinate must be non-negative, got {rho}"
        )));
    }
    if !(mode.w > 0.0) {
        return Err(Error::invalid(format!(
            "mode waist must be positive, got {}",
            mode.w
        )));
    }
    let radial = mode.radial(rho);
    Ok(Complex::from_polar(1.0, mode.l as f64 * phi) * radial)
}

/// A coupling query `χ(l_pump; l_signal, l_idler)` at waist ratio `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingQuery {
    pub l_pump: i32,
    pub l_signal: i32,
    pub l_idler: i32,
    pub r: f64,
}

impl CouplingQuery {
    pub fn new(l_pump: i32, l_signal: i32, l_idler: i32, r: f64) -> Self {
        Self {
            l_pump,
            l_signal,
            l_idler,
            r,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::invalid(format!(
                "waist ratio must be positive, got {}",
                self.r
            )));
        }
        if self.l_pump.abs() != 1 {
            return Err(Error::invalid(format!(
                "pump OAM must be ±1, got {}",
                self.l_pump
            )));
        }
        Ok(())
    }

    fn conserves_oam(&self) -> bool {
        self.l_signal + self.l_idler == self.l_pump
    }

    fn pump_mode(&self) -> LGModeSpec {
        LGModeSpec {
            p: 0,
            l: self.l_pump,
            w: 1.0 / self.r,
        }
    }
}

/// Overlap integral in units of the quadratic susceptibility.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct CouplingConstant {
    pub value: f64,
}

/// `Γ(n/2)` for a positive integer `n`, exact up to rounding.
fn gamma_half_integer(n: u32) -> f64 {
    debug_assert!(n > 0);
    let (mut acc, mut k) = if n % 2 == 0 { (1.0, 2) } else { (PI.sqrt(), 1) };
    // Γ(k/2 + 1) = (k/2) Γ(k/2)
    while k < n {
        acc *= k as f64 / 2.0;
        k += 2;
    }
    acc
}

/// Coupling constant from the closed-form radial integral
/// `∫ρ^{n+1} e^{-aρ²} dρ = Γ(n/2+1) / (2 a^{n/2+1})`.
pub fn coupling_constant(q: &CouplingQuery) -> Result<CouplingConstant> {
    q.validate()?;
    if !q.conserves_oam() {
        return Ok(CouplingConstant { value: 0.0 });
    }
    let pump = q.pump_mode();
    let sig = LGModeSpec::signal(q.l_signal);
    let idl = LGModeSpec::signal(q.l_idler);
    let n = q.l_pump.unsigned_abs() + q.l_signal.unsigned_abs() + q.l_idler.unsigned_abs();
    let a = q.r * q.r + 2.0;
    let half_n = n as f64 / 2.0;
    let radial = gamma_half_integer(n + 2) / (2.0 * a.powf(half_n + 1.0));
    let value = 2.0
        * PI
        * pump.norm_constant()
        * sig.norm_constant()
        * idl.norm_constant()
        * q.r.powi(1 + q.l_pump.abs())
        * 2f64.powf(half_n)
        * radial;
    Ok(CouplingConstant { value })
}

/// Same overlap by adaptive quadrature of the mode profiles; the angular
/// integral is `2π` when OAM is conserved and zero otherwise.
pub fn coupling_constant_quadrature(q: &CouplingQuery) -> Result<CouplingConstant> {
    q.validate()?;
    if !q.conserves_oam() {
        return Ok(CouplingConstant { value: 0.0 });
    }
    let pump = q.pump_mode();
    let sig = LGModeSpec::signal(q.l_signal);
    let idl = LGModeSpec::signal(q.l_idler);
    let power = (q.l_pump.abs() + q.l_signal.abs() + q.l_idler.abs() + 1) as f64;
    let cutoff = quadrature::gaussian_tail_cutoff(power, q.r * q.r + 2.0, 1e-14);
    let integrand = |rho: f64| pump.radial(rho) * sig.radial(rho) * idl.radial(rho) * rho;
    let radial = quadrature::integrate(integrand, 0.0, cutoff, 0.0, 1e-14);
    Ok(CouplingConstant {
        value: 2.0 * PI * radial,
    })
}

/// `χ(lp; a, b)` at a fixed waist ratio, as a function of `r` only.
fn closed_form_curve(l_pump: i32, ls: i32, li: i32) -> impl Fn(f64) -> f64 {
    move |r| {
        coupling_constant(&CouplingQuery::new(l_pump, ls, li, r))
            .map(|c| c.value)
            .unwrap_or(f64::NAN)
    }
}

/// Golden-section maximisation of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Waist ratio at which `χ(l_pump; l_signal, l_idler)` peaks inside `[lo, hi]`.
pub fn coupling_argmax(l_pump: i32, l_signal: i32, l_idler: i32, lo: f64, hi: f64) -> Result<f64> {
    CouplingQuery::new(l_pump, l_signal, l_idler, lo).validate()?;
    if !(hi > lo) {
        return Err(Error::invalid("argmax bracket must satisfy lo < hi"));
    }
    Ok(golden_section_max(
        closed_form_curve(l_pump, l_signal, l_idler),
        lo,
        hi,
        1e-10,
    ))
}

/// Coupling curves: one row per waist ratio, one column per `(l_pump, l_signal, l_idler)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTable {
    pub columns: Vec<(i32, i32, i32)>,
    pub r: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl CouplingTable {
    pub fn column_name(&(lp, ls, li): &(i32, i32, i32)) -> String {
        format!("chi_{lp}_{ls}_{li}")
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[idx]).collect()
    }

    /// CSV body: header row `r,chi_<lp>_<ls>_<li>,...` and one row per `r`,
    /// all values printed in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r");
        for c in &self.columns {
            out.push(',');
            out.push_str(&Self::column_name(c));
        }
        out.push('\n');
        for (r, row) in self.r.iter().zip(&self.values) {
            write!(out, "{r:?}").unwrap();
            for v in row {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Coupling curves for a set of `(l_pump, l_signal, l_idler)` triples.
pub fn coupling_table(columns: &[(i32, i32, i32)], r_grid: &[f64]) -> Result<CouplingTable> {
    if r_grid.is_empty() {
        return Err(Error::invalid("waist-ratio grid is empty"));
    }
    if columns.is_empty() {
        return Err(Error::invalid("no coupling columns requested"));
    }
    let values = r_grid
        .iter()
        .map(|&r| {
            columns
                .iter()
                .map(|&(lp, ls, li)| {
                    coupling_constant(&CouplingQuery::new(lp, ls, li, r)).map(|c| c.value)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingTable {
        columns: columns.to_vec(),
        r: r_grid.to_vec(),
        values,
    })
}

/// Coupling curves for one pump OAM and a list of `(l_signal, l_idler)` pairs.
pub fn coupling_sweep(l_pump: i32, pairs: &[(i32, i32)], r_grid: &[f64]) -> Result<CouplingTable> {
    let columns: Vec<_> = pairs.iter().map(|&(ls, li)| (l_pump, ls, li)).collect();
    coupling_table(&columns, r_grid)
}

/// Ratio `χ(1;0,1) / χ(-1;1,-2)` at waist ratio `r`; this is the pump
/// parameter ratio `μ/ξ`.
pub fn pump_parameter_ratio(r: f64) -> Result<f64> {
    let mu = coupling_constant(&CouplingQuery::new(1, 0, 1, r))?.value;
    let xi = coupling_constant(&CouplingQuery::new(-1, 1, -2, r))?.value;
    Ok(mu / xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    /// 2-D tensor-product quadrature of `U_a U_b^*`: adaptive in ρ,
    /// trapezoid in φ (exact for the periodic `e^{i(l-l')φ}` factor).
    fn inner_product_2d(a: &LGModeSpec, b: &LGModeSpec) -> Complex<f64> {
        let n_phi = 64;
        let cutoff = 12.0 * a.w.max(b.w);
        let mut acc = Complex::new(0.0, 0.0);
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let re = quadrature::integrate(
                |rho| {
                    (lg_amplitude(a, rho, phi).unwrap() * lg_amplitude(b, rho, phi).unwrap().conj())
                        .re
                        * rho
                },
                0.0,
                cutoff,
                1e-15,
                1e-13,
            );
            let im = quadrature::integrate(
                |rho| {
                    (lg_amplitude(a, rho, phi).unwrap() * lg_amplitude(b, rho, phi).unwrap().conj())
                        .im
                        * rho
                },
                0.0,
                cutoff,
                1e-15,
                1e-13,
            );
            acc += Complex::new(re, im);
        }
        acc * (2.0 * PI / n_phi as f64)
    }

    #[test]
    fn off_axis_modes_vanish_on_axis() {
        let m = LGModeSpec::new(0, 1, 1.0).unwrap();
        assert_eq!(lg_amplitude(&m, 0.0, 0.3).unwrap(), Complex::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_mode_normalisation() {
        let m = LGModeSpec::new(0, 0, 1.0).unwrap();
        let peak = lg_amplitude(&m, 0.0, 1.1).unwrap();
        assert_eq!(peak.im, 0.0);
        // |U(0)|² · π w²/2 = 1 analytically.
        assert!((peak.re * peak.re * PI * 0.5 - 1.0).abs() < 1e-15);
        let norm = inner_product_2d(&m, &m);
        assert!((norm.re - 1.0).abs() < 1e-8 && norm.im.abs() < 1e-8);
    }

    #[test]
    fn distinct_oam_modes_are_orthogonal() {
        let a = LGModeSpec::signal(1);
        let b = LGModeSpec::signal(2);
        assert!(inner_product_2d(&a, &b).norm() < 1e-8);
    }

    #[test]
    fn orthonormality_up_to_index_four() {
        for p in 0..=4u32 {
            for l in -4..=4i32 {
                for pp in 0..=4u32 {
                    for lq in -4..=4i32 {
                        if (p, l) > (pp, lq) {
                            continue;
                        }
                        let a = LGModeSpec::new(p, l, 1.3).unwrap();
                        let b = LGModeSpec::new(pp, lq, 1.3).unwrap();
                        let ip = inner_product_2d(&a, &b);
                        let expected = if (p, l) == (pp, lq) { 1.0 } else { 0.0 };
                        assert!(
                            (ip - Complex::new(expected, 0.0)).norm() < 1e-8,
                            "<{p},{l}|{pp},{lq}> = {ip}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_arguments() {
        assert!(LGModeSpec::new(0, 0, 0.0).is_err());
        let m = LGModeSpec::signal(0);
        assert!(lg_amplitude(&m, -1.0, 0.0).is_err());
        let bad = LGModeSpec {
            p: 0,
            l: 0,
            w: -1.0,
        };
        assert!(lg_amplitude(&bad, 1.0, 0.0).is_err());
        assert!(coupling_constant(&CouplingQuery::new(1, 0, 1, 0.0)).is_err());
        assert!(coupling_constant(&CouplingQuery::new(1, 0, 1, -2.0)).is_err());
        assert!(coupling_constant(&CouplingQuery::new(2, 1, 1, 1.0)).is_err());
    }

    #[test]
    fn oam_violation_gives_exact_zero() {
        for r in [0.5, 1.0, SQRT_2, 3.0] {
            let q = CouplingQuery::new(1, 0, 2, r);
            assert_eq!(coupling_constant(&q).unwrap().value, 0.0);
            assert_eq!(coupling_constant_quadrature(&q).unwrap().value, 0.0);
        }
    }

    #[test]
    fn frozen_reference_values() {
        // Independent reference: scipy.integrate.quad (epsrel 1e-13) of the
        // same three normalised profiles on [0, ∞).
        let cases = [
            (
                0.5,
                0.1576068268252574,
                0.19812418846121488,
                0.21569029663688327,
            ),
            (
                1.0,
                0.3546153603568291,
                0.33433456802830014,
                0.2729830316810554,
            ),
            (
                SQRT_2,
                0.3989422804014328,
                0.28209479177387825,
                0.1727470747356678,
            ),
            (
                2.0,
                0.35461536035682917,
                0.1671672840141501,
                0.06824575792026384,
            ),
            (
                3.0,
                0.23738714205705097,
                0.06103929378728546,
                0.01359228400351679,
            ),
        ];
        for (r, c01, c12, c23) in cases {
            for (q, want) in [
                (CouplingQuery::new(1, 0, 1, r), c01),
                (CouplingQuery::new(-1, 1, -2, r), c12),
                (CouplingQuery::new(1, -2, 3, r), c23),
            ] {
                let got = coupling_constant(&q).unwrap().value;
                assert!((got / want - 1.0).abs() < 1e-12, "{q:?}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for l_pump in [-1i32, 1] {
            for ls in -3i32..=3 {
                let li = l_pump - ls;
                if li.abs() > 3 {
                    continue;
                }
                for k in 0..=25 {
                    let r = 0.5 + 2.5 * k as f64 / 25.0;
                    let q = CouplingQuery::new(l_pump, ls, li, r);
                    let a = coupling_constant(&q).unwrap().value;
                    let b = coupling_constant_quadrature(&q).unwrap().value;
                    assert!((a / b - 1.0).abs() < 1e-10, "{q:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn ratio_law_by_quadrature() {
        for k in 0..10 {
            let r = 0.5 + 2.5 * k as f64 / 9.0;
            let num = coupling_constant_quadrature(&CouplingQuery::new(1, 0, 1, r))
                .unwrap()
                .value;
            let den = coupling_constant_quadrature(&CouplingQuery::new(-1, 1, -2, r))
                .unwrap()
                .value;
            let law = SQRT_2 * (r * r + 2.0) / 4.0;
            assert!((num / den - law).abs() < 1e-8);
            assert!((pump_parameter_ratio(r).unwrap() - law).abs() < 1e-12);
        }
    }

    #[test]
    fn maxima_locations() {
        let r01 = coupling_argmax(1, 0, 1, 0.5, 3.0).unwrap();
        assert!((r01 - SQRT_2).abs() < 1e-6);
        let r12 = coupling_argmax(-1, 1, -2, 0.5, 3.0).unwrap();
        assert!((r12 - 1.0).abs() < 1e-6);
        // Oracle: golden section over the quadrature path.
        let oracle = golden_section_max(
            |r| {
                coupling_constant_quadrature(&CouplingQuery::new(1, 0, 1, r))
                    .unwrap()
                    .value
            },
            0.5,
            3.0,
            1e-8,
        );
        assert!((oracle - SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn sweep_consistency_and_dense_argmax() {
        let t = coupling_sweep(1, &[(0, 1)], &[SQRT_2]).unwrap();
        let point = coupling_constant(&CouplingQuery::new(1, 0, 1, SQRT_2))
            .unwrap()
            .value;
        assert_eq!(t.values[0][0], point);

        let grid: Vec<f64> = (0..=2500).map(|k| 0.5 + k as f64 * 0.001).collect();
        let t = coupling_sweep(-1, &[(1, -2)], &grid).unwrap();
        let col = t.column(0);
        let (imax, _) =
            col.iter().enumerate().fold(
                (0, f64::MIN),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        assert!((grid[imax] - 1.0).abs() <= 0.001);
        assert!(col.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sweep_rejects_empty_grid() {
        assert!(coupling_sweep(1, &[(0, 1)], &[]).is_err());
        assert!(coupling_sweep(1, &[(0, 1)], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn csv_header_and_precision() {
        let t = coupling_sweep(-1, &[(0, -1), (1, -2)], &[1.0, SQRT_2]).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "r,chi_-1_0_-1,chi_-1_1_-2");
        let row: Vec<f64> = lines
            .nth(1)
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(row[0], SQRT_2);
        assert_eq!(row[2], t.values[1][1]);
    }

    #[test]
    fn gamma_half_integer_values() {
        assert_eq!(gamma_half_integer(2), 1.0);
        assert!((gamma_half_integer(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half_integer(8), 6.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn exchange_symmetry(a in -4i32..=4, r in 0.3f64..4.0, pump in prop::sample::select(vec![-1, 1])) {
                let b = pump - a;
                let x = coupling_constant(&CouplingQuery::new(pump, a, b, r)).unwrap();
                let y = coupling_constant(&CouplingQuery::new(pump, b, a, r)).unwrap();
                prop_assert_eq!(x, y);
            }

            #[test]
            fn sign_flip_symmetry(a in -4i32..=4, b in -4i32..=4, r in 0.3f64..4.0) {
                let x = coupling_constant(&CouplingQuery::new(1, a, b, r)).unwrap();
                let y = coupling_constant(&CouplingQuery::new(-1, -a, -b, r)).unwrap();
                prop_assert_eq!(x, y);
            }

            #[test]
            fn ratio_law_closed_form(r in 0.5f64..3.0) {
                let law = SQRT_2 * (r * r + 2.0) / 4.0;
                prop_assert!((pump_parameter_ratio(r).unwrap() - law).abs() < 1e-12);
            }
        }
    }
}
