//! Overlap couplings of LG modes versus the pump/signal waist ratio `r`.
//!
//! Prints where each coupling peaks and the pump-parameter ratio `μ/ξ`
//! at the two waist ratios used elsewhere (`r = √2`, `r = 1`), computed
//! both in closed form and by adaptive quadrature.

use oam_cluster::lg_overlap::{
    coupling_argmax, coupling_constant, coupling_constant_quadrature, pump_parameter_ratio,
    CouplingQuery,
};

fn main() -> oam_cluster::Result<()> {
    println!("{:<14} {:>10}", "coupling", "argmax r");
    for (lp, ls, li) in [(1, 0, 1), (-1, 1, -2), (1, -2, 3)] {
        let r = coupling_argmax(lp, ls, li, 0.3, 4.0)?;
        println!("χ({lp:+};{ls},{li}) {r:>10.6}");
    }

    println!();
    for r in [2f64.sqrt(), 1.0] {
        let q = CouplingQuery::new(1, 0, 1, r);
        let closed = coupling_constant(&q)?.value;
        let quad = coupling_constant_quadrature(&q)?.value;
        println!(
            "r = {r:.4}: χ(1;0,1) closed {closed:.15}, quadrature {quad:.15}; μ/ξ = {:.12}",
            pump_parameter_ratio(r)?
        );
    }
    Ok(())
}
