//! Four-node linear cluster from the supermodes at one pump strength.

use oam_cluster::cluster::default_cluster;
use oam_cluster::langevin::{Regime, SystemParams};

fn main() -> oam_cluster::Result<()> {
    let mu: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.4);
    let params = SystemParams::new(1.0, mu, Regime::Sqrt2.xi_for(mu))?;
    let state = default_cluster(&params)?;

    println!("inputs (node ← supermode):");
    for (node, inp) in state.inputs.iter().enumerate() {
        println!(
            "  {} ← {}: Var X = {:.5}, Var Y = {:.5} ({:?})",
            node + 1,
            inp.label,
            inp.var_x,
            inp.var_y,
            inp.orientation
        );
    }
    println!(
        "U (unitarity error {:.1e}):",
        state.unitary.unitarity_error()
    );
    for row in state.unitary.u.row_iter() {
        let cells: Vec<String> = row
            .iter()
            .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
            .collect();
        println!("  {}", cells.join("  "));
    }
    let labels: Vec<_> = state.inputs.iter().map(|i| i.label.as_str()).collect();
    for (i, v) in state.nullifiers.variances.iter().enumerate() {
        let terms: Vec<String> = (0..4)
            .flat_map(|k| {
                let (cx, cy) = (
                    state.nullifiers.coef_x[(i, k)],
                    state.nullifiers.coef_y[(i, k)],
                );
                [(cx, "X", k), (cy, "Y", k)]
            })
            .filter(|(c, _, _)| c.abs() > 1e-12)
            .map(|(c, q, k)| format!("{c:+.4}·{q}({})", labels[k]))
            .collect();
        println!("N{} = {}   variance {v:.5}", i + 1, terms.join(" "));
    }
    println!(
        "pair sums {:?} → {}",
        state.vlf.pair_sums,
        if state.vlf.certified {
            "cluster"
        } else {
            "not a cluster"
        }
    );
    Ok(())
}
