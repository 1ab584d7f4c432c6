//! Near-threshold squeezing and nullifier variances in both regimes,
//! compared with the published figures.

use oam_cluster::cluster::threshold_limits;
use oam_cluster::langevin::Regime;

fn main() -> oam_cluster::Result<()> {
    for regime in [Regime::Sqrt2, Regime::Unity] {
        let lim = threshold_limits(regime, 1e-6, 1.0)?;
        println!("{} (μ = {:.8})", regime.name(), lim.mu);
        println!("  Var X(S2)       = {:.6}", lim.var_x_s2);
        println!("  Var N1..N4      = {:?}", lim.var_n);
        println!(
            "  published N1/N2 = {:?}, consistent: {}",
            lim.published_nullifiers, lim.matches_published
        );
        if let Some(note) = lim.note {
            println!("  {note}");
        }
    }
    println!("(7 − 3√5)/8 = {:.6}", (7.0 - 3.0 * 5f64.sqrt()) / 8.0);
    Ok(())
}
