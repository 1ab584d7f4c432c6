//! Separability-criterion sweep for both waist regimes; writes the CSV
//! tables next to the target directory and prints the crossing points.

use oam_cluster::cluster::{mu_grid, regime_report};
use oam_cluster::langevin::Regime;

fn main() -> oam_cluster::Result<()> {
    let dir = std::env::temp_dir();
    for regime in [Regime::Sqrt2, Regime::Unity] {
        let report = regime_report(regime, &mu_grid(regime, 120, 1e-6), 1e-6, 1.0)?;
        let path = dir.join(format!("vlf_{}.csv", regime.name()));
        std::fs::write(&path, report.to_csv())?;
        println!(
            "{:<6} threshold μ = {:.6}, all pair sums < 1 from μ = {:.5}; table in {}",
            regime.name(),
            report.threshold_mu,
            report.crossing_mu.unwrap_or(f64::NAN),
            path.display()
        );
    }
    Ok(())
}
