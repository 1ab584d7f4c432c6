//! Monte Carlo validation of the zero-frequency covariance at one pump point.
//!
//! `cargo run --release --example monte_carlo_check -- [n_traj] [seed]`

use oam_cluster::langevin::SystemParams;
use oam_cluster::sde::{simulate, verify_against_closed_form, SimulationConfig};

fn main() -> oam_cluster::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_traj = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(2024);

    let params = SystemParams::new(1.0, 0.3, 0.3 / 2f64.sqrt())?;
    let cfg = SimulationConfig::default_for(&params, n_traj, seed);
    let start = std::time::Instant::now();
    let report = verify_against_closed_form(&simulate(&cfg)?, 3.0)?;
    println!(
        "{} trajectories of length {:.1} in {:.1?}",
        n_traj,
        cfg.t_total,
        start.elapsed()
    );
    println!(
        "{:>3} {:>6} {:>6} {:>12} {:>12} {:>10} {:>7}",
        "blk", "row", "col", "analytic", "estimate", "std.err", "z"
    );
    for e in report.entries.iter().filter(|e| e.block != "xy") {
        println!(
            "{:>3} {:>6} {:>6} {:>12.6} {:>12.6} {:>10.2e} {:>7.2}",
            e.block, e.row, e.col, e.analytic, e.estimate, e.std_error, e.z_score
        );
    }
    println!(
        "max |z| = {:.2}, max |imag z| = {:.2}, max relative std. error = {:.2}%",
        report.max_abs_z,
        report.max_abs_imag_z,
        100.0 * report.max_relative_std_error
    );
    Ok(())
}
