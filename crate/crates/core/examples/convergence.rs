//! Statistical behaviour of the Monte Carlo estimator: step size, budget,
//! and the correlation time near threshold.

use oam_cluster::langevin::SystemParams;
use oam_cluster::sde::{convergence_report, simulate, SimulationConfig};
use oam_cluster::supermode::{coupling_matrix, supermode_decomposition, supermode_transform};

fn main() -> oam_cluster::Result<()> {
    let params = SystemParams::new(1.0, 0.3, 0.2)?;
    let base = SimulationConfig::default_for(&params, 100, 7);
    let configs = [
        base.clone(),
        SimulationConfig {
            dt: base.dt / 2.0,
            ..base.clone()
        },
        SimulationConfig {
            n_traj: 400,
            ..base.clone()
        },
    ];
    println!(
        "{:>6} {:>8} {:>6} {:>10} {:>10} {:>10} {:>8}",
        "dt", "T", "n", "1/√(nT)", "sum0", "s.e.", "max|z|"
    );
    for r in convergence_report(&configs)? {
        println!(
            "{:>6.3} {:>8.1} {:>6} {:>10.2e} {:>10.5} {:>10.5} {:>8.2}",
            r.dt,
            r.t_total,
            r.n_traj,
            r.inverse_root_budget,
            r.sum0_estimate,
            r.sum0_std_error,
            r.max_abs_z
        );
    }

    println!("\nintegrated correlation time of the slowest supermode quadrature:");
    for margin in [0.5, 0.3, 0.1] {
        let xi = ((1.0f64 - margin) / 5.0).sqrt();
        let p = SystemParams::new(1.0, xi * 2f64.sqrt(), xi)?;
        let est = simulate(&SimulationConfig::default_for(&p, 100, 3))?;
        let t = supermode_transform(&supermode_decomposition(&coupling_matrix(&p)))?;
        let s5 = t.labels.iter().position(|l| l == "S5").expect("labelled");
        println!(
            "  margin {margin}: τ = {:.2} (1/(γ(1−ρ)) = {:.2})",
            est.integrated_correlation_time(&t, s5)?,
            SimulationConfig::correlation_time(&p)
        );
    }
    Ok(())
}
