//! Supermodes of the coupling matrix and their squeezing, checked against
//! the covariance rotated into the supermode basis.

use oam_cluster::covariance::{basis_change, extracavity_spectrum};
use oam_cluster::langevin::{build_system, zero_freq_covariance_numeric, SystemParams};
use oam_cluster::supermode::{
    coupling_matrix, supermode_decomposition, supermode_report, supermode_squeezing,
    supermode_transform,
};

fn main() -> oam_cluster::Result<()> {
    let mu = 0.5;
    let params = SystemParams::new(1.0, mu, mu / 2f64.sqrt())?;
    let modes = supermode_decomposition(&coupling_matrix(&params));

    let inside = zero_freq_covariance_numeric(&build_system(&params))?;
    let rotated = basis_change(
        &extracavity_spectrum(&inside, params.gamma)?,
        &supermode_transform(&modes)?,
    )?;

    println!(
        "{:<4} {:>9} {:>11} {:>11} {:>11} {:>11}  coefficients (0, +1, -1, +2, -2)",
        "", "Λ/γ", "Var X", "rotated", "Var Y", "rotated"
    );
    for (i, sm) in modes.iter().enumerate() {
        let (vx, vy) = supermode_squeezing(sm, params.gamma)?;
        let c: Vec<String> = sm.coefficients.iter().map(|v| format!("{v:+.3}")).collect();
        println!(
            "{:<4} {:>9.5} {:>11.6} {:>11.6} {:>11.6} {:>11.6}  {}",
            sm.label,
            sm.eigenvalue,
            vx,
            rotated.x_block[(i, i)],
            vy,
            rotated.y_block[(i, i)],
            c.join(" ")
        );
    }
    println!("largest off-diagonal in the supermode basis: {:.2e}", {
        let mut x = rotated.x_block.clone();
        x.fill_diagonal(0.0);
        x.amax()
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&supermode_report(&params)?)?
    );
    Ok(())
}
