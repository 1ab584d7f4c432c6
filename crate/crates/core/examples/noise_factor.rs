//! Complex factorization of the indefinite c-number diffusion matrix.

use oam_cluster::langevin::{build_system, SystemParams};
use oam_cluster::sde::factor_diffusion;

fn main() -> oam_cluster::Result<()> {
    let dd = build_system(&SystemParams::new(1.0, 0.3, 0.2)?);
    let eig = nalgebra::SymmetricEigen::new(dd.diffusion.clone());
    println!("diffusion eigenvalues: {:.4}", eig.eigenvalues.transpose());

    let factor = factor_diffusion(&dd.diffusion)?;
    let back = factor.reconstruct();
    println!("real factor: {}", factor.is_real());
    println!(
        "max |B Bᵀ − D| = {:.2e}",
        (back.map(|z| z.re) - &dd.diffusion).amax()
    );
    println!("max |Im(B Bᵀ)| = {:.2e}", back.map(|z| z.im).amax());
    Ok(())
}
