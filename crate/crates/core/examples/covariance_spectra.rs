//! Zero-frequency spectra of the five-mode system: closed forms against a
//! generic linear solve, then the measurable (extracavity) values.

use oam_cluster::covariance::{basis_change, extracavity_spectrum, BasisTransform};
use oam_cluster::langevin::{
    build_system, zero_freq_covariance_closed, zero_freq_covariance_numeric, SystemParams,
};

fn main() -> oam_cluster::Result<()> {
    let params = SystemParams::new(1.0, 0.3, 0.2)?;
    let closed = zero_freq_covariance_closed(&params)?;
    let numeric = basis_change(
        &zero_freq_covariance_numeric(&build_system(&params))?,
        &BasisTransform::sum_diff(),
    )?;

    println!(
        "intracavity x-block, sum/difference basis {:?}",
        closed.ordering
    );
    println!("{:.6}", closed.x_block);
    println!(
        "max |closed − numeric| = {:.2e}",
        (closed.stacked() - numeric.stacked()).amax()
    );
    println!("y-block equals x-block with the 0–1, 1–2 and diff1–diff2 signs flipped:");
    println!("{:.6}", closed.y_block);

    let outside = extracavity_spectrum(&closed, params.gamma)?;
    println!("extracavity spectrum as JSON:\n{}", outside.to_json()?);
    Ok(())
}
