//! Effect of the node ← supermode arrangement and of the orthogonal
//! factor `A` on the nullifiers.

use nalgebra::DMatrix;
use oam_cluster::cluster::{build_cluster, random_orthogonal, Arrangement, ClusterGraph};
use oam_cluster::langevin::{Regime, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> oam_cluster::Result<()> {
    let mu = 0.5;
    let params = SystemParams::new(1.0, mu, Regime::Sqrt2.xi_for(mu))?;
    let path = ClusterGraph::path(4);
    let identity = DMatrix::identity(4, 4);

    let swapped = Arrangement(
        ["S4", "S3", "S2", "S5"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for arrangement in [Arrangement::default(), swapped] {
        let state = build_cluster(&params, &arrangement, &path, &identity)?;
        println!("{:?}: pair sums {:.5?}", arrangement.0, state.vlf.pair_sums);
    }

    // Any orthogonal A keeps the nullifiers on squeezed quadratures only,
    // but with unequal squeezing it redistributes the variances.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let a = random_orthogonal(4, &mut rng);
        let state = build_cluster(&params, &Arrangement::default(), &path, &a)?;
        println!(
            "random A: variances {:.5?}, weight on anti-squeezed quadratures {:.1e}",
            state.nullifiers.variances,
            state.nullifiers.anti_squeezed_weight(&state.inputs)
        );
    }
    Ok(())
}
