//! Planar matching through a one-dimensional embedding, against the exact
//! planar optimum. `LineCost::Planar` keeps the embedded order but scores
//! pairs by their plane distance.

use linenet::embed::{clustered_instance, collinear_instance, match_via_embedding, EmbeddingConfig, LineCost};

fn main() -> linenet::Result<()> {
    let embedded = EmbeddingConfig::default();
    let planar = EmbeddingConfig { line_cost: LineCost::Planar, ..EmbeddingConfig::default() };
    for seed in 0..3 {
        let inst = clustered_instance(200, 400, 0.1, seed)?;
        let a = match_via_embedding(&inst, &embedded)?;
        let b = match_via_embedding(&inst, &planar)?;
        println!(
            "seed {seed}: OPT mean {:.4}; embedded line cost ratio {:.2}; plane cost ratio {:.2}; eigenvalue {:.1e}",
            a.opt_mean, a.ratio, b.ratio, a.embedded.embedding.eigenvalue
        );
    }
    let m = match_via_embedding(&collinear_instance(100, 1)?, &embedded)?;
    println!("collinear: ratio {:.12}", m.ratio);
    Ok(())
}
