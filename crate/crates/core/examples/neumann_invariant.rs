//! Invariant vectors of sampled embedded chains from the Neumann series,
//! checked against an eigen-solver.

use switchlab::transfer::{eigen_invariant, neumann_invariant, random_chain};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for seed in 0..5 {
        let (p, pi, delta) = random_chain(seed, 5);
        let r = neumann_invariant(&p, &pi, &delta)?;
        let oracle = eigen_invariant(&p)?;
        println!(
            "seed {seed}: {} terms, residual {:.1e}, gap to eigenvector {:.1e}",
            r.terms,
            r.residual,
            (&r.vector - &oracle).abs().sum()
        );
    }
    Ok(())
}
