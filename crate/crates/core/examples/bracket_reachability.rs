//! Lie brackets, weak-bracket ranks and the accessible set of switched
//! affine sinks.

use nalgebra::{DMatrix, Matrix2, Vector2};
use switchlab::bracket::{gamma_estimate, lie_bracket, spread_seeds, weak_bracket_rank};
use switchlab::geometry::{FieldSpec, IntegratorOpts, Space};
use switchlab::pdmp::{Characteristics, Rates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Matrix2::new(-1.0, 0.0, 0.0, -2.0);
    let fields = vec![FieldSpec::affine_2d(a, [0.8, 0.8]), FieldSpec::affine_2d(a, [0.2, 0.2])];
    let x = Vector2::new(0.5, 0.5);
    println!("[F0, F1](0.5, 0.5) = {:?}", lie_bracket(&fields[0], &fields[1], &x));
    for n in 0..2 {
        let r = weak_bracket_rank(&fields, n, &x)?;
        println!("generation {n}: rank {} via {:?}", r.rank, r.witness);
    }

    let ch = Characteristics::new(
        Space::TrappingBox {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        },
        fields,
        Rates::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        None,
        IntegratorOpts::with_step(1e-2),
        true,
    )?;
    let g = gamma_estimate(&ch, &spread_seeds(&ch, 3), 32, 0.1, 10_000)?;
    println!(
        "Γ on a 32x32 grid: {} cells, {} component(s), {} seeds",
        g.mask.count(),
        g.components,
        g.per_seed.len()
    );
    Ok(())
}
