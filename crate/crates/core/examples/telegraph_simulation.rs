//! Monte Carlo invariant measure of a telegraph process against its exact
//! transport solution, with the three estimators side by side.

use nalgebra::DMatrix;
use switchlab::geometry::{FieldSpec, IntegratorOpts, Space};
use switchlab::pdmp::{
    invariant_measure_mc, l1, Characteristics, Estimator, HistGrid, McOpts, Rates, TransportSolution,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate = 1.5;
    let ch = Characteristics::new(
        Space::TrappingBox {
            lower: vec![-0.05],
            upper: vec![1.05],
        },
        vec![FieldSpec::affine_1d(-1.0, 0.0), FieldSpec::affine_1d(-1.0, 1.0)],
        Rates::Constant(DMatrix::from_row_slice(2, 2, &[0.0, rate, rate, 0.0])),
        None,
        IntegratorOpts::with_step(1e-2),
        true,
    )?;
    let sol = TransportSolution::solve(&ch)?;
    println!(
        "support {:?}, endpoint exponents {:?}, first singular order {:?}",
        sol.support,
        sol.endpoint_exponents,
        sol.first_singular_order()
    );
    let grid = HistGrid::new(1, [0.0, 0.0], [1.0, 1.0], 64, false)?;
    let exact = sol.bin_masses(&grid)?;
    for est in [Estimator::Continuous, Estimator::EmbeddedK, Estimator::Embedded] {
        let r = invariant_measure_mc(&ch, &McOpts::new(500_000, grid.clone(), est, 1))?;
        let d: f64 = (0..2).map(|i| l1(&r.acc.masses(i), &exact[i])).sum();
        println!("{est:?}: L1 to transport solution {d:.4}, split-half {:.4}", r.split_half_l1);
    }
    Ok(())
}
