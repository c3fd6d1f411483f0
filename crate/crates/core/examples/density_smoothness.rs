//! Smoothness ladders, blow-up detection and support masks on a sampled
//! two-sink affine system.

use nalgebra::{DMatrix, Matrix2};
use switchlab::density::{
    blowup_at, estimate_density, smoothness_probe, support_estimate, Region, VerdictThresholds,
};
use switchlab::geometry::{FieldSpec, IntegratorOpts, Point, Space};
use switchlab::pdmp::{invariant_measure_mc, Characteristics, Estimator, HistGrid, McOpts, Rates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Matrix2::new(-1.0, 0.0, 0.0, -2.0);
    let ch = Characteristics::new(
        Space::TrappingBox {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        },
        vec![FieldSpec::affine_2d(a, [0.8, 0.8]), FieldSpec::affine_2d(a, [0.2, 0.2])],
        Rates::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        None,
        IntegratorOpts::with_step(1e-2),
        true,
    )?;
    let grid = HistGrid::for_space(&ch.space, 128);
    let mc = invariant_measure_mc(&ch, &McOpts::new(500_000, grid, Estimator::Continuous, 7))?;
    let d = estimate_density(&mc.acc, &[16, 32, 64, 128], "affine")?
        .with_halves(&mc.halves[0], &mc.halves[1])?;

    for (mode, p) in [(0, Point::d2(0.8, 0.8)), (1, Point::d2(0.2, 0.2))] {
        let b = blowup_at(&d, &p, mode)?;
        println!("mode {mode} at {:?}: ratios {:.3?}, flagged {}", p.coords(), b.ratios, b.flagged);
    }
    let r = smoothness_probe(&d, 0, &Region::anchored(&[0.5, 0.5]), &VerdictThresholds::default())?;
    println!("k = 0 near the center: sups {:.3?} -> {:?}", r.sups, r.verdict);

    let coarse = estimate_density(&mc.acc, &[16, 32, 64], "affine")?;
    let s = support_estimate(&coarse, 1e-9)?;
    println!(
        "support cells per mode {:?}, largest symmetric difference {:.4}",
        s.masks.iter().map(|m| m.count()).collect::<Vec<_>>(),
        s.max_symmetric_difference
    );
    Ok(())
}
