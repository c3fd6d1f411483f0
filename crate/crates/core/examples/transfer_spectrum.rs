//! Transfer-operator spectral radii on C^k for circle maps, and the
//! exponential-time average of a flow transfer operator.

use switchlab::geometry::{flow_map_as_function, FieldSpec, IntegratorOpts, MapHandle, Space};
use switchlab::transfer::{
    ck_seminorm, spectral_radius, transfer_exp_average, CircleMapModel, GridFunction, QuadOpts,
    SpectralOpts,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let opts = SpectralOpts {
        n: 2048,
        n_iter: 40,
        ..SpectralOpts::default()
    };
    let doubling = CircleMapModel::new(MapHandle::Expanding { m: 2 })?;
    let cc = CircleMapModel::new(flow_map_as_function(
        &Space::Torus1,
        &FieldSpec::CounterCampbell { alpha: 2.0 },
        1.0,
        &IntegratorOpts::default(),
    )?)?;
    for (name, model) in [("doubling", &doubling), ("countercampbell", &cc)] {
        for k in 0..3 {
            let e = spectral_radius(model, k, &opts)?;
            println!("{name}: k = {k}, radius {:.4} over iterations {:?}", e.radius, e.window);
        }
    }

    let rho = GridFunction::from_fn(256, |x| 1.0 + 0.5 * (std::f64::consts::TAU * x).cos())?;
    let avg = transfer_exp_average(&Space::Torus1, &FieldSpec::circle_speed(0.7), 2.0, &rho, &QuadOpts::default())?;
    println!(
        "exp-averaged translate: mass {:.8} -> {:.8}, C^1 seminorm {:.4} -> {:.4}",
        rho.integral(),
        avg.integral(),
        ck_seminorm(&rho, 1)?,
        ck_seminorm(&avg, 1)?
    );
    Ok(())
}
