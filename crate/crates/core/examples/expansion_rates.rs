//! Expansion rates, expansion-volume rates and a Lyapunov spectrum for the
//! countercampbell time-one map and a linear torus map.

use nalgebra::Matrix2;
use switchlab::ergodic::{expansion_profile, lyapunov_spectrum};
use switchlab::geometry::{flow_map_as_function, FieldSpec, IntegratorOpts, MapHandle, Point, Space};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cc = flow_map_as_function(
        &Space::Torus1,
        &FieldSpec::CounterCampbell { alpha: 2.0 },
        1.0,
        &IntegratorOpts::default(),
    )?;
    let p = expansion_profile(&cc, 512, 30)?;
    println!("countercampbell: rate {:.5}", p.rate().value);
    for k in 0..3 {
        println!("  EV_{k} = {:.5} (expected {:.5})", p.volume_rate(k).value, -(k as f64 + 1.0) * 2f64.ln());
    }

    let cat = MapHandle::Linear {
        space: Space::Torus2,
        m: Matrix2::new(2.0, 1.0, 1.0, 1.0),
    };
    let l = lyapunov_spectrum(&cat, &Point::d2(0.1, 0.7), 2000, 100, 1e-6)?;
    println!("cat map Lyapunov exponents {:.6?}, mean log J {:.2e}", l.exponents, l.mean_log_jacobian);
    Ok(())
}
