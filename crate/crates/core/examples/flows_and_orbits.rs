//! Time-t flows with Liouville Jacobians, then periodic orbits of the sine
//! shear and their Floquet exponents.

use switchlab::ergodic::{ergplan_check, find_periodic_orbits, OrbitCandidate, OrbitOpts};
use switchlab::geometry::{flow, FieldSpec, IntegratorOpts, Point, Space};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shear = FieldSpec::ShearSin { c: 1.0, s: 0.1 };
    let opts = IntegratorOpts::with_step(1e-3);
    let r = flow(&Space::Torus2, &shear, &Point::d2(0.3, 0.2), 1.0, &opts)?;
    println!("Φ¹(0.3, 0.2) = {:?}, log J = {:.6}", r.endpoint.coords(), r.log_jacobian);

    let candidates = [OrbitCandidate::new(&[0.0, 0.0], 0), OrbitCandidate::new(&[0.0, 0.5], 0)];
    let orbit_opts = OrbitOpts {
        integrator: opts,
        ..OrbitOpts::default()
    };
    for o in find_periodic_orbits(&Space::Torus2, &shear, &candidates, &orbit_opts)? {
        let c = ergplan_check(&Space::Torus2, &shear, &o, &opts)?;
        println!(
            "{:?} through {:?}: T = {:.4}, Floquet = {:.5?}, Liouville gap = {:.1e}",
            o.kind,
            o.anchor.coords(),
            o.period,
            o.floquet,
            c.difference
        );
    }
    Ok(())
}
