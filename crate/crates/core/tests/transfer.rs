use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, RowDVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use switchlab::ergodic::expansion_profile;
use switchlab::geometry::*;
use switchlab::transfer::*;

fn sin_grid(n: usize) -> GridFunction {
    GridFunction::from_fn(n, |x| (2.0 * PI * x).sin()).unwrap()
}

fn countercampbell(alpha: f64) -> MapHandle {
    flow_map_as_function(
        &Space::Torus1,
        &FieldSpec::CounterCampbell { alpha },
        1.0,
        &IntegratorOpts::default(),
    )
    .unwrap()
}

fn wavy_flow() -> MapHandle {
    flow_map_as_function(
        &Space::Torus1,
        &FieldSpec::Circle1D(Profile::Sine {
            offset: 1.0,
            amp: 0.5,
            freq: 1.0,
            phase: 0.0,
        }),
        0.7,
        &IntegratorOpts::with_step(1e-2),
    )
    .unwrap()
}

#[test]
fn grid_size_is_validated() {
    assert!(GridFunction::constant(8, 1.0).is_err());
    assert!(GridFunction::constant(48, 1.0).is_err());
    assert!(GridFunction::constant(64, 1.0).is_ok());
}

#[test]
fn seminorm_examples() {
    let c = GridFunction::constant(64, -3.0).unwrap();
    for k in 0..3 {
        assert_abs_diff_eq!(ck_seminorm(&c, k).unwrap(), 3.0, epsilon = 1e-12);
    }
    let s = sin_grid(1024);
    assert!((ck_seminorm(&s, 1).unwrap() - (1.0 + 2.0 * PI)).abs() < 1e-3);
    assert!((ck_seminorm(&s, 2).unwrap() - (1.0 + 2.0 * PI + 4.0 * PI * PI)).abs() < 1e-2);
    assert!(ck_seminorm(&GridFunction::constant(64, 1.0).unwrap(), 3).is_err());
}

#[test]
fn spline_reproduces_trig_polynomials() {
    let s = sin_grid(256).spline();
    for j in 0..100 {
        let x = j as f64 * 0.01234;
        assert!((s.eval(x) - (2.0 * PI * x).sin()).abs() < 1e-8);
    }
}

#[test]
fn transfer_examples() {
    let rho = sin_grid(256);
    let id = CircleMapModel::new(MapHandle::Identity {
        space: Space::Torus1,
    })
    .unwrap();
    let out = apply_transfer(&id, &rho).unwrap();
    assert!(out.values().iter().zip(rho.values()).all(|(a, b)| (a - b).abs() < 1e-12));

    let dbl = CircleMapModel::new(MapHandle::Expanding { m: 2 }).unwrap();
    assert_eq!(dbl.degree(), 2);
    let one = GridFunction::constant(256, 1.0).unwrap();
    let out = apply_transfer(&dbl, &one).unwrap();
    assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-14));

    let theta = 0.3;
    let rot = CircleMapModel::new(MapHandle::Rotation { theta }).unwrap();
    let out = apply_transfer(&rot, &rho).unwrap();
    for (j, v) in out.values().iter().enumerate() {
        let x = j as f64 / 256.0;
        assert!((v - (2.0 * PI * (x - theta)).sin()).abs() < 1e-7);
    }
}

#[test]
fn flow_transfer_examples() {
    let o = IntegratorOpts::with_step(1e-2);
    let rho = sin_grid(128);
    let f = FieldSpec::circle_speed(0.7);
    let out = apply_transfer_flow(&Space::Torus1, &f, 0.0, &rho, &o).unwrap();
    assert_eq!(out, rho);
    let t = 0.4;
    let out = apply_transfer_flow(&Space::Torus1, &f, t, &rho, &o).unwrap();
    for (j, v) in out.values().iter().enumerate() {
        let x = j as f64 / 128.0;
        assert!((v - (2.0 * PI * (x - 0.7 * t)).sin()).abs() < 1e-6);
    }
    let space = Space::TrappingBox {
        lower: vec![-1.0],
        upper: vec![1.0],
    };
    let one = GridFunction::constant(128, 1.0).unwrap();
    let t = 0.5;
    let out = apply_transfer_flow(&space, &FieldSpec::affine_1d(-1.0, 0.0), t, &one, &o).unwrap();
    for (j, v) in out.values().iter().enumerate() {
        let x = -1.0 + 2.0 * j as f64 / 128.0;
        if x.abs() * t.exp() < 0.999 {
            assert!((v - t.exp()).abs() < 1e-9, "x={x}: {v}");
        } else if x.abs() * t.exp() > 1.001 {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn exp_average_examples() {
    let q = QuadOpts {
        integrator: IntegratorOpts::with_step(1e-2),
        ..Default::default()
    };
    let rho = sin_grid(128);
    let zero = FieldSpec::circle_speed(0.0);
    let out = transfer_exp_average(&Space::Torus1, &zero, 2.0, &rho, &q).unwrap();
    assert!(out.values().iter().zip(rho.values()).all(|(a, b)| (a - b).abs() < 1e-12));

    // ∫ α e^{-αt} sin(2π(x - ct)) dt = Im[e^{2πix} α / (α + 2πic)].
    let (alpha, c) = (1.5, 0.8);
    let shifted = GridFunction::from_fn(128, |x| 1.5 + (2.0 * PI * x).sin()).unwrap();
    let out =
        transfer_exp_average(&Space::Torus1, &FieldSpec::circle_speed(c), alpha, &shifted, &q)
            .unwrap();
    assert!((out.integral() - shifted.integral()).abs() < 1e-6);
    let w = 2.0 * PI * c;
    let den = alpha * alpha + w * w;
    for (j, v) in out.values().iter().enumerate() {
        let x = 2.0 * PI * j as f64 / 128.0;
        let want = 1.5 + alpha * (alpha * x.sin() - w * x.cos()) / den;
        assert!((v - want).abs() < 1e-6, "{v} vs {want}");
    }
}

#[test]
fn slow_switching_affine_average_roughens() {
    // Contraction toward 0 at rate 1 averaged over Exp(α) times with α < 1:
    // the averaged operator concentrates mass faster than it spreads.
    let space = Space::TrappingBox {
        lower: vec![-1.0],
        upper: vec![1.0],
    };
    let q = QuadOpts {
        integrator: IntegratorOpts::with_step(5e-3),
        ..Default::default()
    };
    let f = FieldSpec::affine_1d(-1.0, 0.0);
    let mut rho = GridFunction::from_fn(256, |x| 1.0 + 0.5 * (2.0 * PI * x).cos()).unwrap();
    let mut norms = vec![ck_seminorm(&rho, 1).unwrap()];
    for _ in 0..3 {
        rho = transfer_exp_average(&space, &f, 0.5, &rho, &q).unwrap();
        norms.push(ck_seminorm(&rho, 1).unwrap());
    }
    assert!(norms.windows(2).all(|w| w[1] > w[0]), "{norms:?}");
}

#[test]
fn spectral_radius_examples() {
    let opts = SpectralOpts {
        n: 512,
        n_iter: 30,
        ..Default::default()
    };
    let dbl = CircleMapModel::new(MapHandle::Expanding { m: 2 }).unwrap();
    let e = spectral_radius(&dbl, 0, &opts).unwrap();
    assert!((e.radius - 1.0).abs() < 0.05);
    assert!(e.window.1 - e.window.0 >= MIN_WINDOW);
    let rot = CircleMapModel::new(MapHandle::Rotation { theta: 0.2 }).unwrap();
    for k in 0..3 {
        let e = spectral_radius(&rot, k, &opts).unwrap();
        assert!((e.radius - 1.0).abs() < 0.02, "k={k}: {}", e.radius);
    }
    assert!(spectral_radius(&rot, 0, &SpectralOpts { n_iter: 10, ..opts }).is_err());
    assert!(spectral_radius(&rot, 0, &SpectralOpts { n_probes: 2, ..opts }).is_err());
}

#[test]
fn degree_one_maps_have_radius_at_least_one_and_obey_the_upper_bound() {
    let opts = SpectralOpts {
        n: 1024,
        n_iter: 30,
        ..Default::default()
    };
    for map in [countercampbell(2.0), countercampbell(1.5), wavy_flow()] {
        let model = CircleMapModel::new(map.clone()).unwrap();
        assert_eq!(model.degree(), 1);
        let prof = expansion_profile(&map, 512, 30).unwrap();
        for k in 0..3 {
            let r = spectral_radius(&model, k, &opts).unwrap().radius;
            assert!(r >= 0.95, "radius {r}");
            let bound = (0..=k as u32)
                .map(|j| (-prof.volume_rate(j).value).exp())
                .fold(0.0, f64::max);
            assert!(r <= model.degree() as f64 * bound * 1.15, "{r} > {bound}");
        }
    }
}

#[test]
fn neumann_examples() {
    let pi = RowDVector::from_row_slice(&[0.3, 0.2]);
    let delta = DMatrix::identity(2, 2) * 0.5;
    let p = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.3, 0.7]);
    let r = neumann_invariant(&p, &pi, &delta).unwrap();
    assert_abs_diff_eq!(r.vector[0], 0.6, epsilon = 1e-14);
    assert_abs_diff_eq!(r.vector[1], 0.4, epsilon = 1e-14);
    assert!(r.residual <= 1e-12);

    let pi = RowDVector::from_row_slice(&[0.25, 0.75]);
    let p = DMatrix::from_row_slice(2, 2, &[0.25, 0.75, 0.25, 0.75]);
    let r = neumann_invariant(&p, &pi, &DMatrix::zeros(2, 2)).unwrap();
    assert_eq!(r.vector, pi);

    let bad = DMatrix::identity(2, 2);
    assert!(matches!(
        neumann_invariant(&p, &pi, &bad),
        Err(TransferError::NotSubstochastic { .. })
    ));
}

/// A random chain `P = 1·π + Δ` whose rows all sum to one.
pub fn random_instance(seed: u64, n: usize) -> (DMatrix<f64>, RowDVector<f64>, DMatrix<f64>) {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mass: f64 = r.random_range(0.05..0.95);
    let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    let pi = RowDVector::from_iterator(n, raw.iter().map(|v| mass * v / s));
    let mut delta = DMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let s: f64 = row.iter().sum();
        for j in 0..n {
            delta[(i, j)] = (1.0 - mass) * row[j] / s;
        }
    }
    let ones = nalgebra::DVector::from_element(n, 1.0);
    (&ones * &pi + &delta, pi, delta)
}

/// Null vector of `Pᵀ − I` from the SVD, normalized to a probability vector.
pub fn eigen_oracle(p: &DMatrix<f64>) -> RowDVector<f64> {
    let n = p.nrows();
    let a = p.transpose() - DMatrix::identity(n, n);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let v = v_t.row(imin).into_owned();
    let s = v.sum();
    v / s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn neumann_matches_eigen_oracle(seed in 0u64..10_000) {
        let (p, pi, delta) = random_instance(seed, 5);
        let r = neumann_invariant(&p, &pi, &delta).unwrap();
        prop_assert!(r.residual <= 1e-12);
        let o = eigen_oracle(&p);
        prop_assert!((r.vector - o).abs().max() <= 1e-10);
    }

    #[test]
    fn mass_and_positivity(coefs in prop::collection::vec(-1.0f64..1.0, 6), which in 0usize..4) {
        let map = match which {
            0 => MapHandle::Expanding { m: 2 },
            1 => MapHandle::Rotation { theta: 0.37 },
            2 => MapHandle::Expanding { m: 3 },
            _ => wavy_flow(),
        };
        let model = CircleMapModel::new(map).unwrap();
        let rho = GridFunction::from_fn(512, |x| {
            let s: f64 = coefs.iter().enumerate()
                .map(|(m, c)| c * (2.0 * PI * (m + 1) as f64 * x + m as f64).sin() / (m + 1) as f64)
                .sum();
            4.0 + s
        }).unwrap();
        let out = apply_transfer(&model, &rho).unwrap();
        prop_assert!((out.integral() - rho.integral()).abs() <= 1e-8);
        prop_assert!(out.values().iter().all(|v| *v >= -1e-12));
    }
}
