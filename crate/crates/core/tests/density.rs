use nalgebra::{DMatrix, Vector2};
use proptest::prelude::*;
use rand::Rng;
use switchlab::density::*;
use switchlab::geometry::*;
use switchlab::pdmp::*;
use switchlab::rng::stream;

fn telegraph(r: f64) -> Characteristics {
    Characteristics::new(
        Space::TrappingBox {
            lower: vec![-0.05],
            upper: vec![1.05],
        },
        vec![FieldSpec::affine_1d(-1.0, 0.0), FieldSpec::affine_1d(-1.0, 1.0)],
        Rates::Constant(DMatrix::from_row_slice(2, 2, &[0.0, r, r, 0.0])),
        None,
        IntegratorOpts::with_step(1e-2),
        true,
    )
    .unwrap()
}

fn unit_grid(bins: usize) -> HistGrid {
    HistGrid::new(1, [0.0; 2], [1.0; 2], bins, false).unwrap()
}

/// Accumulator holding the exact transport bin masses.
fn exact_telegraph(r: f64, bins: usize) -> OccupationAccumulator {
    let sol = TransportSolution::solve(&telegraph(r)).unwrap();
    let grid = unit_grid(bins);
    let masses = sol.bin_masses(&grid).unwrap();
    let mut acc = OccupationAccumulator::new(grid.clone(), 2);
    for (i, m) in masses.iter().enumerate() {
        for (k, w) in m.iter().enumerate() {
            acc.deposit(i, &Vector2::new(grid.center(k)[0], 0.0), *w);
        }
    }
    acc
}

fn from_fn_1d(bins: usize, f: impl Fn(f64, f64) -> f64) -> OccupationAccumulator {
    let grid = unit_grid(bins);
    let mut acc = OccupationAccumulator::new(grid.clone(), 1);
    for k in 0..bins {
        let (a, b) = (k as f64 / bins as f64, (k + 1) as f64 / bins as f64);
        acc.deposit(0, &Vector2::new(grid.center(k)[0], 0.0), f(a, b));
    }
    acc
}

#[test]
fn uniform_is_one_everywhere() {
    let acc = from_fn_1d(64, |a, b| b - a);
    let d = estimate_density(&acc, &[16, 32, 64], "uniform").unwrap();
    for l in &d.levels {
        assert!(l.density[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
    for k in 0..=3 {
        let rep = smoothness_probe(&d, k, &Region::all(), &VerdictThresholds::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::BoundedStable, "k = {k}: {rep:?}");
    }
    let b = blowup_at(&d, &Point::d1(0.5), 0).unwrap();
    assert!(!b.flagged);
    assert!(b.exponent.abs() < 1e-9);
}

#[test]
fn ladder_and_input_errors() {
    let acc = from_fn_1d(64, |a, b| b - a);
    assert!(matches!(estimate_density(&acc, &[16, 48], "x"), Err(DensityError::BadLadder(_))));
    assert!(matches!(estimate_density(&acc, &[24, 48], "x"), Err(DensityError::BadLadder(_))));
    let empty = OccupationAccumulator::new(unit_grid(8), 1);
    assert_eq!(estimate_density(&empty, &[8], "x").unwrap_err(), DensityError::EmptyAccumulator);
    let d = estimate_density(&acc, &[16, 32, 64], "x").unwrap();
    assert!(matches!(
        smoothness_probe(&d, 4, &Region::all(), &VerdictThresholds::default()),
        Err(DensityError::OrderTooHigh(4))
    ));
    let outside = Region::boxed(&[2.0], &[3.0]);
    assert!(matches!(
        smoothness_probe(&d, 1, &outside, &VerdictThresholds::default()),
        Err(DensityError::RegionEmpty(16))
    ));
    assert!(matches!(support_estimate(&d, 0.0), Err(DensityError::BadThreshold(_))));
}

#[test]
fn exact_telegraph_ladders_follow_the_endpoint_exponent() {
    // Near x = 0 the density behaves like x^(r-1), so the k-th difference
    // quotient in the endpoint cell grows like 2^(k-r+1) per refinement.
    let th = VerdictThresholds::default();
    let end = Region::anchored(&[0.0]);
    for (r, first) in [(0.5, 0), (1.5, 1), (2.5, 2)] {
        let d = estimate_density(&exact_telegraph(r, 128), &[32, 64, 128], "telegraph").unwrap();
        for k in 0..=3 {
            let rep = smoothness_probe(&d, k, &end, &th).unwrap();
            let want = if k < first { Verdict::BoundedStable } else { Verdict::Diverging };
            assert_eq!(rep.verdict, want, "r = {r}, k = {k}: {:?}", rep.ratios);
        }
    }
    // x^2 is smooth; the O(h) corrections from (1-x)^3 need finer cells to settle.
    let d = estimate_density(&exact_telegraph(3.0, 256), &[64, 128, 256], "telegraph").unwrap();
    for k in 0..=2 {
        let rep = smoothness_probe(&d, k, &end, &th).unwrap();
        assert_eq!(rep.verdict, Verdict::BoundedStable, "r = 3, k = {k}: {:?}", rep.ratios);
    }
}

#[test]
fn sampled_telegraph_matches_transport_and_diverges_at_small_rate() {
    let r = 0.5;
    let ch = telegraph(r);
    let res = invariant_measure_mc(&ch, &McOpts::new(1_000_000, unit_grid(256), Estimator::Continuous, 4)).unwrap();
    let d = estimate_density(&res.acc, &[64, 128, 256], "telegraph")
        .unwrap()
        .with_halves(&res.halves[0], &res.halves[1])
        .unwrap();
    let want = TransportSolution::solve(&ch).unwrap().bin_masses(&unit_grid(256)).unwrap();
    let dist: f64 = (0..2).map(|i| l1(&res.acc.masses(i), &want[i])).sum();
    assert!(dist < 0.1, "L1 at 256 bins = {dist}");
    let rep = smoothness_probe(&d, 0, &Region::anchored(&[0.0]), &VerdictThresholds::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Diverging, "{}", rep.to_kv());
    assert!(rep.noise.is_some());
}

#[test]
fn blowup_separates_point_singularity_from_integrable_one() {
    // 1D x^(-1/2): cell-average ratio is sqrt(2) < 1.5, not flagged.
    let acc = from_fn_1d(256, |a, b| b.sqrt() - a.sqrt());
    let d = estimate_density(&acc, &[64, 128, 256], "sqrt").unwrap();
    let rep = blowup_at(&d, &Point::d1(0.0), 0).unwrap();
    assert!(!rep.flagged);
    assert!((rep.exponent - 0.5).abs() < 0.01, "{}", rep.to_kv());

    // 2D density ~ 1/|x - p|, whose cell average at p doubles per refinement.
    let bins = 128;
    let grid = HistGrid::new(2, [0.0; 2], [1.0; 2], bins, false).unwrap();
    let mut acc = OccupationAccumulator::new(grid.clone(), 1);
    let sub = 8;
    for idx in 0..grid.n_cells() {
        let c = grid.center(idx);
        let h = 1.0 / bins as f64;
        let mut m = 0.0;
        for a in 0..sub {
            for b in 0..sub {
                let x = c[0] - 0.5 * h + (a as f64 + 0.5) * h / sub as f64 - 0.5;
                let y = c[1] - 0.5 * h + (b as f64 + 0.5) * h / sub as f64 - 0.5;
                m += (h / sub as f64).powi(2) / (x * x + y * y).sqrt();
            }
        }
        acc.deposit(0, &Vector2::new(c[0], c[1]), m);
    }
    let d = estimate_density(&acc, &[32, 64, 128], "cone").unwrap();
    let rep = blowup_at(&d, &Point::d2(0.5, 0.5), 0).unwrap();
    assert!(rep.flagged, "{}", rep.to_kv());
    let off = blowup_at(&d, &Point::d2(0.1, 0.8), 0).unwrap();
    assert!(!off.flagged);
}

#[test]
fn transverse_torus_fields_fill_the_torus() {
    let ch = Characteristics::new(
        Space::Torus2,
        vec![FieldSpec::constant(&[1.0, 0.3]), FieldSpec::constant(&[-0.2, 1.0])],
        Rates::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        None,
        IntegratorOpts::with_step(0.05),
        true,
    )
    .unwrap();
    let grid = HistGrid::for_space(&ch.space, 32);
    let res = invariant_measure_mc(&ch, &McOpts::new(200_000, grid, Estimator::Continuous, 1)).unwrap();
    let d = estimate_density(&res.acc, &[8, 16, 32], "torus").unwrap();
    let s = support_estimate(&d, 1e-4).unwrap();
    for m in &s.masks {
        assert_eq!(m.count(), 32 * 32);
    }
    assert_eq!(s.max_symmetric_difference, 0.0);
}

#[test]
fn contracting_mode_concentrates_at_its_equilibrium() {
    let ch = Characteristics::new(
        Space::TrappingBox {
            lower: vec![0.0],
            upper: vec![1.0],
        },
        vec![FieldSpec::affine_1d(-1.0, 0.37)],
        Rates::Constant(DMatrix::zeros(1, 1)),
        Some(1.0),
        IntegratorOpts::with_step(0.05),
        true,
    )
    .unwrap();
    let mut opts = McOpts::new(20_000, HistGrid::for_space(&ch.space, 64), Estimator::Continuous, 3);
    opts.burn_in = 100;
    let res = invariant_measure_mc(&ch, &opts).unwrap();
    let d = estimate_density(&res.acc, &[64], "contract").unwrap();
    let mask = &support_estimate(&d, 1e-3).unwrap().masks[0];
    let on: Vec<usize> = (0..64).filter(|&i| mask.cells[i]).collect();
    assert!(!on.is_empty() && on.len() <= 2, "{on:?}");
    assert!(on.contains(&23));
}

#[test]
fn density_csv_lists_every_fine_cell_per_mode() {
    let acc = exact_telegraph(2.0, 32);
    let d = estimate_density(&acc, &[8, 16, 32], "telegraph").unwrap();
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mode,x0,rho_8,rho_16,rho_32"));
    assert_eq!(lines.count(), 64);
}

fn random_mask(seed: u64, bins: usize, periodic: bool, p: f64) -> BinMask {
    let mut rng = stream(seed, 0);
    let cells = (0..bins * bins).map(|_| rng.random::<f64>() < p).collect();
    BinMask::from_cells(2, bins, periodic, cells).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ladder_levels_carry_the_same_mass(seed in any::<u64>()) {
        let grid = HistGrid::new(2, [0.0; 2], [2.0, 1.0], 32, false).unwrap();
        let mut acc = OccupationAccumulator::new(grid, 2);
        let mut rng = stream(seed, 0);
        for _ in 0..500 {
            let x = Vector2::new(rng.random_range(0.0..2.0), rng.random_range(0.0..1.0));
            acc.deposit(rng.random_range(0..2), &x, rng.random::<f64>());
        }
        let d = estimate_density(&acc, &[4, 8, 16, 32], "p").unwrap();
        for l in &d.levels {
            for (got, want) in l.mode_masses().iter().zip(&d.mode_weights) {
                prop_assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mask_algebra(seed in any::<u64>(), periodic in any::<bool>(), p in 0.0f64..0.5) {
        let a = random_mask(seed, 12, periodic, p);
        let b = random_mask(seed ^ 0x9e37, 12, periodic, p);
        let grown = a.dilate(1);
        prop_assert_eq!(a.covered_by(&grown).unwrap(), 1.0);
        prop_assert!(grown.count() >= a.count());
        prop_assert!(grown.count() <= 9 * a.count());
        prop_assert_eq!(a.symmetric_difference(&a).unwrap(), 0.0);
        let ab = a.symmetric_difference(&b).unwrap();
        prop_assert!((ab - b.symmetric_difference(&a).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&ab));
    }
}
