use nalgebra::{DMatrix, Matrix2, Vector2};
use proptest::prelude::*;
use switchlab::bracket::*;
use switchlab::geometry::*;
use switchlab::pdmp::*;

fn a_mat() -> Matrix2<f64> {
    Matrix2::new(-1.0, 0.0, 0.0, -2.0)
}

fn affine_pair() -> Vec<FieldSpec> {
    vec![
        FieldSpec::affine_2d(a_mat(), [0.8, 0.8]),
        FieldSpec::affine_2d(a_mat(), [0.2, 0.2]),
    ]
}

fn affine_ch() -> Characteristics {
    Characteristics::new(
        Space::TrappingBox {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        },
        affine_pair(),
        Rates::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        None,
        IntegratorOpts::with_step(1e-2),
        true,
    )
    .unwrap()
}

fn torus_pair() -> Vec<FieldSpec> {
    vec![FieldSpec::constant(&[0.0, 1.0]), FieldSpec::ShearSin { c: 1.0, s: 0.1 }]
}

#[test]
fn constant_fields_commute() {
    let f = FieldSpec::constant(&[1.0, 2.0]);
    let g = FieldSpec::constant(&[-0.5, 0.3]);
    assert_eq!(lie_bracket(&f, &g, &Vector2::new(0.3, 0.9)), Vector2::zeros());
}

#[test]
fn affine_bracket_is_constant() {
    // With F_d = Ax (anchor 0), [F_i, F_d] = DF_d·F_i − DF_i·F_d = −A²p_i.
    let p = [0.3, -0.7];
    let fi = FieldSpec::affine_2d(a_mat(), p);
    let fd = FieldSpec::affine_2d(a_mat(), [0.0, 0.0]);
    let want = -(a_mat() * a_mat()) * Vector2::new(p[0], p[1]);
    for x in [Vector2::new(0.1, 0.2), Vector2::new(-3.0, 5.0)] {
        let got = lie_bracket(&fi, &fd, &x);
        assert!((got - want).norm() < 1e-14);
    }
}

#[test]
fn shear_bracket_matches_hand_computation() {
    // F = (0, 1), G = (1, sin(2πy)) gives [F, G] = DG·F = (0, 2π cos(2πy)).
    let f = FieldSpec::constant(&[0.0, 1.0]);
    let g = FieldSpec::ShearSin { c: 1.0, s: -1.0 };
    for y in [0.0, 0.1, 0.37, 0.8] {
        let got = lie_bracket(&f, &g, &Vector2::new(0.4, y));
        let want = Vector2::new(0.0, 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * y).cos());
        assert!((got - want).norm() < 1e-12);
    }
}

#[test]
fn generated_brackets_use_consistent_jacobians() {
    // [F, [F, G]] = −A³(q − p) for F = A(x − p), G = A(x − q).
    let (p, q) = ([0.8, 0.8], [0.2, 0.2]);
    let f = BracketField::Base(0, FieldSpec::affine_2d(a_mat(), p));
    let g = BracketField::Base(1, FieldSpec::affine_2d(a_mat(), q));
    let fg = BracketField::Bracket(Box::new(f.clone()), Box::new(g));
    let ffg = BracketField::Bracket(Box::new(f), Box::new(fg.clone()));
    let d = Vector2::new(q[0] - p[0], q[1] - p[1]);
    let a = a_mat();
    let x = Vector2::new(0.31, 0.62);
    assert!((fg.value(&x) - a * a * d).norm() < 1e-12);
    assert!((ffg.value(&x) + a * a * a * d).norm() < 1e-8);
    assert_eq!(ffg.generation(), 2);
    assert_eq!(ffg.to_string(), "[F0,[F0,F1]]");
}

#[test]
fn transverse_torus_pair_has_rank_two_without_brackets() {
    let n = 128;
    for i in 0..n {
        for j in 0..n {
            let x = Vector2::new(i as f64 / n as f64, j as f64 / n as f64);
            assert_eq!(weak_bracket_rank(&torus_pair(), 0, &x).unwrap().rank, 2);
        }
    }
}

#[test]
fn affine_pair_needs_one_bracket_on_the_anchor_line() {
    let fam = BracketFamily::new(&affine_pair(), 1).unwrap();
    let n = 100;
    for i in 0..n {
        for j in 0..n {
            let x = Vector2::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
            let r = family_rank(&fam, &x);
            assert_eq!(r.rank, 2, "at {x:?}");
            assert_eq!(r.witness.len(), 2);
        }
    }
    // On the line through both anchors the fields are parallel.
    let on_line = Vector2::new(0.5, 0.5);
    let r0 = weak_bracket_rank(&affine_pair(), 0, &on_line).unwrap();
    assert_eq!(r0.rank, 1);
    let r1 = weak_bracket_rank(&affine_pair(), 1, &on_line).unwrap();
    assert!(r1.witness.iter().any(|w| w.starts_with('[')));
}

#[test]
fn single_field_has_rank_at_most_one() {
    let f = vec![FieldSpec::ShearSin { c: 0.3, s: 0.4 }];
    for n in 0..=3 {
        let r = weak_bracket_rank(&f, n, &Vector2::new(0.2, 0.7)).unwrap();
        assert!(r.rank <= 1);
    }
    assert!(matches!(
        weak_bracket_rank(&f, 4, &Vector2::zeros()),
        Err(BracketError::GenerationTooHigh(4))
    ));
}

#[test]
fn family_sizes_respect_the_growth_bound() {
    let fields = vec![
        FieldSpec::constant(&[0.0, 1.0]),
        FieldSpec::ShearSin { c: 1.0, s: 0.1 },
        FieldSpec::affine_2d(a_mat(), [0.5, 0.5]),
    ];
    let fam = BracketFamily::new(&fields, 3).unwrap();
    assert_eq!(fam.sizes[0], 3);
    for k in 1..fam.sizes.len() {
        assert!(fam.sizes[k] >= fam.sizes[k - 1]);
        assert!(fam.sizes[k] <= fam.sizes[k - 1] + fam.sizes[0] * fam.sizes[k - 1]);
    }
}

#[test]
fn irrational_direction_reaches_the_whole_torus() {
    let ch = Characteristics::new(
        Space::Torus2,
        vec![
            FieldSpec::constant(&[1.0, std::f64::consts::SQRT_2 - 1.0]),
            FieldSpec::ShearSin { c: 1.0, s: 0.1 },
        ],
        Rates::Constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        None,
        IntegratorOpts::with_step(1e-2),
        true,
    )
    .unwrap();
    let r = reachable_set(&ch, &Point::d2(0.1, 0.1), 32, 0.1, 1000).unwrap();
    assert!(!r.capped);
    assert_eq!(r.mask.count(), 32 * 32);
    assert!(r.history.windows(2).all(|w| w[0] <= w[1]));
    let g = gamma_estimate(&ch, &spread_seeds(&ch, 2), 32, 0.1, 1000).unwrap();
    assert_eq!(g.mask.count(), 32 * 32);
    assert!(g.connected);
}

#[test]
fn single_contracting_mode_reaches_a_tube() {
    let ch = Characteristics::new(
        Space::TrappingBox {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        },
        vec![FieldSpec::affine_2d(-Matrix2::identity(), [0.5, 0.5])],
        Rates::Constant(DMatrix::zeros(1, 1)),
        Some(1.0),
        IntegratorOpts::with_step(1e-2),
        true,
    )
    .unwrap();
    let res = 32;
    let r = reachable_set(&ch, &Point::d2(0.1, 0.2), res, 0.1, 1000).unwrap();
    let h = 1.0 / res as f64;
    // Straight ray from the seed to the anchor.
    let (a, b) = (Vector2::new(0.1, 0.2), Vector2::new(0.5, 0.5));
    for (idx, &on) in r.mask.cells.iter().enumerate() {
        if on {
            let c = r.grid.center(idx);
            let c = Vector2::new(c[0], c[1]);
            let t = ((c - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
            let dist = (c - (a + t * (b - a))).norm();
            assert!(dist < 2.0 * h, "cell {c:?} at distance {}h", dist / h);
        }
    }
    // The anchor sits on a cell corner; its closure cell is within one cell.
    assert!(r.mask.dilate(1).cells[r.grid.index(&b).unwrap()]);
    assert!(r.history.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn affine_gamma_is_connected_and_seed_robust() {
    let ch = affine_ch();
    let seeds = spread_seeds(&ch, 3);
    let g = gamma_estimate(&ch, &seeds, 48, 0.1, 10_000).unwrap();
    assert!(!g.empty && g.connected && !g.any_capped);
    for p in [Vector2::new(0.8, 0.8), Vector2::new(0.2, 0.2), Vector2::new(0.5, 0.5)] {
        assert!(g.mask.cells[g.per_seed[0].grid.index(&p).unwrap()]);
    }
    // A corner far from the lens between the anchors is not accessible.
    assert!(!g.mask.cells[g.per_seed[0].grid.index(&Vector2::new(0.95, 0.05)).unwrap()]);
    // Intersections shrink as seeds are added.
    let mut prev = usize::MAX;
    for k in 1..=seeds.len() {
        let mut m = g.per_seed[0].mask.clone();
        for r in &g.per_seed[1..k] {
            for (a, b) in m.cells.iter_mut().zip(&r.mask.cells) {
                *a &= *b;
            }
        }
        assert!(m.count() <= prev);
        prev = m.count();
    }
}

#[test]
fn disjoint_sinks_give_an_empty_intersection() {
    // -(x - 0.1)(x - 0.5)(x - 0.9): sinks at 0.1 and 0.9.
    let ch = Characteristics::new(
        Space::TrappingBox {
            lower: vec![0.0],
            upper: vec![1.0],
        },
        vec![FieldSpec::Circle1D(Profile::Poly(vec![0.045, -0.59, 1.5, -1.0]))],
        Rates::Constant(DMatrix::zeros(1, 1)),
        Some(1.0),
        IntegratorOpts::with_step(1e-2),
        true,
    )
    .unwrap();
    let g = gamma_estimate(&ch, &spread_seeds(&ch, 4), 64, 0.1, 10_000).unwrap();
    assert!(g.empty);
    assert_eq!(g.components, 0);
}

#[test]
fn mask_csv_is_row_col_flag() {
    let ch = affine_ch();
    let r = reachable_set(&ch, &Point::d2(0.5, 0.5), 8, 0.1, 100).unwrap();
    let mut buf = Vec::new();
    r.mask.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("i,j,inside\n"));
    assert_eq!(text.lines().count(), 65);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_ignores_field_order(x in 0.0f64..1.0, y in 0.0f64..1.0, n in 0usize..=2, rot in 0usize..3) {
        let mut fields = vec![
            FieldSpec::affine_2d(a_mat(), [0.8, 0.8]),
            FieldSpec::constant(&[0.0, 0.0]),
            FieldSpec::affine_2d(a_mat(), [0.2, 0.2]),
        ];
        let p = Vector2::new(x, y);
        let base = weak_bracket_rank(&fields, n, &p).unwrap().rank;
        fields.rotate_left(rot);
        prop_assert_eq!(weak_bracket_rank(&fields, n, &p).unwrap().rank, base);
        fields.reverse();
        prop_assert_eq!(weak_bracket_rank(&fields, n, &p).unwrap().rank, base);
    }
}
