use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use qwalk::resolvent::{node_floor, parseval_check, solve_resolvent, TruncatedResolventProblem};
use qwalk::substitution::{apply_substitution, is_legal_factor, sequence_window};
use qwalk::transfer::{
    check_commutation_identity, one_step_matrix, operator_norm, product, uniform_bound_scan, verify_eigenrecursion,
};
use qwalk::walk::{apply_walk, moment, DEFAULT_TAIL_TOL};
use qwalk::{
    CoinAngles, CoinBank, CoinSequence, Mat2, SpectralParameter, SubstitutionRule, WalkModel, WalkState, Word, C64,
};

fn angle() -> impl Strategy<Value = f64> {
    0.01..FRAC_PI_2 - 0.01
}

fn angles() -> impl Strategy<Value = CoinAngles> {
    (angle(), angle()).prop_map(|(t, p)| CoinAngles::new(t, p).unwrap())
}

fn spectral() -> impl Strategy<Value = SpectralParameter> {
    (0.0..2.0 * PI, -0.5..0.5f64).prop_map(|(tau, eta)| SpectralParameter::from_phase(tau, eta).unwrap())
}

fn unit_state(len: usize) -> impl Strategy<Value = WalkState> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2 * len).prop_filter_map("zero vector", move |v| {
        let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        if norm < 1e-3 {
            return None;
        }
        let c: Vec<C64> = v.iter().map(|&(a, b)| C64::new(a, b) / norm).collect();
        let plus = c[..len].to_vec();
        let minus = c[len..].to_vec();
        Some(WalkState::new(-(len as i64 / 2), plus, minus).unwrap())
    })
}

fn tm_prefix(len: usize) -> Vec<u8> {
    SubstitutionRule::thue_morse().fixed_point_prefix(len).unwrap().symbols()[..len].to_vec()
}

#[test]
fn prefix_tower_and_length_law() {
    let tm = SubstitutionRule::thue_morse();
    let mut prev = tm.iterate(0, 0).unwrap();
    for n in 1..=21 {
        let w = tm.iterate(0, n).unwrap();
        assert_eq!(w.len(), 1 << n);
        assert!(prev.is_prefix_of(&w));
        prev = w;
    }
}

#[test]
fn fixed_point_is_invariant() {
    let tm = SubstitutionRule::thue_morse();
    for n in [1usize, 5, 64, 1000, 4096] {
        let image = apply_substitution(&tm, &tm.fixed_point_prefix(n).unwrap());
        assert!(image.is_prefix_of(&tm.fixed_point_prefix(2 * n).unwrap()));
    }
}

#[test]
fn four_block_decomposition() {
    let w = tm_prefix(1 << 14);
    for block in w.chunks(4) {
        assert!(block == [0, 1, 1, 0] || block == [1, 0, 0, 1], "{block:?}");
    }
}

#[test]
fn no_short_cubes() {
    let w = tm_prefix(1 << 14);
    for period in 1..=8 {
        for start in 0..=w.len() - 3 * period {
            let a = &w[start..start + period];
            let cube = a == &w[start + period..start + 2 * period] && a == &w[start + 2 * period..start + 3 * period];
            assert!(!cube, "cube of period {period} at {start}");
        }
    }
}

#[test]
fn legality_matches_brute_force_search() {
    // every word of length ≤ 6 against a direct scan of a 4096 prefix
    let w = tm_prefix(4096);
    for len in 1..=6 {
        for bits in 0..1u32 << len {
            let word: Vec<u8> = (0..len).map(|k| ((bits >> k) & 1) as u8).collect();
            let found = w.windows(len).any(|f| f == word.as_slice());
            assert_eq!(is_legal_factor(&Word::new(word.clone()).unwrap()), found, "{word:?}");
        }
    }
}

#[test]
fn commutation_identity_on_full_grid() {
    for i in 0..20 {
        for j in 0..20 {
            let t = FRAC_PI_2 * (i as f64 + 0.5) / 20.0;
            let p = FRAC_PI_2 * (j as f64 + 0.5) / 20.0;
            let r = check_commutation_identity(&CoinAngles::new(t, p).unwrap()).unwrap();
            assert!(r.max() <= 1e-12, "({t}, {p}): {}", r.max());
        }
    }
}

#[test]
fn uniform_bound_plateaus() {
    let offsets = [0, 1, 2, 3, 5, 8, 13, 21];
    for (t, p) in [(PI / 3.0, PI / 5.0), (0.3, 0.6), (PI / 4.0, PI / 4.0), (0.1, 1.4), (1.2, 0.7)] {
        let a = CoinAngles::new(t, p).unwrap();
        let base = uniform_bound_scan(&a, 8, &offsets).unwrap();
        for span in [64, 512] {
            let v = uniform_bound_scan(&a, span, &offsets).unwrap();
            assert!((v - base).abs() <= 1e-9, "({t}, {p}) span {span}: {v} vs {base}");
        }
    }
}

#[test]
fn determinant_of_random_one_step_matrices() {
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(10_000));
    runner
        .run(&(0.05..FRAC_PI_2 - 0.05, spectral()), |(a, z)| {
            let m = one_step_matrix(a, &z).unwrap();
            prop_assert!((m.det() - C64::from(1.0)).norm() <= 1e-12);
            prop_assert!(operator_norm(&m) >= 1.0 - 1e-12);
            Ok(())
        })
        .unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_cocycle(a in angles(), z in spectral(), j in 0usize..500, n in 0i64..256, m in 0i64..256, k in 0i64..256) {
        let x = sequence_window(j, 0, 256).unwrap();
        let (left, right) = (product(&x, n, m, &a, &z).unwrap().0, product(&x, m, k, &a, &z).unwrap().0);
        let lhs = left * right;
        let rhs = product(&x, n, k, &a, &z).unwrap().0;
        // rounding in the product is relative to ‖A‖‖B‖, not ‖AB‖
        let scale = left.operator_norm() * right.operator_norm();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * scale, "{}", lhs.max_abs_diff(&rhs));
    }

    #[test]
    fn singular_value_duality(a in angles(), z in spectral(), j in 0usize..500, span in 1i64..40,
                              dirs in prop::collection::vec((0.0..PI, 0.0..2.0 * PI, 0.0..2.0 * PI), 100)) {
        let x = sequence_window(j, 0, span).unwrap();
        let t = product(&x, span, 0, &a, &z).unwrap();
        let norm = operator_norm(&t);
        for (th, p1, p2) in dirs {
            let v = [C64::from_polar(th.cos(), p1), C64::from_polar(th.sin(), p2)];
            let tv = t.0.apply(v);
            let len = (tv[0].norm_sqr() + tv[1].norm_sqr()).sqrt();
            prop_assert!(len >= (1.0 - 1e-9) / norm);
        }
    }

    #[test]
    fn walk_step_is_unitary(a in angles(), psi in unit_state(9), j in 0usize..100) {
        let coins = qwalk::walk::build_coins(&CoinSequence::ThueMorse.window(j, -6, 6).unwrap(), &a);
        prop_assert!(coins.max_unitarity_defect() <= 1e-12);
        let out = apply_walk(&psi, &coins).unwrap();
        prop_assert!((out.norm() - psi.norm()).abs() <= 1e-12);
    }

    #[test]
    fn light_cone_and_normalization(a in angles(), j in 0usize..1000, l_max in 0usize..60) {
        let model = WalkModel::thue_morse(a, j);
        for profile in model.profiles(l_max).unwrap() {
            prop_assert!((profile.total_mass() - 1.0).abs() <= 1e-12);
            for (n, _, _, w) in profile.rows() {
                if n.unsigned_abs() as usize > profile.time {
                    prop_assert_eq!(w, 0.0);
                }
            }
        }
    }

    #[test]
    fn moments_are_jensen_monotone(a in angles(), j in 0usize..100, scale in 2.0..30.0f64) {
        let avg = WalkModel::thue_morse(a, j).time_averaged(scale, DEFAULT_TAIL_TOL).unwrap();
        prop_assert!((avg.total_mass() - 1.0).abs() <= avg.tail_bound + 1e-10);
        let v: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|&p| moment(&avg, p).ln() / p).collect();
        for w in v.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10);
        }
    }

    #[test]
    fn resolvent_norm_and_recursion(a in angles(), j in 0usize..200, tau in 0.0..2.0 * PI, eta in 0.05..1.0f64) {
        let z = SpectralParameter::from_phase(tau, eta).unwrap();
        let model = WalkModel::thue_morse(a, j);
        let problem = TruncatedResolventProblem::from_model(&model, z, vec![0], 1e-10).unwrap();
        let sol = solve_resolvent(&problem).unwrap();
        prop_assert!(sol.residual <= 1e-10);
        prop_assert!(sol.state.norm() <= 1.0 / (z.modulus() - 1.0) * (1.0 + 1e-12));
        let r = problem.radius() as i64;
        let x = CoinSequence::ThueMorse.window(j, -r, r).unwrap();
        prop_assert!(verify_eigenrecursion(&sol.state, &x, &a, &z, &[-1]).unwrap() <= 1e-8);
    }
}

#[test]
fn parseval_across_models() {
    let models = [
        WalkModel::shift(),
        WalkModel::ConstantCoin(Mat2::rotation(PI / 4.0)),
        WalkModel::thue_morse(CoinAngles::new(PI / 3.0, PI / 5.0).unwrap(), 0),
        WalkModel::pattern(CoinSequence::Fibonacci, 500, CoinAngles::new(0.4, 1.1).unwrap()),
    ];
    for model in &models {
        for scale in [5.0, 10.0] {
            for n in [0, 2, -3] {
                let r = parseval_check(model, n, scale, 1e-12, 2 * node_floor(scale), 1e-12).unwrap();
                assert!(r.lhs >= 0.0 && r.rhs >= 0.0);
                assert!(r.rel_diff <= 1e-6 || r.abs_diff <= 1e-14, "{model:?} L={scale} n={n}: {r:?}");
            }
        }
    }
}

#[test]
fn constant_bank_is_translation_invariant() {
    let a = CoinAngles::new(0.7, 0.7).unwrap();
    let bank = qwalk::walk::build_coins(&sequence_window(3, 0, 20).unwrap(), &a);
    assert_eq!(bank, CoinBank::constant(0, 20, Mat2::rotation(0.7)).unwrap());
}
