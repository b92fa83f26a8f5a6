use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;
use wlab_core::characters::{enumerate_chars, epsilon_w_at_identity, gauss_sum, DirichletChar, UnitaryCharacter};
use wlab_core::padic::{unit_group, PrimePower, TruncatedPAdic};
use wlab_core::summation::e_frac;
use wlab_core::whittaker_local::*;

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![3u64, 5, 7])
}

fn some_char(p: u64, c: u32, k: usize, primitive: bool) -> DirichletChar {
    let all = enumerate_chars(PrimePower::new(p, c).unwrap(), primitive, false).unwrap();
    all[k % all.len()].clone()
}

fn frac(x: Ratio<i64>) -> Ratio<i64> {
    x - x.floor()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dlog_round_trip(p in prime(), c in 1u32..4, seed in any::<u64>()) {
        let t = unit_group(p, c).unwrap();
        let q = p.pow(c);
        let u = 1 + seed % (q - 1);
        prop_assume!(u % p != 0);
        let k = t.dlog(u).unwrap();
        prop_assert_eq!(t.power(k), u);
    }

    #[test]
    fn fractional_part_is_additive(p in prime(), v1 in -3i32..3, v2 in -3i32..3, u1 in 1u64..1000, u2 in 1u64..1000) {
        prop_assume!(u1 % p != 0 && u2 % p != 0);
        let x = TruncatedPAdic::from_parts(p, 6, v1, u1 % p.pow(6)).unwrap();
        let y = TruncatedPAdic::from_parts(p, 6, v2, u2 % p.pow(6)).unwrap();
        // cancellation below the working precision is reported as an error, not a value
        let s = x.checked_add(&y);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let lhs = frac(s.fractional_part().unwrap());
        let rhs = frac(x.fractional_part().unwrap() + y.fractional_part().unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn fractional_part_vanishes_exactly_on_integers(p in prime(), v in -4i32..4, u in 1u64..500) {
        prop_assume!(u % p != 0);
        let x = TruncatedPAdic::from_parts(p, 6, v, u % p.pow(6)).unwrap();
        let zero = x.fractional_part().unwrap() == Ratio::from_integer(0);
        prop_assert_eq!(zero, v >= 0);
    }

    #[test]
    fn characters_are_multiplicative(p in prime(), c in 1u32..3, k in 0usize..64, a in 1i128..400, b in 1i128..400) {
        let chi = some_char(p, c, k, false);
        let pi = p as i128;
        prop_assume!(a % pi != 0 && b % pi != 0);
        prop_assert!((chi.value(a * b) - chi.value(a) * chi.value(b)).norm() < 1e-12);
        prop_assert!((chi.value(a).norm() - 1.0).abs() < 1e-12);
        prop_assert!((chi.value(a) * chi.conj().value(a) - 1.0).norm() < 1e-12);
        prop_assert!(chi.value(pi * b).norm() == 0.0);
    }

    #[test]
    fn gauss_and_epsilon_moduli(p in prime(), c in 2u32..4, k in 0usize..300, theta in 0.0f64..6.3) {
        prop_assume!(p.pow(c) <= 343);
        let chi = some_char(p, c, k, true);
        let pf = p as f64;
        prop_assert!((gauss_sum(&chi).norm() - pf.powf(c as f64 / 2.0)).abs() < 1e-10);
        let uc = UnitaryCharacter::new(chi, Complex64::from_polar(1.0, theta)).unwrap();
        let eps = epsilon_w_at_identity(&uc).unwrap();
        prop_assert!((eps.value.norm() - pf.powf(-(c as f64) / 2.0)).abs() < 1e-12);
    }
}

fn rat(n: i128, d: i128) -> Ratio<i128> {
    Ratio::new(n, d)
}

fn a_y_k1(p: i128, y: Ratio<i128>) -> Mat {
    mat_mul(&[[y, rat(0, 1)], [rat(0, 1), rat(1, 1)]], &mat(p, 0, p, 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_is_left_psi_equivariant(k in 0usize..6, m in 0i128..81, w in 1i128..9) {
        prop_assume!(w % 3 != 0);
        let chi = some_char(3, 2, k, true);
        let pi = PrincipalSeries::standard(UnitaryCharacter::new(chi, Complex64::new(1.0, 0.0)).unwrap()).unwrap();
        let g = a_y_k1(3, rat(w, 9));
        let x = rat(m, 27);
        let ng = mat_mul(&[[rat(1, 1), x], [rat(0, 1), rat(1, 1)]], &g);
        let win = Window { outer: 6, depth: 3 };
        let base = jacquet_matrix_oracle(&pi, &g, win).unwrap();
        let moved = jacquet_matrix_oracle(&pi, &ng, win).unwrap();
        let psi = e_frac(m % 27, 27);
        prop_assert!((moved - psi * base).norm() < 1e-9, "{} vs {}", moved, psi * base);
    }

    #[test]
    fn oracle_is_right_k0_equivariant(k in 0usize..6, d in 1i128..9, b in 0i128..9, w in 1i128..9) {
        prop_assume!(d % 3 != 0 && w % 3 != 0);
        let chi = some_char(3, 2, k, true);
        let pi = PrincipalSeries::standard(UnitaryCharacter::new(chi.clone(), Complex64::new(1.0, 0.0)).unwrap()).unwrap();
        let g = a_y_k1(3, rat(w, 9));
        // k = [[1, b], [9, 9 b + d]] lies in K_0(9) with lower-right entry = d mod 9
        let kmat = mat(1, b, 9, 9 * b + d);
        let gk = mat_mul(&g, &kmat);
        let win = Window { outer: 6, depth: 3 };
        let base = jacquet_matrix_oracle(&pi, &g, win).unwrap();
        let moved = jacquet_matrix_oracle(&pi, &gk, win).unwrap();
        let factor = chi.value(d);
        prop_assert!((moved - factor * base).norm() < 1e-9, "{} vs {}", moved, factor * base);
    }

    #[test]
    fn h_is_bounded_by_the_closed_form(p in prime(), k in 0usize..40, eta in 0.0f64..6.3) {
        let chi = some_char(p, 2, k, true);
        let pi = PrincipalSeries::new(
            UnitaryCharacter::unramified(p, Complex64::from_polar(1.0, eta)).unwrap(),
            UnitaryCharacter::new(chi, Complex64::new(1.0, 0.0)).unwrap(),
        )
        .unwrap();
        let r = h_exhaustive(&pi, HWindow::default()).unwrap();
        let closed = h_closed_form(p, 2);
        prop_assert!(r.h <= closed + 1e-8);
        prop_assert!((r.h - closed).abs() < 1e-8);
        prop_assert_eq!(r.cell, Some(Cell::K(1)));
        prop_assert_eq!(r.v, Some(-2));
    }
}
