mod common;

use std::f64::consts::{E, TAU};

use common::{form, LEVEL_25, LEVEL_49};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlab_core::characters::{enumerate_chars, find_b};
use wlab_core::error::FormError;
use wlab_core::modforms::*;
use wlab_core::padic::PrimePower;

fn ratio(n: i128, d: i128) -> Ratio<i128> {
    Ratio::new(n, d)
}

#[test]
fn special_point_at_p5() {
    let chars = enumerate_chars(PrimePower::new(5, 2).unwrap(), true, true).unwrap();
    assert_eq!(chars.len(), 8);
    let mut seen_b2 = false;
    for chi in &chars {
        let sp = special_point(chi).unwrap();
        assert_eq!(sp.z.y, Coord::Rational(ratio(1, 125)));
        assert_eq!((sp.a * sp.b) % 5, 1);
        assert_eq!(sp.z.x, Coord::Rational(ratio(5 - sp.a as i128, 5)));
        assert!(sp.z_prime.y() < 1.0 / 125.0);
        if sp.b == 2 {
            assert_eq!(sp.a, 3);
            assert_eq!(sp.z.x, Coord::Rational(ratio(2, 5)));
            seen_b2 = true;
        }
    }
    assert!(seen_b2);
}

#[test]
fn special_point_needs_even_primitive() {
    let all = enumerate_chars(PrimePower::new(7, 2).unwrap(), false, false).unwrap();
    for chi in all {
        let r = special_point(&chi);
        assert_eq!(r.is_ok(), chi.is_primitive() && chi.is_even(), "{:?}", chi.spec());
    }
}

#[test]
fn chart_sends_i_to_z_chi() {
    for p in [3u64, 5, 7, 11] {
        for chi in enumerate_chars(PrimePower::new(p, 2).unwrap(), true, true).unwrap() {
            let sp = special_point(&chi).unwrap();
            let w = sp.chart(&Point::rational(ratio(0, 1), ratio(1, 1))).unwrap();
            assert_eq!(w.x, sp.z.x.frac());
            assert_eq!(w.y, sp.z.y);
        }
    }
}

#[test]
fn value_at_z_chi_level_25() {
    let f = form("25.2.k4.a");
    let chi = f.prime_power_char().unwrap().clone();
    let sp = special_point(&chi).unwrap();
    let direct = evaluate(&f, &sp.z, 1e-12).unwrap();
    let twisted = twisted_expansion_eval(&f, &chi, &Point::real(0.0, 1.0), 1e-12).unwrap();
    let gap = (direct.value.norm() - twisted.value.norm()).abs();
    assert!(gap <= direct.truncation_bound + twisted.truncation_bound + 1e-12, "gap {gap:e}");
    let expected = 5f64.sqrt() * (-TAU).exp();
    let v = direct.value.norm();
    assert!(v >= 0.95 * expected, "{v}");
    assert!((v / expected - 1.0).abs() < 0.05, "{v} vs {expected}");
    assert!(!direct.flagged);
}

#[test]
fn direct_and_twisted_agree_on_all_prime_square_forms() {
    for label in LEVEL_25.iter().chain(&LEVEL_49) {
        let f = form(label);
        let chi = f.prime_power_char().unwrap().clone();
        let sp = special_point(&chi).unwrap();
        let direct = evaluate(&f, &sp.z, 1e-12).unwrap();
        let twisted = twisted_expansion_eval(&f, &chi, &Point::real(0.0, 1.0), 1e-12).unwrap();
        let gap = (direct.value.norm() - twisted.value.norm()).abs();
        let p = sp.p as f64;
        println!("{label}: |f(z_chi)| = {:.7} p^(1/2) e^(-2 pi) = {:.7}", direct.value.norm(), p.sqrt() * (-TAU).exp());
        assert!(gap < 1e-10, "{label}: gap {gap:e}");
    }
}

#[test]
fn twisted_leading_term_dominates_high_up() {
    let f = form("25.2.k4.a");
    let chi = f.prime_power_char().unwrap().clone();
    for y in [5.0, 8.0] {
        let t = twisted_expansion_eval(&f, &chi, &Point::real(0.3, y), 1e-14).unwrap();
        let lead = y * 5f64.sqrt() * (-TAU * y).exp();
        assert!((t.value.norm() / lead - 1.0).abs() < 1e-10);
    }
}

#[test]
fn twisted_requires_matching_character() {
    let f = form("25.2.k4.a");
    let other = enumerate_chars(PrimePower::new(5, 2).unwrap(), true, true)
        .unwrap()
        .into_iter()
        .find(|c| Some(c) != f.prime_power_char())
        .unwrap();
    assert!(twisted_expansion_eval(&f, &other, &Point::real(0.0, 1.0), 1e-9).is_err());
    let g = form("11.2.k0.a");
    let chi = f.prime_power_char().unwrap().clone();
    assert!(matches!(twisted_expansion_eval(&g, &chi, &Point::real(0.0, 1.0), 1e-9), Err(FormError::NotPrimeSquareLevel(11))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn twisted_chart_matches_direct(x in -0.5f64..0.5, y in 0.5f64..2.0) {
        let f = form("25.2.k4.a");
        let chi = f.prime_power_char().unwrap().clone();
        let sp = special_point(&chi).unwrap();
        let tau = Point::real(x, y);
        let z = sp.chart(&tau).unwrap();
        let direct = evaluate(&f, &z, 1e-11).unwrap();
        let twisted = twisted_expansion_eval(&f, &chi, &tau, 1e-11).unwrap();
        let gap = (direct.value.norm() - twisted.value.norm()).abs();
        prop_assert!(gap <= direct.truncation_bound + twisted.truncation_bound + 1e-12, "gap {:e}", gap);
    }

    #[test]
    fn atkin_lehner_is_an_exact_involution(xn in -50i128..50, xd in 1i128..40, yn in 1i128..50, yd in 1i128..40, n in 1i128..200) {
        let z = Point::rational(ratio(xn, xd), ratio(yn, yd));
        let back = atkin_lehner_point(&atkin_lehner_point(&z, n).unwrap(), n).unwrap();
        prop_assert_eq!(back, z);
    }
}

#[test]
fn atkin_lehner_examples() {
    for n in [1i128, 25, 49, 343] {
        let w = atkin_lehner_point(&Point::rational(ratio(0, 1), ratio(1, n)), n).unwrap();
        assert_eq!(w, Point::rational(ratio(0, 1), ratio(1, 1)));
    }
    assert!(matches!(atkin_lehner_point(&Point::rational(ratio(0, 1), ratio(0, 1)), 5), Err(FormError::ZeroPoint)));
}

#[test]
fn evaluation_high_in_the_cusp() {
    let f = form("25.2.k4.a");
    let r = evaluate(&f, &Point::real(0.0, 10.0), 1e-300).unwrap();
    let lead = 10.0 * (-TAU * 10.0).exp();
    assert!((r.value.norm() / lead - 1.0).abs() < 1e-20f64.max(4.0 * (-TAU * 10.0).exp()));
}

#[test]
fn evaluation_rejects_lower_half_plane_and_shortage() {
    let f = form("11.2.k0.a");
    assert!(matches!(evaluate(&f, &Point::real(0.1, -1.0), 1e-9), Err(FormError::NotInUpperHalfPlane)));
    match evaluate(&f, &Point::real(0.1, 1e-5), 1e-9) {
        Err(FormError::InsufficientCoefficients { required, available }) => {
            assert_eq!(available, 3000);
            assert!(required > 3000);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn tails_are_certified() {
    let f = form("25.2.k4.a");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let z = Point::real(rng.random::<f64>(), 0.01 + 0.5 * rng.random::<f64>());
        let mut prev: Option<EvalReport> = None;
        let mut tol = 1e-3;
        for _ in 0..30 {
            let r = evaluate(&f, &z, tol).unwrap();
            assert!(r.truncation_bound <= tol);
            if let Some(p) = prev {
                assert!(r.terms_used >= p.terms_used);
                assert!((r.value - p.value).norm() <= 2.0 * tol + 1e-15);
            }
            prev = Some(r);
            tol /= 2.0;
        }
    }
}

#[test]
fn absolute_value_is_gamma0_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for label in ["25.2.k4.a", "49.2.k6.a", "11.2.k0.a"] {
        let f = form(label);
        let n = f.level as i128;
        for _ in 0..20 {
            let c = n * rng.random_range(1..=2i128);
            let d = loop {
                let d = rng.random_range(-40..=40i128);
                if d.gcd(&c) == 1 {
                    break d;
                }
            };
            let g = sl2_from_bottom_row(c, d).unwrap();
            // cz + d = u + iv, so both z and gz sit at height ~ 1/c
            let u = ratio(rng.random_range(-8..=8i128), 16);
            let v = ratio(rng.random_range(5..=16i128), 16);
            let z = Point::rational(ratio(-d, c) + u / c, v / c);
            let gz = z.act(&g).unwrap();
            let a = evaluate(&f, &z, 1e-11).unwrap();
            let b = evaluate(&f, &gz, 1e-11).unwrap();
            let gap = (a.value.norm() - b.value.norm()).abs();
            assert!(gap <= a.truncation_bound + b.truncation_bound + 1e-12, "{label} gamma {g:?}: gap {gap:e}");
            let t = evaluate(&f, &Point::rational(ratio(-d, c) + u / c + 1, v / c), 1e-11).unwrap();
            assert!((t.value - a.value).norm() < 1e-12);
        }
    }
}

#[test]
fn oldform_pullback_has_the_same_sup() {
    let f = form("11.2.k0.a");
    let base = supnorm_scan(&f, &GridSpec { y_min: 0.02, ..GridSpec::for_level(11) }).unwrap();
    for d in [2u64, 3] {
        let g = oldform(&f, d);
        assert_eq!(g.level, 11 * d);
        // pointwise: g(z) = f(dz)
        for (x, y) in [(0.1, 0.3), (0.77, 0.05), (0.5, 1.0)] {
            let a = abs_fast(&g, Complex64::new(x, y), 1e-12).unwrap();
            let b = abs_fast(&f, Complex64::new(d as f64 * x, d as f64 * y), 1e-12).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // the grid transformed by z -> dz
        let grid: Vec<(f64, f64)> = (0..32).flat_map(|i| (0..32).map(move |j| (i as f64 / 32.0, 0.02 * 1.15f64.powi(j)))).collect();
        let gmax = grid.iter().map(|&(x, y)| abs_fast(&g, Complex64::new(x, y), 1e-12).unwrap()).fold(0.0, f64::max);
        let fmax = grid
            .iter()
            .map(|&(x, y)| abs_fast(&f, Complex64::new(d as f64 * x, d as f64 * y), 1e-12).unwrap())
            .fold(0.0, f64::max);
        assert!((gmax - fmax).abs() < 1e-12);
        let scan = supnorm_scan(&g, &GridSpec { y_min: 0.02 / d as f64, ..GridSpec::for_level(11 * d) }).unwrap();
        println!("d = {d}: scan {:.9} vs level 11 scan {:.9}", scan.max, base.max);
        assert!((scan.max - base.max).abs() < 1e-6 * base.max);
    }
}

#[test]
fn scan_level_25_contains_z_chi_and_beats_certificate() {
    let f = form("25.2.k4.a");
    let s = supnorm_scan(&f, &GridSpec::for_level(25)).unwrap();
    let zchi = s.mandatory.iter().find(|m| m.0 == "z_chi").unwrap().1;
    assert!(zchi >= 0.95 * 5f64.sqrt() * (-TAU).exp());
    assert!(s.max >= zchi && s.max >= s.grid_max);
    let cert = lower_bound_certificate(&f).unwrap();
    assert!(s.max >= cert.value);
    assert!(s.normalized_exponent >= 0.25 - 0.15, "{}", s.normalized_exponent);
    assert!((s.exponent - s.max.ln() / 25f64.ln()).abs() < 1e-15);
    println!("max {:.6} at ({:.5}, {:.6}), exponent {:.4}, normalized {:.4}", s.max, s.argmax.x(), s.argmax.y(), s.exponent, s.normalized_exponent);
}

#[test]
fn scan_reports_coefficient_shortage() {
    let f = form("11.2.k0.a");
    let r = supnorm_scan(&f, &GridSpec { y_min: 1e-5, ..GridSpec::for_level(11) });
    assert!(matches!(r, Err(FormError::InsufficientCoefficients { .. })));
}

fn synthetic(level: u64, parts: Vec<(u64, u32, bool)>) -> NewformData {
    let chars = parts
        .into_iter()
        .map(|(p, c, primitive)| {
            enumerate_chars(PrimePower::new(p, c).unwrap(), false, false)
                .unwrap()
                .into_iter()
                .find(|ch| ch.is_primitive() == primitive && (primitive || ch.conductor_exponent() == 0))
                .unwrap()
        })
        .collect();
    NewformData {
        label: format!("synthetic.{level}"),
        level,
        nebentypus: Nebentypus { parts: chars },
        coeffs: vec![Complex64::new(1.0, 0.0)],
        l_half: None,
        al_eigenvalue: None,
        petersson: None,
        kind: FormKind::Newform,
        source: "test".into(),
    }
}

#[test]
fn certificate_examples() {
    let c0 = 1.0 / (TAU * E);
    let f = form("25.2.k4.a");
    assert!((lower_bound_certificate(&f).unwrap().value - c0 * 5f64.sqrt()).abs() < 1e-15);
    let f = form("49.2.k6.a");
    assert!((lower_bound_certificate(&f).unwrap().value - c0 * 7f64.sqrt()).abs() < 1e-15);
    // square level: N^{1/4}
    let sq = synthetic(225, vec![(3, 2, true), (5, 2, true)]);
    assert!((lower_bound_certificate(&sq).unwrap().value - c0 * 225f64.powf(0.25)).abs() < 1e-14);
    // cube of a squarefree number: N^{1/6}
    let cube = synthetic(3375, vec![(3, 3, true), (5, 3, true)]);
    let cert = lower_bound_certificate(&cube).unwrap();
    assert!((cert.value - c0 * 3375f64.powf(1.0 / 6.0)).abs() < 1e-14);
    assert_eq!(cert.factors.len(), 2);
    // imprimitive nebentypus
    let f = form("11.2.k0.a");
    assert!(matches!(lower_bound_certificate(&f), Err(FormError::CertificateUnavailable)));
    let half = synthetic(225, vec![(3, 2, false), (5, 2, true)]);
    assert!(matches!(lower_bound_certificate(&half), Err(FormError::CertificateUnavailable)));
}

#[test]
fn hecke_bound_holds_on_every_form() {
    for label in LEVEL_25.iter().chain(&LEVEL_49).chain(&["11.2.k0.a"]) {
        let f = form(label);
        let b = hecke_coefficient_bound(&f);
        println!("{label}: worst {:.9} at n = {}, with h = 1 off N: {:.6} at n = {}", b.worst_ratio, b.worst_n, b.naive_ratio, b.naive_n);
        assert!(b.worst_ratio <= 1.0 + 1e-6, "{label}");
        assert!(b.worst_ratio >= 1.0 - 1e-12);
        if let Some(chi) = f.prime_power_char().filter(|c| c.is_primitive() && c.modulus.c >= 2) {
            let p = chi.p() as usize;
            assert!((f.a(p).norm() - 1.0).abs() < 1e-9);
        }
    }
    let b = hecke_coefficient_bound(&form("25.2.k2.a"));
    assert_eq!(b.naive_n, 2);
    assert!(b.naive_ratio > 1.0);
}

#[test]
fn satake_parameters_multiply_to_the_character() {
    let f = form("25.2.k4.a");
    for p in [2u64, 3, 7, 11, 13] {
        let (a, b) = satake(&f, p);
        assert!((a * b - f.nebentypus.value(p as i128)).norm() < 1e-9);
        assert!((a + b - f.a(p as usize)).norm() < 1e-9);
        assert!((a.norm() - 1.0).abs() < 1e-6 && (b.norm() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn wilton_sums() {
    let f = form("25.2.k4.a");
    assert!((wilton_sum(&f, 1, &Coord::int(0)).unwrap() - 1.0).norm() < 1e-15);
    let x = Coord::ratio(2, 5);
    let prefix = wilton_prefix(&f, 500, &x).unwrap();
    for m in [1usize, 7, 100, 500] {
        assert!((wilton_sum(&f, m, &x).unwrap().norm() - prefix[m - 1]).abs() < 1e-10);
    }
    for a in 1..5i128 {
        let w = wilton_lower_scan(&f, &Coord::ratio(a, 5), 1250, 0.3).unwrap();
        println!("x = {a}/5: first M {:?}, best ratio {:.3} at M = {}", w.first_m, w.best_ratio, w.best_m);
        assert!(w.first_m.is_some());
        assert!(w.best_ratio >= 0.3);
    }
    assert!(wilton_sum(&f, 10_000, &x).is_err());
}

#[test]
fn wilton_upper_exponent_is_near_one_half() {
    let f = form("25.2.k4.a");
    let ms: Vec<usize> = (0..8).map(|k| 40 << k).collect();
    let fit = wilton_upper_exponent(&f, &ms, 200, 5).unwrap();
    println!("slope {:.4} over M = {:?}", fit.slope, fit.ms);
    assert!(fit.slope <= 0.6);
    assert!(fit.slope >= 0.3);
    let again = wilton_upper_exponent(&f, &ms, 200, 5).unwrap();
    assert_eq!(fit, again);
}

#[test]
fn hecke_integral_matches_series() {
    let f = form("25.2.k4.a");
    let h = hecke_integral(&f, 1e-10).unwrap();
    let s = hecke_integral_series(&f);
    assert!((h.value - s).norm() < 1e-8, "{} vs {}", h.value, s);
    let reference = h.reference.unwrap();
    assert!((h.value - reference).norm() <= 2.0);
    println!("integral {:.6}, L(1/2)/(2 pi) {:.6}", h.value, reference);
    // linearity
    let c = Complex64::new(0.3, -1.7);
    let hc = hecke_integral(&f.scaled(c), 1e-10).unwrap();
    assert!((hc.value - h.value * c).norm() < 1e-8);
    // the integrand at y = 1 is e^{-2 pi} to leading order
    let at1 = evaluate(&f, &Point::real(0.0, 1.0), 1e-14).unwrap().value;
    assert!((at1.norm() / (-TAU).exp() - 1.0).abs() < 3.0 * (-TAU).exp());
}

#[test]
fn orbit_heights_near_z_chi_prime() {
    for p in [3u64, 5, 7] {
        let pf = p as f64;
        let n = (p * p) as i128;
        for chi in enumerate_chars(PrimePower::new(p, 2).unwrap(), true, true).unwrap() {
            let sp = special_point(&chi).unwrap();
            let (h, (c, _)) = orbit_max_height(&sp.z_prime, p * p, 1 << 24);
            let gap = 1.0 / pf.powi(3) - h;
            println!("p = {p}, b = {}: max Im = {h:.6e} (c = {c}), 1/p^3 - max = {:.3} p^-7", sp.b, gap * pf.powi(7));
            assert!(h < 1.0 / pf.powi(3));
            assert!(gap >= 0.5 * pf.powi(-7) && gap <= 2.0 * pf.powi(-5));
            assert_eq!(c % n, 0);
            let (w, g) = raise_in_orbit(&sp.z_prime, p * p, 1 << 24).unwrap();
            assert!((w.y() - h).abs() < 1e-15);
            assert_eq!(g[1][0] % n, 0);
            assert_eq!(g[0][0] * g[1][1] - g[0][1] * g[1][0], 1);
        }
    }
}

#[test]
fn find_b_agrees_with_special_point() {
    for chi in enumerate_chars(PrimePower::new(7, 2).unwrap(), true, true).unwrap() {
        let (b, a) = find_b(&chi).unwrap();
        let sp = special_point(&chi).unwrap();
        assert_eq!((sp.b, sp.a), (b, a));
    }
}

#[test]
fn large_values_cover_the_neighbourhood() {
    let f = form("25.2.k4.a");
    let chi = f.prime_power_char().unwrap().clone();
    let mut last_area = f64::INFINITY;
    for delta in [0.1, 0.25, 0.4] {
        let r = large_neighborhood(&f, &chi, delta).unwrap();
        println!(
            "delta {delta}: area {:.4} of strip {:.4}, at p^delta {:.4}, threshold {:.5}",
            r.area, r.strip_area, r.area_at_p_delta, r.threshold
        );
        assert!(r.area >= 0.95 * r.strip_area);
        assert!(r.area <= r.strip_area + 1e-12);
        assert!(r.area <= last_area);
        assert!((r.target - 5f64.powf(0.5 - delta)).abs() < 1e-12);
        last_area = r.area;
    }
    let near_half = large_neighborhood(&f, &chi, 0.4999).unwrap();
    assert!((near_half.target - 1.0).abs() < 1e-3);
    assert!(large_neighborhood(&f, &chi, 0.5).is_err());
    assert!(large_neighborhood(&f, &chi, 0.0).is_err());
}
