mod common;

use std::f64::consts::PI;

use common::{form, LEVEL_25, LEVEL_49};
use num_complex::Complex64;
use wlab_core::characters::enumerate_chars;
use wlab_core::mean_values::*;
use wlab_core::modforms::{abs_fast, evaluate, special_point};
use wlab_core::padic::PrimePower;

/// (f, f) for the newform of 11a1 from its period lattice: Omega_+ Omega_- / 2 / (4 pi^2), the
/// curve having modular degree 1.
const PETERSSON_11A1: f64 = 0.046_900_147_873_478_5;

#[test]
fn coset_counts() {
    for (n, idx) in [(1u64, 1usize), (9, 12), (25, 30), (49, 56), (11, 12), (200, 360)] {
        let c = coset_reps(n).unwrap();
        assert_eq!(c.reps.len(), idx, "N = {n}");
        assert_eq!(gamma0_index(n), idx);
        assert!(c.is_complete());
    }
    assert!(coset_reps(MAX_LEVEL + 1).is_err());
}

#[test]
fn petersson_norm_of_11a1() {
    let f = form("11.2.k0.a");
    let q = petersson_norm(&f, &QuadratureSpec::default()).unwrap();
    assert!((q.value / PETERSSON_11A1 - 1.0).abs() < 1e-9, "{}", q.value);
    assert!(q.rel_change < 0.01);
}

#[test]
fn petersson_norm_scales_quadratically() {
    let f = form("25.2.k2.b");
    let spec = QuadratureSpec { nx: 24, nt: 24, tol: 1e-9 };
    let n = petersson_norm(&f, &spec).unwrap().value;
    let c = Complex64::new(-0.6, 2.2);
    let nc = petersson_norm(&f.scaled(c), &spec).unwrap().value;
    assert!((nc / (c.norm_sqr() * n) - 1.0).abs() < 1e-12);
}

#[test]
fn refinement_is_small() {
    for label in ["25.2.k2.a", "49.2.k6.c"] {
        let q = petersson_norm(&form(label), &QuadratureSpec::default()).unwrap();
        println!("{label}: (f, f) = {:.9}, relative change {:.2e}", q.value, q.rel_change);
        assert!(q.rel_change < 0.01);
        assert!(q.value > 0.0);
    }
}

#[test]
fn constant_function_has_unit_norm() {
    let spec = QuadratureSpec::default();
    for n in [1u64, 9, 25, 49] {
        for r in [2.0, 6.0, 64.0] {
            let v = lr_norm_of(n, &|_| 1.0, r, &spec).unwrap();
            assert!((v - 1.0).abs() < 1e-9, "N = {n}, r = {r}: {v}");
        }
    }
}

#[test]
fn l2_norm_is_the_normalized_petersson_norm() {
    let f = form("25.2.k4.a");
    let spec = QuadratureSpec::default();
    let l2 = lr_norm(&f, LrOrder::Finite(2.0), &spec).unwrap();
    let pet = petersson_norm(&f, &spec).unwrap().value;
    assert!((l2 * l2 * volume(25) / pet - 1.0).abs() < 1e-12);
    assert!(lr_norm(&f, LrOrder::Finite(1.5), &spec).is_err());
    assert!(lr_norm(&f, LrOrder::Finite(65.0), &spec).is_err());
}

#[test]
fn log_convexity_of_lr_norms() {
    let f = form("25.2.k18.a");
    let spec = QuadratureSpec::default();
    let n = |r| lr_norm(&f, LrOrder::Finite(r), &spec).unwrap();
    let (n2, n4, n6) = (n(2.0), n(4.0), n(6.0));
    // 1/4 = theta/2 + (1 - theta)/6 with theta = 1/4
    assert!(n4 <= n2.powf(0.25) * n6.powf(0.75) * (1.0 + 1e-9));
    assert!(n2 <= n4 && n4 <= n6);
    let sup = lr_norm(&f, LrOrder::Infinity, &spec).unwrap();
    assert!(n6 <= sup);
}

#[test]
fn lr_ratio_grows_from_25_to_49() {
    let spec = QuadratureSpec::default();
    let level_max = |labels: &[&str]| {
        labels
            .iter()
            .map(|l| {
                let f = form(l);
                let r2 = lr_norm(&f, LrOrder::Finite(2.0), &spec).unwrap();
                let r6 = lr_norm(&f, LrOrder::Finite(6.0), &spec).unwrap();
                println!("{l}: ||f||_6 / ||f||_2 = {:.4}", r6 / r2);
                r6 / r2
            })
            .fold(0.0, f64::max)
    };
    let m25 = level_max(&LEVEL_25);
    let m49 = level_max(&LEVEL_49);
    println!("level max: 25 -> {m25:.4}, 49 -> {m49:.4}");
    assert!(m49 > m25);
}

#[test]
fn cusp_form_dimensions() {
    let trivial = |_: i128| Complex64::new(1.0, 0.0);
    for (n, d) in [(1u64, 0usize), (11, 1), (23, 2), (37, 2), (49, 1), (25, 0)] {
        let chi = |x: i128| if num_integer::Integer::gcd(&x, &(n as i128)) == 1 { trivial(x) } else { Complex64::new(0.0, 0.0) };
        assert_eq!(cusp_dimension_weight2(n, &chi, 1), d, "N = {n}");
    }
    // primitive even chi mod 25: lambda = 2, chi(-1) = 1 forces chi(7) = +-1, no cube roots of unity
    for chi in enumerate_chars(PrimePower::new(5, 2).unwrap(), true, true).unwrap() {
        let expect = 1.5 - chi.value(7).re / 2.0;
        assert_eq!(cusp_dimension_weight2(25, &|x| chi.value(x), 25) as f64, expect);
    }
    let k4 = form("25.2.k4.a");
    let chi = k4.prime_power_char().unwrap();
    assert_eq!(cusp_dimension_weight2(25, &|x| chi.value(x), 25), 1);
}

fn basis(labels: &[&str], spec: &QuadratureSpec) -> BasisWithNorms {
    BasisWithNorms::new(labels.iter().map(|l| form(l)).collect(), spec).unwrap()
}

#[test]
fn basis_completeness() {
    let spec = QuadratureSpec { nx: 24, nt: 24, tol: 1e-9 };
    let b = basis(&["25.2.k2.a", "25.2.k2.b"], &spec);
    assert_eq!(b.expected_dim, 2);
    assert!(b.is_complete());
    let b = basis(&["25.2.k2.a"], &spec);
    assert!(!b.is_complete());
    let one = basis(&["25.2.k4.a"], &spec);
    assert!(one.is_complete());
    let mixed = BasisWithNorms::new(vec![form("25.2.k2.a"), form("25.2.k4.a")], &spec);
    assert!(mixed.is_err());
}

#[test]
fn m_chi_dominates_each_term() {
    let spec = QuadratureSpec::default();
    let b = basis(&["25.2.k2.a", "25.2.k2.b"], &spec);
    let chi = b.forms[0].prime_power_char().unwrap().clone();
    let sp = special_point(&chi).unwrap();
    let m = m_chi(&sp.z, &b, 1e-12).unwrap();
    assert!(!m.partial);
    for (f, n) in b.forms.iter().zip(&b.norms) {
        let v = evaluate(f, &sp.z, 1e-12).unwrap().value.norm();
        assert!(m.value >= v * v / n.value);
    }
    let partial = basis(&["25.2.k2.a"], &spec);
    let mp = m_chi(&sp.z, &partial, 1e-12).unwrap();
    assert!(mp.partial && mp.value <= m.value);
    let w = Complex64::new(0.31, 0.07);
    let direct: f64 = b.forms.iter().zip(&b.norms).map(|(f, n)| abs_fast(f, w, 1e-12).unwrap().powi(2) / n.value).sum();
    let mw = m_chi(&wlab_core::modforms::Point::real(w.re, w.im), &b, 1e-12).unwrap();
    assert!((mw.value - direct).abs() < 1e-12);
}

#[test]
fn domain_average_is_dimension_over_volume() {
    let spec = QuadratureSpec::default();
    for labels in [&["25.2.k2.a", "25.2.k2.b"][..], &["25.2.k4.a"], &["11.2.k0.a"]] {
        let b = basis(labels, &spec);
        let r = domain_average(&b, &spec).unwrap();
        println!("{labels:?}: average * 4 pi = {:.6}, dim {}", r.ratio_to_quarter_pi, r.dimension);
        assert!(!r.partial);
        assert!((r.average * r.volume - r.dimension as f64).abs() < 1e-8);
        assert!((r.ratio_to_quarter_pi - r.average * 4.0 * PI).abs() < 1e-15);
    }
}
