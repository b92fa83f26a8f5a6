//! Weight-2 newforms on Gamma_0(N) with nebentypus: certified q-expansion evaluation, the special
//! point z_chi, the twisted expansion at the cusp it sits under, sup-norm scans, Wilton sums,
//! Hecke's integral and the lower-bound certificate.
//!
//! Normalization throughout: f(z) = y sum_n a_n n^{1/2} e(nz), so |f| is Gamma_0(N)-invariant
//! and Deligne reads |a_n| <= tau(n).

use std::f64::consts::{E, TAU};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characters::{find_b, CharSpec, DirichletChar};
use crate::error::{CharError, FormError};
use crate::padic::factor;
use crate::summation::{e_frac, e_real, pairwise_sum};
use crate::whittaker_arch::loglog_slope;
use crate::whittaker_local::{h_closed_form, unramified_h};

/// Largest denominator for which e(n a/q) is reduced exactly in integers.
const EXACT_DEN_LIMIT: i128 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coord {
    Rational(Ratio<i128>),
    Real(f64),
}

impl Coord {
    pub fn int(n: i128) -> Self {
        Coord::Rational(Ratio::from_integer(n))
    }

    pub fn ratio(num: i128, den: i128) -> Self {
        Coord::Rational(Ratio::new(num, den))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coord::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Coord::Real(x) => *x,
        }
    }

    pub fn neg(&self) -> Coord {
        match self {
            Coord::Rational(r) => Coord::Rational(-r),
            Coord::Real(x) => Coord::Real(-x),
        }
    }

    /// Fractional part in [0, 1).
    pub fn frac(&self) -> Coord {
        match self {
            Coord::Rational(r) => Coord::Rational(r - r.floor()),
            Coord::Real(x) => Coord::Real(x - x.floor()),
        }
    }
}

/// z = x + iy with exact rational coordinates where possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Coord,
    pub y: Coord,
}

/// Integer 2x2 matrix acting by Moebius transformations.
pub type IntMat = [[i128; 2]; 2];

impl Point {
    pub fn rational(x: Ratio<i128>, y: Ratio<i128>) -> Self {
        Point { x: Coord::Rational(x), y: Coord::Rational(y) }
    }

    pub fn real(x: f64, y: f64) -> Self {
        Point { x: Coord::Real(x), y: Coord::Real(y) }
    }

    pub fn x(&self) -> f64 {
        self.x.to_f64()
    }

    pub fn y(&self) -> f64 {
        self.y.to_f64()
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.x(), self.y())
    }

    pub fn is_exact(&self) -> bool {
        matches!((self.x, self.y), (Coord::Rational(_), Coord::Rational(_)))
    }

    fn exact(&self) -> Option<(Ratio<i128>, Ratio<i128>)> {
        match (self.x, self.y) {
            (Coord::Rational(x), Coord::Rational(y)) => Some((x, y)),
            _ => None,
        }
    }

    /// (az + b)/(cz + d) for a matrix of positive determinant; exact when z is.
    pub fn act(&self, g: &IntMat) -> Result<Point, FormError> {
        let [[a, b], [c, d]] = *g;
        let det = a * d - b * c;
        if det <= 0 {
            return Err(FormError::Invalid(format!("matrix determinant {det} is not positive")));
        }
        match self.exact() {
            Some((x, y)) => {
                let (a, b, c, d) = (Ratio::from(a), Ratio::from(b), Ratio::from(c), Ratio::from(d));
                let den = (c * x + d) * (c * x + d) + c * c * y * y;
                let re = ((a * x + b) * (c * x + d) + a * c * y * y) / den;
                let im = Ratio::from(det) * y / den;
                Ok(Point::rational(re, im))
            }
            None => {
                let z = self.to_complex();
                let w = (z * a as f64 + b as f64) / (z * c as f64 + d as f64);
                Ok(Point::real(w.re, w.im))
            }
        }
    }
}

/// Nebentypus as a product of characters mod prime powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Nebentypus {
    pub parts: Vec<DirichletChar>,
}

impl Nebentypus {
    pub fn value(&self, d: i128) -> Complex64 {
        self.parts.iter().map(|c| c.value(d)).product()
    }

    pub fn part(&self, p: u64) -> Option<&DirichletChar> {
        self.parts.iter().find(|c| c.p() == p)
    }

    /// Primitive modulo N: every p^c || N carries a character of conductor exactly p^c.
    pub fn is_primitive_mod(&self, level: u64) -> bool {
        factor(level)
            .iter()
            .all(|&(p, c)| self.part(p).is_some_and(|ch| ch.conductor_exponent() == c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    Newform,
    /// z -> f(dz) of a newform, as a q-expansion at level dN.
    Oldform { d: u64 },
}

#[derive(Debug, Clone)]
pub struct NewformData {
    pub label: String,
    pub level: u64,
    pub nebentypus: Nebentypus,
    /// coeffs[n - 1] = a_n.
    pub coeffs: Vec<Complex64>,
    pub l_half: Option<Complex64>,
    pub al_eigenvalue: Option<Complex64>,
    pub petersson: Option<f64>,
    pub kind: FormKind,
    pub source: String,
}

impl NewformData {
    pub fn a(&self, n: usize) -> Complex64 {
        self.coeffs[n - 1]
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The single prime-power character of a level p^c form.
    pub fn prime_power_char(&self) -> Option<&DirichletChar> {
        match self.nebentypus.parts.as_slice() {
            [c] if c.modulus.q == self.level => Some(c),
            _ => None,
        }
    }

    /// c f, for scaling checks; the result is no longer normalized.
    pub fn scaled(&self, c: Complex64) -> NewformData {
        NewformData { coeffs: self.coeffs.iter().map(|a| a * c).collect(), ..self.clone() }
    }
}

/// g(z) = f(dz) written as y sum b_m m^{1/2} e(mz): b_{dn} = d^{1/2} a_n.
pub fn oldform(f: &NewformData, d: u64) -> NewformData {
    let d_us = d as usize;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); f.len() * d_us];
    let s = (d as f64).sqrt();
    for (i, a) in f.coeffs.iter().enumerate() {
        coeffs[(i + 1) * d_us - 1] = a * s;
    }
    NewformData {
        label: format!("{}@{d}", f.label),
        level: f.level * d,
        coeffs,
        kind: FormKind::Oldform { d },
        l_half: None,
        al_eigenvalue: None,
        petersson: None,
        source: format!("pullback z -> {d}z of {}", f.label),
        ..f.clone()
    }
}

/// y sum_{n > m} n^{3/2} e^{-2 pi n y}, bounded by its first term over (1 - first ratio).
pub fn tail_bound(y: f64, m: usize) -> f64 {
    let x = (-TAU * y).exp();
    let m1 = m as f64 + 1.0;
    let rho = ((m1 + 1.0) / m1).powf(1.5) * x;
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    y * m1.powf(1.5) * (-TAU * y * m1).exp() / (1.0 - rho)
}

/// Smallest m with tail_bound(y, m) <= tol.
pub fn terms_needed(y: f64, tol: f64) -> usize {
    if tail_bound(y, 0) <= tol {
        return 0;
    }
    let mut hi = 1usize;
    while tail_bound(y, hi) > tol {
        hi *= 2;
    }
    let mut lo = hi / 2;
    // past the first index with rho < 1 the bound decreases; bisect on [lo, hi]
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail_bound(y, mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub point: Point,
    pub value: Complex64,
    pub truncation_bound: f64,
    pub terms_used: usize,
    /// Bound is not below 1e-3 |value|.
    pub flagged: bool,
}

impl EvalReport {
    fn new(point: Point, value: Complex64, truncation_bound: f64, terms_used: usize) -> Self {
        let flagged = truncation_bound >= 1e-3 * value.norm();
        EvalReport { point, value, truncation_bound, terms_used, flagged }
    }
}

/// e(n x) for n = 1..=m, exactly reduced when x is a rational with a moderate denominator.
fn phases(x: &Coord, m: usize) -> Vec<Complex64> {
    match x {
        Coord::Rational(r) if *r.denom() <= EXACT_DEN_LIMIT => {
            let (num, den) = (r.numer().rem_euclid(*r.denom()), *r.denom());
            (1..=m as i128).map(|n| e_frac((n % den) * num, den as u64)).collect()
        }
        _ => {
            let xf = x.frac().to_f64();
            (1..=m).map(|n| e_real(n as f64 * xf)).collect()
        }
    }
}

fn check_point(z: &Point) -> Result<f64, FormError> {
    let y = z.y();
    if !(y > 0.0) {
        return Err(FormError::NotInUpperHalfPlane);
    }
    Ok(y)
}

fn series(f: &NewformData, z: &Point, tol: f64, filter: impl Fn(usize) -> bool) -> Result<(Complex64, usize), FormError> {
    let y = check_point(z)?;
    let m = terms_needed(y, tol).max(1);
    if m > f.len() {
        return Err(FormError::InsufficientCoefficients { required: m, available: f.len() });
    }
    let ph = phases(&z.x, m);
    let terms: Vec<Complex64> = (1..=m)
        .filter(|&n| filter(n))
        .map(|n| f.a(n) * (n as f64).sqrt() * (-TAU * n as f64 * y).exp() * ph[n - 1])
        .collect();
    Ok((pairwise_sum(&terms) * y, m))
}

/// f(z) with the tail beyond the last used term bounded by tol.
pub fn evaluate(f: &NewformData, z: &Point, tol: f64) -> Result<EvalReport, FormError> {
    let (value, m) = series(f, z, tol, |_| true)?;
    Ok(EvalReport::new(*z, value, tail_bound(z.y(), m), m))
}

/// |f| only, by a running power of q; for dense scans and quadrature.
pub fn abs_fast(f: &NewformData, z: Complex64, tol: f64) -> Result<f64, FormError> {
    if !(z.im > 0.0) {
        return Err(FormError::NotInUpperHalfPlane);
    }
    let m = terms_needed(z.im, tol).max(1);
    if m > f.len() {
        return Err(FormError::InsufficientCoefficients { required: m, available: f.len() });
    }
    let xf = z.re - z.re.floor();
    let q = (-TAU * z.im).exp() * e_real(xf);
    let mut qn = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 1..=m {
        qn *= q;
        acc += f.a(n) * (n as f64).sqrt() * qn;
    }
    Ok(acc.norm() * z.im)
}

/// z_chi together with the companion point and the maximizer of the leading twisted term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub chi: CharSpec,
    pub p: u64,
    pub b: u64,
    pub a: u64,
    /// x = -a/p: the sign matching f(gz) = chi(d)(cz+d)^2 f(z).
    pub z: Point,
    /// -1/(p^2 z).
    pub z_prime: Point,
    /// Image of i/(2 pi) in the twisted chart, where y e^{-2 pi y} peaks.
    pub peak: Point,
}

impl SpecialPoint {
    /// tau -> -a/p - 1/(p^3 (-conj tau)): the chart with |f(chart(tau))| = |twisted(tau)|. The
    /// reflection is the same sign of the additive character that puts z_chi at -a/p.
    pub fn chart(&self, tau: &Point) -> Result<Point, FormError> {
        let p = self.p as i128;
        let x0 = Coord::ratio(-(self.a as i128), p).frac();
        let w = atkin_lehner_point(&Point { x: tau.x.neg(), y: tau.y }, p * p * p)?;
        Ok(match (x0, w.x, w.y) {
            (Coord::Rational(x0), Coord::Rational(wx), Coord::Rational(wy)) => Point::rational(x0 + wx, wy),
            _ => Point::real(x0.to_f64() + w.x(), w.y()),
        })
    }
}

pub fn special_point(chi: &DirichletChar) -> Result<SpecialPoint, FormError> {
    if !chi.is_even() {
        return Err(CharError::Odd.into());
    }
    let (b, a) = find_b(chi)?;
    let p = chi.p();
    let pi = p as i128;
    let mut sp = SpecialPoint {
        chi: chi.spec(),
        p,
        b,
        a,
        z: Point::rational(Ratio::new(pi - a as i128, pi), Ratio::new(1, pi * pi * pi)),
        z_prime: Point::real(0.0, 1.0),
        peak: Point::real(0.0, 1.0),
    };
    sp.z_prime = atkin_lehner_point(&sp.z, pi * pi)?;
    let x0 = sp.z.x;
    sp.peak = Point { x: x0, y: Coord::Real(TAU / (pi * pi * pi) as f64) };
    Ok(sp)
}

/// -1/(N z), exact for exact points.
pub fn atkin_lehner_point(z: &Point, n: i128) -> Result<Point, FormError> {
    if z.x.to_f64() == 0.0 && z.y.to_f64() == 0.0 {
        return Err(FormError::ZeroPoint);
    }
    check_point(z)?;
    match z.exact() {
        Some((x, y)) => {
            let den = Ratio::from(n) * (x * x + y * y);
            Ok(Point::rational(-x / den, y / den))
        }
        None => {
            let w = -1.0 / (z.to_complex() * n as f64);
            Ok(Point::real(w.re, w.im))
        }
    }
}

fn level_prime(f: &NewformData, chi: &DirichletChar) -> Result<u64, FormError> {
    let p = chi.p();
    if f.level != p * p || !chi.is_primitive() || chi.modulus.c != 2 {
        return Err(FormError::NotPrimeSquareLevel(f.level));
    }
    match f.prime_power_char() {
        Some(c) if c == chi => Ok(p),
        _ => Err(FormError::Invalid("character is not the nebentypus of the form".into())),
    }
}

/// Y p^{1/2} sum_{n = 1 (p)} a_n n^{1/2} e(n tau): the newform seen from the cusp under z_chi.
pub fn twisted_expansion_eval(f: &NewformData, chi: &DirichletChar, tau: &Point, tol: f64) -> Result<EvalReport, FormError> {
    let p = level_prime(f, chi)?;
    let sp = (p as f64).sqrt();
    let (value, m) = series(f, tau, tol / sp, |n| n as u64 % p == 1)?;
    Ok(EvalReport::new(*tau, value * sp, tail_bound(tau.y(), m) * sp, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodReport {
    pub p: u64,
    pub delta: f64,
    /// Hyperbolic area of {p^{delta-1/2} <= Y <= 1, |twisted| >= threshold}.
    pub area: f64,
    pub threshold: f64,
    /// Area of the whole strip, p^{1/2-delta} - 1.
    pub strip_area: f64,
    /// p^{1/2-delta}.
    pub target: f64,
    /// Area where |twisted| >= p^delta itself.
    pub area_at_p_delta: f64,
    pub evaluations: usize,
}

/// Area by corner classification on a (X, 1/Y) grid, subdividing mixed cells.
fn region_area(g: &(dyn Fn(f64, f64) -> f64 + Sync), s_max: f64, threshold: f64, base: usize, depth: u32) -> (f64, usize) {
    fn cell(g: &(dyn Fn(f64, f64) -> f64 + Sync), x0: f64, s0: f64, dx: f64, ds: f64, thr: f64, depth: u32) -> (f64, usize) {
        let corners = [(x0, s0), (x0 + dx, s0), (x0, s0 + ds), (x0 + dx, s0 + ds), (x0 + dx / 2.0, s0 + ds / 2.0)];
        let above = corners.iter().filter(|&&(x, s)| g(x, 1.0 / s) >= thr).count();
        if above == 5 {
            return (dx * ds, 5);
        }
        if above == 0 || depth == 0 {
            return (dx * ds * above as f64 / 5.0, 5);
        }
        let (hx, hs) = (dx / 2.0, ds / 2.0);
        [(x0, s0), (x0 + hx, s0), (x0, s0 + hs), (x0 + hx, s0 + hs)]
            .iter()
            .map(|&(a, b)| cell(g, a, b, hx, hs, thr, depth - 1))
            .fold((0.0, 5), |acc, r| (acc.0 + r.0, acc.1 + r.1))
    }
    let ds = (s_max - 1.0) / base as f64;
    let dx = 1.0 / base as f64;
    (0..base * base)
        .into_par_iter()
        .map(|k| cell(g, (k % base) as f64 * dx, 1.0 + (k / base) as f64 * ds, dx, ds, threshold, depth))
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Hyperbolic area (dX dY / Y^2) of the window p^{delta-1/2} <= Y <= 1 in the twisted chart where
/// |twisted| >= e^{-2 pi} p^delta, alongside the same area at the bare threshold p^delta.
pub fn large_neighborhood(f: &NewformData, chi: &DirichletChar, delta: f64) -> Result<NeighborhoodReport, FormError> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(FormError::Invalid(format!("delta = {delta} outside (0, 1/2)")));
    }
    let p = level_prime(f, chi)?;
    let pf = p as f64;
    let s_max = pf.powf(0.5 - delta);
    let tol = 1e-12;
    terms_needed(1.0 / s_max, tol / pf.sqrt())
        .le(&f.len())
        .then_some(())
        .ok_or(FormError::InsufficientCoefficients { required: terms_needed(1.0 / s_max, tol), available: f.len() })?;
    let g = |x: f64, y: f64| {
        twisted_expansion_eval(f, chi, &Point::real(x, y), tol).map(|r| r.value.norm()).unwrap_or(0.0)
    };
    let threshold = (-TAU).exp() * pf.powf(delta);
    let (area, n1) = region_area(&g, s_max, threshold, 24, 4);
    let (area_lit, n2) = region_area(&g, s_max, pf.powf(delta), 8, 2);
    Ok(NeighborhoodReport {
        p,
        delta,
        area,
        threshold,
        strip_area: s_max - 1.0,
        target: s_max,
        area_at_p_delta: area_lit,
        evaluations: n1 + n2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub tol: f64,
}

impl GridSpec {
    /// 64 x 64, y log-spaced on [N^{-3/2}/2, 2].
    pub fn for_level(level: u64) -> Self {
        GridSpec { nx: 64, ny: 64, y_min: 0.5 * (level as f64).powf(-1.5), y_max: 2.0, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub level: u64,
    pub max: f64,
    pub argmax: Point,
    /// ln max / ln N.
    pub exponent: f64,
    /// ln(2 pi e max) / ln N, the exponent once the weight-2 constant is divided out.
    pub normalized_exponent: f64,
    pub grid: GridSpec,
    pub grid_max: f64,
    pub mandatory: Vec<(String, f64)>,
    pub evaluations: usize,
}

/// Mandatory sample points of a form: z_chi, z'_chi and the twisted peak when N = p^2 with primitive
/// nebentypus.
pub fn mandatory_points(f: &NewformData) -> Vec<(String, Point)> {
    match f.prime_power_char() {
        Some(chi) if chi.modulus.c == 2 && chi.is_primitive() && chi.is_even() => match special_point(chi) {
            Ok(sp) => vec![("z_chi".into(), sp.z), ("z_chi_prime".into(), sp.z_prime), ("twisted_peak".into(), sp.peak)],
            Err(_) => vec![],
        },
        _ => vec![],
    }
}

/// Grid maximum of |f| plus mandatory points, then a compass search in (x, log y) from the best.
pub fn supnorm_scan(f: &NewformData, grid: &GridSpec) -> Result<ScanReport, FormError> {
    let need = terms_needed(grid.y_min, grid.tol);
    if need > f.len() {
        return Err(FormError::InsufficientCoefficients { required: need, available: f.len() });
    }
    let ys = crate::whittaker_arch::log_grid(grid.y_min, grid.y_max, grid.ny);
    let pts: Vec<(f64, f64)> = (0..grid.nx)
        .flat_map(|i| ys.iter().map(move |&y| (i as f64 / grid.nx as f64, y)))
        .collect();
    let vals: Result<Vec<f64>, FormError> =
        pts.par_iter().map(|&(x, y)| abs_fast(f, Complex64::new(x, y), grid.tol)).collect();
    let vals = vals?;
    let (mut best_i, mut grid_max) = (0, f64::NEG_INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v > grid_max {
            best_i = i;
            grid_max = v;
        }
    }
    let mut evaluations = vals.len();
    let mut mandatory = Vec::new();
    let mut best = (grid_max, Point::real(pts[best_i].0, pts[best_i].1));
    for (name, z) in mandatory_points(f) {
        let (w, _) = raise_in_orbit(&z, f.level, 1 << 20)?;
        let r = evaluate(f, &w, grid.tol)?;
        evaluations += 1;
        let v = r.value.norm();
        mandatory.push((name, v));
        if v > best.0 {
            best = (v, z);
        }
    }
    // compass search in (x, ln y)
    let (mut x, mut ly) = (best.1.x(), best.1.y().ln());
    let mut step = (1.0 / grid.nx as f64, (grid.y_max / grid.y_min).ln() / grid.ny as f64);
    let mut cur = best.0;
    let ln_min = grid.y_min.ln();
    while step.0 > 1e-9 {
        let mut moved = false;
        for (dx, dl) in [(step.0, 0.0), (-step.0, 0.0), (0.0, step.1), (0.0, -step.1)] {
            let (nx, nl) = (x + dx, (ly + dl).max(ln_min));
            let v = abs_fast(f, Complex64::new(nx, nl.exp()), grid.tol)?;
            evaluations += 1;
            if v > cur {
                (x, ly, cur, moved) = (nx, nl, v, true);
                break;
            }
        }
        if !moved {
            step = (step.0 / 2.0, step.1 / 2.0);
        }
    }
    if cur > best.0 {
        best = (cur, Point::real(x - x.floor(), ly.exp()));
    }
    let ln_n = (f.level as f64).ln();
    Ok(ScanReport {
        level: f.level,
        max: best.0,
        argmax: best.1,
        exponent: best.0.ln() / ln_n,
        normalized_exponent: (TAU * E * best.0).ln() / ln_n,
        grid: *grid,
        grid_max,
        mandatory,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFactor {
    pub p: u64,
    pub c: u32,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// (2 pi e)^{-1} prod_p h(pi_p).
    pub value: f64,
    pub factors: Vec<LocalFactor>,
}

/// Each ramified pi_p is a twist-minimal principal series 1 [+] chi_p when the nebentypus is
/// primitive mod N, with h = p^{floor(c/2)/2}.
pub fn lower_bound_certificate(f: &NewformData) -> Result<Certificate, FormError> {
    if !f.nebentypus.is_primitive_mod(f.level) {
        return Err(FormError::CertificateUnavailable);
    }
    let factors: Vec<LocalFactor> = factor(f.level)
        .into_iter()
        .map(|(p, c)| LocalFactor { p, c, h: h_closed_form(p, c) })
        .collect();
    let prod: f64 = factors.iter().map(|l| l.h).product();
    Ok(Certificate { value: prod / (TAU * E), factors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeckeBound {
    /// max_n |a_n| / (n^{1/2} prod_{p|n} h(pi_p)), with the true h at unramified p.
    pub worst_ratio: f64,
    pub worst_n: usize,
    /// Same with h = 1 at every unramified prime.
    pub naive_ratio: f64,
    pub naive_n: usize,
}

fn smallest_prime_factors(m: usize) -> Vec<usize> {
    let mut spf = vec![0usize; m + 1];
    for i in 2..=m {
        if spf[i] == 0 {
            for j in (i..=m).step_by(i) {
                if spf[j] == 0 {
                    spf[j] = i;
                }
            }
        }
    }
    spf
}

/// Satake parameters at p not dividing N: roots of X^2 - a_p X + chi(p).
pub fn satake(f: &NewformData, p: u64) -> (Complex64, Complex64) {
    let ap = f.a(p as usize);
    let chp = f.nebentypus.value(p as i128);
    let disc = (ap * ap - chp * 4.0).sqrt();
    ((ap + disc) / 2.0, (ap - disc) / 2.0)
}

pub fn hecke_coefficient_bound(f: &NewformData) -> HeckeBound {
    let m = f.len();
    let spf = smallest_prime_factors(m);
    let mut h_true = vec![1.0f64; m + 1];
    let ramified: Vec<(u64, u32)> = factor(f.level);
    for p in 2..=m {
        if spf[p] != p {
            continue;
        }
        h_true[p] = match ramified.iter().find(|r| r.0 == p as u64) {
            Some(&(_, c)) => match f.nebentypus.part(p as u64) {
                Some(ch) if ch.conductor_exponent() == c => h_closed_form(p as u64, c),
                _ => 1.0,
            },
            None => {
                let (al, be) = satake(f, p as u64);
                unramified_h(p as u64, al, be)
            }
        };
    }
    let mut out = HeckeBound { worst_ratio: 0.0, worst_n: 1, naive_ratio: 0.0, naive_n: 1 };
    for n in 1..=m {
        let (mut k, mut bound, mut naive) = (n, 1.0, 1.0);
        while k > 1 {
            let p = spf[k];
            while k % p == 0 {
                k /= p;
            }
            bound *= h_true[p];
            if ramified.iter().any(|r| r.0 == p as u64) {
                naive *= h_true[p];
            }
        }
        let base = f.a(n).norm() / (n as f64).sqrt();
        if base / bound > out.worst_ratio {
            (out.worst_ratio, out.worst_n) = (base / bound, n);
        }
        if base / naive > out.naive_ratio {
            (out.naive_ratio, out.naive_n) = (base / naive, n);
        }
    }
    out
}

/// S(M, x) = sum_{m <= M} a_m e(mx).
pub fn wilton_sum(f: &NewformData, m: usize, x: &Coord) -> Result<Complex64, FormError> {
    if m > f.len() {
        return Err(FormError::InsufficientCoefficients { required: m, available: f.len() });
    }
    let ph = phases(x, m);
    let terms: Vec<Complex64> = (1..=m).map(|n| f.a(n) * ph[n - 1]).collect();
    Ok(pairwise_sum(&terms))
}

/// |S(M, x)| for M = 1..=m_max, with compensated running sums.
pub fn wilton_prefix(f: &NewformData, m_max: usize, x: &Coord) -> Result<Vec<f64>, FormError> {
    if m_max > f.len() {
        return Err(FormError::InsufficientCoefficients { required: m_max, available: f.len() });
    }
    let ph = phases(x, m_max);
    let (mut s, mut comp) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    Ok((1..=m_max)
        .map(|n| {
            let t = f.a(n) * ph[n - 1] - comp;
            let u = s + t;
            comp = (u - s) - t;
            s = u;
            s.norm()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiltonLower {
    pub x: Coord,
    pub best_m: usize,
    /// max_M |S(M, x)| / M^{1/2}.
    pub best_ratio: f64,
    /// Smallest M reaching the requested ratio, if any.
    pub first_m: Option<usize>,
}

pub fn wilton_lower_scan(f: &NewformData, x: &Coord, m_max: usize, ratio: f64) -> Result<WiltonLower, FormError> {
    let s = wilton_prefix(f, m_max, x)?;
    let mut out = WiltonLower { x: *x, best_m: 1, best_ratio: 0.0, first_m: None };
    for (i, v) in s.iter().enumerate() {
        let r = v / ((i + 1) as f64).sqrt();
        if r > out.best_ratio {
            (out.best_ratio, out.best_m) = (r, i + 1);
        }
        if out.first_m.is_none() && r >= ratio {
            out.first_m = Some(i + 1);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiltonFit {
    pub slope: f64,
    pub ms: Vec<usize>,
    pub maxima: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// Slope of ln max_x |S(M, x)| against ln M over uniformly random x.
pub fn wilton_upper_exponent(f: &NewformData, ms: &[usize], samples: usize, seed: u64) -> Result<WiltonFit, FormError> {
    let m_max = *ms.iter().max().ok_or(FormError::Invalid("empty M list".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..samples).map(|_| rng.random::<f64>()).collect();
    let prefixes: Result<Vec<Vec<f64>>, FormError> =
        xs.par_iter().map(|&x| wilton_prefix(f, m_max, &Coord::Real(x))).collect();
    let prefixes = prefixes?;
    let maxima: Vec<f64> = ms
        .iter()
        .map(|&m| prefixes.iter().map(|s| s[m - 1]).fold(0.0, f64::max))
        .collect();
    let lx: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    Ok(WiltonFit { slope: loglog_slope(&lx, &maxima), ms: ms.to_vec(), maxima, samples, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeckeIntegral {
    pub value: Complex64,
    pub error_estimate: f64,
    /// (2 pi)^{-1} L(1/2, f) when the data carry it.
    pub reference: Option<Complex64>,
    pub evaluations: usize,
}

/// int_{1/N}^{1} f(iy) dy/y by adaptive Simpson in u = ln y.
pub fn hecke_integral(f: &NewformData, tol: f64) -> Result<HeckeIntegral, FormError> {
    let y_min = 1.0 / f.level as f64;
    let need = terms_needed(y_min, tol * 1e-2);
    if need > f.len() {
        return Err(FormError::InsufficientCoefficients { required: need, available: f.len() });
    }
    let mut evaluations = 0usize;
    let mut g = |u: f64| -> Result<Complex64, FormError> {
        evaluations += 1;
        Ok(evaluate(f, &Point { x: Coord::int(0), y: Coord::Real(u.exp()) }, tol * 1e-2)?.value)
    };
    let (a, b) = (y_min.ln(), 0.0);
    let (fa, fm, fb) = (g(a)?, g((a + b) / 2.0)?, g(b)?);
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    let mut err = 0.0;
    let value = simpson(&mut g, a, b, fa, fm, fb, whole, tol, 40, &mut err)?;
    Ok(HeckeIntegral { value, error_estimate: err, reference: f.l_half.map(|l| l / TAU), evaluations })
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    g: &mut dyn FnMut(f64) -> Result<Complex64, FormError>,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> Result<Complex64, FormError> {
    let m = (a + b) / 2.0;
    let (lm, rm) = (g((a + m) / 2.0)?, g((m + b) / 2.0)?);
    let left = (fa + lm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + rm * 4.0 + fb) * ((b - m) / 6.0);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        *err += delta.norm() / 15.0;
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson(g, a, m, fa, lm, fm, left, tol / 2.0, depth - 1, err)?
        + simpson(g, m, b, fm, rm, fb, right, tol / 2.0, depth - 1, err)?)
}

/// The same integral term by term: sum a_n n^{1/2} (e^{-2 pi n/N} - e^{-2 pi n}) / (2 pi n).
pub fn hecke_integral_series(f: &NewformData) -> Complex64 {
    let nf = f.level as f64;
    let terms: Vec<Complex64> = (1..=f.len())
        .map(|n| {
            let n_f = n as f64;
            f.a(n) * n_f.sqrt() * ((-TAU * n_f / nf).exp() - (-TAU * n_f).exp()) / (TAU * n_f)
        })
        .collect();
    pairwise_sum(&terms)
}

/// max Im(gamma z) over gamma in Gamma_0(N) with lower-left entry |c| <= c_max, and the bottom row
/// attaining it.
pub fn orbit_max_height(z: &Point, level: u64, c_max: i128) -> (f64, (i128, i128)) {
    let (x, y) = (z.x(), z.y());
    let n = level as i128;
    let mut best = (y, (0i128, 1i128));
    let mut c = n;
    // Im(gamma z) <= 1/(c^2 y), so larger c cannot win once that drops below the best
    while c <= c_max && 1.0 / ((c as f64).powi(2) * y) > best.0 {
        let centre = (-(c as f64) * x).round() as i128;
        for d in centre - 2..=centre + 2 {
            if c.gcd(&d) != 1 {
                continue;
            }
            let h = y / ((c as f64 * x + d as f64).powi(2) + (c as f64 * y).powi(2));
            if h > best.0 {
                best = (h, (c, d));
            }
        }
        c += n;
    }
    best
}

/// gamma z for the gamma in Gamma_0(N) (lower-left |c| <= c_max) maximizing Im; |f| is unchanged.
pub fn raise_in_orbit(z: &Point, level: u64, c_max: i128) -> Result<(Point, IntMat), FormError> {
    check_point(z)?;
    let (_, (c, d)) = orbit_max_height(z, level, c_max);
    let g = sl2_from_bottom_row(c, d).ok_or_else(|| FormError::Invalid("non-coprime bottom row".into()))?;
    Ok((z.act(&g)?, g))
}

/// A matrix in SL(2, Z) with bottom row (c, d), gcd(c, d) = 1.
pub fn sl2_from_bottom_row(c: i128, d: i128) -> Option<IntMat> {
    let g = d.extended_gcd(&c);
    if g.gcd.abs() != 1 {
        return None;
    }
    // a d - b c = 1 with a = x g, b = -y g
    Some([[g.x * g.gcd, -g.y * g.gcd], [c, d]])
}
