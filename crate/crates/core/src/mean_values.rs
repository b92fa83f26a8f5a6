//! Integrals over Gamma_0(N)\H: Petersson norms, the mean value M_chi, its domain average and
//! volume-normalized L^r norms.
//!
//! Gamma_0(N)\H is covered by gamma_j F_1 for right coset representatives gamma_j of Gamma_0(N) in
//! SL(2, Z). Each piece is integrated on F_1 in the coordinates (x, t = 1/y), where the hyperbolic
//! measure is dx dt, and cut where the local cusp height of gamma_j z reaches CUSP_HEIGHT.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::FormError;
use crate::modforms::{abs_fast, sl2_from_bottom_row, supnorm_scan, GridSpec, IntMat, NewformData, Point};
use crate::padic::factor;
use crate::summation::{gauss_legendre, pairwise_sum_real};

/// Local height at which a cusp piece is cut; |f|^2 there is below e^{-40 pi}.
pub const CUSP_HEIGHT: f64 = 10.0;
pub const MAX_LEVEL: u64 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosetSystem {
    pub level: u64,
    pub reps: Vec<IntMat>,
    pub index: usize,
}

/// [SL(2, Z) : Gamma_0(N)] = N prod_{p | N} (1 + 1/p).
pub fn gamma0_index(level: u64) -> usize {
    factor(level).iter().fold(level, |acc, &(p, _)| acc / p * (p + 1)) as usize
}

/// (c1 : d1) = (c2 : d2) in P^1(Z/N).
pub fn same_coset(level: u64, r1: (i128, i128), r2: (i128, i128)) -> bool {
    (r1.0 * r2.1 - r2.0 * r1.1).rem_euclid(level as i128) == 0
}

impl CosetSystem {
    /// Width N / gcd(c^2, N) of the cusp gamma(infinity) = a/c.
    pub fn width(&self, rep: &IntMat) -> u64 {
        let c = rep[1][0].unsigned_abs() as u64;
        let n = self.level;
        if c % n == 0 {
            return 1;
        }
        n / (c * c).gcd(&n)
    }

    /// Pairwise inequivalence of the bottom rows.
    pub fn is_complete(&self) -> bool {
        let rows: Vec<(i128, i128)> = self.reps.iter().map(|g| (g[1][0], g[1][1])).collect();
        rows.len() == self.index
            && (0..rows.len()).all(|i| (i + 1..rows.len()).all(|j| !same_coset(self.level, rows[i], rows[j])))
    }
}

/// Bottom rows (g, d) with g | N and d centred mod N; small rows keep Im(gamma z) away from zero.
pub fn coset_reps(level: u64) -> Result<CosetSystem, FormError> {
    if level == 0 || level > MAX_LEVEL {
        return Err(FormError::Invalid(format!("level {level} outside 1..={MAX_LEVEL}")));
    }
    let n = level as i128;
    let mut rows: Vec<(i128, i128)> = vec![(0, 1)];
    let divisors: Vec<i128> = (1..n).filter(|g| n % g == 0).collect();
    for &g in &divisors {
        for d in (-(n - 1) / 2)..=(n / 2) {
            if g.gcd(&d) != 1 || (g.gcd(&d.rem_euclid(n)).gcd(&n)) != 1 {
                continue;
            }
            if !rows.iter().any(|&r| same_coset(level, r, (g, d))) {
                rows.push((g, d));
            }
        }
    }
    let reps: Vec<IntMat> = rows
        .iter()
        .map(|&(c, d)| sl2_from_bottom_row(c, d).expect("coprime row"))
        .collect();
    let sys = CosetSystem { level, index: gamma0_index(level), reps };
    if sys.reps.len() != sys.index {
        return Err(FormError::Invalid(format!("found {} cosets, index is {}", sys.reps.len(), sys.index)));
    }
    Ok(sys)
}

pub fn volume(level: u64) -> f64 {
    gamma0_index(level) as f64 * PI / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss-Legendre nodes in x and in t = 1/y on each coset piece.
    pub nx: usize,
    pub nt: usize,
    /// Absolute tail tolerance for each evaluation of the form.
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nx: 40, nt: 40, tol: 1e-9 }
    }
}

impl QuadratureSpec {
    fn refined(&self) -> Self {
        QuadratureSpec { nx: self.nx * 3 / 2, nt: self.nt * 3 / 2, ..*self }
    }
}

fn mobius(g: &IntMat, z: Complex64) -> Complex64 {
    let [[a, b], [c, d]] = *g;
    (z * a as f64 + b as f64) / (z * c as f64 + d as f64)
}

/// sum_j int_{F_1} h(gamma_j z) dx dt, each piece cut at local cusp height CUSP_HEIGHT unless
/// `full` (for integrands without a q-expansion, like constants).
fn domain_integral(
    cosets: &CosetSystem,
    spec: &QuadratureSpec,
    full: bool,
    h: &(dyn Fn(Complex64) -> Result<f64, FormError> + Sync),
) -> Result<f64, FormError> {
    let (xn, xw) = gauss_legendre(spec.nx);
    let (tn, tw) = gauss_legendre(spec.nt);
    let tasks: Vec<(usize, usize)> =
        (0..cosets.reps.len()).flat_map(|j| (0..spec.nx).map(move |i| (j, i))).collect();
    let parts: Result<Vec<f64>, FormError> = tasks
        .par_iter()
        .map(|&(j, i)| {
            let g = &cosets.reps[j];
            let t_lo = if full { 0.0 } else { 1.0 / (CUSP_HEIGHT * cosets.width(g) as f64) };
            let x = 0.5 * xn[i];
            let t_hi = 1.0 / (1.0 - x * x).sqrt();
            let (mid, half) = ((t_hi + t_lo) / 2.0, (t_hi - t_lo) / 2.0);
            let mut acc = Vec::with_capacity(spec.nt);
            for k in 0..spec.nt {
                let t = mid + half * tn[k];
                let w = mobius(g, Complex64::new(x, 1.0 / t));
                acc.push(tw[k] * h(w)?);
            }
            Ok(0.5 * xw[i] * half * pairwise_sum_real(&acc))
        })
        .collect();
    Ok(pairwise_sum_real(&parts?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    /// On the refined rule.
    pub value: f64,
    /// On the base rule.
    pub coarse: f64,
    pub rel_change: f64,
}

fn refined_integral(
    cosets: &CosetSystem,
    spec: &QuadratureSpec,
    full: bool,
    h: &(dyn Fn(Complex64) -> Result<f64, FormError> + Sync),
) -> Result<QuadratureResult, FormError> {
    let value = domain_integral(cosets, spec, full, h)?;
    let refined = domain_integral(cosets, &spec.refined(), full, h)?;
    let rel_change = (refined - value).abs() / refined.abs().max(f64::MIN_POSITIVE);
    if rel_change > 0.01 {
        return Err(FormError::Refinement(rel_change));
    }
    Ok(QuadratureResult { value: refined, coarse: value, rel_change })
}

/// (f, f) = int_{Gamma_0(N)\H} |f|^2 dx dy / y^2.
pub fn petersson_norm(f: &NewformData, spec: &QuadratureSpec) -> Result<QuadratureResult, FormError> {
    let cosets = coset_reps(f.level)?;
    refined_integral(&cosets, spec, false, &|z| Ok(abs_fast(f, z, spec.tol)?.powi(2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LrOrder {
    Finite(f64),
    Infinity,
}

/// (vol^{-1} int |f|^r)^{1/r}; r = infinity is the sup-norm scan.
pub fn lr_norm(f: &NewformData, r: LrOrder, spec: &QuadratureSpec) -> Result<f64, FormError> {
    match r {
        LrOrder::Infinity => Ok(supnorm_scan(f, &GridSpec::for_level(f.level))?.max),
        LrOrder::Finite(r) => {
            if !(2.0..=64.0).contains(&r) {
                return Err(FormError::Invalid(format!("r = {r} outside [2, 64]")));
            }
            let cosets = coset_reps(f.level)?;
            let q = refined_integral(&cosets, spec, false, &|z| Ok(abs_fast(f, z, spec.tol)?.powf(r)))?;
            Ok((q.value / volume(f.level)).powf(1.0 / r))
        }
    }
}

/// The same normalization for an arbitrary Gamma_0(N)-invariant function, integrated over the
/// whole of each piece; lr_norm_of(N, |_| 1, r) = 1 calibrates the rule.
pub fn lr_norm_of(level: u64, g: &(dyn Fn(Complex64) -> f64 + Sync), r: f64, spec: &QuadratureSpec) -> Result<f64, FormError> {
    let cosets = coset_reps(level)?;
    let q = refined_integral(&cosets, spec, true, &|z| Ok(g(z).abs().powf(r)))?;
    Ok((q.value / volume(level)).powf(1.0 / r))
}

/// dim S_2(N, chi) by Cohen-Oesterle; chi is given by its values on Z/N and its conductor.
pub fn cusp_dimension_weight2(level: u64, chi: &dyn Fn(i128) -> Complex64, conductor: u64) -> usize {
    let n = level as i128;
    let index = gamma0_index(level) as f64;
    let mut lambda = 1.0;
    for (p, r) in factor(level) {
        let s = factor(conductor).iter().find(|f| f.0 == p).map_or(0, |f| f.1);
        let pf = p as f64;
        lambda *= if 2 * s <= r {
            if r % 2 == 0 {
                pf.powi(r as i32 / 2) + pf.powi(r as i32 / 2 - 1)
            } else {
                2.0 * pf.powi((r as i32 - 1) / 2)
            }
        } else {
            2.0 * pf.powi(r as i32 - s as i32)
        };
    }
    let sum_over = |poly: &dyn Fn(i128) -> i128| -> Complex64 {
        (0..n).filter(|&x| poly(x).rem_euclid(n) == 0).map(|x| chi(x)).sum()
    };
    let elliptic2 = sum_over(&|x| x * x + 1);
    let elliptic3 = sum_over(&|x| x * x + x + 1);
    let trivial = if conductor == 1 { 1.0 } else { 0.0 };
    let d = index / 12.0 - lambda / 2.0 - elliptic2.re / 4.0 - elliptic3.re / 3.0 + trivial;
    d.round().max(0.0) as usize
}

#[derive(Debug, Clone)]
pub struct BasisWithNorms {
    pub forms: Vec<NewformData>,
    pub norms: Vec<QuadratureResult>,
    pub expected_dim: usize,
}

impl BasisWithNorms {
    /// Computes the norms; the forms must share level and nebentypus.
    pub fn new(forms: Vec<NewformData>, spec: &QuadratureSpec) -> Result<Self, FormError> {
        let first = forms.first().ok_or_else(|| FormError::Invalid("empty basis".into()))?;
        let (level, neb) = (first.level, first.nebentypus.clone());
        if forms.iter().any(|f| f.level != level || f.nebentypus != neb) {
            return Err(FormError::Invalid("basis mixes levels or characters".into()));
        }
        let conductor: u64 = neb.parts.iter().map(|c| c.p().pow(c.conductor_exponent())).product();
        let expected_dim = cusp_dimension_weight2(level, &|x| neb.value(x), conductor);
        let norms = forms.iter().map(|f| petersson_norm(f, spec)).collect::<Result<Vec<_>, _>>()?;
        Ok(BasisWithNorms { forms, norms, expected_dim })
    }

    pub fn level(&self) -> u64 {
        self.forms[0].level
    }

    pub fn is_complete(&self) -> bool {
        self.forms.len() == self.expected_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MValue {
    pub value: f64,
    /// Only a lower bound: the basis is incomplete.
    pub partial: bool,
}

/// M_chi(z) = sum_i |f_i(z)|^2 / (f_i, f_i).
pub fn m_chi(z: &Point, basis: &BasisWithNorms, tol: f64) -> Result<MValue, FormError> {
    let mut value = 0.0;
    for (f, n) in basis.forms.iter().zip(&basis.norms) {
        value += abs_fast(f, z.to_complex(), tol)?.powi(2) / n.value;
    }
    Ok(MValue { value, partial: !basis.is_complete() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageReport {
    pub level: u64,
    pub average: f64,
    pub volume: f64,
    /// average * 4 pi.
    pub ratio_to_quarter_pi: f64,
    pub dimension: usize,
    pub partial: bool,
}

/// vol^{-1} int M_chi dmu, by the same quadrature as the norms.
pub fn domain_average(basis: &BasisWithNorms, spec: &QuadratureSpec) -> Result<AverageReport, FormError> {
    let level = basis.level();
    let cosets = coset_reps(level)?;
    let q = refined_integral(&cosets, spec, false, &|z| {
        let mut s = 0.0;
        for (f, n) in basis.forms.iter().zip(&basis.norms) {
            s += abs_fast(f, z, spec.tol)?.powi(2) / n.value;
        }
        Ok(s)
    })?;
    let vol = volume(level);
    let average = q.value / vol;
    Ok(AverageReport {
        level,
        average,
        volume: vol,
        ratio_to_quarter_pi: average * 4.0 * PI,
        dimension: basis.expected_dim,
        partial: !basis.is_complete(),
    })
}
