//! Whittaker newvector of a principal series chi1 boxplus chi2 of GL(2, Q_p).
//!
//! The newvector of the induced model is supported on B K0(p^c), where
//! f(g) = chi1(det g / D) chi2(D) |det g|^{1/2} |D|^{-1} whenever v(C) >= v(D) + c for the
//! bottom row (C, D) of g. Its Jacquet integral over x = p^{-j} u splits into finite unit sums
//! ("shells"); those sums are the oracle. Cells of B\G/K0(p^c) are a(y) and a(y) k_i with
//! k_i = [[p^i, 0], [p^i, 1]].

use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characters::{epsilon_w_at_identity, find_b, UnitaryCharacter};
use crate::error::LocalError;
use crate::padic::{valuation, TruncatedPAdic};
use crate::summation::{e_frac, pairwise_sum};

/// Shells above the cutoff must be below this, relative to |W(e)|.
pub const CUTOFF_TOL: f64 = 1e-8;
const DIRECT_LIMIT: u64 = 1 << 21;
const MAX_SHELL: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalSeries {
    pub chi1: UnitaryCharacter,
    pub chi2: UnitaryCharacter,
}

impl PrincipalSeries {
    /// chi1 must be unramified; chi2 carries the conductor p^c.
    pub fn new(chi1: UnitaryCharacter, chi2: UnitaryCharacter) -> Result<Self, LocalError> {
        if chi1.conductor_exponent() != 0 || chi1.p() != chi2.p() {
            return Err(LocalError::NotTwistMinimal);
        }
        Ok(PrincipalSeries { chi1, chi2 })
    }

    /// 1 boxplus chi.
    pub fn standard(chi: UnitaryCharacter) -> Result<Self, LocalError> {
        let one = UnitaryCharacter::unramified(chi.p(), Complex64::new(1.0, 0.0))?;
        Self::new(one, chi)
    }

    pub fn p(&self) -> u64 {
        self.chi2.p()
    }

    pub fn c(&self) -> u32 {
        self.chi2.conductor_exponent()
    }

    /// chi1^{-1} chi2, the character of the untwisted 1 boxplus chi.
    pub fn chi(&self) -> UnitaryCharacter {
        UnitaryCharacter {
            unit_part: self.chi2.unit_part.clone(),
            value_at_p: self.chi2.value_at_p / self.chi1.value_at_p,
        }
    }

    /// eta pi for an unramified eta.
    pub fn twist(&self, eta_at_p: Complex64) -> Self {
        let mut out = self.clone();
        out.chi1.value_at_p *= eta_at_p;
        out.chi2.value_at_p *= eta_at_p;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Diagonal,
    K(u32),
}

impl Cell {
    pub fn label(&self) -> String {
        match self {
            Cell::Diagonal => "diag".into(),
            Cell::K(i) => format!("k{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhittakerCell {
    pub y: TruncatedPAdic,
    pub cell: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedForm,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhittakerValue {
    pub value: Complex64,
    pub nonzero: bool,
    pub provenance: Provenance,
    /// Conductor exponent other than 2: derived support rule rather than the c = 2 statement.
    pub extrapolated: bool,
}

impl WhittakerValue {
    fn new(value: Complex64, provenance: Provenance, c: u32) -> Self {
        WhittakerValue { value, nonzero: value.norm() > 1e-12, provenance, extrapolated: c != 2 }
    }
}

fn y_parts(y: &TruncatedPAdic, c: u32) -> Result<Option<(i64, u64)>, LocalError> {
    if y.precision < c {
        return Err(LocalError::Padic(crate::error::PadicError::PrecisionLoss { precision: y.precision }));
    }
    Ok(y.valuation().map(|v| (v as i64, y.unit().unwrap())))
}

/// Finite-sum evaluation of the Jacquet integral on cells.
pub struct JacquetOracle {
    pi: PrincipalSeries,
    p: u64,
    c: u32,
    gauss: Vec<OnceLock<Result<Complex64, LocalError>>>,
    w_e: Complex64,
}

impl JacquetOracle {
    pub fn new(pi: &PrincipalSeries) -> Result<Self, LocalError> {
        let c = pi.c();
        if c == 0 {
            return Err(LocalError::UnsupportedCell { cell: "unramified", c });
        }
        let mut o = JacquetOracle {
            pi: pi.clone(),
            p: pi.p(),
            c,
            gauss: (0..MAX_SHELL).map(|_| OnceLock::new()).collect(),
            w_e: Complex64::new(1.0, 0.0),
        };
        o.w_e = o.raw(Cell::Diagonal, 0, 1)?;
        Ok(o)
    }

    /// Unnormalized W(e).
    pub fn w_identity(&self) -> Complex64 {
        self.w_e
    }

    fn sum_len(&self, j: i64) -> u32 {
        (self.c as i64).max(j).max(1) as u32
    }

    /// sum over units u mod p^L of chi2(u) e(-u/p^j), L = max(c, j).
    fn unrestricted(&self, j: i64) -> Result<Complex64, LocalError> {
        let idx = j.max(0) as usize;
        if idx >= MAX_SHELL {
            return Err(LocalError::NonConvergentShell { shell: j, size: f64::NAN });
        }
        self.gauss[idx].get_or_init(|| self.unrestricted_uncached(j.max(0))).clone()
    }

    fn unrestricted_uncached(&self, j: i64) -> Result<Complex64, LocalError> {
        let p = self.p;
        let l = self.sum_len(j);
        let m = p.checked_pow(l).unwrap_or(u64::MAX);
        if m <= DIRECT_LIMIT {
            let pj = if j > 0 { p.pow(j as u32) } else { 1 };
            let chi = &self.pi.chi2.unit_part;
            let terms: Vec<Complex64> = (1..m as i128)
                .filter(|u| u % p as i128 != 0)
                .map(|u| chi.value(u) * e_frac(-u, pj))
                .collect();
            return Ok(pairwise_sum(&terms));
        }
        // j > c: u = u0 + p^{j-1} t leaves chi2 fixed, so the sum carries the factor
        // sum_t e(-t/p); its size bounds the whole shell.
        let inner: Vec<Complex64> = (0..p as i128).map(|t| e_frac(-t, p)).collect();
        let bound = pairwise_sum(&inner).norm() * (p as f64).powi(l as i32 - 1);
        if bound > 1e-6 {
            return Err(LocalError::NonConvergentShell { shell: j, size: bound });
        }
        Ok(Complex64::new(0.0, 0.0))
    }

    /// sum over u mod p^L with u = -w mod p^r of chi2(u) e(-u/p^j).
    fn restricted(&self, j: i64, r: u32, w: u64) -> Complex64 {
        let p = self.p;
        let l = self.sum_len(j).max(r);
        let pr = p.pow(r) as i128;
        let start = (-(w as i128)).rem_euclid(pr);
        let count = p.pow(l - r) as i128;
        let pj = if j > 0 { p.pow(j as u32) } else { 1 };
        let chi = &self.pi.chi2.unit_part;
        let terms: Vec<Complex64> = (0..count)
            .map(|t| {
                let u = start + pr * t;
                chi.value(u) * e_frac(-u, pj)
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// Contribution of the shell v(x) = -j.
    fn shell(&self, cell: Cell, v: i64, w: u64, j: i64) -> Result<Complex64, LocalError> {
        let c = self.c as i64;
        let (d, sum) = match cell {
            Cell::Diagonal => {
                if j < c - v {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                (v, self.unrestricted(j)?)
            }
            Cell::K(i) => {
                let i = i as i64;
                let s = if j > -v {
                    if i >= c { Some(self.unrestricted(j)?) } else { None }
                } else if j < -v {
                    if j >= c - i - v { Some(self.unrestricted(j)?) } else { None }
                } else if c > i {
                    Some(self.restricted(j, (c - i) as u32, w))
                } else {
                    Some(self.unrestricted(j)?)
                };
                match s {
                    None => return Ok(Complex64::new(0.0, 0.0)),
                    Some(s) => (v + i, s),
                }
            }
        };
        let p = self.p as f64;
        let l = self.sum_len(j) as i32;
        let eta = self.pi.chi1.value_at_p;
        let theta = self.pi.chi2.value_at_p;
        let factor = eta.powi((d + j) as i32) * theta.powi(-(j as i32)) * p.powf(-(d as f64) / 2.0) * p.powi(-l);
        Ok(factor * sum)
    }

    /// Shell range [lo, hi] that can contribute; shells hi+1, hi+2 are checked to vanish.
    fn shell_range(&self, cell: Cell, v: i64) -> (i64, i64) {
        let c = self.c as i64;
        match cell {
            Cell::Diagonal => {
                let lo = c - v;
                (lo, lo.max(c))
            }
            Cell::K(i) if (i as i64) < c => (-v, -v),
            Cell::K(i) => (c - i as i64 - v, c.max(-v)),
        }
    }

    fn raw(&self, cell: Cell, v: i64, w: u64) -> Result<Complex64, LocalError> {
        let (lo, hi) = self.shell_range(cell, v);
        let mut parts = Vec::with_capacity((hi - lo + 1) as usize);
        for j in lo..=hi {
            parts.push(self.shell(cell, v, w, j)?);
        }
        let total = pairwise_sum(&parts);
        let scale = if self.w_e.norm() > 0.0 { self.w_e.norm() } else { total.norm().max(1e-300) };
        for j in hi + 1..=hi + 2 {
            let s = self.shell(cell, v, w, j)?.norm();
            if s > CUTOFF_TOL * scale {
                return Err(LocalError::NonConvergentShell { shell: j, size: s / scale });
            }
        }
        Ok(total)
    }

    /// W(a(p^v w) k) / W(e) on a cell, with w a unit.
    pub fn normalized(&self, cell: Cell, v: i64, w: u64) -> Result<Complex64, LocalError> {
        Ok(self.raw(cell, v, w)? / self.w_e)
    }

    pub fn eval(&self, cell: &WhittakerCell) -> Result<WhittakerValue, LocalError> {
        let value = match y_parts(&cell.y, self.c)? {
            None => Complex64::new(0.0, 0.0),
            Some((v, w)) => self.normalized(cell.cell, v, w)?,
        };
        Ok(WhittakerValue::new(value, Provenance::Oracle, self.c))
    }
}

/// One-shot oracle evaluation of W_o on a cell.
pub fn jacquet_oracle(pi: &PrincipalSeries, cell: &WhittakerCell) -> Result<WhittakerValue, LocalError> {
    JacquetOracle::new(pi)?.eval(cell)
}

/// W_o(a(y)) = chi1(y) |y|^{1/2} 1_{Z_p}(y).
pub fn w_diag(pi: &PrincipalSeries, y: &TruncatedPAdic) -> Result<WhittakerValue, LocalError> {
    let c = pi.c();
    let value = match y.valuation() {
        Some(v) if v >= 0 => {
            pi.chi1.value_at_p.powi(v) * (pi.p() as f64).powf(-(v as f64) / 2.0)
        }
        _ => Complex64::new(0.0, 0.0),
    };
    Ok(WhittakerValue::new(value, Provenance::ClosedForm, c))
}

fn require_c2(pi: &PrincipalSeries, cell: &'static str) -> Result<(), LocalError> {
    match pi.c() {
        2 => Ok(()),
        c => Err(LocalError::UnsupportedCell { cell, c }),
    }
}

/// W_o(a(y) k_0) = chi1(y) p^{-1} |y|^{1/2} chi(-y) psi(y) eps0 1_{p^{-2} Z_p}(y),
/// with chi = chi1^{-1} chi2 and eps0 = 1 / (p W_{1 boxplus chi}(e)).
pub fn w_cell0(pi: &PrincipalSeries, y: &TruncatedPAdic) -> Result<WhittakerValue, LocalError> {
    require_c2(pi, "k0")?;
    let p = pi.p();
    let zero = WhittakerValue::new(Complex64::new(0.0, 0.0), Provenance::ClosedForm, 2);
    let Some((v, w)) = y_parts(y, 2)? else { return Ok(zero) };
    if v < -2 {
        return Ok(zero);
    }
    let chi = pi.chi();
    let eps0 = 1.0 / (p as f64 * epsilon_w_at_identity(&chi)?.value);
    let frac = y.fractional_part()?;
    let psi = e_frac(*frac.numer() as i128, *frac.denom() as u64);
    let value = pi.chi1.value_at_p.powi(v as i32)
        * (p as f64).powf(-1.0 - v as f64 / 2.0)
        * chi.eval(v, -(w as i128))
        * psi
        * eps0;
    Ok(WhittakerValue::new(value, Provenance::ClosedForm, 2))
}

/// W_o(a(y) k_1) = chi1(p y) p^{1/2} if v(y) = -2 and p^2 y = b mod p, else 0.
pub fn w_cell1(pi: &PrincipalSeries, y: &TruncatedPAdic) -> Result<WhittakerValue, LocalError> {
    require_c2(pi, "k1")?;
    let p = pi.p();
    let (b, _) = find_b(&pi.chi2.unit_part)?;
    let value = match y_parts(y, 2)? {
        Some((-2, w)) if w % p == b => pi.chi1.value_at_p.powi(-1) * (p as f64).sqrt(),
        _ => Complex64::new(0.0, 0.0),
    };
    Ok(WhittakerValue::new(value, Provenance::ClosedForm, 2))
}

/// Closed form on any cell where one is available.
pub fn closed_form(pi: &PrincipalSeries, cell: &WhittakerCell) -> Result<WhittakerValue, LocalError> {
    let c = pi.c();
    match cell.cell {
        Cell::Diagonal => w_diag(pi, &cell.y),
        Cell::K(i) if i >= c => {
            // a(y) k_i = a(y p^i) [[1, 0], [p^i, 1]] and the last factor lies in K0(p^c)
            let y = match (cell.y.valuation(), cell.y.unit()) {
                (Some(v), Some(u)) => TruncatedPAdic::from_parts(pi.p(), cell.y.precision, v + i as i32, u)?,
                _ => cell.y,
            };
            w_diag(pi, &y)
        }
        Cell::K(0) => w_cell0(pi, &cell.y),
        Cell::K(1) => w_cell1(pi, &cell.y),
        Cell::K(_) => Err(LocalError::UnsupportedCell { cell: "k_i", c }),
    }
}

/// Unramified case: W(a(p^k)) = p^{-k/2} sum_{i=0}^{k} alpha^i beta^{k-i}.
pub fn unramified_value(p: u64, alpha: Complex64, beta: Complex64, k: u32) -> Complex64 {
    let s: Complex64 = (0..=k).map(|i| alpha.powi(i as i32) * beta.powi((k - i) as i32)).sum();
    s * (p as f64).powf(-(k as f64) / 2.0)
}

/// sup over k of |W(a(p^k))| for unitary Satake parameters; terms beyond (k+1) p^{-k/2} < 1 cannot win.
pub fn unramified_h(p: u64, alpha: Complex64, beta: Complex64) -> f64 {
    let mut best = 1.0f64;
    let mut k = 1u32;
    while (k as f64 + 1.0) * (p as f64).powf(-(k as f64) / 2.0) > best {
        best = best.max(unramified_value(p, alpha, beta, k).norm());
        k += 1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HMethod {
    ClosedForm,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HResult {
    pub h: f64,
    pub cell: Option<Cell>,
    pub v: Option<i64>,
    pub unit: Option<u64>,
    pub extrapolated: bool,
}

/// Search window for the exhaustive h: v(y) in [v_min, v_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HWindow {
    pub below: i64,
    pub above: i64,
}

impl Default for HWindow {
    fn default() -> Self {
        HWindow { below: 2, above: 2 }
    }
}

pub fn h_closed_form(p: u64, c: u32) -> f64 {
    (p as f64).powf((c / 2) as f64 / 2.0)
}

/// Max of |W_o| over cells diag, k_0..k_c, v(y) in [-(c + below), above], units mod p^c.
pub fn h_exhaustive(pi: &PrincipalSeries, window: HWindow) -> Result<HResult, LocalError> {
    let c = pi.c();
    let p = pi.p();
    if c == 0 {
        let h = unramified_h(p, pi.chi1.value_at_p, pi.chi2.value_at_p);
        return Ok(HResult { h, cell: Some(Cell::Diagonal), v: None, unit: None, extrapolated: false });
    }
    let oracle = JacquetOracle::new(pi)?;
    let q = p.pow(c);
    let mut tasks = Vec::new();
    for cell in std::iter::once(Cell::Diagonal).chain((0..=c).map(Cell::K)) {
        for v in -(c as i64 + window.below)..=window.above {
            let units: Vec<u64> = match cell {
                Cell::Diagonal => vec![1],
                Cell::K(i) if i >= c => vec![1],
                _ => (1..q).filter(|u| u % p != 0).collect(),
            };
            for w in units {
                tasks.push((cell, v, w));
            }
        }
    }
    let values: Result<Vec<(f64, Cell, i64, u64)>, LocalError> = tasks
        .par_iter()
        .map(|&(cell, v, w)| Ok((oracle.normalized(cell, v, w)?.norm(), cell, v, w)))
        .collect();
    let best = values?
        .into_iter()
        .fold((0.0, Cell::Diagonal, 0, 1), |a, b| if b.0 > a.0 + 1e-12 { b } else { a });
    Ok(HResult { h: best.0, cell: Some(best.1), v: Some(best.2), unit: Some(best.3), extrapolated: c != 2 })
}

/// h(pi) by either method; the exhaustive search is cross-checked against the closed form.
pub fn h_invariant(pi: &PrincipalSeries, method: HMethod) -> Result<HResult, LocalError> {
    let closed = h_closed_form(pi.p(), pi.c());
    match method {
        HMethod::ClosedForm => Ok(HResult { h: closed, cell: None, v: None, unit: None, extrapolated: false }),
        HMethod::Exhaustive => {
            let r = h_exhaustive(pi, HWindow::default())?;
            if (r.h - closed).abs() > 1e-8 {
                return Err(LocalError::MethodsDisagree { closed, exhaustive: r.h });
            }
            Ok(r)
        }
    }
}

/// h(eta pi) = h(pi), both computed exhaustively.
pub fn unramified_twist_invariance(pi: &PrincipalSeries, eta_at_p: Complex64) -> Result<bool, LocalError> {
    let a = h_exhaustive(pi, HWindow::default())?.h;
    let b = h_exhaustive(&pi.twist(eta_at_p), HWindow::default())?.h;
    Ok((a - b).abs() <= 1e-8)
}

/// 2x2 matrix over Q.
pub type Mat = [[Ratio<i128>; 2]; 2];

pub fn mat(a: i128, b: i128, c: i128, d: i128) -> Mat {
    [[Ratio::from_integer(a), Ratio::from_integer(b)], [Ratio::from_integer(c), Ratio::from_integer(d)]]
}

pub fn mat_mul(x: &Mat, y: &Mat) -> Mat {
    let e = |i: usize, j: usize| x[i][0] * y[0][j] + x[i][1] * y[1][j];
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn rat_val_unit(x: Ratio<i128>, p: u64, k: u32) -> Option<(i64, u64)> {
    if *x.numer() == 0 {
        return None;
    }
    let vn = valuation(*x.numer(), p) as i64;
    let vd = valuation(*x.denom(), p) as i64;
    let m = p.pow(k) as i128;
    let n = (*x.numer() / (p as i128).pow(vn as u32)).rem_euclid(m);
    let d = (*x.denom() / (p as i128).pow(vd as u32)).rem_euclid(m);
    let inv = crate::padic::inv_mod(d as i64, m as u64).unwrap() as i128;
    Some((vn - vd, (n * inv % m) as u64))
}

/// Integration box for the general-matrix oracle: x in p^{-outer} Z_p, resolved mod p^depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub outer: u32,
    pub depth: u32,
}

/// Box-sum of the Jacquet integral for an arbitrary g, unnormalized.
/// Independent of the shell bookkeeping: used to test equivariance and the cell reduction.
pub fn jacquet_matrix_oracle(pi: &PrincipalSeries, g: &Mat, window: Window) -> Result<Complex64, LocalError> {
    let a = box_sum(pi, g, window.outer, window.depth, None);
    let b = box_sum(pi, g, window.outer, window.depth + 1, None);
    let scale = a.norm().max(b.norm()).max(1e-3);
    if (a - b).norm() > 1e-10 * scale {
        return Err(LocalError::WindowTooSmall((a - b).norm()));
    }
    for j in window.outer + 1..=window.outer + 2 {
        let s = box_sum(pi, g, j, window.depth, Some(j)).norm();
        if s > 1e-10 * scale {
            return Err(LocalError::WindowTooSmall(s));
        }
    }
    Ok(a)
}

/// Sum over x = m / p^outer, m mod p^{outer + depth}; `only_shell` restricts to v(x) = -j.
fn box_sum(pi: &PrincipalSeries, g: &Mat, outer: u32, depth: u32, only_shell: Option<u32>) -> Complex64 {
    let p = pi.p();
    let c = pi.c() as i64;
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let (vdet, _) = rat_val_unit(det, p, 1).expect("singular matrix");
    let count = p.pow(outer + depth) as i128;
    let pj = Ratio::from_integer((p as i128).pow(outer));
    let prec = (c as u32).max(1);
    let eta = pi.chi1.value_at_p;
    let terms: Vec<Complex64> = (0..count)
        .into_par_iter()
        .filter_map(|m| {
            if let Some(j) = only_shell {
                if m % p as i128 == 0 || j != outer {
                    return None;
                }
            }
            let x = Ratio::from_integer(m) / pj;
            let cc = g[0][0] + x * g[1][0];
            let dd = g[0][1] + x * g[1][1];
            let (vd, ud) = rat_val_unit(dd, p, prec)?;
            if let Some((vc, _)) = rat_val_unit(cc, p, 1) {
                if vc < vd + c {
                    return None;
                }
            }
            let f = eta.powi((vdet - vd) as i32)
                * pi.chi2.eval(vd, ud as i128)
                * (p as f64).powf(-(vdet as f64) / 2.0 + vd as f64);
            let frac = if m == 0 { 0 } else { m % (p as i128).pow(outer) };
            Some(f * e_frac(-frac, p.pow(outer)))
        })
        .collect();
    pairwise_sum(&terms) * (p as f64).powi(-(depth as i32))
}
