//! Dirichlet characters mod p^c, unitary characters of Q_p^x, Gauss sums and epsilon factors.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CharError, PadicError};
use crate::padic::{inv_mod, unit_group, PrimePower, UnitGroupTable};
use crate::summation::{e_frac, pairwise_sum};

/// Absolute tolerance for sums that must vanish, relative to their natural scale.
pub const SHELL_TOL: f64 = 1e-12;

/// Serialized form of a character: enough to rebuild it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSpec {
    pub p: u64,
    pub c: u32,
    pub dlog_multiplier: u64,
    pub generator: u64,
}

/// u -> e(k dlog(u) / phi(p^c)).
#[derive(Debug, Clone)]
pub struct DirichletChar {
    pub modulus: PrimePower,
    pub dlog_multiplier: u64,
    table: Option<Arc<UnitGroupTable>>,
    conductor_exp: u32,
}

impl PartialEq for DirichletChar {
    fn eq(&self, other: &Self) -> bool {
        self.modulus == other.modulus && self.dlog_multiplier == other.dlog_multiplier
    }
}

impl DirichletChar {
    pub fn new(table: Arc<UnitGroupTable>, k: u64) -> Self {
        let modulus = table.modulus;
        let phi = modulus.phi();
        let k = k % phi;
        let conductor_exp = if k == 0 {
            0
        } else {
            (1..=modulus.c).find(|&c0| k % modulus.p.pow(modulus.c - c0) == 0).unwrap()
        };
        DirichletChar { modulus, dlog_multiplier: k, table: Some(table), conductor_exp }
    }

    /// Trivial character on Z_p^x (modulus p^0).
    pub fn trivial(p: u64) -> Result<Self, PadicError> {
        Ok(DirichletChar {
            modulus: PrimePower::new(p, 0)?,
            dlog_multiplier: 0,
            table: None,
            conductor_exp: 0,
        })
    }

    pub fn from_spec(spec: &CharSpec) -> Result<Self, CharError> {
        if spec.c == 0 {
            return Ok(Self::trivial(spec.p)?);
        }
        let table = Arc::new(unit_group(spec.p, spec.c)?);
        if table.generator != spec.generator {
            return Err(CharError::Padic(PadicError::NoPrimitiveRoot(spec.generator)));
        }
        Ok(Self::new(table, spec.dlog_multiplier))
    }

    pub fn spec(&self) -> CharSpec {
        CharSpec {
            p: self.modulus.p,
            c: self.modulus.c,
            dlog_multiplier: self.dlog_multiplier,
            generator: self.table.as_ref().map_or(1, |t| t.generator),
        }
    }

    pub fn p(&self) -> u64 {
        self.modulus.p
    }

    pub fn table(&self) -> Option<&Arc<UnitGroupTable>> {
        self.table.as_ref()
    }

    pub fn conductor_exponent(&self) -> u32 {
        self.conductor_exp
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor_exp == self.modulus.c
    }

    /// chi(-1) = (-1)^k.
    pub fn is_even(&self) -> bool {
        self.dlog_multiplier % 2 == 0
    }

    /// Order of chi as an element of the character group.
    pub fn order(&self) -> u64 {
        let phi = self.modulus.phi();
        phi / gcd(phi, self.dlog_multiplier)
    }

    /// chi(u) for an integer u; zero on non-units when the modulus is nontrivial.
    pub fn value(&self, u: i128) -> Complex64 {
        match &self.table {
            None => Complex64::new(1.0, 0.0),
            Some(t) => {
                let q = self.modulus.q as i128;
                match t.dlog(u.rem_euclid(q) as u64) {
                    None => Complex64::new(0.0, 0.0),
                    Some(d) => {
                        let phi = self.modulus.phi();
                        e_frac((self.dlog_multiplier as u128 * d as u128 % phi as u128) as i128, phi)
                    }
                }
            }
        }
    }

    pub fn conj(&self) -> Self {
        let phi = self.modulus.phi().max(1);
        DirichletChar { dlog_multiplier: (phi - self.dlog_multiplier % phi) % phi, ..self.clone() }
    }

    /// The same character viewed modulo p^c for c at least the current exponent.
    pub fn lift(&self, c: u32) -> Result<Self, CharError> {
        if c == self.modulus.c {
            return Ok(self.clone());
        }
        if c < self.modulus.c {
            return Err(CharError::ConductorTooSmall { need: self.modulus.c, got: c });
        }
        let table = Arc::new(unit_group(self.modulus.p, c)?);
        let Some(small) = &self.table else {
            return Ok(Self::new(table, 0));
        };
        // g_c reduces to g_a^t modulo p^a
        let t = small.dlog(table.generator % small.modulus.q).unwrap();
        let ratio = table.order() / small.order();
        let k = (self.dlog_multiplier as u128 * t as u128 % small.order() as u128) as u64 * ratio;
        Ok(Self::new(table, k))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, CharError> {
        let c = self.modulus.c.max(other.modulus.c);
        let a = self.lift(c)?;
        let b = other.lift(c)?;
        match &a.table {
            None => Ok(a),
            Some(t) => Ok(Self::new(t.clone(), a.dlog_multiplier + b.dlog_multiplier)),
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// All characters mod p^c, optionally restricted to primitive and/or even ones.
pub fn enumerate_chars(modulus: PrimePower, primitive_only: bool, even_only: bool) -> Result<Vec<DirichletChar>, CharError> {
    if modulus.c == 0 {
        return Ok(vec![DirichletChar::trivial(modulus.p)?]);
    }
    let table = Arc::new(unit_group(modulus.p, modulus.c)?);
    Ok((0..modulus.phi())
        .map(|k| DirichletChar::new(table.clone(), k))
        .filter(|chi| !primitive_only || chi.is_primitive())
        .filter(|chi| !even_only || chi.is_even())
        .collect())
}

/// tau(chi) = sum over units u mod p^c of chi(u) e(u/p^c).
pub fn gauss_sum(chi: &DirichletChar) -> Complex64 {
    let q = chi.modulus.q;
    let terms: Vec<Complex64> = (1..q as i128).map(|u| chi.value(u) * e_frac(u, q)).collect();
    pairwise_sum(&terms)
}

/// Character of Q_p^x: p^v u -> value_at_p^v chi(u).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryCharacter {
    pub unit_part: DirichletChar,
    pub value_at_p: Complex64,
}

impl UnitaryCharacter {
    pub fn new(unit_part: DirichletChar, value_at_p: Complex64) -> Result<Self, CharError> {
        if (value_at_p.norm() - 1.0).abs() > 1e-14 {
            return Err(CharError::NotUnitary(value_at_p.norm()));
        }
        Ok(UnitaryCharacter { unit_part, value_at_p })
    }

    pub fn unramified(p: u64, value_at_p: Complex64) -> Result<Self, CharError> {
        Self::new(DirichletChar::trivial(p)?, value_at_p)
    }

    pub fn p(&self) -> u64 {
        self.unit_part.p()
    }

    pub fn conductor_exponent(&self) -> u32 {
        self.unit_part.conductor_exponent()
    }

    /// chi(p^v u).
    pub fn eval(&self, v: i64, u: i128) -> Complex64 {
        self.value_at_p.powi(v as i32) * self.unit_part.value(u)
    }

    pub fn inverse(&self) -> Self {
        UnitaryCharacter { unit_part: self.unit_part.conj(), value_at_p: self.value_at_p.inv() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, CharError> {
        Ok(UnitaryCharacter {
            unit_part: self.unit_part.mul(&other.unit_part)?,
            value_at_p: self.value_at_p * other.value_at_p,
        })
    }
}

/// W(e) of the Jacquet integral for 1 boxplus chi; the one epsilon convention used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonFactor {
    pub value: Complex64,
    pub convention: &'static str,
}

pub const EPSILON_CONVENTION: &str = "W(e) = int chi(x) conj(psi(x)) dx/|x|, psi_p(x) = e({x}_p)";

/// One shell of the W(e) integral: int over p^{-j} Z_p^x of chi(x) conj(psi(x)) dx/|x|.
pub fn epsilon_shell(chi: &UnitaryCharacter, j: i64) -> Complex64 {
    let p = chi.p();
    let c = chi.unit_part.modulus.c as i64;
    let l = c.max(j).max(1) as u32;
    let m = p.pow(l);
    let pj = if j > 0 { p.pow(j as u32) } else { 1 };
    let terms: Vec<Complex64> = (1..m as i128)
        .filter(|u| u % p as i128 != 0)
        .map(|u| chi.unit_part.value(u) * e_frac(-u, pj))
        .collect();
    chi.value_at_p.powi(-(j as i32)) * pairwise_sum(&terms) / m as f64
}

pub fn epsilon_w_at_identity(chi: &UnitaryCharacter) -> Result<EpsilonFactor, CharError> {
    let c = chi.conductor_exponent();
    if c < 2 {
        return Err(CharError::ConductorTooSmall { need: 2, got: c });
    }
    let p = chi.p();
    let scale = (p as f64).powf(-(c as f64) / 2.0);
    for j in (2..c as i64).chain([c as i64 + 1, c as i64 + 2]) {
        let s = epsilon_shell(chi, j).norm();
        if s > SHELL_TOL * scale.max(1e-300) {
            return Err(CharError::ShellNotVanishing { shell: j, size: s });
        }
    }
    Ok(EpsilonFactor { value: epsilon_shell(chi, c as i64), convention: EPSILON_CONVENTION })
}

/// The b in (Z/p)^x with chi(1 - pz) = e(bz/p), together with a = b^{-1} mod p.
pub fn find_b(chi: &DirichletChar) -> Result<(u64, u64), CharError> {
    let p = chi.p();
    if chi.modulus.c != 2 || !chi.is_primitive() {
        return Err(CharError::NotPrimitive(chi.modulus.q));
    }
    let pi = p as i128;
    let b = (1..p)
        .find(|&b| (0..pi).all(|z| (chi.value(1 - pi * z) - e_frac(b as i128 * z, p)).norm() < 1e-12))
        .ok_or(CharError::NoB)?;
    let a = inv_mod(b as i64, p).ok_or(CharError::NoB)?;
    Ok((b, a))
}
