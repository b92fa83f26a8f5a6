//! Residue rings Z/p^c, unit groups with discrete logs, and truncated p-adic numbers.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::PadicError;

/// Moduli above this are rejected.
pub const MODULUS_LIMIT: u64 = 1 << 31;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if gcd(a, m) = 1.
pub fn inv_mod(a: i64, m: u64) -> Option<u64> {
    let m_i = m as i128;
    let (mut r0, mut r1) = (m_i, (a as i128).rem_euclid(m_i));
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(s0.rem_euclid(m_i) as u64)
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(mut n: i128, p: u64) -> u32 {
    assert!(n != 0, "valuation of zero");
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Distinct prime factors with exponents.
pub fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimePower {
    pub p: u64,
    pub c: u32,
    pub q: u64,
}

impl PrimePower {
    pub fn new(p: u64, c: u32) -> Result<Self, PadicError> {
        if !is_prime(p) {
            return Err(PadicError::NotPrime(p));
        }
        let mut q = 1u64;
        for _ in 0..c {
            q = q
                .checked_mul(p)
                .filter(|&q| q <= MODULUS_LIMIT)
                .ok_or(PadicError::ModulusTooLarge { p, c })?;
        }
        Ok(PrimePower { p, c, q })
    }

    /// Euler phi of p^c.
    pub fn phi(&self) -> u64 {
        if self.c == 0 {
            1
        } else {
            self.q / self.p * (self.p - 1)
        }
    }

    pub fn is_unit(&self, u: u64) -> bool {
        u % self.p != 0
    }
}

/// Cyclic unit group (Z/p^c)^x for odd p, with a full discrete-log table.
#[derive(Debug, Clone)]
pub struct UnitGroupTable {
    pub modulus: PrimePower,
    pub generator: u64,
    dlog: Vec<u32>,
    powers: Vec<u64>,
}

impl UnitGroupTable {
    pub fn order(&self) -> u64 {
        self.modulus.phi()
    }

    /// Discrete log of a unit (residue taken mod q).
    pub fn dlog(&self, u: u64) -> Option<u64> {
        let d = self.dlog[(u % self.modulus.q) as usize];
        (d != u32::MAX).then_some(d as u64)
    }

    /// g^k mod q.
    pub fn power(&self, k: u64) -> u64 {
        self.powers[(k % self.order()) as usize]
    }

    /// All units in increasing order.
    pub fn units(&self) -> impl Iterator<Item = u64> + '_ {
        let p = self.modulus.p;
        (1..self.modulus.q).filter(move |u| u % p != 0)
    }
}

/// Builds the unit group of Z/p^c with the smallest primitive root.
pub fn unit_group(p: u64, c: u32) -> Result<UnitGroupTable, PadicError> {
    if p == 2 {
        return Err(PadicError::EvenPrime);
    }
    if c == 0 {
        return Err(PadicError::ZeroExponent);
    }
    let modulus = PrimePower::new(p, c)?;
    let q = modulus.q;
    let phi = modulus.phi();
    let prime_factors: Vec<u64> = factor(phi).into_iter().map(|(r, _)| r).collect();
    // A primitive root mod p that is also one mod p^2 generates every (Z/p^c)^x.
    let generator = (2..q)
        .filter(|g| g % p != 0)
        .find(|&g| prime_factors.iter().all(|r| pow_mod(g, phi / r, q) != 1))
        .ok_or(PadicError::NoPrimitiveRoot(q))?;
    let mut dlog = vec![u32::MAX; q as usize];
    let mut powers = Vec::with_capacity(phi as usize);
    let mut x = 1u64;
    for k in 0..phi {
        dlog[x as usize] = k as u32;
        powers.push(x);
        x = mul_mod(x, generator, q);
    }
    debug_assert_eq!(x, 1);
    Ok(UnitGroupTable { modulus, generator, dlog, powers })
}

/// x = p^v * unit with unit known modulo p^K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncatedPAdic {
    pub p: u64,
    pub precision: u32,
    repr: Option<(i32, u64)>,
}

impl TruncatedPAdic {
    fn modulus(p: u64, k: u32) -> u64 {
        p.checked_pow(k).filter(|&m| m <= MODULUS_LIMIT).expect("precision modulus over limit")
    }

    pub fn zero(p: u64, precision: u32) -> Self {
        TruncatedPAdic { p, precision, repr: None }
    }

    pub fn from_parts(p: u64, precision: u32, valuation: i32, unit: u64) -> Result<Self, PadicError> {
        if precision == 0 {
            return Err(PadicError::ZeroPrecision);
        }
        let m = Self::modulus(p, precision);
        let unit = unit % m;
        if unit % p == 0 {
            return Err(PadicError::NotAUnit { unit, p });
        }
        Ok(TruncatedPAdic { p, precision, repr: Some((valuation, unit)) })
    }

    /// The rational num/den as a truncated p-adic number.
    pub fn from_rational(p: u64, precision: u32, num: i64, den: i64) -> Result<Self, PadicError> {
        if den == 0 {
            return Err(PadicError::ZeroDenominator);
        }
        if num == 0 {
            return Ok(Self::zero(p, precision));
        }
        let vn = valuation(num as i128, p) as i32;
        let vd = valuation(den as i128, p) as i32;
        let m = Self::modulus(p, precision);
        let pn = (p as i128).pow(vn as u32);
        let pd = (p as i128).pow(vd as u32);
        let un = ((num as i128 / pn).rem_euclid(m as i128)) as u64;
        let ud = ((den as i128 / pd).rem_euclid(m as i128)) as i64;
        let inv = inv_mod(ud, m).expect("unit denominator");
        Self::from_parts(p, precision, vn - vd, mul_mod(un, inv, m))
    }

    pub fn is_zero(&self) -> bool {
        self.repr.is_none()
    }

    pub fn valuation(&self) -> Option<i32> {
        self.repr.map(|(v, _)| v)
    }

    /// Unit part modulo p^K.
    pub fn unit(&self) -> Option<u64> {
        self.repr.map(|(_, u)| u)
    }

    pub fn neg(&self) -> Self {
        let m = Self::modulus(self.p, self.precision);
        TruncatedPAdic { repr: self.repr.map(|(v, u)| (v, m - u)), ..*self }
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, PadicError> {
        self.same_field(other)?;
        let k = self.precision.min(other.precision);
        let m = Self::modulus(self.p, k);
        Ok(match (self.repr, other.repr) {
            (Some((a, u)), Some((b, w))) => TruncatedPAdic {
                p: self.p,
                precision: k,
                repr: Some((a + b, mul_mod(u % m, w % m, m))),
            },
            _ => Self::zero(self.p, k),
        })
    }

    /// Sum; fails rather than return a result known to fewer than K digits.
    pub fn checked_add(&self, other: &Self) -> Result<Self, PadicError> {
        self.same_field(other)?;
        let k = self.precision.min(other.precision);
        let (x, y) = match (self.repr, other.repr) {
            (None, _) => return Ok(TruncatedPAdic { precision: k, ..*other }.reduce(k)),
            (_, None) => return Ok(TruncatedPAdic { precision: k, ..*self }.reduce(k)),
            (Some(x), Some(y)) => if x.0 <= y.0 { (x, y) } else { (y, x) },
        };
        let m = Self::modulus(self.p, k);
        let shift = (y.0 - x.0) as u32;
        let s = if shift >= k {
            x.1 % m
        } else {
            (x.1 % m + mul_mod(y.1 % m, self.p.pow(shift), m)) % m
        };
        if s % self.p == 0 {
            return Err(PadicError::PrecisionLoss { precision: k });
        }
        Ok(TruncatedPAdic { p: self.p, precision: k, repr: Some((x.0, s)) })
    }

    fn reduce(mut self, k: u32) -> Self {
        let m = Self::modulus(self.p, k);
        self.repr = self.repr.map(|(v, u)| (v, u % m));
        self.precision = k;
        self
    }

    fn same_field(&self, other: &Self) -> Result<(), PadicError> {
        if self.p != other.p {
            return Err(PadicError::PrimeMismatch(self.p, other.p));
        }
        Ok(())
    }

    /// The p-adic fractional part {x}_p as an exact rational in [0, 1).
    pub fn fractional_part(&self) -> Result<Ratio<i64>, PadicError> {
        match self.repr {
            None => Ok(Ratio::from_integer(0)),
            Some((v, _)) if v >= 0 => Ok(Ratio::from_integer(0)),
            Some((v, u)) => {
                let depth = (-v) as u32;
                if depth > self.precision {
                    return Err(PadicError::PrecisionLoss { precision: self.precision });
                }
                let den = self.p.pow(depth);
                Ok(Ratio::new((u % den) as i64, den as i64))
            }
        }
    }

    /// The rational p^v * unit, with the unit read as an integer in [0, p^K).
    pub fn to_rational(&self) -> Ratio<i128> {
        match self.repr {
            None => Ratio::from_integer(0),
            Some((v, u)) => {
                let pv = (self.p as i128).pow(v.unsigned_abs());
                if v >= 0 {
                    Ratio::from_integer(u as i128 * pv)
                } else {
                    Ratio::new(u as i128, pv)
                }
            }
        }
    }
}
