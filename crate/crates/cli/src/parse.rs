//! Value parsers for lists, characters and points.

use wlab_core::modforms::{Coord, Point};
use wlab_core::padic::is_prime;
use wlab_core::Ratio;

/// Parsed list; an alias so clap takes one value per flag.
pub type List = Vec<u64>;

/// `3,5,7`, `3..7` (inclusive), mixtures of both, or the empty string for an empty list.
pub fn u64_list(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in {part:?}"))?;
                let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in {part:?}"))?;
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| format!("not an integer: {part:?}"))?),
        }
    }
    Ok(out)
}

/// Odd primes of a list; ranges like `3..7` keep only the primes.
pub fn prime_list(s: &str) -> Result<Vec<u64>, String> {
    let explicit: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty() && !p.contains("..")).collect();
    for e in &explicit {
        let n: u64 = e.parse().map_err(|_| format!("not an integer: {e:?}"))?;
        if !is_prime(n) || n == 2 {
            return Err(format!("{n} is not an odd prime"));
        }
    }
    Ok(u64_list(s)?.into_iter().filter(|&n| n != 2 && is_prime(n)).collect())
}

pub fn f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| format!("not a number: {p:?}")))
        .collect()
}

/// A character mod p^c by its dlog multiplier: `k4` or `4`.
pub fn char_id(s: &str) -> Result<u64, String> {
    s.trim().trim_start_matches('k').parse().map_err(|_| format!("character should look like k4, got {s:?}"))
}

/// `a/b`, an integer, or a decimal.
pub fn coord(s: &str) -> Result<Coord, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: i128 = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Coord::Rational(Ratio::new(n, d)));
    }
    if let Ok(n) = s.parse::<i128>() {
        return Ok(Coord::int(n));
    }
    s.parse::<f64>().map(Coord::Real).map_err(|_| format!("not a coordinate: {s:?}"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointSpec {
    ZChi,
    ZChiPrime,
    Peak,
    Grid,
    At(Point),
}

impl PointSpec {
    pub fn name(&self) -> String {
        match self {
            PointSpec::ZChi => "zchi".into(),
            PointSpec::ZChiPrime => "zchi-prime".into(),
            PointSpec::Peak => "peak".into(),
            PointSpec::Grid => "grid".into(),
            PointSpec::At(p) => format!("{}:{}", show(&p.x), show(&p.y)),
        }
    }
}

fn show(c: &Coord) -> String {
    match c {
        Coord::Rational(r) if *r.denom() == 1 => r.numer().to_string(),
        Coord::Rational(r) => format!("{}/{}", r.numer(), r.denom()),
        Coord::Real(x) => x.to_string(),
    }
}

/// Comma-separated `zchi`, `zchi-prime`, `peak`, `grid` or `X:Y`.
pub fn points(s: &str) -> Result<Vec<PointSpec>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| match p {
            "zchi" => Ok(PointSpec::ZChi),
            "zchi-prime" => Ok(PointSpec::ZChiPrime),
            "peak" => Ok(PointSpec::Peak),
            "grid" => Ok(PointSpec::Grid),
            other => {
                let (x, y) = other.split_once(':').ok_or_else(|| format!("unknown point {other:?}"))?;
                Ok(PointSpec::At(Point { x: coord(x)?, y: coord(y)? }))
            }
        })
        .collect()
}

/// `lo:hi:n` for n log-spaced values, or an explicit list.
pub fn grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| format!("bad grid start {lo:?}"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| format!("bad grid end {hi:?}"))?;
            let n: usize = n.trim().parse().map_err(|_| format!("bad grid size {n:?}"))?;
            if !(lo > 0.0 && hi >= lo) || n == 0 {
                return Err(format!("grid {s:?} needs 0 < lo <= hi and n >= 1"));
            }
            Ok(if n == 1 { vec![lo] } else { wlab_core::whittaker_arch::log_grid(lo, hi, n) })
        }
        [_] => f64_list(s),
        _ => Err(format!("grid should be lo:hi:n or a list, got {s:?}")),
    }
}
