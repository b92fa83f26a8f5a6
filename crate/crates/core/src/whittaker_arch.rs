//! Archimedean Whittaker functions: max |W| / (W, W)^{1/2} for discrete series and
//! principal series of PGL(2, R), and the W_{1/2, ir} case with nontrivial central character.
//!
//! Large imaginary order is handled in scaled form: K~_{ir}(x) = e^{pi r / 2} K_{ir}(x) by a
//! contour-shifted trapezoid rule, and e^{pi r / 2} W_{1/2, ir}(x) by integrating the Whittaker
//! equation inward from the recessive side and fixing the scale from the small-x amplitude.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::ArchError;

pub const REFINE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchRepresentation {
    Discrete { k: u32 },
    PrincipalTrivialCentral { r: f64 },
    PrincipalNontrivialCentral { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchRatio {
    /// log max |W| (scaled by e^{pi r / 2} for principal series).
    pub log_max: f64,
    /// log (W, W) (scaled by e^{pi r} for principal series).
    pub log_norm: f64,
    pub argmax_y: f64,
    pub ratio: f64,
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (a.abs() + b.abs()).max(1e-300) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Weight k lowest vector W(a(y)) = y^{k/2} e^{-2 pi y}.
pub fn discrete_series(k: u32) -> Result<ArchRatio, ArchError> {
    if k < 2 || k % 2 != 0 {
        return Err(ArchError::OutOfRange(format!("weight {k} must be even and at least 2")));
    }
    let k = k as f64;
    let y = k / (4.0 * PI);
    let log_max = k / 2.0 * y.ln() - k / 2.0;
    let log_norm = -k * (4.0 * PI).ln() + ln_gamma(k);
    Ok(ArchRatio { log_max, log_norm, argmax_y: y, ratio: (log_max - log_norm / 2.0).exp() })
}

/// Numeric argmax of y^{k/2} e^{-2 pi y}, for checking the analytic location: bisection on the
/// sign of the log-derivative, since a bracketing search on the flat top stalls near sqrt(eps).
pub fn discrete_series_argmax_numeric(k: u32) -> f64 {
    let k = k as f64;
    let slope = |y: f64| k / (2.0 * y) - TAU;
    let (mut lo, mut hi) = (1e-6, 10.0 * k);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Contour shift delta for K~_{ir}(x): keeps the integrand within e^{slack} of the result.
fn bessel_shift(r: f64, x: f64, slack: f64) -> f64 {
    let g = |d: f64| r * d - x * d.sin();
    let (d0, g0) = if x > r { let d = (r / x).acos(); (d, g(d)) } else { (0.0, 0.0) };
    if g(FRAC_PI_2) <= g0 + slack {
        return FRAC_PI_2;
    }
    let (mut lo, mut hi) = (d0, FRAC_PI_2);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= g0 + slack { lo = mid } else { hi = mid }
    }
    lo.max(1e-6)
}

fn bessel_trapezoid(r: f64, x: f64, delta: f64, h: f64, t_max: f64) -> f64 {
    let (sd, cd) = delta.sin_cos();
    let f = |t: f64| {
        let mag = -x * sd * t.cosh() + r * delta;
        let phase = -x * cd * t.sinh() + r * t;
        mag.exp() * phase.cos()
    };
    let n = (t_max / h).ceil() as usize;
    let mut acc = 0.5 * f(0.0);
    let mut comp = 0.0;
    for k in 1..=n {
        // Kahan-compensated accumulation
        let term = f(k as f64 * h) - comp;
        let next = acc + term;
        comp = (next - acc) - term;
        acc = next;
    }
    acc * h
}

/// e^{pi r / 2} K_{ir}(x) for r >= 0, x > 0.
pub fn scaled_bessel_k(r: f64, x: f64) -> Result<f64, ArchError> {
    if x <= 0.0 || r < 0.0 || r > 500.0 {
        return Err(ArchError::OutOfRange(format!("r = {r}, x = {x}")));
    }
    let delta = bessel_shift(r, x, 4.0);
    let sd = delta.sin();
    // e^{-x sin(delta) cosh t + r delta} < e^{-46} beyond t_max
    let t_max = ((46.0 + r * delta).max(1.0) * 2.0 / (x * sd)).max(2.0).acosh().max(1.0);
    let omega = r.max(x * delta.cos() * t_max.cosh());
    let mut h = (0.25f64).min(TAU / (12.0 * omega));
    let mut prev = bessel_trapezoid(r, x, delta, h, t_max);
    for _ in 0..6 {
        h /= 2.0;
        let cur = bessel_trapezoid(r, x, delta, h, t_max);
        let scale = cur.abs().max(1e-300);
        if (cur - prev).abs() <= REFINE_TOL * scale || (cur - prev).abs() < 1e-15 * (r * delta).exp() {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(ArchError::Quadrature((prev - bessel_trapezoid(r, x, delta, h / 2.0, t_max)).abs() / prev.abs()))
}

/// max over y of y^{1/2} |K~_{ir}(2 pi y)|, with its location.
pub fn principal_max(r: f64) -> Result<(f64, f64), ArchError> {
    let f = |x: f64| scaled_bessel_k(r, x).map(|k| (x / TAU).sqrt() * k.abs());
    let lo = (r / 2.0).max(1e-3);
    let hi = r + 5.0 * r.cbrt() + 5.0;
    let step = (r.cbrt() / 20.0).min((hi - lo) / 50.0);
    let n = ((hi - lo) / step).ceil() as usize;
    let samples: Result<Vec<(f64, f64)>, ArchError> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let x = lo + i as f64 * step;
            f(x).map(|v| (x, v))
        })
        .collect();
    let (x0, _) = samples?.into_iter().fold((lo, -1.0), |a, b| if b.1 > a.1 { b } else { a });
    let xs = golden_max(|x| f(x).unwrap_or(-1.0), (x0 - step).max(1e-6), x0 + step, 1e-10);
    Ok((f(xs)?, xs / TAU))
}

/// (W, W) e^{pi r} = (1/4) Gamma_R(1 + 2ir) Gamma_R(1 - 2ir) e^{pi r} = e^{pi r} / (4 cosh(pi r)).
pub fn principal_log_norm(r: f64) -> f64 {
    -(4.0f64).ln() - (1.0 + (-TAU * r).exp()).ln() + (2.0f64).ln()
}

pub fn arch_ratio(rep: ArchRepresentation) -> Result<ArchRatio, ArchError> {
    match rep {
        ArchRepresentation::Discrete { k } => discrete_series(k),
        ArchRepresentation::PrincipalTrivialCentral { r } => {
            if !(r > 0.0 && r <= 500.0) {
                return Err(ArchError::OutOfRange(format!("r = {r}")));
            }
            let (m, y) = principal_max(r)?;
            let log_norm = principal_log_norm(r);
            Ok(ArchRatio { log_max: m.ln(), log_norm, argmax_y: y, ratio: (m.ln() - log_norm / 2.0).exp() })
        }
        ArchRepresentation::PrincipalNontrivialCentral { r } => {
            let w = whittaker_half(r)?;
            Ok(ArchRatio {
                log_max: w.max.ln(),
                log_norm: w.norm.ln(),
                argmax_y: w.argmax_x / (2.0 * TAU),
                ratio: w.max / w.norm.sqrt(),
            })
        }
    }
}

/// Solution of u'' + (r^2 + kappa e^t - e^{2t}/4) u = 0 on a uniform t-grid, integrated from the
/// recessive side down to t_min, so that W_{kappa, ir}(e^t) is proportional to e^{t/2} u(t).
#[derive(Debug, Clone)]
pub struct WhittakerProfile {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

fn whittaker_ode(r: f64, kappa: f64, x_min: f64, steps_per_period: f64) -> WhittakerProfile {
    let q = |t: f64| r * r + kappa * t.exp() - (2.0 * t).exp() / 4.0;
    let x_turn = 2.0 * kappa + (4.0 * kappa * kappa + 4.0 * r * r).sqrt();
    let x0 = x_turn + 80.0 + 4.0 * x_turn.sqrt();
    let (t0, t1) = (x0.ln(), x_min.ln());
    let h = TAU / (r.max(1.0) * steps_per_period);
    let n = ((t0 - t1) / h).ceil() as usize;
    let h = (t0 - t1) / n as f64;
    // inward the recessive solution grows; its WKB slope fixes the start
    let mut y = [1e-30, -1e-30 * (-q(t0)).sqrt()];
    let f = |t: f64, y: [f64; 2]| [y[1], -q(t) * y[0]];
    let mut ts = Vec::with_capacity(n + 1);
    let mut us = Vec::with_capacity(n + 1);
    let mut dus = Vec::with_capacity(n + 1);
    let mut t = t0;
    ts.push(t);
    us.push(y[0]);
    dus.push(y[1]);
    for _ in 0..n {
        let hh = -h;
        let k1 = f(t, y);
        let k2 = f(t + hh / 2.0, [y[0] + hh / 2.0 * k1[0], y[1] + hh / 2.0 * k1[1]]);
        let k3 = f(t + hh / 2.0, [y[0] + hh / 2.0 * k2[0], y[1] + hh / 2.0 * k2[1]]);
        let k4 = f(t + hh, [y[0] + hh * k3[0], y[1] + hh * k3[1]]);
        y[0] += hh / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        y[1] += hh / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        t += hh;
        if y[0].abs() > 1e200 {
            for v in us.iter_mut().chain(dus.iter_mut()) {
                *v *= 1e-200;
            }
            y = [y[0] * 1e-200, y[1] * 1e-200];
        }
        ts.push(t);
        us.push(y[0]);
        dus.push(y[1]);
    }
    ts.reverse();
    us.reverse();
    dus.reverse();
    WhittakerProfile { t: ts, u: us, du: dus }
}

/// e^{pi r / 2} W_{kappa, ir}(x) on a log grid, normalized by the small-x amplitude
/// |2 Gamma(2ir) / Gamma(1/2 + ir - kappa)| x^{1/2}.
pub fn scaled_whittaker_profile(r: f64, kappa: f64, steps_per_period: f64) -> WhittakerProfile {
    let mut prof = whittaker_ode(r, kappa, 1e-4, steps_per_period);
    let amp = prof.u[0].hypot(prof.du[0] / r);
    // log |Gamma(2ir)|^2 = log(pi / (2r sinh 2 pi r)), log |Gamma(1/2 + ir - kappa)|^2 by cases
    let log_abs_g2 = 0.5 * (PI / (2.0 * r)).ln() - 0.5 * log_sinh(TAU * r);
    let log_abs_den = if kappa == 0.5 {
        0.5 * (PI / r).ln() - 0.5 * log_sinh(PI * r)
    } else if kappa == 0.0 {
        0.5 * PI.ln() - 0.5 * log_cosh(PI * r)
    } else {
        panic!("kappa must be 0 or 1/2");
    };
    let log_true = (2.0f64).ln() + log_abs_g2 - log_abs_den + PI * r / 2.0;
    let s = log_true.exp() / amp;
    for v in prof.u.iter_mut().chain(prof.du.iter_mut()) {
        *v *= s;
    }
    prof
}

fn log_sinh(x: f64) -> f64 {
    x - (2.0f64).ln() + (-(-2.0 * x).exp()).ln_1p()
}

fn log_cosh(x: f64) -> f64 {
    x - (2.0f64).ln() + (-2.0 * x).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfWhittaker {
    /// max over x of e^{pi r / 2} |W_{1/2, ir}(x)|.
    pub max: f64,
    pub argmax_x: f64,
    /// e^{pi r} int |W_{1/2, ir}(x)|^2 dx / x.
    pub norm: f64,
}

fn half_whittaker_at(r: f64, steps: f64) -> HalfWhittaker {
    let prof = scaled_whittaker_profile(r, 0.5, steps);
    let w: Vec<f64> = prof.t.iter().zip(&prof.u).map(|(t, u)| (t / 2.0).exp() * u).collect();
    let (imax, _) = w.iter().enumerate().fold((0, 0.0), |a, (i, v)| if v.abs() > a.1 { (i, v.abs()) } else { a });
    // parabolic refinement of the grid maximum
    let (mut max, mut tmax) = (w[imax].abs(), prof.t[imax]);
    if imax > 0 && imax + 1 < w.len() {
        let (a, b, c) = (w[imax - 1].abs(), w[imax].abs(), w[imax + 1].abs());
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            let off = 0.5 * (a - c) / den;
            max = b - 0.25 * (a - c) * off;
            tmax += off * (prof.t[1] - prof.t[0]);
        }
    }
    let h = prof.t[1] - prof.t[0];
    let integrand: Vec<f64> = w.iter().map(|v| v * v).collect();
    let n = integrand.len();
    let mut norm = crate::summation::pairwise_sum_real(&integrand) * h - 0.5 * h * (integrand[0] + integrand[n - 1]);
    // below t_min, W^2 averages to amp^2 x / 2
    let amp2 = prof.u[0].powi(2) + (prof.du[0] / r).powi(2);
    norm += amp2 * prof.t[0].exp() / 2.0;
    HalfWhittaker { max, argmax_x: tmax.exp(), norm }
}

/// Scaled max and norm of W_{1/2, ir}(4 pi y), with a refinement check on the step.
pub fn whittaker_half(r: f64) -> Result<HalfWhittaker, ArchError> {
    if !(1.0..=400.0).contains(&r) {
        return Err(ArchError::OutOfRange(format!("r = {r}")));
    }
    let a = half_whittaker_at(r, 200.0);
    let b = half_whittaker_at(r, 400.0);
    let rel = ((a.max - b.max) / b.max).abs().max(((a.norm - b.norm) / b.norm).abs());
    if rel > 1e-5 {
        return Err(ArchError::Quadrature(rel));
    }
    Ok(b)
}

/// Closed form e^{pi r} (W, W) = e^{pi r} r Im psi(ir) / (2 cosh(pi r)), with Im psi(ir) = 1/(2r) + (pi/2) coth(pi r).
pub fn half_norm_digamma(r: f64) -> f64 {
    let im_psi = 1.0 / (2.0 * r) + FRAC_PI_2 / (PI * r).tanh();
    r * im_psi / (1.0 + (-TAU * r).exp())
}

/// Least-squares slope of log ys against log xs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
}

/// Fitted exponent of max_y y^{1/2} K~_{ir}(2 pi y) in r.
pub fn principal_exponent(rs: &[f64]) -> Result<ExponentFit, ArchError> {
    let values: Result<Vec<f64>, ArchError> = rs.iter().map(|&r| principal_max(r).map(|m| m.0)).collect();
    let values = values?;
    Ok(ExponentFit { params: rs.to_vec(), slope: loglog_slope(rs, &values), values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfExponents {
    pub rs: Vec<f64>,
    pub max_slope: f64,
    pub norm_slope: f64,
    pub ratio_slope: f64,
    /// Always true: the uniform Airy regime makes these fits indicative only.
    pub exploratory: bool,
}

pub fn arch_ratio_nontrivial_central(rs: &[f64]) -> Result<HalfExponents, ArchError> {
    let ws: Result<Vec<HalfWhittaker>, ArchError> = rs.par_iter().map(|&r| whittaker_half(r)).collect();
    let ws = ws?;
    let maxes: Vec<f64> = ws.iter().map(|w| w.max).collect();
    let norms: Vec<f64> = ws.iter().map(|w| w.norm).collect();
    let ratios: Vec<f64> = ws.iter().map(|w| w.max / w.norm.sqrt()).collect();
    Ok(HalfExponents {
        rs: rs.to_vec(),
        max_slope: loglog_slope(rs, &maxes),
        norm_slope: loglog_slope(rs, &norms),
        ratio_slope: loglog_slope(rs, &ratios),
        exploratory: true,
    })
}

/// max over y of y e^{-2 pi y}, the weight-2 lowest vector.
pub fn weight_two_max() -> (f64, f64) {
    let y = golden_max(|y| y * (-TAU * y).exp(), 1e-6, 2.0, 1e-14);
    (y * (-TAU * y).exp(), y)
}
