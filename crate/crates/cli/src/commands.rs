//! One function per subcommand; each fills a report and says whether its checks passed.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use wlab_core::characters::{enumerate_chars, CharSpec, DirichletChar, UnitaryCharacter};
use wlab_core::error::{FormError, IngestError};
use wlab_core::ingest::{self, FetchConfig, FetchRequest};
use wlab_core::mean_values::{domain_average, m_chi, BasisWithNorms, QuadratureSpec};
use wlab_core::modforms::*;
use wlab_core::padic::{factor, unit_group, PrimePower, TruncatedPAdic};
use wlab_core::whittaker_arch::{arch_ratio, arch_ratio_nontrivial_central, loglog_slope, ArchRepresentation};
use wlab_core::whittaker_local::*;
use wlab_core::Complex64;

use crate::parse::{self, PointSpec};
use crate::report::{Input, Report};
use crate::{
    ArchArgs, CertifyArgs, CliError, Command, FetchArgs, FormArgs, GlobalAction, HMethodArg, HTableArgs, LocalArgs,
    MvalueArgs, Series,
};

/// The report, and `Err(CheckFailed)` when it records a failed check.
pub type Outcome = (Report, Result<(), CliError>);

pub fn dispatch(cmd: &Command, config: Value) -> Result<Outcome, CliError> {
    let name = cmd.name();
    match cmd {
        Command::Local(a) => local(&name, config, a),
        Command::HTable(a) => h_table(&name, config, a),
        Command::Arch(a) => arch(&name, config, a),
        Command::Fetch(a) => fetch(&name, config, a),
        Command::Global(g) => global(&name, config, &g.action),
        Command::Mvalue(a) => mvalue(&name, config, a),
        Command::Certify(a) => certify(&name, config, a),
    }
}

fn checked(rep: Report, failures: Vec<String>) -> Outcome {
    let outcome = if failures.is_empty() { Ok(()) } else { Err(CliError::CheckFailed(failures.join("; "))) };
    (rep, outcome)
}

fn num(x: f64) -> Value {
    json!(x)
}

fn standard_series(chi: DirichletChar) -> Result<PrincipalSeries, CliError> {
    Ok(PrincipalSeries::standard(UnitaryCharacter::new(chi, Complex64::new(1.0, 0.0))?)?)
}

fn primitive_chars(p: u64, c: u32, even: bool, all: bool) -> Result<Vec<DirichletChar>, CliError> {
    let mut chars = enumerate_chars(PrimePower::new(p, c)?, true, even)?;
    if !all {
        chars.truncate(1);
    }
    Ok(chars)
}

fn local(name: &str, config: Value, a: &LocalArgs) -> Result<Outcome, CliError> {
    let mut rep = Report::new(
        name,
        config,
        vec!["p", "c", "chi", "cell", "v", "unit", "abs_w", "phase", "provenance", "extrapolated"],
    );
    if a.v_min > a.v_max {
        return Err(CliError::Invalid(format!("v-min {} > v-max {}", a.v_min, a.v_max)));
    }
    let (p, c) = (a.p, a.c);
    let q = PrimePower::new(p, c)?.q;
    let chars = primitive_chars(p, c, !a.all_chars, a.all_chars)?;
    let precision = (c + 3).max(5);
    let blocks: Result<Vec<Vec<Vec<Value>>>, CliError> = chars
        .into_par_iter()
        .map(|chi| {
            let id = chi.dlog_multiplier;
            let pi = standard_series(chi)?;
            let oracle = JacquetOracle::new(&pi)?;
            let mut rows = Vec::new();
            for cell in std::iter::once(Cell::Diagonal).chain((0..=c).map(Cell::K)) {
                for v in a.v_min..=a.v_max {
                    for w in (1..q).filter(|u| u % p != 0) {
                        let wc = WhittakerCell { y: TruncatedPAdic::from_parts(p, precision, v as i32, w)?, cell };
                        let val = if a.oracle { oracle.eval(&wc)? } else { closed_form(&pi, &wc).or_else(|_| oracle.eval(&wc))? };
                        let phase = if val.nonzero { num(val.value.arg()) } else { Value::Null };
                        rows.push(vec![
                            json!(p),
                            json!(c),
                            json!(format!("k{id}")),
                            json!(cell.label()),
                            json!(v),
                            json!(w),
                            num(val.value.norm()),
                            phase,
                            json!(val.provenance),
                            json!(val.extrapolated),
                        ]);
                    }
                }
            }
            Ok(rows)
        })
        .collect();
    let mut max_abs: f64 = 0.0;
    for r in blocks?.into_iter().flatten() {
        max_abs = max_abs.max(r[6].as_f64().unwrap_or(0.0));
        rep.row(r);
    }
    rep.set("rows", rep.rows.len());
    rep.set("max_abs_w", max_abs);
    rep.set("h_closed_form", h_closed_form(p, c));
    Ok(checked(rep, vec![]))
}

fn h_table(name: &str, config: Value, a: &HTableArgs) -> Result<Outcome, CliError> {
    let mut rep = Report::new(
        name,
        config,
        vec!["p", "c", "chi", "h_closed", "h_exhaustive", "agree", "cell", "v", "twist_invariant", "note"],
    );
    if a.c.contains(&0) {
        return Err(CliError::Invalid("conductor exponents start at 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut tasks = Vec::new();
    for &p in &a.p {
        for &c in &a.c {
            for chi in primitive_chars(p, c as u32, false, a.all_chars)? {
                let angles: Vec<f64> = (0..a.twists).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
                tasks.push((p, c as u32, chi, angles));
            }
        }
    }
    let exhaustive = a.method == HMethodArg::Exhaustive;
    let rows: Result<Vec<(Vec<Value>, bool)>, CliError> = tasks
        .into_par_iter()
        .map(|(p, c, chi, angles)| {
            let id = chi.dlog_multiplier;
            let pi = standard_series(chi)?;
            let closed = h_closed_form(p, c);
            let (h, agree, cell, v) = if exhaustive {
                let r = h_exhaustive(&pi, HWindow::default())?;
                let ok = (r.h - closed).abs() <= 1e-8;
                (num(r.h), json!(ok), json!(r.cell.map(|c| c.label())), json!(r.v))
            } else {
                (Value::Null, Value::Null, Value::Null, Value::Null)
            };
            let mut twist_ok = true;
            for t in &angles {
                twist_ok &= unramified_twist_invariance(&pi, Complex64::from_polar(1.0, *t))?;
            }
            let twist = if angles.is_empty() { Value::Null } else { json!(twist_ok) };
            let note = if c == 2 { "" } else { "extrapolated support rule" };
            let good = agree.as_bool().unwrap_or(true) && twist_ok;
            Ok((vec![json!(p), json!(c), json!(format!("k{id}")), num(closed), h, agree, cell, v, twist, json!(note)], good))
        })
        .collect();
    let mut failures = Vec::new();
    let rows = rows?;
    for (i, (r, good)) in rows.iter().enumerate() {
        if !good {
            failures.push(format!("p = {}, c = {}, {}", r[0], r[1], r[2].as_str().unwrap_or("")));
        }
        rep.row(r.clone());
        let group_ends = rows.get(i + 1).is_none_or(|(n, _)| n[0] != r[0] || n[1] != r[1]);
        if r[1] == json!(1) && group_ends {
            let mut note = vec![r[0].clone(), json!(1), json!("both ramified")];
            note.extend(std::iter::repeat_n(Value::Null, 6));
            note.push(json!("h ≍ 1 case out of closed-form scope"));
            rep.row(note);
        }
    }
    rep.set("rows", rows.len());
    rep.set("disagreements", failures.len());
    Ok(checked(rep, failures))
}

fn arch(name: &str, config: Value, a: &ArchArgs) -> Result<Outcome, CliError> {
    let mut rep = Report::new(name, config, vec!["parameter", "log_max", "log_norm", "ratio", "argmax_y"]);
    let default = match a.series {
        Series::Discrete => "2,4,8,16,32,64,128,256,512,1000",
        Series::Principal => "20:200:20",
        Series::PrincipalNt => "40:300:10",
    };
    let mut params = parse::grid(a.grid.as_deref().unwrap_or(default)).map_err(CliError::Invalid)?;
    if a.series == Series::Discrete {
        params = params.iter().map(|k| (2.0 * (k / 2.0).round()).max(2.0)).collect();
        params.dedup();
    }
    let rep_of = |x: f64| match a.series {
        Series::Discrete => ArchRepresentation::Discrete { k: x as u32 },
        Series::Principal => ArchRepresentation::PrincipalTrivialCentral { r: x },
        Series::PrincipalNt => ArchRepresentation::PrincipalNontrivialCentral { r: x },
    };
    let ratios: Result<Vec<_>, _> = params.par_iter().map(|&x| arch_ratio(rep_of(x))).collect();
    let ratios = ratios?;
    for (x, r) in params.iter().zip(&ratios) {
        rep.row(vec![num(*x), num(r.log_max), num(r.log_norm), num(r.ratio), num(r.argmax_y)]);
    }
    if params.len() >= 2 {
        let rs: Vec<f64> = ratios.iter().map(|r| r.ratio).collect();
        rep.set("ratio_exponent", loglog_slope(&params, &rs));
        if a.series != Series::Discrete {
            let maxes: Vec<f64> = ratios.iter().map(|r| r.log_max.exp()).collect();
            rep.set("max_exponent", loglog_slope(&params, &maxes));
        }
    }
    match a.series {
        Series::Discrete => {
            if let (Some(k), Some(r)) = (params.last(), ratios.last()) {
                rep.set("ratio_over_k_quarter", r.ratio / k.powf(0.25));
            }
        }
        Series::Principal => rep.set("scaling", "max and norm carry e^{pi r / 2} and e^{pi r}"),
        Series::PrincipalNt => {
            if params.len() >= 2 {
                let e = arch_ratio_nontrivial_central(&params)?;
                rep.set("norm_exponent", e.norm_slope);
                rep.set("exploratory", e.exploratory);
            }
        }
    }
    Ok(checked(rep, vec![]))
}

fn char_spec(level: u64, k: u64) -> Result<CharSpec, CliError> {
    match factor(level).as_slice() {
        [(p, c)] => Ok(CharSpec { p: *p, c: *c, dlog_multiplier: k, generator: unit_group(*p, *c)?.generator }),
        _ => Err(CliError::Invalid(format!("level {level} is not a prime power"))),
    }
}

fn fetch(name: &str, config: Value, a: &FetchArgs) -> Result<Outcome, CliError> {
    let mut rep = Report::new(name, config, vec!["label", "level", "embedding", "coefficients", "sha256", "saved"]);
    let req = FetchRequest {
        level: a.level,
        weight: a.weight,
        character: char_spec(a.level, a.char_orbit)?,
        embedding: a.embedding,
        min_coeffs: a.min_coeffs,
    };
    let cfg = FetchConfig { endpoint: a.endpoint.clone(), offline: a.offline, ..FetchConfig::new(&a.cache_dir) };
    let out = ingest::fetch_remote(&req, &cfg)?;
    let mut blocked = Vec::new();
    for ff in &out.forms {
        let label = ff.label();
        let text = ff.to_text();
        let report = ingest::validate(&ff.to_newform(&label)?);
        let saved = match (&a.save_dir, report.blocked()) {
            (Some(dir), false) => {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
                let path = dir.join(format!("{label}.form"));
                ff.save(&path)?;
                json!(format!("{label}.form"))
            }
            _ => Value::Null,
        };
        if report.blocked() {
            blocked.push(report.summary());
        }
        rep.row(vec![
            json!(label),
            json!(ff.level),
            json!(ff.embedding),
            json!(ff.coefficients.len()),
            json!(crate::report::sha256_hex(text.as_bytes())),
            saved,
        ]);
    }
    rep.set("from_cache", out.from_cache);
    rep.set("content_hash", &out.content_hash);
    rep.set("forms", out.forms.len());
    if out.forms.is_empty() {
        rep.set("note", "empty space: the database has no newforms for this level and character");
    }
    if !blocked.is_empty() {
        return Ok((rep, Err(IngestError::Blocked(blocked.join("; ")).into())));
    }
    Ok(checked(rep, vec![]))
}

/// A form file, its hash, and validation failures as exit code 2.
fn load_form(path: &Path) -> Result<(NewformData, Input), CliError> {
    let input = Input::file(path)?;
    let (f, _) = ingest::load(path)?;
    Ok((f, input))
}

fn form_char(f: &NewformData, chi: Option<u64>) -> Result<DirichletChar, CliError> {
    match chi {
        Some(k) => Ok(DirichletChar::from_spec(&char_spec(f.level, k)?)?),
        None => f
            .prime_power_char()
            .cloned()
            .ok_or_else(|| CliError::Invalid(format!("{} has no prime-power nebentypus; pass --chi", f.label))),
    }
}

fn point_json(z: &Point) -> (Value, Value) {
    (num(z.x()), num(z.y()))
}

const TAIL_PROVENANCE: &str = "tail sum_{n > M} d(n) n^{1/2} e^{-2 pi n y}, Deligne |a_n| <= d(n)";

fn global(name: &str, config: Value, action: &GlobalAction) -> Result<Outcome, CliError> {
    match action {
        GlobalAction::Eval { form, points } => global_eval(name, config, form, points),
        GlobalAction::Scan { form, nx, ny } => {
            let (f, input) = load_form(&form.form)?;
            let mut grid = GridSpec::for_level(f.level);
            grid.nx = nx.unwrap_or(grid.nx);
            grid.ny = ny.unwrap_or(grid.ny);
            let mut rep = Report::new(name, config, vec!["point", "x", "y", "abs_f"]);
            rep.inputs.push(input);
            let scan = supnorm_scan(&f, &grid)?;
            for ((label, z), (_, v)) in mandatory_points(&f).iter().zip(&scan.mandatory) {
                let (x, y) = point_json(z);
                rep.row(vec![json!(label), x, y, num(*v)]);
            }
            let (x, y) = point_json(&scan.argmax);
            rep.row(vec![json!("argmax"), x, y, num(scan.max)]);
            rep.set("max", scan.max);
            rep.set("exponent", scan.exponent);
            rep.set("normalized_exponent", scan.normalized_exponent);
            rep.set("evaluations", scan.evaluations);
            rep.details = json!({ "scan": scan });
            Ok(checked(rep, vec![]))
        }
        GlobalAction::Wilton { form, x, m_max, ratio, ms, samples, seed } => {
            let (f, input) = load_form(&form.form)?;
            let p = factor(f.level).first().map(|t| t.0).unwrap_or(1);
            let xs: Vec<Coord> = match x {
                Some(s) => s.split(',').map(parse::coord).collect::<Result<_, _>>().map_err(CliError::Invalid)?,
                None => (1..p as i128).map(|a| Coord::ratio(a, p as i128)).collect(),
            };
            let m_max = m_max.unwrap_or(((10 * p * p * p) as usize).min(f.len()));
            let mut rep = Report::new(name, config, vec!["x", "first_m", "best_m", "best_ratio"]);
            rep.inputs.push(input);
            let mut failures = Vec::new();
            for xv in &xs {
                let w = wilton_lower_scan(&f, xv, m_max, *ratio)?;
                rep.row(vec![num(xv.to_f64()), json!(w.first_m), json!(w.best_m), num(w.best_ratio)]);
            }
            if !xs.is_empty() && rep.rows.iter().all(|r| r[1].is_null()) {
                failures.push(format!("no M <= {m_max} reaches {ratio} M^(1/2)"));
            }
            let ms: Vec<usize> = ms.iter().map(|&m| m as usize).filter(|&m| m <= f.len()).collect();
            if ms.len() >= 2 {
                let fit = wilton_upper_exponent(&f, &ms, *samples, *seed)?;
                rep.set("upper_exponent", fit.slope);
                rep.details = json!({ "upper_fit": fit });
            }
            rep.set("m_max", m_max);
            Ok(checked(rep, failures))
        }
        GlobalAction::HeckeIntegral { form } => {
            let (f, input) = load_form(&form.form)?;
            let tol = form.tol.max(1e-12);
            let h = hecke_integral(&f, tol)?;
            let series = hecke_integral_series(&f);
            let mut rep = Report::new(name, config, vec!["quantity", "re", "im"]);
            rep.inputs.push(input);
            rep.row(vec![json!("integral"), num(h.value.re), num(h.value.im)]);
            rep.row(vec![json!("series"), num(series.re), num(series.im)]);
            if let Some(r) = h.reference {
                rep.row(vec![json!("l_half_over_2pi"), num(r.re), num(r.im)]);
                rep.set("reference_difference", (h.value - r).norm());
                rep.set("reference_note", "informational: the two differ by an O(1) term");
            }
            rep.set("error_estimate", h.error_estimate);
            rep.set("series_difference", (h.value - series).norm());
            rep.set("evaluations", h.evaluations);
            Ok(checked(rep, vec![]))
        }
        GlobalAction::Certify { form } => {
            let (f, input) = load_form(&form.form)?;
            let mut rep = Report::new(name, config, certify_columns());
            rep.inputs.push(input);
            let (row, ok) = certify_row(&f)?;
            rep.row(row);
            let failures = if ok { vec![] } else { vec![format!("{}: scan below certificate", f.label)] };
            Ok(checked(rep, failures))
        }
    }
}

fn global_eval(name: &str, config: Value, form: &FormArgs, points: &str) -> Result<Outcome, CliError> {
    let (f, input) = load_form(&form.form)?;
    let specs = parse::points(points).map_err(CliError::Invalid)?;
    let mut rep = Report::new(
        name,
        config,
        vec!["point", "x", "y", "re", "im", "abs", "truncation_bound", "terms", "flagged", "bound"],
    );
    rep.inputs.push(input);
    let needs_chi = specs.iter().any(|s| matches!(s, PointSpec::ZChi | PointSpec::ZChiPrime | PointSpec::Peak));
    let sp = if needs_chi { Some(special_point(&form_char(&f, form.chi)?)?) } else { None };
    let mut failures = Vec::new();
    let push = |rep: &mut Report, label: String, r: &EvalReport| {
        let (x, y) = point_json(&r.point);
        rep.row(vec![
            json!(label),
            x,
            y,
            num(r.value.re),
            num(r.value.im),
            num(r.value.norm()),
            num(r.truncation_bound),
            json!(r.terms_used),
            json!(r.flagged),
            json!(TAIL_PROVENANCE),
        ]);
    };
    for s in &specs {
        let z = match (s, &sp) {
            (PointSpec::ZChi, Some(sp)) => sp.z,
            (PointSpec::ZChiPrime, Some(sp)) => raise_in_orbit(&sp.z_prime, f.level, 1 << 20)?.0,
            (PointSpec::Peak, Some(sp)) => raise_in_orbit(&sp.peak, f.level, 1 << 20)?.0,
            (PointSpec::At(z), _) => *z,
            (PointSpec::Grid, _) => return Err(CliError::Invalid("grid points belong to mvalue".into())),
            _ => unreachable!(),
        };
        let r = evaluate(&f, &z, form.tol)?;
        push(&mut rep, s.name(), &r);
        if let (PointSpec::ZChi, Some(sp)) = (s, &sp) {
            let chi = form_char(&f, form.chi)?;
            let t = twisted_expansion_eval(&f, &chi, &Point::real(0.0, 1.0), form.tol)?;
            push(&mut rep, "twisted(i)".into(), &t);
            let gap = (r.value.norm() - t.value.norm()).abs();
            let bound = r.truncation_bound + t.truncation_bound;
            rep.set("zchi_twisted_gap", gap);
            rep.set("zchi_combined_bound", bound);
            rep.set("zchi_b", sp.b);
            if gap > bound.max(1e-12) {
                failures.push(format!("|f(z_chi)| and |twisted(i)| differ by {gap:e} > {bound:e}"));
            }
        }
    }
    Ok(checked(rep, failures))
}

fn certify_columns() -> Vec<&'static str> {
    vec!["label", "level", "chi", "certificate", "scan_max", "pass", "exponent", "normalized_exponent", "note"]
}

fn certify_row(f: &NewformData) -> Result<(Vec<Value>, bool), CliError> {
    let chi = f.nebentypus.parts.iter().map(|c| format!("{}^{}:k{}", c.p(), c.modulus.c, c.dlog_multiplier)).collect::<Vec<_>>().join("*");
    let cert = match lower_bound_certificate(f) {
        Ok(c) => c,
        Err(FormError::CertificateUnavailable) => {
            return Ok((
                vec![
                    json!(f.label),
                    json!(f.level),
                    json!(chi),
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    json!("certificate unavailable: nebentypus not primitive"),
                ],
                true,
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let scan = supnorm_scan(f, &GridSpec::for_level(f.level))?;
    let ok = scan.max >= cert.value;
    Ok((
        vec![
            json!(f.label),
            json!(f.level),
            json!(chi),
            num(cert.value),
            num(scan.max),
            json!(ok),
            num(scan.exponent),
            num(scan.normalized_exponent),
            json!(""),
        ],
        ok,
    ))
}

fn form_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(dir.display().to_string(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "form"))
        .collect();
    paths.sort();
    Ok(paths)
}

fn certify(name: &str, config: Value, a: &CertifyArgs) -> Result<Outcome, CliError> {
    let mut rep = Report::new(name, config, certify_columns());
    let mut forms = Vec::new();
    for path in form_files(&a.data_dir)? {
        let (f, input) = load_form(&path)?;
        if a.forms.is_empty() || a.forms.contains(&f.label) {
            forms.push(f);
            rep.inputs.push(input);
        }
    }
    let rows: Result<Vec<_>, CliError> = forms.par_iter().map(certify_row).collect();
    let mut failures = Vec::new();
    for (row, ok) in rows? {
        if !ok {
            failures.push(format!("{}: scan below certificate", row[0].as_str().unwrap_or("")));
        }
        rep.row(row);
    }
    rep.set("forms", rep.rows.len());
    rep.set("failures", failures.len());
    Ok(checked(rep, failures))
}

fn mvalue(name: &str, config: Value, a: &MvalueArgs) -> Result<Outcome, CliError> {
    let specs = parse::points(&a.points).map_err(CliError::Invalid)?;
    let mut rep = Report::new(name, config, vec!["point", "x", "y", "m_chi", "largest_term", "partial"]);
    let mut forms = Vec::new();
    for path in form_files(&a.data_dir)? {
        let (f, input) = load_form(&path)?;
        let k = f.prime_power_char().map(|c| c.dlog_multiplier);
        if f.level == a.level && (a.chi.is_none() || k == a.chi) {
            forms.push(f);
            rep.inputs.push(input);
        }
    }
    if forms.is_empty() {
        return Err(CliError::Invalid(format!("no ingested forms at level {} in {}", a.level, a.data_dir.display())));
    }
    let mut ids: Vec<String> = forms.iter().filter_map(|f| f.prime_power_char()).map(|c| format!("k{}", c.dlog_multiplier)).collect();
    ids.dedup();
    if ids.len() > 1 {
        return Err(CliError::Invalid(format!("level {} carries {}; pass --chi", a.level, ids.join(", "))));
    }
    let spec = QuadratureSpec { nx: a.nodes, nt: a.nodes, ..QuadratureSpec::default() };
    let basis = BasisWithNorms::new(forms, &spec)?;
    let chi = basis.forms[0].prime_power_char().cloned();
    let tol = 1e-12;
    let mut pts: Vec<(String, Point)> = Vec::new();
    for s in &specs {
        let sp = || -> Result<SpecialPoint, CliError> {
            let c = chi.as_ref().ok_or_else(|| CliError::Invalid("special points need a prime-power character".into()))?;
            Ok(special_point(c)?)
        };
        match s {
            PointSpec::ZChi => pts.push((s.name(), sp()?.z)),
            PointSpec::ZChiPrime => pts.push((s.name(), raise_in_orbit(&sp()?.z_prime, a.level, 1 << 20)?.0)),
            PointSpec::Peak => pts.push((s.name(), raise_in_orbit(&sp()?.peak, a.level, 1 << 20)?.0)),
            PointSpec::At(z) => pts.push((s.name(), *z)),
            PointSpec::Grid => {
                let n = a.grid_n.max(1);
                let ys = wlab_core::whittaker_arch::log_grid(1.0 / (a.level as f64).powf(1.5), 1.0, n);
                for (j, y) in ys.iter().enumerate() {
                    for i in 0..n {
                        pts.push((format!("grid[{i},{j}]"), Point::real(i as f64 / n as f64, *y)));
                    }
                }
            }
        }
    }
    let values: Result<Vec<_>, CliError> = pts
        .par_iter()
        .map(|(label, z)| {
            let m = m_chi(z, &basis, tol)?;
            let mut largest: f64 = 0.0;
            for (f, n) in basis.forms.iter().zip(&basis.norms) {
                largest = largest.max(abs_fast(f, z.to_complex(), tol)?.powi(2) / n.value);
            }
            let (x, y) = point_json(z);
            Ok(vec![json!(label), x, y, num(m.value), num(largest), json!(m.partial)])
        })
        .collect();
    for r in values? {
        rep.row(r);
    }
    rep.set("basis", basis.forms.iter().map(|f| f.label.clone()).collect::<Vec<_>>());
    rep.set("norms", basis.norms.iter().map(|n| n.value).collect::<Vec<_>>());
    rep.set("expected_dim", basis.expected_dim);
    rep.set("complete", basis.is_complete());
    if a.average {
        let avg = domain_average(&basis, &spec)?;
        rep.set("average", avg.average);
        rep.set("average_times_4pi", avg.ratio_to_quarter_pi);
        rep.set("volume", avg.volume);
    }
    Ok(checked(rep, vec![]))
}
