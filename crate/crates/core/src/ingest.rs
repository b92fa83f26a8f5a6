//! Form files, validation, and a cached client for a modular-forms database over HTTP.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::characters::{CharSpec, DirichletChar};
use crate::error::IngestError;
use crate::modforms::{FormKind, Nebentypus, NewformData};
use crate::padic::factor;

pub const FORMAT_HEADER: &str = "#wlab-form v1";
pub const ENDPOINT_ENV: &str = "WLAB_FORMS_ENDPOINT";

/// Residuals above this block downstream use.
pub const MUST_TOL: f64 = 1e-6;
/// Residuals above this are reported as warnings.
pub const SHOULD_TOL: f64 = 1e-9;
/// a_1 gets a wider blocking tier: decimal exports often round it.
pub const A1_MUST_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormFile {
    pub level: u64,
    pub weight: u32,
    pub character: CharSpec,
    pub embedding: u32,
    /// a_n in the normalization f = y sum a_n n^{1/2} e(nz).
    pub coefficients: Vec<Complex64>,
    pub l_half: Option<Complex64>,
    pub al_eigenvalue: Option<Complex64>,
    pub petersson: Option<f64>,
    pub source: String,
}

/// Python-style `{:.{digits}e}`: two-digit signed exponent.
pub fn format_exp(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("exponent digits");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn rows_text(coeffs: &[Complex64]) -> String {
    let mut s = String::with_capacity(coeffs.len() * 52);
    for (i, a) in coeffs.iter().enumerate() {
        let _ = writeln!(s, "{} {} {}", i + 1, format_exp(a.re, 17), format_exp(a.im, 17));
    }
    s
}

fn digest(text: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(text.as_bytes())))
}

impl FormFile {
    pub fn checksum(&self) -> String {
        digest(&rows_text(&self.coefficients))
    }

    pub fn to_text(&self) -> String {
        let cplx = |z: Complex64| format!("{} {}", format_exp(z.re, 12), format_exp(z.im, 12));
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER}");
        let _ = writeln!(s, "level: {}", self.level);
        let _ = writeln!(s, "weight: {}", self.weight);
        let _ = writeln!(s, "char_p: {}", self.character.p);
        let _ = writeln!(s, "char_c: {}", self.character.c);
        let _ = writeln!(s, "char_generator: {}", self.character.generator);
        let _ = writeln!(s, "char_dlog_multiplier: {}", self.character.dlog_multiplier);
        let _ = writeln!(s, "embedding: {}", self.embedding);
        let _ = writeln!(s, "coefficients: {}", self.coefficients.len());
        if let Some(l) = self.l_half {
            let _ = writeln!(s, "l_half: {}", cplx(l));
        }
        if let Some(e) = self.al_eigenvalue {
            let _ = writeln!(s, "al_eigenvalue: {}", cplx(e));
        }
        if let Some(n) = self.petersson {
            let _ = writeln!(s, "petersson: {}", format_exp(n, 12));
        }
        let _ = writeln!(s, "source: {}", self.source);
        let _ = writeln!(s, "checksum: {}", self.checksum());
        s.push_str(&rows_text(&self.coefficients));
        s
    }

    pub fn parse(text: &str) -> Result<FormFile, IngestError> {
        let perr = |line: usize, msg: String| IngestError::Parse { line, msg };
        let mut lines = text.split_inclusive('\n').enumerate();
        let (_, first_raw) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        let first = first_raw.trim_end();
        if first != FORMAT_HEADER {
            return match first.strip_prefix("#wlab-form ") {
                Some(v) => Err(IngestError::Version(v.to_string())),
                None => Err(perr(1, format!("expected `{FORMAT_HEADER}`"))),
            };
        }
        let mut meta: Vec<(usize, String, String)> = Vec::new();
        let mut body_start = None;
        let mut offset = first_raw.len();
        for (i, raw) in lines.by_ref() {
            let line = raw.trim_end();
            if line.starts_with(|c: char| c.is_ascii_digit()) {
                body_start = Some((i, offset));
                break;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| perr(i + 1, format!("expected `key: value`, got `{line}`")))?;
            meta.push((i + 1, k.trim().to_string(), v.trim().to_string()));
            offset += raw.len();
        }
        let get = |key: &str| meta.iter().find(|m| m.1 == key);
        let req = |key: &str| get(key).ok_or_else(|| perr(0, format!("missing key `{key}`")));
        let num = |key: &str| -> Result<u64, IngestError> {
            let (l, _, v) = req(key)?;
            v.parse().map_err(|_| perr(*l, format!("`{key}` is not an integer: `{v}`")))
        };
        let cplx = |key: &str| -> Result<Option<Complex64>, IngestError> {
            match get(key) {
                None => Ok(None),
                Some((l, _, v)) => {
                    let parts: Vec<f64> = v
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| perr(*l, format!("`{key}` is not a complex pair")))?;
                    match parts.as_slice() {
                        [re, im] => Ok(Some(Complex64::new(*re, *im))),
                        _ => Err(perr(*l, format!("`{key}` needs two numbers"))),
                    }
                }
            }
        };
        const KNOWN: [&str; 13] = [
            "level",
            "weight",
            "char_p",
            "char_c",
            "char_generator",
            "char_dlog_multiplier",
            "embedding",
            "coefficients",
            "l_half",
            "al_eigenvalue",
            "petersson",
            "source",
            "checksum",
        ];
        if let Some((l, k, _)) = meta.iter().find(|m| !KNOWN.contains(&m.1.as_str())) {
            return Err(perr(*l, format!("unknown key `{k}`")));
        }
        let count = num("coefficients")? as usize;
        let (body_line, body_offset) = body_start.ok_or_else(|| perr(0, "no coefficient rows".into()))?;
        let body = &text[body_offset..];
        let mut coefficients = Vec::with_capacity(count);
        for (j, row) in body.lines().enumerate() {
            let line = body_line + j + 1;
            let f: Vec<&str> = row.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr(line, "row must be `n re im`".into()));
            }
            let n: usize = f[0].parse().map_err(|_| perr(line, format!("bad index `{}`", f[0])))?;
            if n != j + 1 {
                return Err(perr(line, format!("index {n} out of sequence, expected {}", j + 1)));
            }
            let re: f64 = f[1].parse().map_err(|_| perr(line, format!("bad number `{}`", f[1])))?;
            let im: f64 = f[2].parse().map_err(|_| perr(line, format!("bad number `{}`", f[2])))?;
            coefficients.push(Complex64::new(re, im));
        }
        if coefficients.len() != count {
            return Err(perr(0, format!("header announces {count} coefficients, found {}", coefficients.len())));
        }
        let expected = req("checksum")?.2.clone();
        let actual = digest(body);
        if expected != actual {
            return Err(IngestError::Checksum { expected, actual });
        }
        let petersson = match get("petersson") {
            None => None,
            Some((l, _, v)) => Some(v.parse().map_err(|_| perr(*l, "`petersson` is not a number".into()))?),
        };
        Ok(FormFile {
            level: num("level")?,
            weight: num("weight")? as u32,
            character: CharSpec {
                p: num("char_p")?,
                c: num("char_c")? as u32,
                generator: num("char_generator")?,
                dlog_multiplier: num("char_dlog_multiplier")?,
            },
            embedding: num("embedding")? as u32,
            coefficients,
            l_half: cplx("l_half")?,
            al_eigenvalue: cplx("al_eigenvalue")?,
            petersson,
            source: req("source")?.2.clone(),
        })
    }

    pub fn read(path: &Path) -> Result<FormFile, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        FormFile::parse(&text)
    }

    /// Writes through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        atomic_write(path, self.to_text().as_bytes())
    }

    pub fn label(&self) -> String {
        format!("{}.{}.k{}.{}", self.level, self.weight, self.character.dlog_multiplier, embedding_letter(self.embedding))
    }

    pub fn to_newform(&self, label: &str) -> Result<NewformData, IngestError> {
        let chi = DirichletChar::from_spec(&self.character)?;
        Ok(NewformData {
            label: label.to_string(),
            level: self.level,
            nebentypus: Nebentypus { parts: vec![chi] },
            coeffs: self.coefficients.clone(),
            l_half: self.l_half,
            al_eigenvalue: self.al_eigenvalue,
            petersson: self.petersson,
            kind: FormKind::Newform,
            source: self.source.clone(),
        })
    }
}

fn embedding_letter(e: u32) -> String {
    let mut n = e as usize;
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io { path: path.display().to_string(), source }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    let mut fh = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    fh.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    fh.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Warn,
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Worst residual over the check.
    pub residual: f64,
    /// Where the worst residual occurred.
    pub at: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn blocked(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Block)
    }

    pub fn warnings(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| c.status == Status::Warn).collect()
    }

    pub fn summary(&self) -> String {
        self.checks
            .iter()
            .filter(|c| c.status != Status::Pass)
            .map(|c| format!("{} {:?} residual {:.3e} at n = {}", c.name, c.status, c.residual, c.at))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn check(name: &str, residual: f64, at: usize, must: f64) -> CheckResult {
    let status = if !(residual <= must) {
        Status::Block
    } else if residual > SHOULD_TOL {
        Status::Warn
    } else {
        Status::Pass
    };
    CheckResult { name: name.into(), residual, at, status }
}

fn divisor_count(mut n: usize) -> usize {
    let mut count = 1;
    let mut d = 2;
    while d * d <= n {
        let mut e = 0;
        while n % d == 0 {
            n /= d;
            e += 1;
        }
        count *= e + 1;
        d += 1;
    }
    if n > 1 {
        count *= 2;
    }
    count
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// a_1, multiplicativity, the Hecke recursion at good primes, Deligne, and |a_p| = 1 at ramified p
/// with primitive nebentypus.
pub fn validate(f: &NewformData) -> ValidationReport {
    let m = f.len();
    let mut checks = Vec::new();
    if m == 0 {
        checks.push(check("a1", f64::INFINITY, 1, A1_MUST_TOL));
        return ValidationReport { label: f.label.clone(), checks };
    }
    checks.push(check("a1", (f.a(1) - 1.0).norm(), 1, A1_MUST_TOL));

    let mut worst = (0.0f64, 1usize);
    for a in 2..=m {
        for b in a + 1..=m / a {
            if gcd(a, b) == 1 {
                let r = (f.a(a * b) - f.a(a) * f.a(b)).norm();
                if r > worst.0 {
                    worst = (r, a * b);
                }
            }
        }
    }
    checks.push(check("multiplicativity", worst.0, worst.1, MUST_TOL));

    let ramified: Vec<u64> = factor(f.level).iter().map(|r| r.0).collect();
    let mut worst = (0.0f64, 1usize);
    for p in (2..=m).filter(|&p| divisor_count(p) == 2 && !ramified.contains(&(p as u64))) {
        let chp = f.nebentypus.value(p as i128);
        let (mut prev, mut cur, mut pk) = (Complex64::new(1.0, 0.0), f.a(p), p);
        while pk * p <= m {
            let next = f.a(p) * cur - chp * prev;
            let r = (f.a(pk * p) - next).norm();
            if r > worst.0 {
                worst = (r, pk * p);
            }
            (prev, cur, pk) = (cur, f.a(pk * p), pk * p);
        }
    }
    checks.push(check("hecke_recursion", worst.0, worst.1, MUST_TOL));

    let mut worst = (0.0f64, 1usize);
    for n in 1..=m {
        let r = f.a(n).norm() / divisor_count(n) as f64 - 1.0;
        if r > worst.0 {
            worst = (r, n);
        }
    }
    checks.push(check("deligne", worst.0, worst.1, MUST_TOL));

    let mut worst = (0.0f64, 1usize);
    for &(p, c) in &factor(f.level) {
        let primitive = f.nebentypus.part(p).is_some_and(|ch| ch.conductor_exponent() == c);
        if primitive && (p as usize) <= m {
            let r = (f.a(p as usize).norm() - 1.0).abs();
            if r > worst.0 {
                worst = (r, p as usize);
            }
        }
    }
    checks.push(check("ramified_unit", worst.0, worst.1, MUST_TOL));
    ValidationReport { label: f.label.clone(), checks }
}

fn label_from_path(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("form");
    name.strip_suffix(".form").unwrap_or(name).to_string()
}

/// Parses, checks the checksum, validates; a blocking report is an error.
pub fn load(path: &Path) -> Result<(NewformData, ValidationReport), IngestError> {
    let ff = FormFile::read(path)?;
    if ff.weight != 2 {
        return Err(IngestError::Parse { line: 0, msg: format!("weight {} unsupported", ff.weight) });
    }
    let f = ff.to_newform(&label_from_path(path))?;
    let report = validate(&f);
    if report.blocked() {
        return Err(IngestError::Blocked(format!("{}: {}", f.label, report.summary())));
    }
    Ok((f, report))
}

/// Every `*.form` under a directory, sorted by name.
pub fn load_dir(dir: &Path) -> Result<Vec<(NewformData, ValidationReport)>, IngestError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "form"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load(p)).collect()
}

/// c_n (arithmetic normalization, |c_p| <= 2 p^{1/2}) to a_n = c_n / n^{1/2}.
pub fn arithmetic_to_analytic(c: &[Complex64]) -> Vec<Complex64> {
    c.iter().enumerate().map(|(i, z)| z / ((i + 1) as f64).sqrt()).collect()
}

pub fn analytic_to_arithmetic(a: &[Complex64]) -> Vec<Complex64> {
    a.iter().enumerate().map(|(i, z)| z * ((i + 1) as f64).sqrt()).collect()
}

/// Terms needed so the q-expansion tail at height y_min is below tol.
pub fn coefficients_required(y_min: f64, tol: f64) -> usize {
    crate::modforms::terms_needed(y_min, tol)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchRequest {
    pub level: u64,
    pub weight: u32,
    pub character: CharSpec,
    pub embedding: Option<u32>,
    pub min_coeffs: usize,
}

impl FetchRequest {
    pub fn query(&self) -> String {
        let mut q = format!(
            "newforms?level={}&weight={}&char_p={}&char_c={}&char_generator={}&char_dlog_multiplier={}&min_coeffs={}",
            self.level,
            self.weight,
            self.character.p,
            self.character.c,
            self.character.generator,
            self.character.dlog_multiplier,
            self.min_coeffs
        );
        if let Some(e) = self.embedding {
            let _ = write!(q, "&embedding={e}");
        }
        q
    }
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// Base URL; `WLAB_FORMS_ENDPOINT` when unset.
    pub endpoint: Option<String>,
    pub cache_dir: PathBuf,
    pub offline: bool,
    pub attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl FetchConfig {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        FetchConfig {
            endpoint: None,
            cache_dir: cache_dir.into(),
            offline: false,
            attempts: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(30),
        }
    }

    fn endpoint(&self) -> Option<String> {
        self.endpoint.clone().or_else(|| std::env::var(ENDPOINT_ENV).ok())
    }
}

/// Server records: coefficients in the arithmetic normalization.
#[derive(Debug, Deserialize)]
struct RemoteForm {
    level: u64,
    weight: u32,
    char_p: u64,
    char_c: u32,
    char_generator: u64,
    char_dlog_multiplier: u64,
    embedding: u32,
    an: Vec<[f64; 2]>,
    #[serde(default)]
    l_half: Option<[f64; 2]>,
    #[serde(default)]
    al_eigenvalue: Option<[f64; 2]>,
    #[serde(default)]
    petersson: Option<f64>,
    #[serde(default)]
    url: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RemoteResponse {
    forms: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOutcome {
    /// Empty when the space has no newforms: data, not failure.
    pub forms: Vec<FormFile>,
    pub from_cache: bool,
    pub content_hash: String,
}

/// Content-addressed store: objects/<sha256> holds response bytes, refs/<sha256 of query> names them.
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    fn key(query: &str) -> String {
        hex::encode(Sha256::digest(query.as_bytes()))
    }

    pub fn get(&self, query: &str) -> Result<Option<(Vec<u8>, String)>, IngestError> {
        let r = self.root.join("refs").join(Self::key(query));
        let Ok(hash) = fs::read_to_string(&r) else {
            return Ok(None);
        };
        let hash = hash.trim().to_string();
        let obj = self.root.join("objects").join(&hash);
        let bytes = fs::read(&obj).map_err(|e| io_err(&obj, e))?;
        let actual = hex::encode(Sha256::digest(&bytes));
        if actual != hash {
            return Err(IngestError::Checksum { expected: hash, actual });
        }
        Ok(Some((bytes, actual)))
    }

    pub fn put(&self, query: &str, bytes: &[u8]) -> Result<String, IngestError> {
        let hash = hex::encode(Sha256::digest(bytes));
        atomic_write(&self.root.join("objects").join(&hash), bytes)?;
        atomic_write(&self.root.join("refs").join(Self::key(query)), hash.as_bytes())?;
        Ok(hash)
    }
}

fn http_get(url: &str, cfg: &FetchConfig) -> Result<Vec<u8>, IngestError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(cfg.timeout)
        .build()
        .map_err(|e| IngestError::Http(e.to_string()))?;
    let mut last = String::new();
    for attempt in 0..cfg.attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(cfg.backoff * 2u32.pow(attempt - 1));
        }
        match client.get(url).send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp.bytes().map(|b| b.to_vec()).map_err(|e| IngestError::Http(e.to_string()));
                }
                last = format!("{url}: HTTP {status}");
                if !(status.is_server_error() || status.as_u16() == 429) {
                    break;
                }
            }
            Err(e) => last = format!("{url}: {e}"),
        }
    }
    Err(IngestError::Http(last))
}

fn convert(bytes: &[u8]) -> Result<Vec<FormFile>, IngestError> {
    let resp: RemoteResponse =
        serde_json::from_slice(bytes).map_err(|e| IngestError::Schema(format!("response: {e}")))?;
    resp.forms
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let r: RemoteForm =
                serde_json::from_value(v).map_err(|e| IngestError::Schema(format!("form {i}: {e}")))?;
            let c: Vec<Complex64> = r.an.iter().map(|z| Complex64::new(z[0], z[1])).collect();
            let pair = |z: Option<[f64; 2]>| z.map(|z| Complex64::new(z[0], z[1]));
            Ok(FormFile {
                level: r.level,
                weight: r.weight,
                character: CharSpec {
                    p: r.char_p,
                    c: r.char_c,
                    generator: r.char_generator,
                    dlog_multiplier: r.char_dlog_multiplier,
                },
                embedding: r.embedding,
                coefficients: arithmetic_to_analytic(&c),
                l_half: pair(r.l_half),
                al_eigenvalue: pair(r.al_eigenvalue),
                petersson: r.petersson,
                source: r.url.unwrap_or_else(|| "remote".into()),
            })
        })
        .collect()
}

/// Cache first; the network only when allowed and the query is not cached.
pub fn fetch_remote(req: &FetchRequest, cfg: &FetchConfig) -> Result<FetchOutcome, IngestError> {
    let query = req.query();
    let cache = Cache::new(&cfg.cache_dir);
    if let Some((bytes, hash)) = cache.get(&query)? {
        return Ok(FetchOutcome { forms: convert(&bytes)?, from_cache: true, content_hash: hash });
    }
    if cfg.offline {
        return Err(IngestError::NotCached(query));
    }
    let base = cfg.endpoint().ok_or_else(|| IngestError::Http(format!("no endpoint: set {ENDPOINT_ENV}")))?;
    let url = format!("{}/{}", base.trim_end_matches('/'), query);
    let bytes = http_get(&url, cfg)?;
    let forms = convert(&bytes)?;
    for f in &forms {
        if f.coefficients.len() < req.min_coeffs {
            return Err(IngestError::Schema(format!(
                "server sent {} coefficients, {} requested",
                f.coefficients.len(),
                req.min_coeffs
            )));
        }
    }
    let content_hash = cache.put(&query, &bytes)?;
    Ok(FetchOutcome { forms, from_cache: false, content_hash })
}
