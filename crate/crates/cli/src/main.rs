//! `wlab`: local Whittaker newvector tables, archimedean exponents and global sup-norm certificates.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 a form failed validation, 3 a check in the
//! report failed.

mod commands;
mod config;
mod parse;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;
use wlab_core::error::{ArchError, CharError, FormError, IngestError, LocalError, PadicError};

use report::Format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("output: {0}")]
    Output(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Padic(#[from] PadicError),
    /// The report was written but one of its checks failed.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Ingest(IngestError::Blocked(_)) => 2,
            CliError::CheckFailed(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "wlab", version, about, args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format; inferred from the --out extension, JSON otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Whittaker newvector values on the cells of B \ GL(2, Q_p) / K_0(p^c).
    Local(LocalArgs),
    /// h(pi) for 1 [+] chi over ranges of p and c, closed form against exhaustive search.
    HTable(HTableArgs),
    /// Archimedean sup/L2 ratios and fitted exponents.
    Arch(ArchArgs),
    /// Download newform coefficients into the local cache and optionally save form files.
    Fetch(FetchArgs),
    /// Evaluations and certificates for one ingested form.
    Global(GlobalArgs),
    /// M_chi(z) = sum |f_i(z)|^2 / (f_i, f_i) over the ingested basis of one space.
    Mvalue(MvalueArgs),
    /// Sup-norm scan against the local lower-bound certificate for every ingested form.
    Certify(CertifyArgs),
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Local(_) => "local".into(),
            Command::HTable(_) => "h-table".into(),
            Command::Arch(_) => "arch".into(),
            Command::Fetch(_) => "fetch".into(),
            Command::Global(g) => format!("global {}", g.action.name()),
            Command::Mvalue(_) => "mvalue".into(),
            Command::Certify(_) => "certify".into(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LocalArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long, default_value_t = 2)]
    pub c: u32,
    /// Every primitive character instead of the first even one.
    #[arg(long)]
    pub all_chars: bool,
    /// Use the Jacquet-integral oracle even where a closed form exists.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = -4, allow_hyphen_values = true)]
    pub v_min: i64,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub v_max: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HMethodArg {
    Closed,
    Exhaustive,
}

#[derive(Debug, Args, Serialize)]
pub struct HTableArgs {
    /// Odd primes: `3,5,7` or `3..7`.
    #[arg(long, value_parser = parse::prime_list, default_value = "3..7")]
    pub p: parse::List,
    /// Conductor exponents: `2` or `1..4`.
    #[arg(long, value_parser = parse::u64_list, default_value = "2")]
    pub c: parse::List,
    #[arg(long, value_enum, default_value_t = HMethodArg::Exhaustive)]
    pub method: HMethodArg,
    #[arg(long)]
    pub all_chars: bool,
    /// Random unimodular unramified twists checked per row.
    #[arg(long, default_value_t = 0)]
    pub twists: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Series {
    Discrete,
    Principal,
    PrincipalNt,
}

#[derive(Debug, Args, Serialize)]
pub struct ArchArgs {
    #[arg(long, value_enum)]
    pub series: Series,
    /// `lo:hi:n` log-spaced, or a list; weights for discrete series are rounded to even integers.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct FetchArgs {
    #[arg(long)]
    pub level: u64,
    #[arg(long, default_value_t = 2)]
    pub weight: u32,
    /// Character mod the level by dlog multiplier, e.g. `k4`.
    #[arg(long, value_parser = parse::char_id)]
    pub char_orbit: u64,
    #[arg(long)]
    pub embedding: Option<u32>,
    #[arg(long, default_value_t = 2000)]
    pub min_coeffs: usize,
    /// Cache only, no network.
    #[arg(long)]
    pub offline: bool,
    #[arg(long, default_value = ".wlab-cache")]
    pub cache_dir: PathBuf,
    /// Base URL; falls back to the WLAB_FORMS_ENDPOINT environment variable.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Directory for validated `.form` files.
    #[arg(long)]
    pub save_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    #[command(subcommand)]
    pub action: GlobalAction,
}

#[derive(Debug, Args, Serialize)]
pub struct FormArgs {
    /// Form file.
    #[arg(long)]
    pub form: PathBuf,
    /// Character for the special point and twisted chart; defaults to the nebentypus.
    #[arg(long, value_parser = parse::char_id)]
    pub chi: Option<u64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalAction {
    /// f at points, with certified truncation bounds.
    Eval {
        #[command(flatten)]
        form: FormArgs,
        /// `zchi`, `zchi-prime`, `peak` or `X:Y`, comma separated.
        #[arg(long, default_value = "zchi")]
        points: String,
    },
    /// Grid search for max |f| over a fundamental strip plus the special points.
    Scan {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
    },
    /// Partial sums S(M, x) = sum_{m <= M} a_m e(mx).
    Wilton {
        #[command(flatten)]
        form: FormArgs,
        /// Points x; defaults to a/p for a = 1..p-1.
        #[arg(long)]
        x: Option<String>,
        /// Largest M for the lower-bound scan; defaults to 10 p^3.
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long, default_value_t = 0.3)]
        ratio: f64,
        /// M values for the upper exponent fit.
        #[arg(long, value_parser = parse::u64_list, default_value = "40,80,160,320,640,1280,2560,5120")]
        ms: parse::List,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        seed: u64,
    },
    /// int_{1/N}^1 f(iy) dy / y against its series and L(1/2, f) / (2 pi).
    HeckeIntegral {
        #[command(flatten)]
        form: FormArgs,
    },
    /// Scan against the lower-bound certificate for this form.
    Certify {
        #[command(flatten)]
        form: FormArgs,
    },
}

impl GlobalAction {
    pub fn name(&self) -> &'static str {
        match self {
            GlobalAction::Eval { .. } => "eval",
            GlobalAction::Scan { .. } => "scan",
            GlobalAction::Wilton { .. } => "wilton",
            GlobalAction::HeckeIntegral { .. } => "hecke-integral",
            GlobalAction::Certify { .. } => "certify",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MvalueArgs {
    #[arg(long)]
    pub level: u64,
    /// Character by dlog multiplier; required when the level carries several.
    #[arg(long, value_parser = parse::char_id)]
    pub chi: Option<u64>,
    /// `zchi`, `zchi-prime`, `peak`, `grid` or `X:Y`, comma separated.
    #[arg(long, default_value = "zchi")]
    pub points: String,
    /// Side of the `grid` point set.
    #[arg(long, default_value_t = 6)]
    pub grid_n: usize,
    /// Also report the domain average of M_chi.
    #[arg(long)]
    pub average: bool,
    /// Gauss-Legendre nodes per direction for the Petersson norms.
    #[arg(long, default_value_t = 40)]
    pub nodes: usize,
    #[arg(long, default_value = "data/forms")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long, default_value = "data/forms")]
    pub data_dir: PathBuf,
    /// Labels to certify; all forms in the directory when absent.
    #[arg(long, value_delimiter = ',')]
    pub forms: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let config = serde_json::to_value(&cli).map_err(|e| CliError::Output(e.to_string()))?;
    let format = report::resolve_format(cli.format, cli.out.as_ref());
    let (rep, outcome) = commands::dispatch(&cli.command, config)?;
    rep.emit(cli.out.as_ref(), format)?;
    outcome
}

fn main() -> ExitCode {
    let args = match config::merged_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("wlab: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
