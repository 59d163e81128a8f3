use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use haarfbm::validation::{
    default_rate_ladder, default_sup_grid, run_brownian_campaign, run_coefficient_campaign, run_covariance_campaign,
    run_parseval_campaign, run_rate_campaign, CovarianceOptions, DEFAULT_RATE_SEEDS, DEFAULT_TAIL_RUNGS,
};
use haarfbm::{
    coeff_vector, draw_bundle, generate_path, split_index, CoefficientKind, DriftCoupling, Error, Expansion, GeneratorConfig,
    HurstParams, Normalization, QuadratureSpec, ValidationReport, WaveletIndex,
};

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "haarfbm", version, about = "Fractional Brownian motion from a Haar-wavelet expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one path and write it as CSV.
    Generate(GenerateArgs),
    /// Closed-form coefficients against adaptive quadrature.
    ValidateCoeffs(CoeffsArgs),
    /// Parseval limit and tail decay of the first series.
    ValidateParseval(ParsevalArgs),
    /// Monte-Carlo covariance over a small grid.
    ValidateCovariance(CovarianceArgs),
    /// Median sup-error slopes over a doubling ladder.
    ValidateRate(RateArgs),
    /// The H = 1/2 case against Brownian increments.
    ValidateBrownian(BrownianArgs),
    /// Write the coefficients at one (t, H) as CSV.
    DumpCoeffs(DumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Spacing {
    /// i/N for i = 0..N
    Equispaced,
    /// k/2^N for k = 0..2^N
    Dyadic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    UnitVariance,
    MandelbrotVanNess,
}

#[derive(Clone, Copy, ValueEnum)]
enum DriftArg {
    Coupled,
    Independent,
}

fn parse_hurst(s: &str) -> Result<f64, String> {
    let h: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if h > 0.0 && h < 1.0 {
        Ok(h)
    } else {
        Err(format!("the Hurst index must lie in (0, 1), got {h}"))
    }
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("times must lie in [0, 1], got {t}"))
    }
}

fn parse_levels(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))?;
    if n < 2 {
        return Err(format!("the truncation index must be at least 2, got {n}"));
    }
    if n >= 1usize << (haarfbm::haar::MAX_LEVEL + 1) {
        return Err(format!("the truncation index {n} exceeds the deepest supported level"));
    }
    Ok(n)
}

#[derive(Args)]
struct ReportOut {
    /// Report format.
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    /// Report file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_hurst)]
    hurst: f64,
    /// Truncation index N of every series.
    #[arg(long, value_parser = parse_levels)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid size: N for equispaced spacing, depth for dyadic spacing.
    #[arg(long, conflicts_with = "times_file", required_unless_present = "times_file")]
    times: Option<u32>,
    #[arg(long, value_enum, default_value_t = Spacing::Equispaced)]
    spacing: Spacing,
    /// File with one time per line; `#` starts a comment.
    #[arg(long)]
    times_file: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = NormalizationArg::UnitVariance)]
    normalization: NormalizationArg,
    #[arg(long, value_enum, default_value_t = DriftArg::Coupled)]
    drift: DriftArg,
    /// Path CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the noise bundle in the binary bundle format.
    #[arg(long)]
    bundle_out: Option<PathBuf>,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long, value_parser = parse_hurst, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5, 0.75, 0.9])]
    hurst: Vec<f64>,
    #[arg(long = "t", value_parser = parse_unit, value_delimiter = ',', default_values_t = [0.0, 0.137, 0.5, 1.0])]
    times: Vec<f64>,
    /// Highest index n compared.
    #[arg(long, value_parser = parse_levels, default_value_t = 255)]
    levels: usize,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    #[command(flatten)]
    report: ReportOut,
}

#[derive(Args)]
struct ParsevalArgs {
    #[arg(long, value_parser = parse_hurst, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5, 0.75, 0.9])]
    hurst: Vec<f64>,
    #[arg(long = "t", value_parser = parse_unit, value_delimiter = ',', default_values_t = [0.137, 0.5, 1.0])]
    times: Vec<f64>,
    /// Top of the doubling ladder 2^6, 2^7, ... used for the limit.
    #[arg(long, value_parser = parse_levels, default_value_t = 1 << 14)]
    levels: usize,
    #[command(flatten)]
    report: ReportOut,
}

#[derive(Args)]
struct CovarianceArgs {
    #[arg(long, value_parser = parse_hurst, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7])]
    hurst: Vec<f64>,
    #[arg(long, value_parser = parse_unit, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    paths: usize,
    #[arg(long, value_parser = parse_levels, default_value_t = 1023)]
    levels: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Repeat the checks on an exact Cholesky ensemble.
    #[arg(long)]
    with_oracle: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    report: ReportOut,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long, value_parser = parse_hurst, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7])]
    hurst: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_RATE_SEEDS)]
    seeds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    report: ReportOut,
}

#[derive(Args)]
struct BrownianArgs {
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, value_parser = parse_unit, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
    grid: Vec<f64>,
    #[arg(long, value_parser = parse_levels, default_value_t = 1023)]
    levels: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    report: ReportOut,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, value_parser = parse_hurst)]
    hurst: f64,
    #[arg(long = "t", value_parser = parse_unit)]
    time: f64,
    #[arg(long, value_parser = parse_levels)]
    levels: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn io(path: Option<&Path>, e: io::Error) -> Self {
        let message = match path {
            Some(p) => format!("{}: {e}", p.display()),
            None => e.to_string(),
        };
        Failure { code: EXIT_IO, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain { .. } | Error::Precondition(_) => EXIT_USAGE,
            _ => EXIT_IO,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult = Result<(), Failure>;

/// Runs `body` against the output file, or standard output when `path` is `None`.
fn with_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Failure::io(Some(p), e))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::io(Some(p), e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::io(None, e))
        }
    }
}

fn grid_times(count: u32, spacing: Spacing) -> Result<Vec<f64>, Failure> {
    match spacing {
        Spacing::Equispaced => {
            if count == 0 {
                return Err(Failure::usage("--times must be at least 1 for equispaced spacing"));
            }
            Ok((0..=count).map(|i| i as f64 / count as f64).collect())
        }
        Spacing::Dyadic => {
            if count > 24 {
                return Err(Failure::usage(format!("dyadic depth {count} is above the limit 24")));
            }
            let m = 1u64 << count;
            Ok((0..=m).map(|k| k as f64 / m as f64).collect())
        }
    }
}

fn read_times(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(Some(path), e))?;
    let mut times = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let t = parse_unit(line).map_err(|e| Failure::usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        times.push(t);
    }
    Ok(times)
}

fn cmd_generate(a: GenerateArgs) -> CliResult {
    let times = match (&a.times_file, a.times) {
        (Some(p), _) => read_times(p)?,
        (None, Some(n)) => grid_times(n, a.spacing)?,
        (None, None) => return Err(Failure::usage("either --times or --times-file is required")),
    };
    let params = HurstParams::new(a.hurst)?;
    let expansion = Expansion::new(params)
        .with_normalization(match a.normalization {
            NormalizationArg::UnitVariance => Normalization::UnitVariance,
            NormalizationArg::MandelbrotVanNess => Normalization::MandelbrotVanNess,
        })
        .with_drift(match a.drift {
            DriftArg::Coupled => DriftCoupling::Coupled,
            DriftArg::Independent => DriftCoupling::Independent,
        });
    let cfg = GeneratorConfig::new(params, a.levels, a.seed)
        .with_expansion(expansion)
        .with_workers(a.workers);
    let started = Instant::now();
    let path = generate_path(&times, &cfg)?;
    eprintln!(
        "generated {} instants with N = {} on {} workers in {:.3}s",
        times.len(),
        a.levels,
        if a.workers == 0 { "all".to_string() } else { a.workers.to_string() },
        started.elapsed().as_secs_f64()
    );
    with_output(a.out.as_deref(), |w| path.write_csv(w).map_err(into_io))?;
    if let Some(p) = &a.bundle_out {
        let bundle = draw_bundle(a.seed, a.levels);
        with_output(Some(p), |w| bundle.write_to(w).map_err(into_io))?;
    }
    Ok(())
}

fn into_io(e: Error) -> io::Error {
    match e {
        Error::Io(e) => e,
        other => io::Error::other(other.to_string()),
    }
}

fn emit_report(report: &ValidationReport, out: &ReportOut) -> CliResult {
    let body = match out.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => report.to_json() + "\n",
    };
    with_output(out.out.as_deref(), |w| w.write_all(body.as_bytes()))?;
    eprintln!("{}: {:.3}s", report.campaign, report.elapsed.as_secs_f64());
    if report.passed {
        return Ok(());
    }
    let mut message = format!("{} campaign failed:", report.campaign);
    for r in report.failures() {
        message.push_str(&format!("\n  {}: {:e}", r.metric, r.observed));
        if let Some(note) = &r.note {
            message.push_str(&format!(" ({note})"));
        }
    }
    Err(Failure { code: EXIT_FAILED, message })
}

fn cmd_validate_coeffs(a: CoeffsArgs) -> CliResult {
    if !(a.abs_tol > 0.0) {
        return Err(Failure::usage("--abs-tol must be positive"));
    }
    let spec = QuadratureSpec { abs_tol: a.abs_tol, ..QuadratureSpec::default() };
    let r = run_coefficient_campaign(&a.hurst, &a.times, a.levels, &spec)?;
    emit_report(&r, &a.report)
}

fn cmd_validate_parseval(a: ParsevalArgs) -> CliResult {
    if !a.levels.is_power_of_two() || a.levels < 1 << 12 {
        return Err(Failure::usage("--levels must be a power of two of at least 4096"));
    }
    let ladder: Vec<usize> = (6..=a.levels.trailing_zeros()).map(|j| 1usize << j).collect();
    let r = run_parseval_campaign(&a.hurst, &a.times, &ladder, &DEFAULT_TAIL_RUNGS)?;
    emit_report(&r, &a.report)
}

fn cmd_validate_covariance(a: CovarianceArgs) -> CliResult {
    let opts = CovarianceOptions {
        with_oracle: a.with_oracle,
        workers: a.workers,
        ..CovarianceOptions::default()
    };
    let r = run_covariance_campaign(&a.hurst, &a.grid, a.paths, a.levels, a.seed, &opts)?;
    emit_report(&r, &a.report)
}

fn cmd_validate_rate(a: RateArgs) -> CliResult {
    let r = run_rate_campaign(&a.hurst, &default_rate_ladder(), &default_sup_grid(), a.seeds, a.seed)?;
    emit_report(&r, &a.report)
}

fn cmd_validate_brownian(a: BrownianArgs) -> CliResult {
    let r = run_brownian_campaign(a.paths, &a.grid, a.levels, a.seed)?;
    emit_report(&r, &a.report)
}

fn cmd_dump_coeffs(a: DumpArgs) -> CliResult {
    let p = HurstParams::new(a.hurst)?;
    let f1 = coeff_vector(CoefficientKind::F1, a.time, &p, a.levels)?;
    let f2 = coeff_vector(CoefficientKind::F2, a.time, &p, a.levels)?;
    // g is not defined at H = 1/2, where its series carries a zero prefactor
    let g = if p.is_half {
        None
    } else {
        Some(coeff_vector(CoefficientKind::G, a.time, &p, a.levels)?)
    };
    with_output(a.out.as_deref(), |w| {
        writeln!(w, "n,j,k,f1,f2,g")?;
        for n in 0..=a.levels {
            let (j, k) = match split_index(n) {
                WaveletIndex::Scaling => (String::new(), String::new()),
                WaveletIndex::Wavelet { level, shift, .. } => (level.to_string(), shift.to_string()),
            };
            let gv = g.as_ref().map_or(0.0, |g| g.values()[n]);
            writeln!(w, "{n},{j},{k},{},{},{gv}", f1.values()[n], f2.values()[n])?;
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::ValidateCoeffs(a) => cmd_validate_coeffs(a),
        Command::ValidateParseval(a) => cmd_validate_parseval(a),
        Command::ValidateCovariance(a) => cmd_validate_covariance(a),
        Command::ValidateRate(a) => cmd_validate_rate(a),
        Command::ValidateBrownian(a) => cmd_validate_brownian(a),
        Command::DumpCoeffs(a) => cmd_dump_coeffs(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("haarfbm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
