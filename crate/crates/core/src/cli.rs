//! Command-line front end. Exit codes: 0 success, 1 usage or configuration,
//! 2 numerical failure, 3 I/O or format problems.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codebook::{build_codebook, calibrate_tail_threshold, Codebook, DEFAULT_TAIL_THRESHOLD};
use crate::entropy_coder::{decode_stream, encode_stream, Bitstream};
use crate::error::Error;
use crate::eval::{
    cell_index, generate_latents, measure_with_codebook, rate_sweep, redundancy_vs_sigma_profile, EvalReport, SigmaLaw,
    SweepConfig, SyntheticSource, DEFAULT_SYMBOL_COUNT,
};
use crate::param_map::{
    design_grid_constant_redundancy, grid_from_transform, solve_transform_ode, ParamTransform, DEFAULT_GRID_POINTS,
};
use crate::redundancy::Redundancy;
use crate::{GaussianModel, SigmaValue};

#[derive(Debug, Parser)]
#[command(name = "qgcode", version, about = "Quantized-Gaussian entropy coding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the parameter transform and write it as text.
    SolveTransform(SolveArgs),
    /// Design an N-cell σ quantizer.
    DesignGrid(GridArgs),
    /// Build and serialize a codebook.
    BuildCodebook(CodebookArgs),
    /// Draw synthetic latents.
    Generate(GenerateArgs),
    /// Range-code a latent file.
    Encode(EncodeArgs),
    /// Decode a bitstream back to latent values.
    Decode(DecodeArgs),
    /// Measure coding redundancy and write a CSV report.
    Eval(EvalArgs),
    /// Write per-σ analytic redundancy curves as CSV.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
struct RangeArgs {
    #[arg(long, default_value_t = 0.1)]
    sigma_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    sigma_max: f64,
}

#[derive(Debug, Args)]
struct TransformSource {
    /// Transform file from `solve-transform`; solved on the fly when absent.
    #[arg(long)]
    transform: Option<PathBuf>,
    #[command(flatten)]
    range: RangeArgs,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    range: RangeArgs,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Ode,
    Direct,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Method::Direct)]
    method: Method,
    #[command(flatten)]
    source: TransformSource,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CodebookArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_TAIL_THRESHOLD)]
    tail_threshold: f64,
    /// Pick the tail threshold whose memory is closest to this many bytes.
    #[arg(long)]
    target_bytes: Option<usize>,
    #[command(flatten)]
    source: TransformSource,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LawArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SYMBOL_COUNT)]
    count: usize,
    #[arg(long, default_value_t = 0.2)]
    sigma_lo: f64,
    #[arg(long, default_value_t = 500.0)]
    sigma_hi: f64,
    /// Use a single σ instead of the log-uniform law.
    #[arg(long)]
    sigma_fixed: Option<f64>,
    /// File with one σ per line, cycled.
    #[arg(long)]
    sigma_list: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    law: LawArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    latents: PathBuf,
    #[command(flatten)]
    source: TransformSource,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    bitstream: PathBuf,
    /// Latent file supplying the σ side information (its values are ignored).
    #[arg(long)]
    latents: PathBuf,
    #[command(flatten)]
    source: TransformSource,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Comma-separated codebook sizes.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,96,128,192,256")]
    n: Vec<usize>,
    /// Comma-separated bits/symbol targets; switches to a rate sweep.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TAIL_THRESHOLD)]
    tail_threshold: f64,
    #[command(flatten)]
    law: LawArgs,
    #[command(flatten)]
    source: TransformSource,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long, value_delimiter = ',', default_value = "64")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 257)]
    points: usize,
    #[arg(long, default_value_t = 0.2)]
    from: f64,
    #[arg(long, default_value_t = 500.0)]
    to: f64,
    #[command(flatten)]
    source: TransformSource,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Lib(e) => exit_code(e),
            Failure::Io(_) => 3,
        }
    }
}

/// Exit status a library error maps to.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Argument(_) | Error::Config(_) => 1,
        Error::DegenerateEntropy { .. } | Error::Numerical(_) => 2,
        Error::Format(_) | Error::Decode(_) => 3,
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read(path)?).map_err(|_| Failure::Io(format!("{} is not UTF-8", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn check_range(r: &RangeArgs) -> CliResult<(SigmaValue, SigmaValue)> {
    if !(r.sigma_min > 0.0 && r.sigma_min < r.sigma_max && r.sigma_max.is_finite()) {
        return Err(Failure::Usage(format!(
            "need 0 < --sigma-min < --sigma-max, got {} and {}",
            r.sigma_min, r.sigma_max
        )));
    }
    Ok((SigmaValue::new(r.sigma_min)?, SigmaValue::new(r.sigma_max)?))
}

fn load_transform(src: &TransformSource, model: &GaussianModel) -> CliResult<ParamTransform> {
    match &src.transform {
        Some(path) => Ok(ParamTransform::from_text(&read_text(path)?).map_err(|e| match e {
            Error::Argument(m) => Failure::Lib(Error::Format(m)),
            other => Failure::Lib(other),
        })?),
        None => {
            let (lo, hi) = check_range(&src.range)?;
            Ok(solve_transform_ode(model, lo, hi, src.grid_points)?)
        }
    }
}

fn law_of(args: &LawArgs) -> CliResult<SigmaLaw> {
    if let Some(path) = &args.sigma_list {
        let values = read_text(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Failure::Io(format!("bad sigma '{l}' in {}", path.display())))
            })
            .collect::<CliResult<Vec<_>>>()?;
        return Ok(SigmaLaw::List(values));
    }
    Ok(match args.sigma_fixed {
        Some(s) => SigmaLaw::Fixed(s),
        None => SigmaLaw::LogUniform {
            lo: args.sigma_lo,
            hi: args.sigma_hi,
        },
    })
}

fn source_of(args: &LawArgs) -> CliResult<SyntheticSource> {
    Ok(SyntheticSource {
        seed: args.seed,
        count: args.count,
        sigma_law: law_of(args)?,
        target: String::new(),
    })
}

fn latents_text(src: &SyntheticSource, latents: &[(f64, i64)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# latents seed={} count={} sigma_law={}",
        src.seed,
        src.count,
        src.sigma_law.describe()
    );
    for (s, n) in latents {
        let _ = writeln!(out, "{s} {n}");
    }
    out
}

fn parse_latents(text: &str) -> CliResult<Vec<(f64, i64)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            let mut it = l.split_whitespace();
            let s = it.next().and_then(|x| x.parse::<f64>().ok());
            let n = it.next().and_then(|x| x.parse::<i64>().ok());
            match (s, n, it.next()) {
                (Some(s), Some(n), None) => Ok((s, n)),
                _ => Err(Failure::Io(format!("malformed latent line {}: '{l}'", i + 1))),
            }
        })
        .collect()
}

fn cells_for(transform: &ParamTransform, n: usize, latents: &[(f64, i64)]) -> CliResult<Vec<usize>> {
    latents
        .iter()
        .map(|&(s, _)| {
            if !(s >= transform.sigma_min() && s <= transform.sigma_max()) {
                return Err(Failure::Lib(Error::Config(format!(
                    "sigma {s} outside [{}, {}]",
                    transform.sigma_min(),
                    transform.sigma_max()
                ))));
            }
            Ok(cell_index(transform, n, s))
        })
        .collect()
}

fn execute(cmd: Command, out: &mut dyn std::io::Write) -> CliResult<()> {
    let model = GaussianModel::default();
    let red = Redundancy::new(model);
    let mut say = |line: String| {
        let _ = writeln!(out, "{line}");
    };
    match cmd {
        Command::SolveTransform(a) => {
            let (lo, hi) = check_range(&a.range)?;
            if a.grid_points < 257 {
                return Err(Failure::Usage(format!(
                    "--grid-points must be >= 257, got {}",
                    a.grid_points
                )));
            }
            let t = solve_transform_ode(&model, lo, hi, a.grid_points)?;
            write(&a.out, t.to_text().as_bytes())?;
            let res = t.ode_residuals(&model)?;
            let max_res = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            say(format!(
                "sigma_min={} sigma_max={} grid_points={}",
                lo.get(),
                hi.get(),
                a.grid_points
            ));
            say(format!("alpha={:.12e}", t.alpha()));
            say(format!(
                "endpoint_residuals={:.3e},{:.3e} max_ode_residual={max_res:.3e}",
                t.eval(0.0) / lo.get() - 1.0,
                t.eval(1.0) / hi.get() - 1.0
            ));
        }
        Command::DesignGrid(a) => {
            if a.n < 2 {
                return Err(Failure::Usage(format!("--n must be >= 2, got {}", a.n)));
            }
            let grid = match a.method {
                Method::Direct => {
                    let (lo, hi) = check_range(&a.source.range)?;
                    design_grid_constant_redundancy(&red, lo, hi, a.n)?
                }
                Method::Ode => grid_from_transform(&red, &load_transform(&a.source, &model)?, a.n)?,
            };
            write(&a.out, grid.to_text().as_bytes())?;
            let method = a
                .method
                .to_possible_value()
                .map(|v| v.get_name().to_string())
                .unwrap_or_default();
            say(format!("n={} method={method} eps={:.9e}", a.n, grid.eps));
        }
        Command::BuildCodebook(a) => {
            if a.n < 2 {
                return Err(Failure::Usage(format!("--n must be >= 2, got {}", a.n)));
            }
            let t = load_transform(&a.source, &model)?;
            let threshold = match a.target_bytes {
                Some(target) => {
                    let cal = calibrate_tail_threshold(&red, &t, a.n, target)?;
                    say(format!(
                        "calibrated tail_threshold={:e} memory={} target={}",
                        cal.tail_threshold, cal.memory_bytes, cal.target_bytes
                    ));
                    cal.tail_threshold
                }
                None => a.tail_threshold,
            };
            let cb = build_codebook(&red, &t, a.n, threshold)?;
            write(&a.out, &cb.serialize())?;
            say(format!(
                "n={} tail_threshold={threshold:e} memory_bytes={} checksum={:08x}",
                a.n,
                cb.memory_bytes(),
                cb.checksum()
            ));
        }
        Command::Generate(a) => {
            let src = source_of(&a.law)?;
            let latents = generate_latents(&src)?;
            write(&a.out, latents_text(&src, &latents).as_bytes())?;
            say(format!(
                "seed={} count={} sigma_law={}",
                src.seed,
                src.count,
                src.sigma_law.describe()
            ));
        }
        Command::Encode(a) => {
            let cb = Codebook::deserialize(&read(&a.codebook)?)?;
            let t = load_transform(&a.source, &model)?;
            let latents = parse_latents(&read_text(&a.latents)?)?;
            let cells = cells_for(&t, cb.n(), &latents)?;
            let symbols: Vec<(usize, i64)> = cells.into_iter().zip(latents.iter().map(|l| l.1)).collect();
            let bs = encode_stream(&symbols, &cb)?;
            write(&a.out, &bs.to_bytes())?;
            say(format!("symbols={} payload_bytes={}", symbols.len(), bs.payload.len()));
        }
        Command::Decode(a) => {
            let cb = Codebook::deserialize(&read(&a.codebook)?)?;
            let bs = Bitstream::from_bytes(&read(&a.bitstream)?)?;
            let t = load_transform(&a.source, &model)?;
            let latents = parse_latents(&read_text(&a.latents)?)?;
            let cells = cells_for(&t, cb.n(), &latents)?;
            let values = decode_stream(&bs, &cb, &cells)?;
            let mut text = String::with_capacity(values.len() * 4);
            for v in &values {
                let _ = writeln!(text, "{v}");
            }
            write(&a.out, text.as_bytes())?;
            say(format!("symbols={}", values.len()));
        }
        Command::Eval(a) => {
            if a.n.iter().any(|&n| n < 2) {
                return Err(Failure::Usage("--n entries must be >= 2".into()));
            }
            let t = load_transform(&a.source, &model)?;
            let report = if a.targets.is_empty() {
                let src = source_of(&a.law)?;
                let mut report = EvalReport::new(vec![
                    ("seed".into(), src.seed.to_string()),
                    ("count".into(), src.count.to_string()),
                    ("sigma_law".into(), src.sigma_law.describe()),
                    ("tail_threshold".into(), format!("{:e}", a.tail_threshold)),
                    ("transform_alpha".into(), format!("{:.12e}", t.alpha())),
                ]);
                let mut ns = a.n.clone();
                ns.sort_unstable();
                ns.dedup();
                for n in ns {
                    let cb = build_codebook(&red, &t, n, a.tail_threshold)?;
                    report.rows.push(measure_with_codebook(&model, &src, &t, &cb)?);
                }
                report
            } else {
                let cfg = SweepConfig {
                    seed: a.law.seed,
                    count: a.law.count,
                    tail_threshold: a.tail_threshold,
                };
                rate_sweep(&red, &t, &a.n, &a.targets, &cfg)?
            };
            let csv = report.to_csv();
            write(&a.out, csv.as_bytes())?;
            say(csv);
        }
        Command::Profile(a) => {
            if a.points < 2 || !(a.from > 0.0 && a.from < a.to) {
                return Err(Failure::Usage("need --points >= 2 and 0 < --from < --to".into()));
            }
            let t = load_transform(&a.source, &model)?;
            let sigmas: Vec<f64> = (0..a.points)
                .map(|i| (a.from.ln() + (a.to.ln() - a.from.ln()) * i as f64 / (a.points - 1) as f64).exp())
                .collect();
            let mut csv =
                String::from("n,sigma,cell_transform,avg_rel_redundancy_transform,cell_poly,avg_rel_redundancy_poly\n");
            for &n in &a.n {
                if n < 2 {
                    return Err(Failure::Usage("--n entries must be >= 2".into()));
                }
                for p in redundancy_vs_sigma_profile(&red, &t, n, &sigmas)? {
                    let _ = writeln!(
                        csv,
                        "{n},{:.9e},{},{:.9e},{},{:.9e}",
                        p.sigma, p.cell_transform, p.avg_transform, p.cell_poly, p.avg_poly
                    );
                }
            }
            write(&a.out, csv.as_bytes())?;
            say(format!("n={:?} points={} from={} to={}", a.n, a.points, a.from, a.to));
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns the
/// process exit code. Progress goes to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli.command, &mut lock) {
        Ok(()) => 0,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Io(m) => m.clone(),
                Failure::Lib(e) => e.to_string(),
            };
            let _ = writeln!(std::io::stderr(), "error: {msg}");
            f.exit_code()
        }
    }
}
