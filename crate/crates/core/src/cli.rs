//! Command-line front end. `run` takes the argument list and two writers and
//! returns the process exit code, so it can be driven in-process by tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bilinear::BilinearMap;
use crate::certify::{certify, Verdict};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, ExperimentConfig};
use crate::hopf::HashBoundsTable;
use crate::pencil::{afcr_margin, SearchBudget};
use crate::tensor::Tensor3;
use crate::trank::classify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONCLUSIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest bounds table `trank` builds; larger shapes use standalone bounds.
const TRANK_TABLE_CAP: usize = 64;

#[derive(Debug, Parser)]
#[command(name = "rankatlas", version, about = "Typical ranks of real 3-tensors and rank-p certificates")]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalFlags {
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multi-start restarts for the rank-drop search.
    #[arg(long, global = true)]
    budget_restarts: Option<usize>,
    /// Relative singular-value threshold for a rank drop.
    #[arg(long, global = true)]
    tol_rankdrop: Option<f64>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Exit with status 1 when a requested decision is Inconclusive.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Typical ranks of R^{m x n x p}.
    Trank { m: usize, n: usize, p: usize },
    /// Dump the table of bounds on m # n.
    Bounds {
        #[arg(long = "max")]
        max: usize,
    },
    /// Estimate the nonsingularity margin of a bilinear map or tensor file.
    Afcr { file: PathBuf },
    /// Certify rank p or rank > p for an n x p x m tensor file.
    Certify { file: PathBuf },
    /// Run a Monte-Carlo experiment described by a JSON config.
    Experiment { config: PathBuf },
    /// Write a bilinear map (or its tensor) as JSON.
    MakeBilinear(MakeBilinear),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    /// Cayley-Dickson multiplication in dimension 1, 2, 4 or 8.
    Cd,
    /// Polynomial convolution of a Cayley-Dickson map.
    Convolve,
    /// Restriction of a Cayley-Dickson map to leading coordinates.
    Restrict,
}

#[derive(Debug, Args)]
struct MakeBilinear {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Cayley-Dickson dimension of the base map.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    /// Convolution: number of input blocks on the left.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Convolution: number of input blocks on the right.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Restriction: kept left coordinates.
    #[arg(long)]
    rows: Option<usize>,
    /// Restriction: kept right coordinates.
    #[arg(long)]
    cols: Option<usize>,
    /// Emit the c x a x b tensor instead of the map.
    #[arg(long)]
    tensor: bool,
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

enum Outcome {
    Done,
    Inconclusive,
}

impl GlobalFlags {
    fn budget(&self) -> Result<SearchBudget> {
        let mut b = SearchBudget::default();
        if let Some(r) = self.budget_restarts {
            if r == 0 {
                return Err(Error::Budget("--budget-restarts must be at least 1".into()));
            }
            b.restarts = r;
        }
        if let Some(t) = self.tol_rankdrop {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Budget(format!("--tol-rankdrop must lie in (0, 1), got {t}")));
            }
            b.tol_rankdrop = t;
        }
        if let Some(s) = self.seed {
            b.seed = s;
        }
        Ok(b)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_json(out: &mut dyn Write, value: &serde_json::Value) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("value serializes"))
}

/// Tensor files are read as the `c x a x b` tensor of a bilinear map.
fn load_map(path: &Path) -> Result<BilinearMap> {
    let text = read(path)?;
    match Tensor3::parse(&text) {
        Ok(t) => Ok(BilinearMap::from_tensor(&t)),
        Err(tensor_err) => BilinearMap::from_json(&text).map_err(|map_err| {
            Error::parse(
                path.display().to_string(),
                format!("neither a tensor ({tensor_err}) nor a bilinear map ({map_err})"),
            )
        }),
    }
}

fn cmd_trank(m: usize, n: usize, p: usize, g: &GlobalFlags, out: &mut dyn Write) -> Result<Outcome> {
    let mut s = [m, n, p];
    s.sort_unstable();
    let table = HashBoundsTable::build(s[1].clamp(2, TRANK_TABLE_CAP))?;
    let r = classify(m, n, p, &table)?;
    if g.json {
        let v = serde_json::json!({
            "shape": r.shape,
            "result": r.kind,
            "provenance": r.provenance,
            "hash_bound": r.hash_bound,
            "text": r.to_string(),
        });
        write_json(out, &v).map_err(|e| Error::io("stdout", e))?;
    } else {
        writeln!(out, "{r}").map_err(|e| Error::io("stdout", e))?;
    }
    Ok(Outcome::Done)
}

fn cmd_bounds(max: usize, g: &GlobalFlags, out: &mut dyn Write) -> Result<Outcome> {
    let table = HashBoundsTable::build(max)?;
    let io = |e| Error::io("stdout", e);
    if g.json {
        writeln!(out, "{}", table.to_json()).map_err(io)?;
        return Ok(Outcome::Done);
    }
    for (m, n, b) in table.iter().filter(|(m, n, _)| m <= n) {
        if b.is_exact() {
            writeln!(out, "{m}#{n} = {}  ({} / {})", b.lower, b.lower_rule, b.upper_rule).map_err(io)?;
        } else {
            writeln!(out, "{m}#{n} in [{}, {}]  ({} / {})", b.lower, b.upper, b.lower_rule, b.upper_rule).map_err(io)?;
        }
    }
    Ok(Outcome::Done)
}

fn cmd_afcr(file: &Path, g: &GlobalFlags, out: &mut dyn Write) -> Result<Outcome> {
    let f = load_map(file)?;
    let budget = g.budget()?;
    let io = |e| Error::io("stdout", e);
    // Fewer outputs than inputs: a kernel exists for every y.
    let (is_afcr, margin, relative) = if f.c < f.a || f.c < f.b {
        (false, 0.0, 0.0)
    } else {
        let est = afcr_margin(&f.as_tensor(), &budget)?;
        (est.is_afcr, est.margin, est.relative)
    };
    if g.json {
        let v = serde_json::json!({
            "shape": [f.a, f.b, f.c],
            "afcr": is_afcr,
            "margin": margin,
            "relative_margin": relative,
            "restarts": budget.restarts,
            "seed": budget.seed,
        });
        write_json(out, &v).map_err(io)?;
    } else {
        let label = if is_afcr { "AFCR" } else { "not AFCR" };
        writeln!(out, "{label}, margin {margin:.6}").map_err(io)?;
    }
    Ok(Outcome::Done)
}

fn cmd_certify(file: &Path, g: &GlobalFlags, out: &mut dyn Write) -> Result<Outcome> {
    let t = Tensor3::parse(&read(file)?)?;
    let verdict = certify(&t, &g.budget()?)?;
    write_json(out, &verdict.to_json()).map_err(|e| Error::io("stdout", e))?;
    Ok(match verdict {
        Verdict::Inconclusive { .. } => Outcome::Inconclusive,
        _ => Outcome::Done,
    })
}

fn cmd_experiment(config: &Path, g: &GlobalFlags, out: &mut dyn Write) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::from_json(&read(config)?)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(r) = g.budget_restarts {
        cfg.restarts = r;
    }
    if let Some(t) = g.tol_rankdrop {
        cfg.tol_rankdrop = t;
    }
    let report = run_experiment(&cfg)?;
    let io = |e| Error::io("stdout", e);
    if g.json {
        writeln!(out, "{}", report.summary_json()).map_err(io)?;
    } else {
        let [rp, ex, inc] = report.frequencies;
        writeln!(out, "shape {:?}, {} samples, seed {}", cfg.shape, cfg.samples, cfg.seed).map_err(io)?;
        writeln!(out, "prediction: {}", report.prediction).map_err(io)?;
        writeln!(out, "RankP {rp:.6}, RankExceedsP {ex:.6}, Inconclusive {inc:.6}").map_err(io)?;
        writeln!(out, "max certificate residual {:.6e}", report.max_cert_residual).map_err(io)?;
        if cfg.csv_path.is_none() {
            write!(out, "{}", report.csv()?).map_err(io)?;
        }
    }
    Ok(if g.strict && report.counts.inconclusive > 0 {
        Outcome::Inconclusive
    } else {
        Outcome::Done
    })
}

fn cmd_make_bilinear(args: &MakeBilinear, out: &mut dyn Write) -> Result<Outcome> {
    let base = BilinearMap::hypercomplex_mult(args.dim)?;
    let f = match args.kind {
        Kind::Cd => base,
        Kind::Convolve => BilinearMap::convolve(&base, args.m, args.n)?,
        Kind::Restrict => base.restrict(args.rows.unwrap_or(base.a), args.cols.unwrap_or(base.b))?,
    };
    let text = if args.tensor { f.as_tensor().to_json() } else { f.to_json() };
    match &args.output {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| Error::io(path, e))?,
        None => writeln!(out, "{text}").map_err(|e| Error::io("stdout", e))?,
    }
    Ok(Outcome::Done)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Trank { m, n, p } => cmd_trank(*m, *n, *p, g, out),
        Command::Bounds { max } => cmd_bounds(*max, g, out),
        Command::Afcr { file } => cmd_afcr(file, g, out),
        Command::Certify { file } => cmd_certify(file, g, out),
        Command::Experiment { config } => cmd_experiment(config, g, out),
        Command::MakeBilinear(args) => cmd_make_bilinear(args, out),
    }
}

fn thread_cap() -> std::result::Result<Option<usize>, String> {
    match std::env::var("RANKATLAS_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("RANKATLAS_THREADS must be a positive integer, got {v:?}")),
        },
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    // Output is buffered because the pool runs the command on a worker thread.
    let mut buffer = Vec::new();
    let result = match builder.build() {
        Ok(pool) => pool.install(|| dispatch(&cli, &mut buffer)),
        Err(e) => Err(Error::Domain(format!("thread pool: {e}"))),
    };
    if let Err(e) = out.write_all(&buffer).and_then(|_| out.flush()) {
        let _ = writeln!(err, "error: writing output: {e}");
        return EXIT_USAGE;
    }
    match result {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Inconclusive) if cli.global.strict => EXIT_INCONCLUSIVE,
        Ok(Outcome::Inconclusive) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
