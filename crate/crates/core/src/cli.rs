//! Command-line front end: `design`, `analyze`, `simulate`, `verify`.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when a
//! verified property fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::design_matrix::ModelMatrix;
use crate::error::{Error, Result};
use crate::neymanian::{AnalysisReport, ObservedData};
use crate::oracle::verify::{run_verification, Status, TableSource, VerifyConfig};
use crate::sim::{self, Scheme, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_PROPERTY_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fneyman",
    version,
    about = "Neymanian analysis of 2^K factorial designs with binary outcomes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the model matrix, treatment combinations and effect labels.
    Design(DesignArgs),
    /// Estimate factorial effects with classic and improved variances.
    Analyze(AnalyzeArgs),
    /// Monte Carlo ratio of improved to classic variance estimates.
    Simulate(SimulateArgs),
    /// Check the exact identities and bounds by enumeration.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Text,
    Json,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    k: u32,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: u32,
    /// Input holds `arm,n,n_obs` rows instead of unit-level records.
    #[arg(long)]
    aggregated: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// `key=value` file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    units: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Upper end of the uniform draw for each arm's success count (default n_j).
    #[arg(long)]
    obs_max: Option<u64>,
    /// Comma-separated arm sizes; balanced when omitted.
    #[arg(long, value_delimiter = ',')]
    arm_sizes: Option<Vec<usize>>,
    #[arg(long)]
    effect: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// Randomize a simulated science table instead of drawing counts directly.
    #[arg(long)]
    from_table: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    hist: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',')]
    margins: Option<Vec<usize>>,
    #[arg(long, conflicts_with = "fuzz")]
    exhaustive: bool,
    /// Number of random tables.
    #[arg(long)]
    fuzz: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn design(args: DesignArgs, out: &mut dyn Write) -> Result<i32> {
    let m = ModelMatrix::new(args.k)?;
    let z = m.treatment_combinations();
    if args.format == Format::Json {
        let rows: Vec<Vec<i8>> = (0..m.arms())
            .map(|j| (0..m.arms()).map(|l| m.entry(j, l)).collect())
            .collect();
        let labels: Vec<&str> = (0..m.arms()).map(|l| m.label(l)).collect();
        let doc = json!({
            "K": m.factors(),
            "J": m.arms(),
            "labels": labels,
            "matrix": rows,
            "treatment_combinations": z,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        writeln!(out, "model matrix (K = {}, J = {})", m.factors(), m.arms())?;
        write!(out, "{m}")?;
        writeln!(out)?;
        writeln!(out, "treatment combinations")?;
        for (j, zj) in z.iter().enumerate() {
            writeln!(out, "  z{} = {zj}", j + 1)?;
        }
        writeln!(out)?;
        writeln!(out, "effects")?;
        for l in 1..m.arms() {
            let kind = if l <= m.factors() as usize {
                "main"
            } else {
                "interaction"
            };
            writeln!(out, "  h{l}: {} ({kind})", m.label(l))?;
        }
    }
    Ok(EXIT_OK)
}

fn analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<i32> {
    let m = ModelMatrix::new(args.k)?;
    let obs = if args.aggregated {
        ObservedData::from_aggregated_path(&args.input, &m)?
    } else {
        ObservedData::from_unit_level_path(&args.input, &m)?
    };
    let report = AnalysisReport::build(&obs, &m, args.level)?;
    match args.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        _ => write!(out, "{}", report.to_table())?,
    }
    Ok(EXIT_OK)
}

fn simulate_config(args: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_config_text(&std::fs::read_to_string(path)?)?;
    }
    if let Some(v) = args.k {
        cfg.factors = v;
    }
    if let Some(v) = args.units {
        cfg.units = v;
    }
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.obs_max.is_some() {
        cfg.obs_max = args.obs_max;
    }
    if args.arm_sizes.is_some() {
        cfg.arm_sizes = args.arm_sizes.clone();
    }
    if let Some(v) = args.effect {
        cfg.effect = v;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(v) = args.bins {
        cfg.bins = v;
    }
    if args.from_table {
        cfg.scheme = Scheme::FromTable;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.hist.is_some() {
        cfg.hist = args.hist.clone();
    }
    if let Some(f) = args.format {
        cfg.json = f == Format::Json;
    }
    Ok(cfg)
}

fn simulate(args: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = simulate_config(&args)?;
    let res = sim::run_ratio_simulation(&cfg)?;
    if let Some(path) = &cfg.out {
        sim::emit_plot_data(&res.replicates, &res.summary, path, cfg.hist.as_deref())?;
    } else if let Some(path) = &cfg.hist {
        sim::write_histogram_csv(
            std::io::BufWriter::new(std::fs::File::create(path)?),
            &res.summary,
        )?;
    }
    if res.summary.n_truncated > 0 {
        writeln!(
            err,
            "warning: {} arm draws exceeded n_j and were truncated",
            res.summary.n_truncated
        )?;
    }
    let s = &res.summary;
    if cfg.json {
        let doc = json!({
            "config": {
                "K": cfg.factors,
                "N": cfg.units,
                "n": cfg.resolved_arm_sizes()?,
                "reps": cfg.reps,
                "seed": cfg.seed,
                "obs_max": cfg.obs_max,
                "effect": cfg.effect,
                "scheme": match cfg.scheme { Scheme::UniformCounts => "uniform-counts", Scheme::FromTable => "from-table" },
            },
            "min": s.min,
            "max": s.max,
            "mean": s.mean,
            "frac_improvement_gt_10pct": s.frac_improvement_gt_10pct,
            "n_clamped": s.n_clamped,
            "n_truncated": s.n_truncated,
            "table": res.table,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        writeln!(out, "replicates: {}", s.reps)?;
        writeln!(
            out,
            "ratio min/mean/max: {:.6} / {:.6} / {:.6}",
            s.min, s.mean, s.max
        )?;
        writeln!(out, "improvement > 10%: {:.4}", s.frac_improvement_gt_10pct)?;
        writeln!(
            out,
            "clamped: {}, truncated draws: {}",
            s.n_clamped, s.n_truncated
        )?;
        if let Some(t) = &res.table {
            writeln!(
                out,
                "true variance {:.6e}, mean classic {:.6e}, mean improved {:.6e}",
                t.true_variance, t.mean_var_classic, t.mean_var_improved
            )?;
        }
    }
    Ok(EXIT_OK)
}

fn verify(args: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let source = match args.fuzz {
        Some(reps) => TableSource::Fuzz {
            reps,
            seed: args.seed,
        },
        None if args.exhaustive || args.margins.is_some() => TableSource::Exhaustive,
        None => return Err(Error::invalid("choose --exhaustive or --fuzz <R>")),
    };
    let mut cfg = VerifyConfig::new(args.k, args.n, source);
    cfg.margins = args.margins;
    let results = run_verification(&cfg)?;
    if args.format == Format::Json {
        writeln!(out, "{}", serde_json::to_string_pretty(&results)?)?;
    } else {
        for r in &results {
            writeln!(out, "{}", r.line())?;
        }
    }
    let failed = results.iter().any(|r| r.status == Status::Fail);
    Ok(if failed {
        EXIT_PROPERTY_FAILED
    } else {
        EXIT_OK
    })
}

/// Parse `argv` (including the program name) and run the subcommand.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INVALID;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let res = match cli.command {
        Command::Design(a) => design(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Simulate(a) => simulate(a, out, err),
        Command::Verify(a) => verify(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
    }
}
