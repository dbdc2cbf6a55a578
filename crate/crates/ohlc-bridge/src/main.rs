use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ohlc_bridge::core::extrema::feller_range_density;
use ohlc_bridge::core::SeriesControl;
use ohlc_bridge::error::{Error, Result};
use ohlc_bridge::fmt::sig12;
use ohlc_bridge::io::{ingest, read_voltime, ColumnMap, IngestOptions, OrderingMode};
use ohlc_bridge::mc::dump::{write_bin_curves, write_ensemble, write_summaries, write_table2};
use ohlc_bridge::mc::{run_study, simulate_summaries, table2, Conditioning, ExtremaMode, GridSpec, SimConfig, StudyConfig};
use ohlc_bridge::pipeline::{interpolate, write_csv, write_json, InterpolateOptions, Method, SigmaChoice};
use ohlc_bridge::verify::{self, Level};

#[derive(Parser)]
#[command(name = "ohlc", version, about = "Conditional Brownian interpolation of OHLC bars")]
struct Cli {
    /// Format of error reports.
    #[arg(long, value_enum, global = true, default_value = "csv")]
    emit: Emit,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bridge,
    Ch,
    Chl,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaArg {
    Const,
    Gk,
    Ml,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    Close,
    High,
    Low,
    Ch,
    Hl,
    Chl,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtremaArg {
    Discrete,
    Bridge,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Uniform,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(clap::Args)]
struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 1530)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bins per conditioning dimension.
    #[arg(long, default_value_t = 40)]
    bins: usize,
    /// Density power of the adaptive bin boundaries.
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    /// Bins with fewer paths are flagged.
    #[arg(long, default_value_t = 50)]
    kappa: usize,
    #[arg(long, value_enum, default_value = "discrete")]
    extrema: ExtremaArg,
    #[arg(long, value_enum, default_value = "uniform")]
    grid: GridArg,
    /// Accumulated time points per path.
    #[arg(long, default_value_t = 91)]
    time_points: usize,
    /// Single-threaded generation.
    #[arg(long)]
    sequential: bool,
    /// Divide bin variances by n - 1.
    #[arg(long)]
    unbiased: bool,
    /// Leave flagged bins out of the ensemble average.
    #[arg(long)]
    exclude_flagged: bool,
}

impl SimArgs {
    fn study(&self) -> StudyConfig {
        let sim = SimConfig::new(self.paths, self.steps)
            .with_seed(self.seed)
            .with_extrema(match self.extrema {
                ExtremaArg::Discrete => ExtremaMode::Discrete,
                ExtremaArg::Bridge => ExtremaMode::BridgeSampled,
            })
            .with_grid(match self.grid {
                GridArg::Uniform => GridSpec::Uniform,
                GridArg::Cosine => GridSpec::Cosine,
            })
            .with_parallel(!self.sequential);
        let mut s = StudyConfig::new(sim, self.bins);
        s.alpha = self.alpha;
        s.kappa = self.kappa;
        s.time_points = self.time_points;
        s.report.unbiased = self.unbiased;
        s.report.exclude_flagged = self.exclude_flagged;
        s
    }
}

#[derive(Subcommand)]
enum Command {
    /// Interpolate every bar of a CSV file.
    Interpolate {
        #[arg(long)]
        input: PathBuf,
        /// Column map, e.g. `id=Date,open=Open,high=High,low=Low,close=Close`.
        #[arg(long, default_value = "")]
        format: String,
        #[arg(long, value_enum, default_value = "chl")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "const")]
        sigma: SigmaArg,
        /// Known variance per bar; overrides --sigma.
        #[arg(long)]
        sigma_sq: Option<f64>,
        /// Intervals of the volatility-time grid.
        #[arg(long, default_value_t = 78)]
        grid: usize,
        /// Two-column (t, tau) volatility-time file.
        #[arg(long)]
        voltime: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Reject OHLC ordering violations instead of clamping them.
        #[arg(long)]
        strict: bool,
        /// Use the previous close as the open.
        #[arg(long)]
        proxy_open: bool,
    },
    /// Simulate paths and report binned conditional curves.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value = "chl")]
        condition: ConditionArg,
        /// Per-bin curves CSV; the ensemble table goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Binary dump of the path summaries.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run the analytic and Monte Carlo self-checks.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
    },
    /// Tabulate the density of the range.
    Feller {
        #[arg(long, default_value_t = 0.005)]
        xmin: f64,
        #[arg(long, default_value_t = 6.0)]
        xmax: f64,
        #[arg(long, default_value_t = 60)]
        points: usize,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        /// Overlay an empirical histogram from this many paths.
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time-averaged ensemble variances for each conditioning set.
    Table2 {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Exit with status 3 when a row misses its tolerance.
        #[arg(long)]
        check: bool,
    },
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Interpolate { input, format, method, sigma, sigma_sq, grid, voltime, output, strict, proxy_open } => {
            let opts = IngestOptions {
                columns: ColumnMap::parse(&format)?,
                mode: if strict { OrderingMode::Strict } else { OrderingMode::Lenient },
                proxy_open,
            };
            let bars = ingest(&input, &opts)?;
            let method = match method {
                MethodArg::Bridge => Method::Bridge,
                MethodArg::Ch => Method::Ch,
                MethodArg::Chl => Method::Chl,
            };
            let sigma = match (sigma_sq, sigma) {
                (Some(s), _) => SigmaChoice::Known(s),
                (None, SigmaArg::Const) => SigmaChoice::Const,
                (None, SigmaArg::Gk) => SigmaChoice::GarmanKlass,
                (None, SigmaArg::Ml) => SigmaChoice::MaxLikelihood,
            };
            let mut o = InterpolateOptions::new(method, sigma, grid);
            if let Some(v) = voltime {
                o.voltime = Some(read_voltime(File::open(v)?)?);
            }
            let normalized: Vec<_> = bars.iter().map(|b| b.normalized).collect();
            let ids: Vec<String> = bars.iter().map(|b| b.raw.id.clone()).collect();
            let result = interpolate(&normalized, &o)?;
            let mut w = sink(&output)?;
            if EMIT_JSON.get().copied().unwrap_or(false) {
                write_json(&mut w, &result, &ids)?;
            } else {
                write_csv(&mut w, &result, &ids)?;
            }
            w.flush()?;
            for e in &result.errors {
                eprintln!("bar {}: {}", ids[e.index], e.message);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { sim, condition, output, dump } => {
            let study = sim.study();
            let name = match condition {
                ConditionArg::Close => "close",
                ConditionArg::High => "high",
                ConditionArg::Low => "low",
                ConditionArg::Ch => "ch",
                ConditionArg::Hl => "hl",
                ConditionArg::Chl => "chl",
            };
            if let Some(p) = dump {
                let s = simulate_summaries(&study.sim)?;
                write_summaries(BufWriter::new(File::create(p)?), study.sim.seed, study.sim.config_hash(), &s)?;
            }
            let reports = run_study(&study, &[Conditioning::parse(name)?])?;
            if let Some(p) = &output {
                write_bin_curves(BufWriter::new(File::create(p)?), &reports[0])?;
            }
            let mut w = sink(&None)?;
            write_ensemble(&mut w, &reports)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { level } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let results = verify::run(level);
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.pass;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Feller { xmin, xmax, points, tolerance, paths, steps, seed, output } => {
            if !(xmin > 0.0 && xmax > xmin && points >= 2) {
                return Err(Error::Config("need 0 < xmin < xmax and at least 2 points".into()));
            }
            let ctrl = SeriesControl::default().with_tolerance(tolerance).with_max_terms(1_000_000);
            let dx = (xmax - xmin) / (points - 1) as f64;
            let xs: Vec<f64> = (0..points).map(|i| xmin + i as f64 * dx).collect();
            let empirical = match paths {
                Some(n) => {
                    let s = simulate_summaries(&SimConfig::new(n, steps).with_seed(seed))?;
                    let mut counts = vec![0usize; points];
                    for p in &s {
                        let r = p.max - p.min;
                        let k = ((r - xmin) / dx + 0.5).floor();
                        if k >= 0.0 && (k as usize) < points {
                            counts[k as usize] += 1;
                        }
                    }
                    let mean = s.iter().map(|p| p.max - p.min).sum::<f64>() / n as f64;
                    eprintln!("mean range {} (continuous 2*sqrt(2/pi) = {})", sig12(mean), sig12(2.0 * (2.0 / std::f64::consts::PI).sqrt()));
                    Some(counts.iter().map(|&c| c as f64 / (n as f64 * dx)).collect::<Vec<_>>())
                }
                None => None,
            };
            let mut w = csv::Writer::from_writer(sink(&output)?);
            let mut header = vec!["x", "density", "terms"];
            if empirical.is_some() {
                header.push("empirical");
            }
            w.write_record(&header).map_err(|e| Error::Config(e.to_string()))?;
            for (i, &x) in xs.iter().enumerate() {
                let d = feller_range_density(x, &ctrl)?;
                let mut rec = vec![sig12(x), sig12(d.value), d.terms.to_string()];
                if let Some(e) = &empirical {
                    rec.push(sig12(e[i]));
                }
                w.write_record(&rec).map_err(|e| Error::Config(e.to_string()))?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Table2 { sim, output, check } => {
            let (rows, _) = table2(&sim.study())?;
            let mut w = sink(&output)?;
            write_table2(&mut w, &rows)?;
            w.flush()?;
            let ok = rows.iter().all(|r| r.pass());
            Ok(if check && !ok { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
    }
}

static EMIT_JSON: std::sync::OnceLock<bool> = std::sync::OnceLock::new();

fn report(message: &str, kind: &str, code: u8) -> ExitCode {
    if EMIT_JSON.get().copied().unwrap_or(false) {
        println!("{}", serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } }));
    } else {
        eprintln!("error: {message}");
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let json = args.windows(2).any(|w| w[0] == "--emit" && w[1] == "json") || args.iter().any(|a| a == "--emit=json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json {
                let _ = EMIT_JSON.set(true);
                return report(&e.to_string(), "usage", 1);
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let _ = EMIT_JSON.set(cli.emit == Emit::Json);
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let kind = match e.exit_code() {
                2 => "data",
                3 => "numeric",
                _ => "usage",
            };
            report(&e.to_string(), kind, e.exit_code() as u8)
        }
    }
}
