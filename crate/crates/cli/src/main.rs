use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use labbench_core::scenario::{load_model, run_scenario, ScenarioError, ScenarioSpec};
use labbench_core::stats::{write_atomic, DEFAULT_SAMPLE_INTERVAL};
use labbench_core::topology::compute_routes;
use labbench_core::traffic::{
    emit_workload, fit_empirical, generate_workload, parse_size_samples, ArrivalModel, Destination,
    RequestKind, SizeDistribution, TrafficError,
};

#[derive(Parser)]
#[command(
    name = "labbench",
    version,
    about = "Network and cloud test bench simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write stats.csv, events.log and summary.txt
    Run {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        control: Option<PathBuf>,
        /// simulated seconds
        #[arg(long)]
        until: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// seconds between samples
        #[arg(long, default_value_t = DEFAULT_SAMPLE_INTERVAL)]
        interval: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a workload file
    #[command(group(ArgGroup::new("size").required(true).args(["fixed", "empirical", "lognormal"])))]
    #[command(group(ArgGroup::new("arrivals").required(true).args(["interval", "poisson"])))]
    Gen {
        /// every request this many bytes
        #[arg(long)]
        fixed: Option<u64>,
        /// file of observed sizes, one per line
        #[arg(long)]
        empirical: Option<PathBuf>,
        /// MU,SIGMA of log-bytes
        #[arg(long, value_parser = parse_pair)]
        lognormal: Option<(f64, f64)>,
        /// seconds between requests
        #[arg(long)]
        interval: Option<f64>,
        /// requests per second
        #[arg(long)]
        poisson: Option<f64>,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "PC1")]
        src: String,
        /// `vm:service` or a host name
        #[arg(long, default_value = "VM1_file:files")]
        dst: String,
        #[arg(long, default_value = "file")]
        kind: String,
        #[arg(long, default_value_t = 0)]
        prio: u8,
        /// output file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a topology and print its routing tables
    Validate { topology: PathBuf },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected MU,SIGMA, got `{s}`"))?;
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{x}` is not a number"))
    };
    Ok((num(a)?, num(b)?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run {
            topology,
            workload,
            control,
            until,
            seed,
            interval,
            out,
        } => run(ScenarioSpec {
            topology_path: topology,
            workload_path: workload,
            control_path: control,
            until,
            seed,
            sample_interval: interval,
            out_dir: out,
        }),
        Command::Gen {
            fixed,
            empirical,
            lognormal,
            interval,
            poisson,
            count,
            seed,
            src,
            dst,
            kind,
            prio,
            out,
        } => {
            let dist = match (fixed, empirical, lognormal) {
                (Some(n), _, _) => SizeDist::Fixed(n),
                (_, Some(path), _) => SizeDist::Empirical(path),
                (_, _, Some((mu, sigma))) => SizeDist::LogNormal(mu, sigma),
                _ => unreachable!("clap requires one size option"),
            };
            let arrivals = match (interval, poisson) {
                (Some(s), _) => Arrivals::Interval(s),
                (_, Some(r)) => Arrivals::Poisson(r),
                _ => unreachable!("clap requires one arrival option"),
            };
            gen(GenArgs {
                dist,
                arrivals,
                count,
                seed,
                src,
                dst,
                kind,
                prio,
                out,
            })
        }
        Command::Validate { topology } => validate(&topology),
    };
    ExitCode::from(code)
}

fn run(spec: ScenarioSpec) -> u8 {
    match run_scenario(&spec) {
        Ok(report) => {
            println!(
                "flows completed={} failed={}; wrote {}",
                report.flows_completed,
                report.flows_failed,
                spec.out_dir.display()
            );
            println!("{}", report.conservation);
            if report.conservation.passed() {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

enum SizeDist {
    Fixed(u64),
    Empirical(PathBuf),
    LogNormal(f64, f64),
}

enum Arrivals {
    Interval(f64),
    Poisson(f64),
}

struct GenArgs {
    dist: SizeDist,
    arrivals: Arrivals,
    count: usize,
    seed: u64,
    src: String,
    dst: String,
    kind: String,
    prio: u8,
    out: Option<PathBuf>,
}

fn gen(args: GenArgs) -> u8 {
    let result = (|| -> Result<String, String> {
        let dist = match args.dist {
            SizeDist::Fixed(n) => SizeDistribution::fixed(n).map_err(|e| e.to_string())?,
            SizeDist::Empirical(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                parse_size_samples(&text)
                    .and_then(|s| fit_empirical(&s))
                    .map_err(|e: TrafficError| format!("{}: {e}", path.display()))?
            }
            SizeDist::LogNormal(mu, sigma) => {
                SizeDistribution::lognormal(mu, sigma).map_err(|e| e.to_string())?
            }
        };
        let arrivals = match args.arrivals {
            Arrivals::Interval(s) => ArrivalModel::fixed_interval(s),
            Arrivals::Poisson(r) => ArrivalModel::poisson(r),
        }
        .map_err(|e| e.to_string())?;
        let dst = Destination::parse(&args.dst)?;
        let kind: RequestKind = args.kind.parse()?;
        let workload = generate_workload(
            &dist, arrivals, args.count, &args.src, &dst, kind, args.prio, args.seed,
        )
        .map_err(|e| e.to_string())?;
        Ok(emit_workload(&workload))
    })();
    match result {
        Ok(text) => match args.out {
            Some(path) => match write_atomic(&path, text.as_bytes()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            },
            None => {
                print!("{text}");
                0
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn validate(path: &std::path::Path) -> u8 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 1;
        }
    };
    let model = match load_model(&text, &path.display().to_string()) {
        Ok(m) => m,
        Err(ScenarioError::Validation { path, errors }) => {
            for e in &errors {
                let level = if e.is_warning() { "warning" } else { "error" };
                eprintln!("{level}: {path}: {e}");
            }
            return 1;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if model.topology().is_empty() {
        println!("warning: {}: empty model", path.display());
    }
    for w in &model.warnings {
        println!("warning: {}: {w}", path.display());
    }
    for (device, table) in compute_routes(&model) {
        println!("{device}:");
        print!("{table}");
    }
    0
}
