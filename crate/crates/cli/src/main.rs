use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use ari_bench::{run_bench, BenchScenario, Family};
use ari_cli::commands::{self, Format, Input};
use ari_cli::{persist, serve};
use ari_core::Connectivity;
use clap::{ArgGroup, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ari", version, about = "Adaptive TDP thresholding with all-resolutions inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u8 = s.parse().map_err(|_| format!("{s:?} is not 6, 18 or 26"))?;
    Connectivity::try_from(n).map_err(|e| e.to_string())
}

fn parse_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
        _ => Err(format!("{s:?} is not a number in [0, 1]")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a structure file from a volume or an edge list.
    #[command(group(ArgGroup::new("input").required(true).args(["volume", "edges"])))]
    Build {
        /// JSON volume header.
        #[arg(long)]
        volume: Option<PathBuf>,
        /// Edge list, one `u v` pair per line.
        #[arg(long, requires = "pvalues")]
        edges: Option<PathBuf>,
        /// One p-value per line, line i for vertex i.
        #[arg(long, requires = "edges")]
        pvalues: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Override the volume header's connectivity (6, 18 or 26).
        #[arg(long, value_parser = parse_connectivity)]
        connectivity: Option<Connectivity>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Report the maximal clusters at one or more TDP thresholds.
    Query {
        structure: PathBuf,
        #[arg(long, required = true, value_parser = parse_unit)]
        gamma: Vec<f64>,
        #[arg(long, default_value = "table")]
        format: Format,
        /// Include member lists.
        #[arg(long)]
        members: bool,
    },
    /// Write the largest reportable threshold of every vertex: a raw
    /// little-endian f32 volume for grids, CSV otherwise.
    GammaMap {
        structure: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Cluster sizes along a threshold grid, as CSV.
    Curve {
        structure: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time construction and queries on a synthetic instance, as CSV.
    Bench {
        /// cube, perfect_binary_tree or caterpillar.
        #[arg(long, default_value = "cube")]
        family: Family,
        /// Cube side, tree depth or caterpillar order.
        #[arg(long)]
        size: usize,
        #[arg(long, default_value = "18", value_parser = parse_connectivity)]
        connectivity: Connectivity,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serve a structure over HTTP until interrupted.
    Serve {
        structure: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<persist::Persisted> {
    persist::load(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build {
            volume,
            edges,
            pvalues,
            alpha,
            connectivity,
            output,
        } => {
            let input = match (volume, edges, pvalues) {
                (Some(v), None, None) => Input::Volume(v),
                (None, Some(edges), Some(pvalues)) => Input::EdgeList { edges, pvalues },
                _ => anyhow::bail!("give either --volume or both --edges and --pvalues"),
            };
            let (stored, report) = commands::build(&input, alpha, connectivity)?;
            persist::save(&stored, &output)?;
            print!("{}", commands::build_summary(&report));
        }
        Command::Query {
            structure,
            gamma,
            format,
            members,
        } => {
            let stored = load(&structure)?;
            print!("{}", commands::query_report(&stored, &gamma, format, members)?);
        }
        Command::GammaMap { structure, output } => {
            let stored = load(&structure)?;
            emit(Some(&output), &commands::gamma_map(&stored).to_bytes())?;
        }
        Command::Curve {
            structure,
            from,
            to,
            step,
            output,
        } => {
            let stored = load(&structure)?;
            let points = commands::curve_points(&stored, from, to, step)?;
            emit(output.as_deref(), commands::curve_csv(&points).as_bytes())?;
        }
        Command::Bench {
            family,
            size,
            connectivity,
            seed,
            reps,
            alpha,
            output,
        } => {
            let scenario = BenchScenario {
                family,
                size,
                connectivity,
                seed,
                repetitions: reps,
            };
            let report = run_bench(&scenario, alpha)?;
            emit(output.as_deref(), report.to_csv().as_bytes())?;
        }
        Command::Serve { structure, bind } => {
            let stored = Arc::new(load(&structure)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = serve::bind(bind)
                    .await
                    .with_context(|| format!("binding {bind}"))?;
                eprintln!("serving {} on http://{}", structure.display(), listener.local_addr()?);
                let ctrl_c = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                serve::serve(listener, stored, ctrl_c).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
