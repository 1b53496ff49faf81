use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lorafair::allocation::{fair_rate_ratios, ratios_to_counts, BwWeighting};
use lorafair::experiment::{check_scale, run_sweep, write_csv, Axis, ExperimentConfig, SweepRow};
use lorafair::phy::DataRate;
use lorafair::sim::{default_deployment, format_event, run, RunOptions, EVENT_LOG_HEADER};
use lorafair::{Error, Result};

#[derive(Parser)]
#[command(name = "lorafair", version, about = "LoRaWAN cell simulator with fair data-rate allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the fair ratios and node counts for a deployment set.
    Ratios {
        /// Node count used for the integer split.
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Comma-separated data rates as sf/bw_khz/cr_den, e.g. 7/125/5,7/250/5.
        #[arg(long)]
        deployed: Option<String>,
        /// Split each SF's share over bandwidths by bw^2 instead of bw.
        #[arg(long)]
        squared_bw: bool,
    },
    /// Run each configured strategy once with one seed.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Per-packet event log.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Summary CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-node CSV.
        #[arg(long)]
        nodes: Option<PathBuf>,
        /// Allow runs beyond 1000 nodes or 7200 s.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Sweep one scenario axis over several seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// nodes, cell_radius, distribution or strategy.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Overrides the seeds in the config file.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "LORAFAIR_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        paper_scale: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ratios { n, deployed, squared_bw } => cmd_ratios(n, deployed.as_deref(), squared_bw),
        Command::Simulate { config, seed, events, out, nodes, paper_scale } => {
            cmd_simulate(&config, seed, events.as_deref(), out.as_deref(), nodes.as_deref(), paper_scale)
        }
        Command::Sweep { config, axis, values, seeds, out, workers, paper_scale } => {
            cmd_sweep(&config, &axis, &values, seeds, &out, workers, paper_scale)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_ratios(n: usize, deployed: Option<&str>, squared_bw: bool) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("--n must be >= 1".into()));
    }
    let deployed: Vec<DataRate> = match deployed {
        Some(spec) => spec.split(',').map(str::parse).collect::<Result<_>>()?,
        None => default_deployment(),
    };
    let weighting = if squared_bw { BwWeighting::Squared } else { BwWeighting::Linear };
    let ratios = fair_rate_ratios(&deployed, weighting)?;
    let counts = ratios_to_counts(n, &ratios)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "rate,ratio,count")?;
    for (rate, p) in ratios.iter() {
        writeln!(out, "{rate},{p:.4},{}", counts[rate])?;
    }
    writeln!(out, "total,{:.4},{}", ratios.total(), counts.values().sum::<usize>())?;
    Ok(())
}

/// Writes to a temporary sibling first so a failed run leaves no partial file.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("partial");
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        fill(&mut w)?;
        w.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => Ok(std::fs::rename(&tmp, path)?),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn cmd_simulate(
    config: &Path,
    seed: u64,
    events: Option<&Path>,
    out: Option<&Path>,
    nodes: Option<&Path>,
    paper_scale: bool,
) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.check_scale(paper_scale)?;
    let record = events.is_some();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for strategy in &cfg.strategies {
        let scenario = lorafair::sim::Scenario { strategy: *strategy, ..cfg.scenario.clone() };
        let result = run(&scenario, seed, RunOptions { record_events: record })?;
        rows.push(SweepRow::from_reports("single", *strategy, std::slice::from_ref(&result.report)));
        runs.push((*strategy, result));
    }

    if let Some(path) = events {
        write_atomic(path, |w| {
            writeln!(w, "strategy,{EVENT_LOG_HEADER}")?;
            for (strategy, r) in &runs {
                for t in r.events.as_deref().unwrap_or_default() {
                    writeln!(w, "{strategy},{}", format_event(t))?;
                }
            }
            Ok(())
        })?;
    }
    if let Some(path) = nodes {
        write_atomic(path, |w| {
            writeln!(w, "strategy,node,distance_m,path_gain_db,sf,bw,cr,tp,sent,delivered,der,energy_j")?;
            for (strategy, r) in &runs {
                for (m, node) in r.report.per_node.iter().zip(&r.cell) {
                    let p = r.assignment.get(m.id).expect("every node assigned");
                    writeln!(
                        w,
                        "{strategy},{},{:.3},{:.3},{},{},4/{},{},{},{},{:.6},{:.6}",
                        m.id,
                        m.distance,
                        node.path_gain,
                        p.sf().value(),
                        p.bw().hz(),
                        4 + p.cr().redundancy(),
                        p.tp,
                        m.sent,
                        (m.der.value * m.sent as f64).round() as u64,
                        m.der.value,
                        m.energy_j
                    )?;
                }
            }
            Ok(())
        })?;
    }
    match out {
        Some(path) => write_atomic(path, |w| write_csv(&rows, w)),
        None => write_csv(&rows, &mut io::stdout().lock()),
    }
}

fn cmd_sweep(
    config: &Path,
    axis: &str,
    values: &[String],
    seeds: Option<Vec<u64>>,
    out: &Path,
    workers: Option<usize>,
    paper_scale: bool,
) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    let axis: Axis = axis.parse()?;
    if let Some(seeds) = seeds {
        if seeds.is_empty() {
            return Err(Error::Config("--seeds is empty".into()));
        }
        cfg.seeds = seeds;
    }
    let points = lorafair::experiment::expand(&cfg, axis, values)?;
    for p in &points {
        check_scale(&p.scenario, paper_scale)?;
    }
    let rows = run_sweep(&cfg, axis, values, workers)?;
    write_atomic(out, |w| write_csv(&rows, w))
}
