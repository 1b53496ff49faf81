//! Seeded sweeps over one scenario axis and their CSV form.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::allocation::Strategy;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::phy::SpreadingFactor;
use crate::sim::{run, RunOptions, Scenario};

pub const CSV_HEADER: &str = "sweep_value,strategy,seed_count,der_mean,der_std,jain_mean,jain_std,\
energy_j_mean,energy_j_std,der_sf7,der_sf8,der_sf9,der_sf10,der_sf11,der_sf12";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Nodes,
    Radius,
    Distribution,
    Strategy,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nodes" => Ok(Axis::Nodes),
            "cell_radius" | "radius" => Ok(Axis::Radius),
            "distribution" => Ok(Axis::Distribution),
            "strategy" => Ok(Axis::Strategy),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}` (nodes|cell_radius|distribution|strategy)"
            ))),
        }
    }
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seed-aggregated results of one (sweep value, strategy) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: String,
    pub strategy: Strategy,
    pub seed_count: usize,
    pub der: (f64, f64),
    pub jain: (f64, f64),
    pub energy_j: (f64, f64),
    /// Mean per-SF DER over the seeds in which the SF carried traffic.
    pub der_sf: [Option<f64>; 6],
}

impl SweepRow {
    pub fn from_reports(sweep_value: &str, strategy: Strategy, reports: &[MetricsReport]) -> Self {
        let pick = |f: fn(&MetricsReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
        let mut der_sf = [None; 6];
        for sf in SpreadingFactor::ALL {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.per_sf_der.get(&sf).copied()).collect();
            if !vals.is_empty() {
                der_sf[sf.index()] = Some(mean_std(&vals).0);
            }
        }
        SweepRow {
            sweep_value: sweep_value.to_string(),
            strategy,
            seed_count: reports.len(),
            der: pick(|r| r.overall_der),
            jain: pick(|r| r.jain),
            energy_j: pick(|r| r.total_energy_j),
            der_sf,
        }
    }

    pub fn csv_line(&self) -> String {
        let mut line = format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.sweep_value,
            self.strategy,
            self.seed_count,
            self.der.0,
            self.der.1,
            self.jain.0,
            self.jain.1,
            self.energy_j.0,
            self.energy_j.1
        );
        for v in &self.der_sf {
            match v {
                Some(v) => write!(line, ",{v:.6}").expect("writing to a String"),
                None => line.push(','),
            }
        }
        line
    }
}

pub fn write_csv(rows: &[SweepRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

/// Applies one sweep value to a scenario. The strategy axis is handled by
/// the caller.
fn apply_axis(base: &Scenario, axis: Axis, value: &str) -> Result<Scenario> {
    let mut s = base.clone();
    let bad = || Error::Config(format!("bad sweep value `{value}` for {axis:?}"));
    match axis {
        Axis::Nodes => s.n_nodes = value.parse().map_err(|_| bad())?,
        Axis::Radius => s.radius = value.parse().map_err(|_| bad())?,
        Axis::Distribution => s.distribution = value.parse()?,
        Axis::Strategy => s.strategy = value.parse()?,
    }
    Ok(s)
}

/// One fully specified sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub scenario: Scenario,
}

/// Expands the sweep into points in row order: sweep value major, strategy
/// minor. On the strategy axis the values are the strategies.
pub fn expand(cfg: &ExperimentConfig, axis: Axis, values: &[String]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut points = Vec::new();
    for value in values {
        if axis == Axis::Strategy {
            let scenario = apply_axis(&cfg.scenario, axis, value)?;
            scenario.validate()?;
            points.push(SweepPoint { value: value.clone(), scenario });
            continue;
        }
        for strategy in &cfg.strategies {
            let mut scenario = apply_axis(&cfg.scenario, axis, value)?;
            scenario.strategy = *strategy;
            scenario.validate()?;
            points.push(SweepPoint { value: value.clone(), scenario });
        }
    }
    Ok(points)
}

/// Runs every point for every seed, in parallel on the current rayon pool,
/// and returns the rows in sweep order.
pub fn run_points(points: &[SweepPoint], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let reports: Vec<MetricsReport> = jobs
        .par_iter()
        .map(|&(p, seed)| run(&points[p].scenario, seed, RunOptions::default()).map(|r| r.report))
        .collect::<Result<_>>()?;
    Ok(points
        .iter()
        .zip(reports.chunks(seeds.len()))
        .map(|(pt, reps)| SweepRow::from_reports(&pt.value, pt.scenario.strategy, reps))
        .collect())
}

/// Runs a sweep on a pool of `workers` threads (all cores when `None`).
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: Axis,
    values: &[String],
    workers: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let points = expand(cfg, axis, values)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            return Err(Error::Config("worker count must be >= 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_points(&points, &cfg.seeds))
}
