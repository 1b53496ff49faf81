//! Discrete-event simulation of one gateway cell with pure Aloha uplinks.
//!
//! A run places the nodes, lets the network server allocate parameters from
//! averaged RSSI reports, then replays every node's traffic in start order
//! through the [`Gateway`]. Each node draws from its own random streams, so
//! its placement aside, a node's schedule does not depend on the others.

mod reception;
mod traffic;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use log::{debug, warn};
use rand_distr::{Distribution, Normal};

pub use reception::{resolve_receptions, Gateway, Outcome, Toggles, Transmission};
pub use traffic::{generate_traffic, measurement_rng, traffic_rng, TrafficSource};

use crate::allocation::{allocate, AllocationContext, Assignment, BwWeighting, NodeReport, Strategy};
use crate::channel::{path_loss, place_nodes, NodeDistribution, Position, PropagationConfig, RadialLaw};
use crate::error::{Error, Result};
use crate::metrics::{LossCounts, MetricsReport, NodeOutcome};
use crate::phy::{
    airtime, Bandwidth, CirMatrix, CodingRate, DataRate, EnergyProfile, FrameOptions, Sensitivity, SpreadingFactor,
    TxParams, MAX_PAYLOAD_BYTES, MAX_TP_DBM, MIN_TP_DBM,
};

/// Carrier used when a scenario names none.
pub const DEFAULT_CHANNEL_HZ: u32 = 868_000_000;

/// Full configuration of one cell.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub n_nodes: usize,
    /// Cell radius in metres.
    pub radius: f64,
    pub distribution: NodeDistribution,
    pub radial_law: RadialLaw,
    /// Payload length in bytes.
    pub packet_len: usize,
    /// Mean gap between a node's packets in seconds.
    pub mean_interval: f64,
    /// Concurrent demodulators per carrier.
    pub max_recv: usize,
    /// Carrier frequencies in Hz; node `i` uses `channels[i % len]`.
    pub channels: Vec<u32>,
    pub sim_time: f64,
    pub strategy: Strategy,
    pub toggles: Toggles,
    pub propagation: PropagationConfig,
    pub cir: CirMatrix,
    /// Allowed transmit powers in dBm, ascending.
    pub pow_levels: Vec<i32>,
    pub sensitivity: Sensitivity,
    pub deployed: Vec<DataRate>,
    pub bw_weighting: BwWeighting,
    pub frame: FrameOptions,
    pub energy: EnergyProfile,
    /// RSSI samples the server averages per node before allocating.
    pub rssi_samples: u32,
    /// Per-sample RSSI measurement noise in dB.
    pub rssi_noise_sigma: f64,
    /// Distance bin width for the report; `None` uses a twentieth of the radius.
    pub bin_width: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            n_nodes: 100,
            radius: 1000.0,
            distribution: NodeDistribution::Uniform,
            radial_law: RadialLaw::Area,
            packet_len: 80,
            mean_interval: 60.0,
            max_recv: 8,
            channels: vec![DEFAULT_CHANNEL_HZ],
            sim_time: 7200.0,
            strategy: Strategy::FadrOneRegion,
            toggles: Toggles::default(),
            propagation: PropagationConfig::default(),
            cir: CirMatrix::default(),
            pow_levels: (MIN_TP_DBM..=MAX_TP_DBM).collect(),
            sensitivity: Sensitivity::default(),
            deployed: default_deployment(),
            bw_weighting: BwWeighting::Linear,
            frame: FrameOptions::default(),
            energy: EnergyProfile::default(),
            rssi_samples: 20,
            rssi_noise_sigma: 0.0,
            bin_width: None,
        }
    }
}

/// SF7..SF12 on 125 kHz with 4/5 coding.
pub fn default_deployment() -> Vec<DataRate> {
    SpreadingFactor::ALL
        .iter()
        .map(|&sf| DataRate::new(sf, Bandwidth::Khz125, CodingRate::Cr4_5))
        .collect()
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_nodes == 0 {
            return bad("nodes must be >= 1".into());
        }
        if !(self.sim_time > 0.0) || !self.sim_time.is_finite() {
            return bad(format!("simulation time {} must be > 0", self.sim_time));
        }
        if self.max_recv == 0 {
            return bad("max_reception must be >= 1".into());
        }
        if !(self.mean_interval > 0.0) || !self.mean_interval.is_finite() {
            return bad(format!("transmission rate {} s must be > 0", self.mean_interval));
        }
        if self.packet_len == 0 || self.packet_len > MAX_PAYLOAD_BYTES {
            return bad(format!("packet length {} outside 1..={MAX_PAYLOAD_BYTES}", self.packet_len));
        }
        if self.channels.is_empty() {
            return bad("at least one channel frequency is required".into());
        }
        if self.deployed.is_empty() {
            return bad("deployed data-rate set is empty".into());
        }
        if self.pow_levels.len() < 2 {
            return bad("at least two power levels are required".into());
        }
        if self.pow_levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("power levels {:?} must strictly ascend", self.pow_levels));
        }
        if self.pow_levels.iter().any(|l| !(MIN_TP_DBM..=MAX_TP_DBM).contains(l)) {
            return bad(format!("power levels must lie in {MIN_TP_DBM}..={MAX_TP_DBM} dBm"));
        }
        if self.rssi_samples == 0 {
            return bad("rssi_samples must be >= 1".into());
        }
        if !(self.rssi_noise_sigma >= 0.0) || !self.rssi_noise_sigma.is_finite() {
            return bad(format!("rssi noise sigma {} must be >= 0", self.rssi_noise_sigma));
        }
        if let Some(w) = self.bin_width {
            if !(w > 0.0) || !w.is_finite() {
                return bad(format!("bin width {w} must be > 0"));
            }
        }
        if let Strategy::FadrRegion(size) = self.strategy {
            if size > self.n_nodes {
                warn!("region size {size} exceeds the node count; using a single region");
            }
        }
        self.propagation.validate()?;
        // fails early on frames the PHY cannot carry
        for rate in &self.deployed {
            airtime(rate, self.packet_len, &self.frame)?;
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width.unwrap_or(self.radius / 20.0)
    }

    /// The transmit power every node uses before the server allocates.
    pub fn initial_tp(&self) -> i32 {
        *self.pow_levels.last().expect("validated")
    }
}

/// A placed node and its static link to the gateway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellNode {
    pub id: usize,
    pub position: Position,
    /// Mean path loss plus this node's shadowing, in dB, negated.
    pub path_gain: f64,
}

impl CellNode {
    pub fn distance(&self) -> f64 {
        self.position.distance()
    }
}

/// Places the nodes and draws their shadowing.
pub fn build_cell(scenario: &Scenario, seed: u64) -> Result<Vec<CellNode>> {
    let positions = place_nodes(scenario.n_nodes, scenario.radius, scenario.distribution, scenario.radial_law, seed)?;
    positions
        .into_iter()
        .enumerate()
        .map(|(id, position)| {
            let mut rng = measurement_rng(seed, id);
            let shadow = scenario.propagation.draw_shadowing(&mut rng);
            let loss = path_loss(position.distance(), &scenario.propagation)?;
            Ok(CellNode { id, position, path_gain: -(loss + shadow) })
        })
        .collect()
}

/// What the server learns from each node's first `rssi_samples` uplinks at
/// the initial power: the mean RSSI with the initial power taken back out.
pub fn measure_reports(cell: &[CellNode], scenario: &Scenario, seed: u64) -> Result<Vec<NodeReport>> {
    let tp = f64::from(scenario.initial_tp());
    let noise = if scenario.rssi_noise_sigma > 0.0 {
        Some(Normal::new(0.0, scenario.rssi_noise_sigma).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    cell.iter()
        .map(|node| {
            let mut rng = measurement_rng(seed, node.id);
            // skip the shadowing draw so noise never reuses it
            scenario.propagation.draw_shadowing(&mut rng);
            let mut sum = 0.0;
            for _ in 0..scenario.rssi_samples {
                let n = noise.map_or(0.0, |d| d.sample(&mut rng));
                sum += tp + node.path_gain + n;
            }
            let mean = sum / f64::from(scenario.rssi_samples);
            NodeReport::new(node.id, mean - tp, scenario.rssi_samples)
        })
        .collect()
}

pub fn allocation_context(scenario: &Scenario) -> AllocationContext<'_> {
    AllocationContext {
        deployed: &scenario.deployed,
        pow_levels: &scenario.pow_levels,
        cir: &scenario.cir,
        sensitivity: &scenario.sensitivity,
        bw_weighting: scenario.bw_weighting,
        packet_len: scenario.packet_len,
        frame: scenario.frame,
        cf: scenario.channels[0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep every transmission in the result.
    pub record_events: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub cell: Vec<CellNode>,
    pub assignment: Assignment,
    pub outcomes: Vec<NodeOutcome>,
    pub report: MetricsReport,
    /// Every transmission in (start, node) order, when recorded.
    pub events: Option<Vec<Transmission>>,
}

/// Runs one scenario with one seed.
pub fn run(scenario: &Scenario, seed: u64, opts: RunOptions) -> Result<RunResult> {
    scenario.validate()?;
    let cell = build_cell(scenario, seed)?;
    let reports = measure_reports(&cell, scenario, seed)?;
    let ctx = allocation_context(scenario);
    let assignment = allocate(scenario.strategy, &reports, &ctx)?;
    if assignment.len() != cell.len() {
        return Err(Error::Consistency(format!(
            "{} assigned for {} nodes",
            assignment.len(),
            cell.len()
        )));
    }

    let mut params = Vec::with_capacity(cell.len());
    for node in &cell {
        let p = assignment
            .get(node.id)
            .ok_or_else(|| Error::Consistency(format!("node {} left unassigned", node.id)))?;
        let cf = scenario.channels[node.id % scenario.channels.len()];
        params.push(TxParams { cf, ..*p });
    }
    let airtimes = params
        .iter()
        .map(|p| airtime(&p.rate, scenario.packet_len, &scenario.frame))
        .collect::<Result<Vec<_>>>()?;
    let energy_per_packet = params
        .iter()
        .zip(&airtimes)
        .map(|(p, &t)| crate::phy::tx_energy(t, p.tp, &scenario.energy))
        .collect::<Result<Vec<_>>>()?;
    debug!("{} nodes allocated with {}", cell.len(), scenario.strategy);

    let mut sources = Vec::with_capacity(cell.len());
    let mut queue = BinaryHeap::with_capacity(cell.len());
    for node in &cell {
        let mut src = TrafficSource::new(
            scenario.mean_interval,
            airtimes[node.id],
            scenario.sim_time,
            traffic_rng(seed, node.id),
        )?;
        if let Some(start) = src.next() {
            queue.push(Reverse((start.to_bits(), node.id)));
        }
        sources.push(src);
    }

    let mut counts = vec![LossCounts::default(); cell.len()];
    let mut events = opts.record_events.then(Vec::new);
    let mut sink = |t: Transmission| {
        let c = &mut counts[t.node];
        match t.outcome {
            Outcome::Delivered => c.delivered += 1,
            Outcome::LostSameSf => c.lost_same_sf += 1,
            Outcome::LostCrossSf => c.lost_cross_sf += 1,
            Outcome::LostDemodLimit => c.lost_demod_limit += 1,
            Outcome::LostSensitivity => c.lost_sensitivity += 1,
        }
        if let Some(ev) = events.as_mut() {
            ev.push(t);
        }
    };

    let mut gateway = Gateway::new(&scenario.cir, &scenario.sensitivity, scenario.toggles, scenario.max_recv);
    let mut generated = vec![0u64; cell.len()];
    // start times are non-negative, so their bit patterns sort like the values
    while let Some(Reverse((bits, id))) = queue.pop() {
        let start = f64::from_bits(bits);
        generated[id] += 1;
        let p = params[id];
        let rx_power = f64::from(p.tp) + cell[id].path_gain;
        gateway.arrive(Transmission::new(id, start, airtimes[id], p, rx_power), &mut sink);
        if let Some(next) = sources[id].next() {
            queue.push(Reverse((next.to_bits(), id)));
        }
    }
    gateway.drain(&mut sink);

    if let Some(ev) = events.as_mut() {
        ev.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.node.cmp(&b.node)));
    }

    let mut outcomes = Vec::with_capacity(cell.len());
    for node in &cell {
        let c = counts[node.id];
        if c.total() != generated[node.id] {
            return Err(Error::Consistency(format!(
                "node {}: {} outcomes for {} packets",
                node.id,
                c.total(),
                generated[node.id]
            )));
        }
        outcomes.push(NodeOutcome {
            id: node.id,
            distance: node.distance(),
            sf: params[node.id].sf(),
            tp: params[node.id].tp,
            counts: c,
            energy_j: energy_per_packet[node.id] * c.total() as f64,
        });
    }
    let report = MetricsReport::from_outcomes(&outcomes, scenario.bin_width())?;
    Ok(RunResult { cell, assignment, outcomes, report, events })
}

/// One event-log line: `time,node,sf,bw,tp,rx_power,outcome`.
pub fn format_event(t: &Transmission) -> String {
    format!(
        "{:.6},{},{},{},{},{:.3},{}",
        t.start,
        t.node,
        t.params.sf().value(),
        t.params.bw().hz(),
        t.params.tp,
        t.rx_power,
        t.outcome
    )
}

pub const EVENT_LOG_HEADER: &str = "time,node,sf,bw,tp,rx_power,outcome";
