//! Data extraction rate, Jain fairness and energy aggregation.

use std::collections::BTreeMap;

use log::warn;

use crate::error::{Error, Result};
use crate::phy::SpreadingFactor;

/// Delivered over sent for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Der {
    pub value: f64,
    /// The node sent nothing; `value` is 0 by convention.
    pub inactive: bool,
}

pub fn der(delivered: u64, sent: u64) -> Result<Der> {
    if delivered > sent {
        return Err(Error::Consistency(format!("{delivered} packets delivered out of {sent} sent")));
    }
    if sent == 0 {
        return Ok(Der { value: 0.0, inactive: true });
    }
    Ok(Der { value: delivered as f64 / sent as f64, inactive: false })
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`.
///
/// An all-zero vector (every node starved) is reported as perfectly fair.
/// An empty slice also yields 1.
pub fn jain_index(ders: &[f64]) -> f64 {
    if ders.is_empty() {
        return 1.0;
    }
    let sum: f64 = ders.iter().sum();
    let sum_sq: f64 = ders.iter().map(|d| d * d).sum();
    if sum_sq == 0.0 {
        warn!("every DER is zero; reporting a fairness index of 1");
        return 1.0;
    }
    sum * sum / (ders.len() as f64 * sum_sq)
}

/// Per-category packet counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LossCounts {
    pub delivered: u64,
    pub lost_same_sf: u64,
    pub lost_cross_sf: u64,
    pub lost_demod_limit: u64,
    pub lost_sensitivity: u64,
}

impl LossCounts {
    pub fn total(&self) -> u64 {
        self.delivered + self.lost_same_sf + self.lost_cross_sf + self.lost_demod_limit + self.lost_sensitivity
    }

    pub fn add(&mut self, other: &LossCounts) {
        self.delivered += other.delivered;
        self.lost_same_sf += other.lost_same_sf;
        self.lost_cross_sf += other.lost_cross_sf;
        self.lost_demod_limit += other.lost_demod_limit;
        self.lost_sensitivity += other.lost_sensitivity;
    }
}

/// Everything the metrics need to know about one node after a run.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeOutcome {
    pub id: usize,
    pub distance: f64,
    pub sf: SpreadingFactor,
    pub tp: i32,
    pub counts: LossCounts,
    pub energy_j: f64,
}

impl NodeOutcome {
    pub fn sent(&self) -> u64 {
        self.counts.total()
    }

    pub fn delivered(&self) -> u64 {
        self.counts.delivered
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetric {
    pub id: usize,
    pub distance: f64,
    pub sf: SpreadingFactor,
    pub sent: u64,
    pub der: Der,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBin {
    /// Lower edge in metres; the bin is `[start, start + width)`.
    pub start: f64,
    pub nodes: usize,
    pub mean_der: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_node: Vec<NodeMetric>,
    /// Total delivered over total sent.
    pub overall_der: f64,
    /// Mean of the per-node DERs of active nodes.
    pub mean_node_der: f64,
    /// Jain index over the per-node DERs of active nodes.
    pub jain: f64,
    /// Jain index with the SF7 nodes left out.
    pub jain_excluding_sf7: f64,
    /// Packet-ratio DER per SF; SFs without traffic are absent.
    pub per_sf_der: BTreeMap<SpreadingFactor, f64>,
    pub distance_bins: Vec<DistanceBin>,
    pub bin_width: f64,
    pub total_energy_j: f64,
    pub counts: LossCounts,
}

impl MetricsReport {
    pub fn from_outcomes(outcomes: &[NodeOutcome], bin_width: f64) -> Result<Self> {
        let mut per_node = Vec::with_capacity(outcomes.len());
        let mut counts = LossCounts::default();
        let mut per_sf: BTreeMap<SpreadingFactor, (u64, u64)> = BTreeMap::new();
        for o in outcomes {
            let d = der(o.delivered(), o.sent())?;
            counts.add(&o.counts);
            let e = per_sf.entry(o.sf).or_insert((0, 0));
            e.0 += o.delivered();
            e.1 += o.sent();
            per_node.push(NodeMetric { id: o.id, distance: o.distance, sf: o.sf, sent: o.sent(), der: d, energy_j: o.energy_j });
        }

        let active: Vec<&NodeMetric> = per_node.iter().filter(|m| !m.der.inactive).collect();
        let ders: Vec<f64> = active.iter().map(|m| m.der.value).collect();
        let ders_no_sf7: Vec<f64> = active.iter().filter(|m| m.sf.value() != 7).map(|m| m.der.value).collect();
        let mean_node_der = if ders.is_empty() { 0.0 } else { ders.iter().sum::<f64>() / ders.len() as f64 };
        let overall_der = der(counts.delivered, counts.total())?.value;
        let per_sf_der = per_sf
            .into_iter()
            .filter(|(_, (_, sent))| *sent > 0)
            .map(|(sf, (d, s))| (sf, d as f64 / s as f64))
            .collect();
        let (total_energy_j, _) = aggregate_energy(outcomes);
        let distance_bins = bin_by_distance(&per_node, bin_width)?;

        Ok(MetricsReport {
            overall_der,
            mean_node_der,
            jain: jain_index(&ders),
            jain_excluding_sf7: jain_index(&ders_no_sf7),
            per_sf_der,
            distance_bins,
            bin_width,
            total_energy_j,
            counts,
            per_node,
        })
    }
}

/// Mean per-node DER over distance bins `[k w, (k+1) w)`. Inactive nodes are
/// skipped and empty bins omitted.
pub fn bin_by_distance(nodes: &[NodeMetric], bin_width: f64) -> Result<Vec<DistanceBin>> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::InvalidParameter(format!("bin width {bin_width} must be > 0")));
    }
    let mut bins: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for m in nodes.iter().filter(|m| !m.der.inactive) {
        let k = (m.distance / bin_width).floor() as u64;
        let e = bins.entry(k).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += m.der.value;
    }
    Ok(bins
        .into_iter()
        .map(|(k, (n, sum))| DistanceBin { start: k as f64 * bin_width, nodes: n, mean_der: sum / n as f64 })
        .collect())
}

/// Total and per-node transmit energy, lost packets included.
pub fn aggregate_energy(outcomes: &[NodeOutcome]) -> (f64, Vec<(usize, f64)>) {
    let per_node: Vec<(usize, f64)> = outcomes.iter().map(|o| (o.id, o.energy_j)).collect();
    (per_node.iter().map(|(_, e)| e).sum(), per_node)
}
