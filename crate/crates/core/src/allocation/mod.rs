//! Data-rate and transmit-power allocation for the nodes of a cell.
//!
//! Allocators only see [`NodeReport`]s: the TP-normalised RSSI the network
//! server has averaged for each node. Every allocator sorts nodes by path
//! gain, strongest first, breaking ties by node id, so the output never
//! depends on input order.

mod baselines;
mod power;
pub mod ratios;
mod region;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use baselines::{baseline_adelantado, baseline_equal_sf, baseline_reynders, baseline_sn5, ADELANTADO_SF12_SHARE};
pub use power::{fadr_power_control, fadr_power_control_traced, FadrTrace};
pub use ratios::{fair_rate_ratios, fair_sf_bw_ratios, fair_sf_ratios, ratios_to_counts, BwWeighting, RateRatios};
pub use region::{assign_rates_by_region, RegionSize, MIN_REGION_SIZE};

use crate::error::{Error, Result};
use crate::phy::{CirMatrix, DataRate, FrameOptions, Sensitivity, TxParams};

pub type NodeId = usize;

/// What the network server knows about a node before allocating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeReport {
    pub id: NodeId,
    /// Averaged RSSI minus the common initial transmit power, in dB.
    pub path_gain: f64,
    pub sample_count: u32,
}

impl NodeReport {
    pub fn new(id: NodeId, path_gain: f64, sample_count: u32) -> Result<Self> {
        if !path_gain.is_finite() {
            return Err(Error::Allocation(format!("node {id}: path gain must be finite")));
        }
        if sample_count == 0 {
            return Err(Error::Allocation(format!("node {id}: report needs at least one sample")));
        }
        Ok(NodeReport { id, path_gain, sample_count })
    }
}

/// Strongest first, then by id.
pub(crate) fn by_gain_desc(a: &NodeReport, b: &NodeReport) -> Ordering {
    b.path_gain.total_cmp(&a.path_gain).then(a.id.cmp(&b.id))
}

pub(crate) fn sorted_by_gain(nodes: &[NodeReport]) -> Vec<NodeReport> {
    let mut sorted = nodes.to_vec();
    sorted.sort_by(by_gain_desc);
    sorted
}

pub type RateAssignment = BTreeMap<NodeId, DataRate>;
pub type PowerAssignment = BTreeMap<NodeId, i32>;

/// Full transmission parameters for every node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    params: BTreeMap<NodeId, TxParams>,
}

impl Assignment {
    pub fn combine(rates: &RateAssignment, powers: &PowerAssignment, cf: u32) -> Result<Self> {
        if rates.len() != powers.len() {
            return Err(Error::Allocation(format!(
                "{} rate entries but {} power entries",
                rates.len(),
                powers.len()
            )));
        }
        let mut params = BTreeMap::new();
        for (id, rate) in rates {
            let tp = *powers
                .get(id)
                .ok_or_else(|| Error::Allocation(format!("node {id} has no transmit power")))?;
            params.insert(*id, TxParams::new(*rate, tp, cf)?);
        }
        Ok(Assignment { params })
    }

    pub fn with_fixed_power(rates: &RateAssignment, tp: i32, cf: u32) -> Result<Self> {
        let powers = rates.keys().map(|id| (*id, tp)).collect();
        Assignment::combine(rates, &powers, cf)
    }

    pub fn get(&self, id: NodeId) -> Option<&TxParams> {
        self.params.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &TxParams)> {
        self.params.iter().map(|(id, p)| (*id, p))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

impl FromIterator<(NodeId, TxParams)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (NodeId, TxParams)>>(iter: I) -> Self {
        Assignment { params: iter.into_iter().collect() }
    }
}

/// Everything an allocator may need besides the node reports.
#[derive(Debug, Clone)]
pub struct AllocationContext<'a> {
    /// Data-rate combinations the operator deploys.
    pub deployed: &'a [DataRate],
    /// Allowed transmit powers, ascending.
    pub pow_levels: &'a [i32],
    pub cir: &'a CirMatrix,
    pub sensitivity: &'a Sensitivity,
    pub bw_weighting: BwWeighting,
    pub packet_len: usize,
    pub frame: FrameOptions,
    pub cf: u32,
}

impl AllocationContext<'_> {
    /// Bandwidth and coding rate used by the baselines that only pick an SF:
    /// the narrowest deployed bandwidth with its lightest coding.
    pub(crate) fn template_rate(&self) -> Result<DataRate> {
        self.deployed
            .iter()
            .min_by(|a, b| a.bw.cmp(&b.bw).then(a.cr.cmp(&b.cr)))
            .copied()
            .ok_or_else(|| Error::Allocation("empty deployment set".into()))
    }

    pub(crate) fn max_level(&self) -> Result<i32> {
        self.pow_levels
            .last()
            .copied()
            .ok_or_else(|| Error::Allocation("no power levels".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    FadrOneRegion,
    FadrRegion(usize),
    EqualSf,
    Adelantado,
    Reynders,
    Sn5,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::FadrOneRegion => f.write_str("fadr-one-region"),
            Strategy::FadrRegion(n) => write!(f, "fadr-region:{n}"),
            Strategy::EqualSf => f.write_str("equal-sf"),
            Strategy::Adelantado => f.write_str("adelantado"),
            Strategy::Reynders => f.write_str("reynders"),
            Strategy::Sn5 => f.write_str("sn5"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "fadr-one-region" => Ok(Strategy::FadrOneRegion),
            "equal-sf" => Ok(Strategy::EqualSf),
            "adelantado" => Ok(Strategy::Adelantado),
            "reynders" => Ok(Strategy::Reynders),
            "sn5" => Ok(Strategy::Sn5),
            _ => {
                if let Some(size) = s.strip_prefix("fadr-region:") {
                    let size: usize = size
                        .parse()
                        .map_err(|_| Error::Config(format!("bad region size in `{s}`")))?;
                    if size < MIN_REGION_SIZE {
                        return Err(Error::Config(format!(
                            "region size {size} below the minimum of {MIN_REGION_SIZE}"
                        )));
                    }
                    Ok(Strategy::FadrRegion(size))
                } else {
                    Err(Error::Config(format!(
                        "unknown strategy `{s}` (fadr-one-region, fadr-region:<size>, equal-sf, adelantado, reynders, sn5)"
                    )))
                }
            }
        }
    }
}

/// Runs the named strategy over the reported nodes.
pub fn allocate(strategy: Strategy, nodes: &[NodeReport], ctx: &AllocationContext<'_>) -> Result<Assignment> {
    match strategy {
        Strategy::FadrOneRegion | Strategy::FadrRegion(_) => {
            let size = match strategy {
                Strategy::FadrRegion(n) => RegionSize::Nodes(n),
                _ => RegionSize::WholeCell,
            };
            let rates = assign_rates_by_region(nodes, size, ctx.deployed, ctx.bw_weighting)?;
            let powers = fadr_power_control(nodes, ctx.pow_levels, ctx.cir)?;
            Assignment::combine(&rates, &powers, ctx.cf)
        }
        Strategy::EqualSf => baseline_equal_sf(nodes, ctx),
        Strategy::Adelantado => baseline_adelantado(nodes, ctx),
        Strategy::Reynders => baseline_reynders(nodes, ctx),
        Strategy::Sn5 => baseline_sn5(nodes, ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for name in ["fadr-one-region", "fadr-region:50", "equal-sf", "adelantado", "reynders", "sn5"] {
            let s: Strategy = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("fadr-region:10".parse::<Strategy>().is_err());
        assert!("fadr-region:x".parse::<Strategy>().is_err());
        assert!("aloha".parse::<Strategy>().is_err());
    }

    #[test]
    fn report_validation() {
        assert!(NodeReport::new(0, f64::NAN, 1).is_err());
        assert!(NodeReport::new(0, -90.0, 0).is_err());
        assert!(NodeReport::new(0, -90.0, 20).is_ok());
    }

    #[test]
    fn sort_breaks_ties_by_id() {
        let nodes = vec![
            NodeReport::new(3, -80.0, 1).unwrap(),
            NodeReport::new(1, -80.0, 1).unwrap(),
            NodeReport::new(2, -70.0, 1).unwrap(),
        ];
        let ids: Vec<_> = sorted_by_gain(&nodes).iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![2, 1, 3]);
    }
}
