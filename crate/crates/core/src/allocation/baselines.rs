//! Comparison allocators.

use std::collections::BTreeMap;

use super::ratios::{fair_sf_ratios, ratios_to_counts, RateRatios};
use super::{sorted_by_gain, AllocationContext, Assignment, NodeReport, PowerAssignment, RateAssignment};
use crate::error::{Error, Result};
use crate::phy::{airtime, Bandwidth, DataRate, SpreadingFactor, TxParams};

/// Share of nodes put on SF12 by the Adelantado allocation.
pub const ADELANTADO_SF12_SHARE: f64 = 0.28;

fn require_nodes(nodes: &[NodeReport]) -> Result<()> {
    if nodes.is_empty() {
        Err(Error::Allocation("no nodes to allocate".into()))
    } else {
        Ok(())
    }
}

/// SF7 to the strongest nodes, SF12 to the weakest, with the given counts.
fn sf_by_gain(
    nodes: &[NodeReport],
    ratios: &RateRatios<SpreadingFactor>,
    ctx: &AllocationContext<'_>,
) -> Result<RateAssignment> {
    let template = ctx.template_rate()?;
    let counts = ratios_to_counts(nodes.len(), ratios)?;
    let sorted = sorted_by_gain(nodes);
    let sfs = counts.iter().flat_map(|(sf, c)| std::iter::repeat_n(*sf, *c));
    Ok(sorted
        .iter()
        .zip(sfs)
        .map(|(node, sf)| (node.id, DataRate::new(sf, template.bw, template.cr)))
        .collect())
}

/// `N/6` nodes per SF in RSSI order, all at the common initial (top) power.
pub fn baseline_equal_sf(nodes: &[NodeReport], ctx: &AllocationContext<'_>) -> Result<Assignment> {
    require_nodes(nodes)?;
    let ratios = RateRatios::from_entries(SpreadingFactor::ALL.iter().map(|&sf| (sf, 1.0 / 6.0)))?;
    let rates = sf_by_gain(nodes, &ratios, ctx)?;
    Assignment::with_fixed_power(&rates, ctx.max_level()?, ctx.cf)
}

/// 28% of nodes (the weakest) on SF12, the rest split evenly over SF7..SF11.
pub fn baseline_adelantado(nodes: &[NodeReport], ctx: &AllocationContext<'_>) -> Result<Assignment> {
    require_nodes(nodes)?;
    let rest = (1.0 - ADELANTADO_SF12_SHARE) / 5.0;
    let ratios = RateRatios::from_entries(SpreadingFactor::ALL.iter().map(|&sf| {
        let share = if sf.value() == 12 { ADELANTADO_SF12_SHARE } else { rest };
        (sf, share)
    }))?;
    let rates = sf_by_gain(nodes, &ratios, ctx)?;
    Assignment::with_fixed_power(&rates, ctx.max_level()?, ctx.cf)
}

/// Lowest level at which `gain + level` clears `target`, if any.
fn lowest_level_reaching(levels: &[i32], gain: f64, target: f64) -> Option<i32> {
    levels.iter().copied().find(|&l| gain + f64::from(l) >= target)
}

/// Reimplementation of the Reynders SF and power control.
///
/// SFs follow the fair SF ratios over path-loss-sorted nodes. The weakest
/// SF8 node is the protected reference: SF8..SF12 nodes get the top level,
/// and every SF7 node whose lowest-power signal would still land above
/// `reference - MinCIR` is held at the lowest level. Remaining SF7 nodes get
/// the lowest level that clears their sensitivity by MinCIR.
pub fn baseline_reynders(nodes: &[NodeReport], ctx: &AllocationContext<'_>) -> Result<Assignment> {
    require_nodes(nodes)?;
    let levels = ctx.pow_levels;
    if levels.is_empty() {
        return Err(Error::Allocation("no power levels".into()));
    }
    let min_level = levels[0];
    let max_level = ctx.max_level()?;
    let min_cir = ctx.cir.min();
    let rates = sf_by_gain(nodes, &fair_sf_ratios(), ctx)?;
    let sorted = sorted_by_gain(nodes);

    let sf_of = |id| rates[&id].sf.value();
    let reference = sorted
        .iter()
        .rev()
        .find(|n| sf_of(n.id) == 8)
        .map(|n| n.path_gain + f64::from(max_level));

    let mut powers = PowerAssignment::new();
    for node in &sorted {
        let rate = rates[&node.id];
        let level = match rate.sf.value() {
            7 => {
                let corrupts = reference.is_some_and(|r| node.path_gain + f64::from(min_level) > r - min_cir);
                if corrupts {
                    min_level
                } else {
                    let target = ctx.sensitivity.dbm(rate.sf, rate.bw) + min_cir;
                    lowest_level_reaching(levels, node.path_gain, target).unwrap_or(max_level)
                }
            }
            _ => max_level,
        };
        powers.insert(node.id, level);
    }
    Assignment::combine(&rates, &powers, ctx.cf)
}

/// Every node picks, on its own, the decodable combination with the shortest
/// airtime and then the lowest power that still reaches the gateway.
///
/// Candidates are every SF and bandwidth at the deployed coding rate. A node
/// that cannot be decoded with anything falls back to the slowest
/// combination at the top level.
pub fn baseline_sn5(nodes: &[NodeReport], ctx: &AllocationContext<'_>) -> Result<Assignment> {
    require_nodes(nodes)?;
    let cr = ctx.template_rate()?.cr;
    let levels = ctx.pow_levels;
    let max_level = ctx.max_level()?;

    let mut candidates: Vec<(f64, DataRate)> = Vec::new();
    for sf in SpreadingFactor::ALL {
        for bw in Bandwidth::ALL {
            let rate = DataRate::new(sf, bw, cr);
            candidates.push((airtime(&rate, ctx.packet_len, &ctx.frame)?, rate));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let slowest = candidates.last().expect("18 candidates").1;

    let mut out = BTreeMap::new();
    for node in nodes {
        let choice = candidates.iter().find_map(|(_, rate)| {
            let floor = ctx.sensitivity.dbm(rate.sf, rate.bw);
            lowest_level_reaching(levels, node.path_gain, floor).map(|l| (*rate, l))
        });
        let (rate, tp) = choice.unwrap_or((slowest, max_level));
        out.insert(node.id, TxParams::new(rate, tp, ctx.cf)?);
    }
    Ok(out.into_iter().collect())
}
