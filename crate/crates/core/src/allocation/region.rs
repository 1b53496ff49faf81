use std::collections::BTreeMap;

use super::ratios::{fair_rate_ratios, ratios_to_counts, BwWeighting};
use super::{sorted_by_gain, NodeReport, RateAssignment};
use crate::error::{Error, Result};
use crate::phy::DataRate;

/// Smallest region in which every fair SF share maps to at least one node.
pub const MIN_REGION_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionSize {
    WholeCell,
    Nodes(usize),
}

/// Assigns SF/BW/CR by splitting the RSSI-sorted cell into regions and
/// applying the fair ratios inside each one.
///
/// A region covering the whole cell is filled contiguously: the strongest
/// nodes get the fastest rate. Smaller regions interleave the rates so that
/// every rate is spread evenly over the region's RSSI range. The last region
/// absorbs the remainder when `size` does not divide the node count.
pub fn assign_rates_by_region(
    nodes: &[NodeReport],
    size: RegionSize,
    deployed: &[DataRate],
    weighting: BwWeighting,
) -> Result<RateAssignment> {
    if nodes.is_empty() {
        return Err(Error::Allocation("no nodes to allocate".into()));
    }
    if let RegionSize::Nodes(n) = size {
        if n < MIN_REGION_SIZE {
            return Err(Error::Allocation(format!(
                "region size {n} below the minimum of {MIN_REGION_SIZE}"
            )));
        }
    }
    let ratios = fair_rate_ratios(deployed, weighting)?;
    let sorted = sorted_by_gain(nodes);

    let region_len = match size {
        RegionSize::WholeCell => sorted.len(),
        RegionSize::Nodes(n) => n.min(sorted.len()),
    };
    let n_regions = (sorted.len() / region_len).max(1);
    let single = n_regions == 1;

    let mut out = RateAssignment::new();
    for r in 0..n_regions {
        let start = r * region_len;
        let end = if r + 1 == n_regions { sorted.len() } else { start + region_len };
        let region = &sorted[start..end];
        let counts = ratios_to_counts(region.len(), &ratios)?;
        let sequence = if single { contiguous(&counts) } else { interleaved(&counts) };
        for (node, rate) in region.iter().zip(sequence) {
            out.insert(node.id, rate);
        }
    }
    Ok(out)
}

fn fastest_first(counts: &BTreeMap<DataRate, usize>) -> Vec<(DataRate, usize)> {
    let mut v: Vec<(DataRate, usize)> = counts.iter().map(|(r, c)| (*r, *c)).collect();
    v.sort_by(|a, b| b.0.bit_rate().total_cmp(&a.0.bit_rate()).then(a.0.cmp(&b.0)));
    v
}

fn contiguous(counts: &BTreeMap<DataRate, usize>) -> Vec<DataRate> {
    fastest_first(counts)
        .into_iter()
        .flat_map(|(rate, c)| std::iter::repeat_n(rate, c))
        .collect()
}

/// Smooth weighted round-robin over the counts; ties go to the faster rate.
fn interleaved(counts: &BTreeMap<DataRate, usize>) -> Vec<DataRate> {
    let classes = fastest_first(counts);
    let total: i64 = classes.iter().map(|(_, c)| *c as i64).sum();
    let mut current = vec![0i64; classes.len()];
    let mut left: Vec<usize> = classes.iter().map(|(_, c)| *c).collect();
    let mut seq = Vec::with_capacity(total as usize);
    for _ in 0..total {
        for (cur, (_, c)) in current.iter_mut().zip(&classes) {
            *cur += *c as i64;
        }
        let pick = (0..classes.len())
            .filter(|&i| left[i] > 0)
            .max_by(|&a, &b| current[a].cmp(&current[b]).then(b.cmp(&a)))
            .expect("total matches remaining counts");
        current[pick] -= total;
        left[pick] -= 1;
        seq.push(classes[pick].0);
    }
    seq
}
