//! FADR transmit-power control.
//!
//! Balances the received powers of all nodes so that as many as possible sit
//! within the smallest CIR threshold of each other. Working strongest to
//! weakest:
//!
//! 1. pick `MaxPower`, the lowest level that brings the two RSSI extremes
//!    within the margin (or the top level when none does), and drop every
//!    level above it;
//! 2. give `MinPower` to the strongest nodes while they stay at or above the
//!    weakest balanced power;
//! 3. give `MaxPower` to the weakest nodes while they stay within the margin
//!    of that power;
//! 4. fill the nodes in between with the remaining levels in ascending order,
//!    moving to the next level once a node falls out of the margin around the
//!    `MaxPower` group.
//!
//! Path gains are RSSI normalised to a 0 dBm transmitter, so `gain + level`
//! is the power the gateway sees. Anything left unassigned after step 4 gets
//! `MaxPower`.

use super::{sorted_by_gain, NodeReport, PowerAssignment};
use crate::error::{Error, Result};
use crate::phy::CirMatrix;

/// Intermediate quantities of one run, mostly for tests and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FadrTrace {
    pub min_power: i32,
    pub max_power: i32,
    pub min_cir: f64,
    /// Balanced extremes after applying `MaxPower` to the weakest node and
    /// `MinPower` to the strongest.
    pub min_rssi: f64,
    pub max_rssi: f64,
    /// Nodes given `MinPower` in step 2 (a prefix of the sorted order).
    pub min_power_count: usize,
    /// Sorted position of the strongest node given `MaxPower` in step 3.
    pub max_power_index: Option<usize>,
    /// Nodes that only got a level from the fallback.
    pub fallback_count: usize,
    /// Number of loop iterations that inspected a node.
    pub visits: usize,
}

/// `-margin <= x <= margin`; the magnitude test on a dB difference.
fn within(x: f64, margin: f64) -> bool {
    x >= -margin && x <= margin
}

/// Whether `rssi` is weaker than `floor`. On negative dBm values this is the
/// magnitude test `|rssi| > |floor|`.
fn weaker_than(rssi: f64, floor: f64) -> bool {
    rssi < floor
}

fn validate_levels(levels: &[i32]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::Allocation("power control needs at least two power levels".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Allocation(format!("power levels {levels:?} are not strictly ascending")));
    }
    Ok(())
}

pub fn fadr_power_control(nodes: &[NodeReport], pow_levels: &[i32], cir: &CirMatrix) -> Result<PowerAssignment> {
    fadr_power_control_traced(nodes, pow_levels, cir).map(|(a, _)| a)
}

pub fn fadr_power_control_traced(
    nodes: &[NodeReport],
    pow_levels: &[i32],
    cir: &CirMatrix,
) -> Result<(PowerAssignment, FadrTrace)> {
    if nodes.is_empty() {
        return Err(Error::Allocation("power control needs at least one node".into()));
    }
    validate_levels(pow_levels)?;

    let sorted = sorted_by_gain(nodes);
    let gain: Vec<f64> = sorted.iter().map(|n| n.path_gain).collect();
    let n = gain.len();
    let min_cir = cir.min();
    let min_power = pow_levels[0];
    let snapshot_max = gain[0];
    let snapshot_min = gain[n - 1];

    let candidates = &pow_levels[1..];
    let mut max_power = *candidates.last().expect("two levels validated");
    let mut intermediate = &candidates[..candidates.len() - 1];
    for (k, &level) in candidates.iter().enumerate() {
        let gap = (snapshot_max + f64::from(min_power)) - (snapshot_min + f64::from(level));
        if within(gap, min_cir) {
            max_power = level;
            intermediate = &candidates[..k];
            break;
        }
    }

    let lifted_weakest = snapshot_min + f64::from(max_power);
    let lowered_strongest = snapshot_max + f64::from(min_power);
    let min_rssi = lifted_weakest.min(lowered_strongest);
    let max_rssi = lifted_weakest.max(lowered_strongest);

    let mut tp: Vec<Option<i32>> = vec![None; n];
    let mut visits = 0usize;

    let mut first_unassigned = n;
    for i in 0..n {
        visits += 1;
        if weaker_than(gain[i] + f64::from(min_power), min_rssi) {
            first_unassigned = i;
            break;
        }
        tp[i] = Some(min_power);
    }
    let min_power_count = first_unassigned;

    let mut max_power_index = None;
    for i in (first_unassigned..n).rev() {
        visits += 1;
        if !within(gain[i] + f64::from(max_power) - min_rssi, min_cir) {
            break;
        }
        tp[i] = Some(max_power);
        max_power_index = Some(i);
    }

    let middle_end = max_power_index.unwrap_or(n);
    let mut next = first_unassigned;
    if let Some(mpi) = max_power_index {
        let reference = gain[mpi] + f64::from(max_power);
        for &level in intermediate {
            if next >= mpi {
                break;
            }
            visits += 1;
            let head = gain[next] + f64::from(level);
            if !(within(head - min_rssi, min_cir) && within(head - reference, min_cir)) {
                continue;
            }
            let mut j = next;
            while j < mpi {
                visits += 1;
                if !within(gain[j] + f64::from(level) - reference, min_cir) {
                    break;
                }
                tp[j] = Some(level);
                j += 1;
            }
            next = j;
        }
    }

    let mut fallback_count = 0;
    for slot in &mut tp[next..middle_end] {
        visits += 1;
        if slot.is_none() {
            *slot = Some(max_power);
            fallback_count += 1;
        }
    }

    let assignment = sorted
        .iter()
        .zip(&tp)
        .map(|(node, level)| (node.id, level.expect("every node assigned")))
        .collect();
    let trace = FadrTrace {
        min_power,
        max_power,
        min_cir,
        min_rssi,
        max_rssi,
        min_power_count,
        max_power_index,
        fallback_count,
        visits,
    };
    Ok((assignment, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LORAWAN_LEVELS: [i32; 5] = [2, 5, 8, 11, 14];

    fn reports(gains: &[f64]) -> Vec<NodeReport> {
        gains
            .iter()
            .enumerate()
            .map(|(i, g)| NodeReport::new(i, *g, 20).unwrap())
            .collect()
    }

    #[test]
    fn three_node_trace() {
        let nodes = reports(&[-60.0, -90.0, -100.0]);
        let (a, trace) = fadr_power_control_traced(&nodes, &LORAWAN_LEVELS, &CirMatrix::default()).unwrap();
        assert_eq!(a[&0], 2);
        assert_eq!(a[&1], 5);
        assert_eq!(a[&2], 14);
        assert_eq!(trace.max_power, 14);
        assert_eq!(trace.min_rssi, -86.0);
        assert_eq!(trace.max_rssi, -58.0);
        assert_eq!(trace.min_power_count, 1);
        assert_eq!(trace.max_power_index, Some(2));
        assert_eq!(trace.fallback_count, 0);
        let powers: Vec<f64> = (0..3).map(|i| nodes[i].path_gain + f64::from(a[&i])).collect();
        assert_eq!(powers, vec![-58.0, -85.0, -86.0]);
    }

    #[test]
    fn equal_gains_all_get_min_power() {
        let nodes = reports(&[-95.5; 12]);
        let a = fadr_power_control(&nodes, &LORAWAN_LEVELS, &CirMatrix::default()).unwrap();
        assert!(a.values().all(|&tp| tp == 2));
        let one_db: Vec<i32> = (2..=14).collect();
        let a = fadr_power_control(&nodes, &one_db, &CirMatrix::default()).unwrap();
        assert!(a.values().all(|&tp| tp == 2));
    }

    #[test]
    fn single_node_gets_min_power() {
        let a = fadr_power_control(&reports(&[-130.0]), &LORAWAN_LEVELS, &CirMatrix::default()).unwrap();
        assert_eq!(a[&0], 2);
    }

    #[test]
    fn wide_spread_uses_top_level() {
        let gains: Vec<f64> = (0..51).map(|i| -90.0 - f64::from(i)).collect();
        let levels: Vec<i32> = (2..=14).collect();
        let (a, trace) = fadr_power_control_traced(&reports(&gains), &levels, &CirMatrix::default()).unwrap();
        assert_eq!(trace.min_power, 2);
        assert_eq!(trace.max_power, 14);
        assert_eq!(a[&0], 2);
        assert_eq!(a[&50], 14);
    }

    #[test]
    fn narrow_spread_trims_levels() {
        // spread 10 dB: lowest level with |10 + 2 - p| <= 6 is 8
        let nodes = reports(&[-80.0, -84.0, -87.0, -90.0]);
        let (a, trace) = fadr_power_control_traced(&nodes, &LORAWAN_LEVELS, &CirMatrix::default()).unwrap();
        assert_eq!(trace.max_power, 8);
        assert!(a.values().all(|&tp| tp <= 8));
    }

    #[test]
    fn uses_smallest_cir_entry() {
        let mut m = [[6.0; 6]; 6];
        m[3][1] = 1.0;
        let cir = CirMatrix::new(m).unwrap();
        let (_, trace) = fadr_power_control_traced(&reports(&[-60.0, -70.0]), &LORAWAN_LEVELS, &cir).unwrap();
        assert_eq!(trace.min_cir, 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cir = CirMatrix::default();
        assert!(fadr_power_control(&[], &LORAWAN_LEVELS, &cir).is_err());
        assert!(fadr_power_control(&reports(&[-80.0]), &[2], &cir).is_err());
        assert!(fadr_power_control(&reports(&[-80.0]), &[2, 8, 5], &cir).is_err());
        assert!(fadr_power_control(&reports(&[-80.0]), &[2, 2, 5], &cir).is_err());
    }

    #[test]
    fn signed_conditions_match_magnitudes_on_negative_values() {
        for rssi in [-150.0, -120.5, -86.0, -60.0, -1.0] {
            for floor in [-140.0, -100.0, -86.0, -20.0] {
                assert_eq!(weaker_than(rssi, floor), f64::abs(rssi) > f64::abs(floor));
            }
        }
        for x in [-12.0, -6.0, -5.9, 0.0, 3.0, 6.0, 6.1] {
            assert_eq!(within(x, 6.0), f64::abs(x) <= 6.0);
        }
    }
}
