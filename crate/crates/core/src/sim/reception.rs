//! Gateway reception: sensitivity, demodulator admission and pairwise
//! collision resolution with capture and imperfect SF orthogonality.

use std::collections::BTreeMap;
use std::fmt;

use crate::phy::{CirMatrix, Sensitivity, TxParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Delivered,
    LostSameSf,
    LostCrossSf,
    LostDemodLimit,
    LostSensitivity,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Delivered => "delivered",
            Outcome::LostSameSf => "lost_same_sf",
            Outcome::LostCrossSf => "lost_cross_sf",
            Outcome::LostDemodLimit => "lost_demod_limit",
            Outcome::LostSensitivity => "lost_sensitivity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggles {
    /// Different SFs never interfere.
    pub perfect_orthogonality: bool,
    /// The stronger of two same-SF frames survives when its margin clears
    /// the threshold. When off, any same-SF overlap destroys both.
    pub capture_enabled: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles { perfect_orthogonality: false, capture_enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub node: usize,
    pub start: f64,
    pub end: f64,
    pub params: TxParams,
    /// Power at the gateway in dBm.
    pub rx_power: f64,
    /// Final once the frame has left the gateway's view.
    pub outcome: Outcome,
}

impl Transmission {
    pub fn new(node: usize, start: f64, airtime: f64, params: TxParams, rx_power: f64) -> Self {
        Transmission { node, start, end: start + airtime, params, rx_power, outcome: Outcome::Delivered }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct LossFlags {
    same_sf: bool,
    cross_sf: bool,
    demod: bool,
    sensitivity: bool,
}

impl LossFlags {
    fn outcome(self) -> Outcome {
        if self.sensitivity {
            Outcome::LostSensitivity
        } else if self.demod {
            Outcome::LostDemodLimit
        } else if self.same_sf {
            Outcome::LostSameSf
        } else if self.cross_sf {
            Outcome::LostCrossSf
        } else {
            Outcome::Delivered
        }
    }
}

/// Which of two overlapping frames the pair destroys, `(a_lost, b_lost)`.
fn pair_losses(a: &Transmission, b: &Transmission, cir: &CirMatrix, toggles: Toggles) -> (bool, bool) {
    // different bandwidths are orthogonal
    if a.params.bw() != b.params.bw() {
        return (false, false);
    }
    let (sa, sb) = (a.params.sf(), b.params.sf());
    if sa == sb {
        if !toggles.capture_enabled {
            return (true, true);
        }
        let threshold = cir.threshold(sa, sa);
        let margin = a.rx_power - b.rx_power;
        if margin >= threshold {
            (false, true)
        } else if -margin >= threshold {
            (true, false)
        } else {
            (true, true)
        }
    } else if toggles.perfect_orthogonality {
        (false, false)
    } else {
        let a_lost = b.rx_power - a.rx_power > cir.threshold(sa, sb);
        let b_lost = a.rx_power - b.rx_power > cir.threshold(sb, sa);
        (a_lost, b_lost)
    }
}

struct Pending {
    tx: Transmission,
    flags: LossFlags,
    holds_demodulator: bool,
}

/// Streaming receiver. Frames must arrive in non-decreasing start order;
/// a frame is finalised once a later arrival starts at or after its end, or
/// when the receiver is drained.
pub struct Gateway<'a> {
    cir: &'a CirMatrix,
    sensitivity: &'a Sensitivity,
    toggles: Toggles,
    max_recv: usize,
    on_air: BTreeMap<u32, Vec<Pending>>,
}

impl<'a> Gateway<'a> {
    pub fn new(cir: &'a CirMatrix, sensitivity: &'a Sensitivity, toggles: Toggles, max_recv: usize) -> Self {
        Gateway { cir, sensitivity, toggles, max_recv, on_air: BTreeMap::new() }
    }

    /// Feeds one frame; finished frames are handed to `done` in end order.
    pub fn arrive(&mut self, tx: Transmission, done: &mut impl FnMut(Transmission)) {
        let now = tx.start;
        self.retire(now, done);
        let channel = self.on_air.entry(tx.params.cf).or_default();

        let mut flags = LossFlags::default();
        let mut holds_demodulator = false;
        if !self.sensitivity.decodable(tx.rx_power, tx.params.sf(), tx.params.bw()) {
            flags.sensitivity = true;
        } else if channel.iter().filter(|p| p.holds_demodulator).count() >= self.max_recv {
            flags.demod = true;
        } else {
            holds_demodulator = true;
        }

        for other in channel.iter_mut() {
            let (new_lost, old_lost) = pair_losses(&tx, &other.tx, self.cir, self.toggles);
            let same = tx.params.sf() == other.tx.params.sf();
            if new_lost {
                if same { flags.same_sf = true } else { flags.cross_sf = true }
            }
            if old_lost {
                if same { other.flags.same_sf = true } else { other.flags.cross_sf = true }
            }
        }
        channel.push(Pending { tx, flags, holds_demodulator });
    }

    fn retire(&mut self, now: f64, done: &mut impl FnMut(Transmission)) {
        for channel in self.on_air.values_mut() {
            if channel.iter().all(|p| p.tx.end > now) {
                continue;
            }
            let (finished, still): (Vec<Pending>, Vec<Pending>) =
                channel.drain(..).partition(|p| p.tx.end <= now);
            *channel = still;
            let mut finished = finished;
            finished.sort_by(|a, b| a.tx.end.total_cmp(&b.tx.end).then(a.tx.node.cmp(&b.tx.node)));
            for p in finished {
                done(finalise(p));
            }
        }
    }

    /// Finalises everything still on air.
    pub fn drain(mut self, done: &mut impl FnMut(Transmission)) {
        self.retire(f64::INFINITY, done);
    }
}

fn finalise(p: Pending) -> Transmission {
    let mut tx = p.tx;
    tx.outcome = p.flags.outcome();
    tx
}

/// Resolves the outcome of every frame in `txs` against every other frame it
/// overlaps in time on the same carrier.
pub fn resolve_receptions(
    txs: &mut [Transmission],
    cir: &CirMatrix,
    sensitivity: &Sensitivity,
    toggles: Toggles,
    max_recv: usize,
) {
    let mut order: Vec<usize> = (0..txs.len()).collect();
    order.sort_by(|&a, &b| txs[a].start.total_cmp(&txs[b].start).then(txs[a].node.cmp(&txs[b].node)).then(a.cmp(&b)));
    let mut results: Vec<Transmission> = Vec::with_capacity(txs.len());
    let mut gw = Gateway::new(cir, sensitivity, toggles, max_recv);
    let mut sink = |t: Transmission| results.push(t);
    for &i in &order {
        gw.arrive(txs[i].clone(), &mut sink);
    }
    gw.drain(&mut sink);
    // map back by (node, start), which is unique per node
    let mut by_key: BTreeMap<(usize, u64), Outcome> = BTreeMap::new();
    for t in &results {
        by_key.insert((t.node, t.start.to_bits()), t.outcome);
    }
    for t in txs.iter_mut() {
        t.outcome = by_key[&(t.node, t.start.to_bits())];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{Bandwidth, CodingRate, DataRate, SpreadingFactor};

    fn tx(node: usize, start: f64, dur: f64, sf: u8, rx: f64) -> Transmission {
        tx_bw(node, start, dur, sf, Bandwidth::Khz125, rx)
    }

    fn tx_bw(node: usize, start: f64, dur: f64, sf: u8, bw: Bandwidth, rx: f64) -> Transmission {
        let rate = DataRate::new(SpreadingFactor::new(sf).unwrap(), bw, CodingRate::Cr4_5);
        Transmission::new(node, start, dur, TxParams::new(rate, 14, 868_000_000).unwrap(), rx)
    }

    fn resolve(txs: &mut [Transmission], toggles: Toggles, max_recv: usize) {
        resolve_receptions(txs, &CirMatrix::default(), &Sensitivity::default(), toggles, max_recv);
    }

    fn outcomes(txs: &[Transmission]) -> Vec<Outcome> {
        txs.iter().map(|t| t.outcome).collect()
    }

    #[test]
    fn same_sf_capture() {
        let mut txs = vec![tx(0, 0.0, 1.0, 9, -80.0), tx(1, 0.5, 1.0, 9, -90.0)];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::LostSameSf]);

        let mut txs = vec![tx(0, 0.0, 1.0, 9, -80.0), tx(1, 0.5, 1.0, 9, -83.0)];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::LostSameSf, Outcome::LostSameSf]);

        // exactly at threshold the stronger one survives
        let mut txs = vec![tx(0, 0.0, 1.0, 9, -80.0), tx(1, 0.5, 1.0, 9, -86.0)];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::LostSameSf]);
    }

    #[test]
    fn capture_disabled_destroys_both() {
        let toggles = Toggles { perfect_orthogonality: true, capture_enabled: false };
        let mut txs = vec![tx(0, 0.0, 1.0, 9, -60.0), tx(1, 0.9, 1.0, 9, -120.0)];
        resolve(&mut txs, toggles, 8);
        assert_eq!(outcomes(&txs), vec![Outcome::LostSameSf, Outcome::LostSameSf]);
    }

    #[test]
    fn cross_sf_threshold() {
        let mut txs = vec![tx(0, 0.0, 0.1, 7, -70.0), tx(1, 0.0, 2.0, 12, -73.0)];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::Delivered]);

        let mut txs = vec![tx(0, 0.0, 0.1, 7, -60.0), tx(1, 0.0, 2.0, 12, -70.0)];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::LostCrossSf]);

        let orth = Toggles { perfect_orthogonality: true, capture_enabled: true };
        let mut txs = vec![tx(0, 0.0, 0.1, 7, -60.0), tx(1, 0.0, 2.0, 12, -90.0)];
        resolve(&mut txs, orth, 8);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::Delivered]);
    }

    #[test]
    fn different_bandwidths_do_not_collide() {
        let mut txs = vec![
            tx_bw(0, 0.0, 1.0, 7, Bandwidth::Khz125, -80.0),
            tx_bw(1, 0.1, 1.0, 7, Bandwidth::Khz500, -81.0),
        ];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::Delivered]);
    }

    #[test]
    fn must_survive_every_interferer() {
        // node 0 beats node 1 but not node 2
        let mut txs = vec![
            tx(0, 0.0, 1.0, 8, -80.0),
            tx(1, 0.2, 1.0, 8, -95.0),
            tx(2, 0.9, 1.0, 8, -70.0),
        ];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::LostSameSf, Outcome::LostSameSf, Outcome::Delivered]);
    }

    #[test]
    fn touching_frames_do_not_overlap() {
        let mut txs = vec![tx(0, 0.0, 1.0, 8, -80.0), tx(1, 1.0, 1.0, 8, -80.0)];
        resolve(&mut txs, Toggles::default(), 8);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::Delivered]);
    }

    #[test]
    fn demodulator_limit_is_first_come_first_served() {
        // three different SFs, far apart in power class, two demodulators
        let orth = Toggles { perfect_orthogonality: true, capture_enabled: true };
        let mut txs = vec![
            tx(0, 0.0, 1.0, 7, -80.0),
            tx(1, 0.1, 1.0, 8, -80.0),
            tx(2, 0.2, 1.0, 9, -80.0),
            tx(3, 1.05, 1.0, 10, -80.0),
        ];
        resolve(&mut txs, orth, 2);
        assert_eq!(
            outcomes(&txs),
            vec![Outcome::Delivered, Outcome::Delivered, Outcome::LostDemodLimit, Outcome::Delivered]
        );
    }

    #[test]
    fn collided_frames_keep_their_demodulator() {
        let orth = Toggles { perfect_orthogonality: true, capture_enabled: true };
        let mut txs = vec![
            tx(0, 0.0, 1.0, 7, -80.0),
            tx(1, 0.1, 1.0, 7, -81.0),
            tx(2, 0.2, 1.0, 9, -80.0),
        ];
        resolve(&mut txs, orth, 2);
        assert_eq!(
            outcomes(&txs),
            vec![Outcome::LostSameSf, Outcome::LostSameSf, Outcome::LostDemodLimit]
        );
    }

    #[test]
    fn weak_frames_are_lost_but_still_interfere() {
        let mut txs = vec![tx(0, 0.0, 1.0, 8, -156.0), tx(1, 0.5, 1.0, 8, -154.0)];
        resolve(&mut txs, Toggles::default(), 8);
        // -154 is decodable, but -156 sits within the capture margin
        assert_eq!(outcomes(&txs), vec![Outcome::LostSensitivity, Outcome::LostSameSf]);
        let mut single = vec![tx(0, 0.0, 1.0, 8, -154.0)];
        resolve(&mut single, Toggles::default(), 8);
        assert_eq!(single[0].outcome, Outcome::Delivered);
    }

    #[test]
    fn separate_carriers_are_independent() {
        let mut a = tx(0, 0.0, 1.0, 8, -80.0);
        let b = tx(1, 0.5, 1.0, 8, -80.0);
        a.params.cf = 868_300_000;
        let mut txs = vec![a, b];
        resolve(&mut txs, Toggles::default(), 1);
        assert_eq!(outcomes(&txs), vec![Outcome::Delivered, Outcome::Delivered]);
    }
}
