//! Fair data-rate deployment ratios and their conversion to node counts.
//!
//! The SF ratios equalise the collision probability of every SF by making the
//! share of nodes on an SF proportional to `sf / 2^sf`. The bandwidth and
//! coding-rate extensions split each SF's share over the bandwidths (and then
//! coding rates) deployed with it, weighted by the value of that bandwidth or
//! coding rate.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::phy::{Bandwidth, CodingRate, DataRate, SpreadingFactor};

/// Fraction of nodes per rate class.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRatios<K: Ord> {
    entries: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> RateRatios<K> {
    pub fn from_entries(entries: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let entries: BTreeMap<K, f64> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(Error::Allocation("ratio set is empty".into()));
        }
        if entries.values().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Allocation("ratios must be finite and non-negative".into()));
        }
        Ok(RateRatios { entries })
    }

    pub fn get(&self, key: &K) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Anything that can be ranked by how fast it transmits.
pub trait RateClass: Ord + Clone {
    /// Nominal bit rate, only used for ordering.
    fn nominal_bit_rate(&self) -> f64;
}

impl RateClass for SpreadingFactor {
    fn nominal_bit_rate(&self) -> f64 {
        DataRate::new(*self, Bandwidth::Khz125, CodingRate::Cr4_5).bit_rate()
    }
}

impl RateClass for (SpreadingFactor, Bandwidth) {
    fn nominal_bit_rate(&self) -> f64 {
        DataRate::new(self.0, self.1, CodingRate::Cr4_5).bit_rate()
    }
}

impl RateClass for DataRate {
    fn nominal_bit_rate(&self) -> f64 {
        self.bit_rate()
    }
}

/// How each SF's share is split over the bandwidths deployed with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BwWeighting {
    /// Proportional to the bandwidth.
    #[default]
    Linear,
    /// Proportional to the squared bandwidth. Reproduces the published
    /// 0.0898 / 0.3592 split of SF7 over 125 and 250 kHz.
    Squared,
}

impl BwWeighting {
    fn weight(self, bw: Bandwidth) -> f64 {
        let khz = f64::from(bw.hz()) / 1000.0;
        match self {
            BwWeighting::Linear => khz,
            BwWeighting::Squared => khz * khz,
        }
    }
}

fn sf_weight(sf: SpreadingFactor) -> f64 {
    let s = f64::from(sf.value());
    s / s.exp2()
}

/// `p_sf = (sf / 2^sf) / sum_i (i / 2^i)` for SF7..SF12.
pub fn fair_sf_ratios() -> RateRatios<SpreadingFactor> {
    let norm: f64 = SpreadingFactor::ALL.iter().map(|&sf| sf_weight(sf)).sum();
    let entries = SpreadingFactor::ALL.iter().map(|&sf| (sf, sf_weight(sf) / norm)).collect();
    RateRatios { entries }
}

fn require_all_sfs<'a>(sfs: impl Iterator<Item = &'a SpreadingFactor>) -> Result<()> {
    let present: BTreeSet<_> = sfs.collect();
    let missing: Vec<String> = SpreadingFactor::ALL
        .iter()
        .filter(|sf| !present.contains(sf))
        .map(ToString::to_string)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Allocation(format!("deployment set lacks {}", missing.join(", "))))
    }
}

/// Splits each SF's fair share over the bandwidths deployed with that SF.
pub fn fair_sf_bw_ratios(
    deployed: &[(SpreadingFactor, Bandwidth)],
    weighting: BwWeighting,
) -> Result<RateRatios<(SpreadingFactor, Bandwidth)>> {
    if deployed.is_empty() {
        return Err(Error::Allocation("empty deployment set".into()));
    }
    let set: BTreeSet<_> = deployed.iter().copied().collect();
    require_all_sfs(set.iter().map(|(sf, _)| sf))?;
    let sf_ratios = fair_sf_ratios();

    let mut entries = BTreeMap::new();
    for sf in SpreadingFactor::ALL {
        let bws: Vec<Bandwidth> = set.iter().filter(|(s, _)| *s == sf).map(|(_, bw)| *bw).collect();
        let norm: f64 = bws.iter().map(|&bw| weighting.weight(bw)).sum();
        let p_sf = sf_ratios.get(&sf).expect("all SFs present");
        for bw in bws {
            entries.insert((sf, bw), p_sf * weighting.weight(bw) / norm);
        }
    }
    Ok(RateRatios { entries })
}

/// Splits each (SF, BW) share over the coding rates deployed with it,
/// proportionally to the coding-rate fraction.
pub fn fair_rate_ratios(deployed: &[DataRate], weighting: BwWeighting) -> Result<RateRatios<DataRate>> {
    if deployed.is_empty() {
        return Err(Error::Allocation("empty deployment set".into()));
    }
    let set: BTreeSet<DataRate> = deployed.iter().copied().collect();
    let pairs: Vec<(SpreadingFactor, Bandwidth)> = set.iter().map(|r| (r.sf, r.bw)).collect();
    let sf_bw = fair_sf_bw_ratios(&pairs, weighting)?;

    let mut entries = BTreeMap::new();
    for (&(sf, bw), p) in sf_bw.iter() {
        let crs: Vec<CodingRate> = set.iter().filter(|r| r.sf == sf && r.bw == bw).map(|r| r.cr).collect();
        let norm: f64 = crs.iter().map(|cr| cr.fraction()).sum();
        for cr in crs {
            entries.insert(DataRate::new(sf, bw, cr), p * cr.fraction() / norm);
        }
    }
    Ok(RateRatios { entries })
}

/// Integer node counts per class that sum to `n`.
///
/// Largest-remainder rounding of `n * ratio`; equal remainders go to the
/// slower class first.
pub fn ratios_to_counts<K: RateClass>(n: usize, ratios: &RateRatios<K>) -> Result<BTreeMap<K, usize>> {
    if n == 0 {
        return Err(Error::Allocation("cannot distribute zero nodes".into()));
    }
    let total = ratios.total();
    if !(total > 0.0) {
        return Err(Error::Allocation("ratios sum to zero".into()));
    }
    let mut counts = BTreeMap::new();
    // (remainder in 1e-9 units, bit rate, key)
    let mut remainders: Vec<(i64, f64, K)> = Vec::with_capacity(ratios.len());
    let mut assigned = 0usize;
    for (key, p) in ratios.iter() {
        let exact = n as f64 * p / total;
        let whole = exact.floor();
        counts.insert(key.clone(), whole as usize);
        assigned += whole as usize;
        remainders.push((((exact - whole) * 1e9).round() as i64, key.nominal_bit_rate(), key.clone()));
    }
    remainders.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(a.1.total_cmp(&b.1))
            .then_with(|| b.2.cmp(&a.2))
    });
    let missing = n.saturating_sub(assigned);
    for (_, _, key) in remainders.into_iter().cycle().take(missing) {
        *counts.get_mut(&key).expect("key inserted above") += 1;
    }
    Ok(counts)
}
