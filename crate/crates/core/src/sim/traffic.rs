use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

const TRAFFIC_STREAM: u64 = 1 << 32;
const MEASUREMENT_STREAM: u64 = 2 << 32;

/// Random stream owned by one node's traffic. Independent of every other
/// node, so adding or removing nodes leaves a node's schedule unchanged.
pub fn traffic_rng(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRAFFIC_STREAM | node as u64);
    rng
}

/// Random stream for a node's shadowing and RSSI measurement noise.
pub fn measurement_rng(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MEASUREMENT_STREAM | node as u64);
    rng
}

/// Lazily yields the start times of one node's packets.
///
/// Gaps are exponential with the given mean; a start that would fall inside
/// the node's previous frame is pushed to that frame's end.
#[derive(Debug, Clone)]
pub struct TrafficSource<R> {
    rng: R,
    gap: Exp<f64>,
    airtime: f64,
    sim_time: f64,
    clock: f64,
    busy_until: f64,
}

impl<R: Rng> TrafficSource<R> {
    pub fn new(mean_interval: f64, airtime: f64, sim_time: f64, rng: R) -> Result<Self> {
        if !(mean_interval > 0.0) || !mean_interval.is_finite() {
            return Err(Error::InvalidParameter(format!("mean interval {mean_interval} s must be > 0")));
        }
        if !(airtime >= 0.0) {
            return Err(Error::InvalidParameter(format!("airtime {airtime} s must be >= 0")));
        }
        let gap = Exp::new(1.0 / mean_interval).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(TrafficSource { rng, gap, airtime, sim_time, clock: 0.0, busy_until: 0.0 })
    }
}

impl<R: Rng> Iterator for TrafficSource<R> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let mut start = self.clock + self.gap.sample(&mut self.rng);
        if start < self.busy_until {
            start = self.busy_until;
        }
        if start >= self.sim_time {
            self.clock = f64::INFINITY;
            return None;
        }
        self.clock = start;
        self.busy_until = start + self.airtime;
        Some(start)
    }
}

/// All start times of one node within `[0, sim_time)`.
pub fn generate_traffic<R: Rng>(mean_interval: f64, airtime: f64, sim_time: f64, rng: R) -> Result<Vec<f64>> {
    Ok(TrafficSource::new(mean_interval, airtime, sim_time, rng)?.collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_day_at_one_packet_per_minute() {
        // Poisson count oracle: mean 1440, sd sqrt(1440)
        let bound = 3.0 * 1440f64.sqrt();
        for node in 0..5 {
            let starts = generate_traffic(60.0, 0.14, 86_400.0, traffic_rng(9, node)).unwrap();
            let n = starts.len() as f64;
            assert!((n - 1440.0).abs() <= bound, "node {node}: {n}");
        }
    }

    #[test]
    fn never_overlaps_itself() {
        let starts = generate_traffic(2.0, 1.5, 5_000.0, traffic_rng(1, 0)).unwrap();
        assert!(starts.windows(2).all(|w| w[1] >= w[0] + 1.5));
        assert!(starts.iter().all(|&s| (0.0..5_000.0).contains(&s)));
    }

    #[test]
    fn short_horizon_gives_nothing() {
        let starts = generate_traffic(1e9, 0.1, 1.0, traffic_rng(3, 0)).unwrap();
        assert!(starts.is_empty());
    }

    #[test]
    fn deterministic_per_seed_and_node() {
        let a = generate_traffic(60.0, 0.1, 7_200.0, traffic_rng(5, 7)).unwrap();
        let b = generate_traffic(60.0, 0.1, 7_200.0, traffic_rng(5, 7)).unwrap();
        let c = generate_traffic(60.0, 0.1, 7_200.0, traffic_rng(5, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(generate_traffic(0.0, 0.1, 10.0, traffic_rng(0, 0)).is_err());
        assert!(generate_traffic(-1.0, 0.1, 10.0, traffic_rng(0, 0)).is_err());
    }
}
