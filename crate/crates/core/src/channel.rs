//! Node placement around a single gateway and log-distance propagation.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Nodes are never placed closer than this to the gateway.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Fraction of nodes concentrated in the favoured area of a skewed layout.
pub const SKEWED_FRACTION: f64 = 0.666;

/// Outer edges of the inner and middle areas, as fractions of the radius.
pub const INNER_EDGE: f64 = 0.33;
pub const MIDDLE_EDGE: f64 = 0.66;

const PLACEMENT_STREAM: u64 = 0x706c_6163_6500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    /// Reference distance in metres.
    pub d0: f64,
    /// Path loss at `d0` in dB.
    pub pl_d0: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Standard deviation of log-normal shadowing in dB; 0 disables it.
    pub shadowing_sigma: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig { d0: 40.0, pl_d0: 127.41, gamma: 2.08, shadowing_sigma: 0.0 }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0) || !self.d0.is_finite() {
            return Err(Error::Config(format!("reference distance d0 = {} must be > 0", self.d0)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("path-loss exponent {} must be > 0", self.gamma)));
        }
        if !(self.shadowing_sigma >= 0.0) || !self.shadowing_sigma.is_finite() {
            return Err(Error::Config(format!("shadowing sigma {} must be >= 0", self.shadowing_sigma)));
        }
        if !self.pl_d0.is_finite() {
            return Err(Error::Config("pl_d0 must be finite".into()));
        }
        Ok(())
    }

    /// One shadowing term in dB. Always 0 when sigma is 0, without touching
    /// the generator.
    pub fn draw_shadowing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.shadowing_sigma == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, self.shadowing_sigma)
            .expect("sigma validated")
            .sample(rng)
    }
}

/// Mean log-distance path loss in dB: `pl_d0 + 10 * gamma * log10(d / d0)`.
pub fn path_loss(d: f64, cfg: &PropagationConfig) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("distance {d} m must be > 0")));
    }
    Ok(cfg.pl_d0 + 10.0 * cfg.gamma * (d / cfg.d0).log10())
}

/// Received power in dBm at the gateway for a node `d` metres away.
pub fn received_power(tp: f64, d: f64, cfg: &PropagationConfig) -> Result<f64> {
    Ok(tp - path_loss(d, cfg)?)
}

/// How a node radius is drawn within an annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadialLaw {
    /// Uniform over area.
    #[default]
    Area,
    /// Uniform in distance from the gateway.
    Radius,
}

impl FromStr for RadialLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "area" => Ok(RadialLaw::Area),
            "radius" => Ok(RadialLaw::Radius),
            other => Err(Error::Config(format!("unknown radial law `{other}` (area|radius)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeDistribution {
    #[default]
    Uniform,
    Inner,
    Middle,
    Outer,
}

impl NodeDistribution {
    /// Favoured band `(lo, hi)` as fractions of the radius, for skewed kinds.
    fn favoured_band(self) -> Option<(f64, f64)> {
        match self {
            NodeDistribution::Uniform => None,
            NodeDistribution::Inner => Some((0.0, INNER_EDGE)),
            NodeDistribution::Middle => Some((INNER_EDGE, MIDDLE_EDGE)),
            NodeDistribution::Outer => Some((MIDDLE_EDGE, 1.0)),
        }
    }
}

impl fmt::Display for NodeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeDistribution::Uniform => "uniform",
            NodeDistribution::Inner => "inner",
            NodeDistribution::Middle => "middle",
            NodeDistribution::Outer => "outer",
        };
        f.write_str(s)
    }
}

impl FromStr for NodeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(NodeDistribution::Uniform),
            "inner" => Ok(NodeDistribution::Inner),
            "middle" => Ok(NodeDistribution::Middle),
            "outer" => Ok(NodeDistribution::Outer),
            other => Err(Error::Config(format!(
                "unknown node distribution `{other}` (uniform|inner|middle|outer)"
            ))),
        }
    }
}

/// Radial intervals, in metres, that together make up a sampling region.
struct Region {
    bands: Vec<(f64, f64)>,
}

impl Region {
    fn new(bands: Vec<(f64, f64)>) -> Self {
        let bands = bands
            .into_iter()
            .map(|(lo, hi)| (lo.max(MIN_DISTANCE_M), hi))
            .filter(|(lo, hi)| hi > lo)
            .collect();
        Region { bands }
    }

    fn weight(lo: f64, hi: f64, law: RadialLaw) -> f64 {
        match law {
            RadialLaw::Area => hi * hi - lo * lo,
            RadialLaw::Radius => hi - lo,
        }
    }

    /// Draws a distance. `u` in (0, 1], so the lower edge of the first band is
    /// excluded and upper edges are reachable.
    fn sample<R: Rng + ?Sized>(&self, law: RadialLaw, rng: &mut R) -> f64 {
        let total: f64 = self.bands.iter().map(|&(lo, hi)| Self::weight(lo, hi, law)).sum();
        let mut u = (1.0 - rng.gen::<f64>()) * total;
        for &(lo, hi) in &self.bands {
            let w = Self::weight(lo, hi, law);
            if u <= w {
                let r = match law {
                    RadialLaw::Area => (lo * lo + u).sqrt(),
                    RadialLaw::Radius => lo + u,
                };
                return r.clamp(lo, hi);
            }
            u -= w;
        }
        self.bands.last().map(|b| b.1).unwrap_or(MIN_DISTANCE_M)
    }
}

fn point_at<R: Rng + ?Sized>(r: f64, rng: &mut R) -> Position {
    let theta = rng.gen::<f64>() * TAU;
    Position { x: r * theta.cos(), y: r * theta.sin() }
}

/// Places `n` nodes in a disc of `radius` metres around the gateway.
///
/// Skewed distributions put `floor(0.666 n)` nodes in the favoured third and
/// spread the rest over the other two thirds. The result is fully determined
/// by `seed`.
pub fn place_nodes(
    n: usize,
    radius: f64,
    dist: NodeDistribution,
    law: RadialLaw,
    seed: u64,
) -> Result<Vec<Position>> {
    if n == 0 {
        return Err(Error::InvalidParameter("cannot place zero nodes".into()));
    }
    if !(radius > MIN_DISTANCE_M) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("cell radius {radius} m must exceed {MIN_DISTANCE_M} m")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PLACEMENT_STREAM);

    let (favoured, rest, n_favoured) = match dist.favoured_band() {
        None => (Region::new(vec![(0.0, radius)]), Region::new(vec![]), n),
        Some((lo, hi)) => {
            let favoured = Region::new(vec![(lo * radius, hi * radius)]);
            let rest = Region::new(vec![(0.0, lo * radius), (hi * radius, radius)]);
            (favoured, rest, (SKEWED_FRACTION * n as f64).floor() as usize)
        }
    };

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let region = if i < n_favoured { &favoured } else { &rest };
        let r = region.sample(law, &mut rng);
        out.push(point_at(r, &mut rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loss_at_reference_distance() {
        let cfg = PropagationConfig::default();
        assert_relative_eq!(path_loss(40.0, &cfg).unwrap(), 127.41);
        assert_relative_eq!(received_power(2.0, 40.0, &cfg).unwrap(), -125.41, epsilon = 1e-12);
    }

    #[test]
    fn loss_grows_about_ten_db_from_one_to_three_km() {
        let cfg = PropagationConfig::default();
        let delta = path_loss(3000.0, &cfg).unwrap() - path_loss(1000.0, &cfg).unwrap();
        assert!((delta - 9.92).abs() < 0.01, "{delta}");
        // spread across a cell of radius R, measured from the 1 m floor
        let spread_1km = path_loss(1000.0, &cfg).unwrap() - path_loss(1.0, &cfg).unwrap();
        let spread_3km = path_loss(3000.0, &cfg).unwrap() - path_loss(1.0, &cfg).unwrap();
        assert!((spread_1km - 62.0).abs() < 1.0);
        assert!((spread_3km - 72.0).abs() < 1.0);
    }

    #[test]
    fn received_power_is_additive_and_monotone() {
        let cfg = PropagationConfig::default();
        for d in [1.0, 10.0, 250.0, 3200.0] {
            let a = received_power(14.0, d, &cfg).unwrap();
            let b = received_power(9.0, d, &cfg).unwrap();
            assert_relative_eq!(a - b, 5.0, epsilon = 1e-9);
            assert!(received_power(14.0, d * 1.01, &cfg).unwrap() < a);
        }
        assert_relative_eq!(14.0 - 100.0, -86.0);
    }

    #[test]
    fn rejects_non_positive_distance() {
        let cfg = PropagationConfig::default();
        assert!(path_loss(0.0, &cfg).is_err());
        assert!(path_loss(-3.0, &cfg).is_err());
        assert!(received_power(14.0, f64::NAN, &cfg).is_err());
    }

    #[test]
    fn propagation_validation() {
        assert!(PropagationConfig::default().validate().is_ok());
        let bad = PropagationConfig { gamma: 0.0, ..PropagationConfig::default() };
        assert!(bad.validate().is_err());
        let bad = PropagationConfig { shadowing_sigma: -1.0, ..PropagationConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn uniform_placement_follows_area_law() {
        let pos = place_nodes(1000, 1000.0, NodeDistribution::Uniform, RadialLaw::Area, 7).unwrap();
        assert_eq!(pos.len(), 1000);
        let inside = pos.iter().filter(|p| p.distance() <= 500.0).count() as f64 / 1000.0;
        assert!((inside - 0.25).abs() <= 0.05, "{inside}");
        assert!(pos.iter().all(|p| p.distance() >= MIN_DISTANCE_M - 1e-9 && p.distance() <= 1000.0 + 1e-9));
    }

    #[test]
    fn radius_law_is_uniform_in_distance() {
        let pos = place_nodes(2000, 1000.0, NodeDistribution::Uniform, RadialLaw::Radius, 7).unwrap();
        let inside = pos.iter().filter(|p| p.distance() <= 500.0).count() as f64 / 2000.0;
        assert!((inside - 0.5).abs() <= 0.05, "{inside}");
    }

    #[test]
    fn skewed_placements_count_exactly() {
        let r = 1200.0;
        let pos = place_nodes(3000, r, NodeDistribution::Inner, RadialLaw::Area, 11).unwrap();
        assert_eq!(pos.iter().filter(|p| p.distance() <= INNER_EDGE * r).count(), 1998);

        let pos = place_nodes(3000, r, NodeDistribution::Middle, RadialLaw::Area, 11).unwrap();
        let mid = pos
            .iter()
            .filter(|p| p.distance() > INNER_EDGE * r && p.distance() <= MIDDLE_EDGE * r)
            .count();
        assert_eq!(mid, 1998);

        let pos = place_nodes(3000, r, NodeDistribution::Outer, RadialLaw::Area, 11).unwrap();
        assert_eq!(pos.iter().filter(|p| p.distance() > MIDDLE_EDGE * r).count(), 1998);
    }

    #[test]
    fn placement_is_deterministic() {
        let a = place_nodes(100, 800.0, NodeDistribution::Middle, RadialLaw::Area, 3).unwrap();
        let b = place_nodes(100, 800.0, NodeDistribution::Middle, RadialLaw::Area, 3).unwrap();
        let c = place_nodes(100, 800.0, NodeDistribution::Middle, RadialLaw::Area, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn placement_rejects_degenerate_inputs() {
        assert!(place_nodes(0, 100.0, NodeDistribution::Uniform, RadialLaw::Area, 1).is_err());
        assert!(place_nodes(10, 0.0, NodeDistribution::Uniform, RadialLaw::Area, 1).is_err());
    }
}
