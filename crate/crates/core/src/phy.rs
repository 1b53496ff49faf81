//! LoRa physical-layer quantities: bit rate, airtime, transmit energy,
//! receiver sensitivity and the co-channel interference rejection matrix.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Longest payload a LoRa frame can carry.
pub const MAX_PAYLOAD_BYTES: usize = 255;

/// Sensitivity floor used when every node must reach the gateway with every
/// combination.
pub const DEFAULT_SENSITIVITY_FLOOR_DBM: f64 = -155.0;

/// Lowest and highest transmit power a LoRaWAN end device can use.
pub const MIN_TP_DBM: i32 = 2;
pub const MAX_TP_DBM: i32 = 14;

/// Spreading factor 7..=12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const ALL: [SpreadingFactor; 6] = [
        SpreadingFactor(7),
        SpreadingFactor(8),
        SpreadingFactor(9),
        SpreadingFactor(10),
        SpreadingFactor(11),
        SpreadingFactor(12),
    ];

    pub fn new(sf: u8) -> Result<Self> {
        if (7..=12).contains(&sf) {
            Ok(SpreadingFactor(sf))
        } else {
            Err(Error::InvalidParameter(format!("spreading factor {sf} outside 7..=12")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Row/column of this SF in a [`CirMatrix`].
    pub fn index(self) -> usize {
        usize::from(self.0 - 7)
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bandwidth {
    Khz125,
    Khz250,
    Khz500,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 3] = [Bandwidth::Khz125, Bandwidth::Khz250, Bandwidth::Khz500];

    pub fn hz(self) -> u32 {
        match self {
            Bandwidth::Khz125 => 125_000,
            Bandwidth::Khz250 => 250_000,
            Bandwidth::Khz500 => 500_000,
        }
    }

    pub fn from_hz(hz: u32) -> Result<Self> {
        match hz {
            125_000 => Ok(Bandwidth::Khz125),
            250_000 => Ok(Bandwidth::Khz250),
            500_000 => Ok(Bandwidth::Khz500),
            _ => Err(Error::InvalidParameter(format!("bandwidth {hz} Hz not in {{125k, 250k, 500k}}"))),
        }
    }

    fn index(self) -> usize {
        match self {
            Bandwidth::Khz125 => 0,
            Bandwidth::Khz250 => 1,
            Bandwidth::Khz500 => 2,
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hz() / 1000)
    }
}

/// Coding rate 4/(4+n), n in 1..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CodingRate {
    Cr4_5,
    Cr4_6,
    Cr4_7,
    Cr4_8,
}

impl CodingRate {
    pub const ALL: [CodingRate; 4] = [CodingRate::Cr4_5, CodingRate::Cr4_6, CodingRate::Cr4_7, CodingRate::Cr4_8];

    /// The `n` of 4/(4+n).
    pub fn redundancy(self) -> u32 {
        match self {
            CodingRate::Cr4_5 => 1,
            CodingRate::Cr4_6 => 2,
            CodingRate::Cr4_7 => 3,
            CodingRate::Cr4_8 => 4,
        }
    }

    pub fn from_redundancy(n: u32) -> Result<Self> {
        match n {
            1 => Ok(CodingRate::Cr4_5),
            2 => Ok(CodingRate::Cr4_6),
            3 => Ok(CodingRate::Cr4_7),
            4 => Ok(CodingRate::Cr4_8),
            _ => Err(Error::InvalidParameter(format!("coding rate 4/(4+{n}) not supported"))),
        }
    }

    pub fn fraction(self) -> f64 {
        4.0 / f64::from(4 + self.redundancy())
    }
}

impl fmt::Display for CodingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "4/{}", 4 + self.redundancy())
    }
}

/// A data-rate combination, i.e. everything in [`TxParams`] except power and
/// carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataRate {
    pub sf: SpreadingFactor,
    pub bw: Bandwidth,
    pub cr: CodingRate,
}

impl DataRate {
    pub fn new(sf: SpreadingFactor, bw: Bandwidth, cr: CodingRate) -> Self {
        DataRate { sf, bw, cr }
    }

    pub fn bit_rate(&self) -> f64 {
        raw_bit_rate(self.sf, self.bw, self.cr)
    }
}

impl fmt::Display for DataRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}kHz/{}", self.sf, self.bw, self.cr)
    }
}

/// Parses `sf/bw_khz/cr_denominator`, e.g. `7/125/5` for SF7, 125 kHz, 4/5.
impl FromStr for DataRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('/').map(str::trim).collect();
        let bad = || Error::Config(format!("data rate `{s}` is not of the form sf/bw_khz/cr_den"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let sf: u8 = parts[0].trim_start_matches("SF").parse().map_err(|_| bad())?;
        let bw_khz: u32 = parts[1].parse().map_err(|_| bad())?;
        let den: u32 = parts[2].parse().map_err(|_| bad())?;
        if den < 5 {
            return Err(bad());
        }
        Ok(DataRate {
            sf: SpreadingFactor::new(sf)?,
            bw: Bandwidth::from_hz(bw_khz * 1000)?,
            cr: CodingRate::from_redundancy(den - 4)?,
        })
    }
}

/// One LoRa transmission parameter combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxParams {
    pub rate: DataRate,
    /// Transmit power in dBm.
    pub tp: i32,
    /// Carrier frequency in Hz.
    pub cf: u32,
}

impl TxParams {
    pub fn new(rate: DataRate, tp: i32, cf: u32) -> Result<Self> {
        if !(MIN_TP_DBM..=MAX_TP_DBM).contains(&tp) {
            return Err(Error::InvalidParameter(format!(
                "transmit power {tp} dBm outside {MIN_TP_DBM}..={MAX_TP_DBM}"
            )));
        }
        Ok(TxParams { rate, tp, cf })
    }

    pub fn sf(&self) -> SpreadingFactor {
        self.rate.sf
    }

    pub fn bw(&self) -> Bandwidth {
        self.rate.bw
    }

    pub fn cr(&self) -> CodingRate {
        self.rate.cr
    }
}

fn raw_bit_rate(sf: SpreadingFactor, bw: Bandwidth, cr: CodingRate) -> f64 {
    let sf = f64::from(sf.value());
    sf * (f64::from(bw.hz()) / sf.exp2()) * cr.fraction()
}

/// Theoretical LoRa bit rate in bits per second: `sf * bw / 2^sf * cr`.
///
/// No low-data-rate optimisation is applied, so SF11/SF12 at 125 kHz come out
/// above the indicative LoRaWAN table values (293 b/s vs 250 b/s for SF12).
pub fn bit_rate(p: &TxParams) -> f64 {
    p.rate.bit_rate()
}

/// Frame layout options that enter the airtime computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOptions {
    pub preamble_syms: u32,
    pub explicit_header: bool,
    pub crc: bool,
    /// `None` enables low-data-rate optimisation automatically for SF11/SF12
    /// at 125 kHz.
    pub low_data_rate_opt: Option<bool>,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions { preamble_syms: 8, explicit_header: true, crc: true, low_data_rate_opt: None }
    }
}

impl FrameOptions {
    pub fn ldro_for(&self, rate: &DataRate) -> bool {
        self.low_data_rate_opt
            .unwrap_or(rate.sf.value() >= 11 && rate.bw == Bandwidth::Khz125)
    }
}

/// Symbol duration `2^sf / bw` in seconds.
pub fn symbol_time(rate: &DataRate) -> f64 {
    f64::from(rate.sf.value()).exp2() / f64::from(rate.bw.hz())
}

/// Number of payload symbols (including the 8 fixed symbols) for a frame.
pub fn payload_symbols(rate: &DataRate, payload_len: usize, opts: &FrameOptions) -> u32 {
    let sf = i64::from(rate.sf.value());
    let ldro = i64::from(opts.ldro_for(rate));
    let crc = i64::from(opts.crc);
    let implicit = i64::from(!opts.explicit_header);
    let numerator = 8 * payload_len as i64 - 4 * sf + 28 + 16 * crc - 20 * implicit;
    let denominator = 4 * (sf - 2 * ldro);
    // ceil for a positive denominator
    let blocks = if numerator > 0 { (numerator + denominator - 1) / denominator } else { 0 };
    let coded = blocks * i64::from(rate.cr.redundancy() + 4);
    8 + coded.max(0) as u32
}

/// Frame airtime in seconds, following the Semtech LoRa airtime calculator.
pub fn airtime(rate: &DataRate, payload_len: usize, opts: &FrameOptions) -> Result<f64> {
    if payload_len == 0 || payload_len > MAX_PAYLOAD_BYTES {
        return Err(Error::InvalidParameter(format!(
            "payload length {payload_len} outside 1..={MAX_PAYLOAD_BYTES}"
        )));
    }
    if opts.preamble_syms < 6 {
        return Err(Error::InvalidParameter(format!(
            "preamble of {} symbols is shorter than 6",
            opts.preamble_syms
        )));
    }
    let t_sym = symbol_time(rate);
    let preamble = (f64::from(opts.preamble_syms) + 4.25) * t_sym;
    let payload = f64::from(payload_symbols(rate, payload_len, opts)) * t_sym;
    Ok(preamble + payload)
}

/// Electrical power drawn by the radio while transmitting, per TP setting.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    /// Draw in mW for tp = MIN_TP_DBM + index.
    tx_draw_mw: Vec<f64>,
}

impl EnergyProfile {
    /// `draws[i]` is the draw in mW at `MIN_TP_DBM + i` dBm.
    pub fn new(draws: Vec<f64>) -> Result<Self> {
        let expected = (MAX_TP_DBM - MIN_TP_DBM + 1) as usize;
        if draws.len() != expected {
            return Err(Error::Config(format!(
                "energy profile needs {expected} entries, got {}",
                draws.len()
            )));
        }
        if draws.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::Config("energy profile entries must be positive".into()));
        }
        if draws.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("energy profile must strictly increase with tp".into()));
        }
        Ok(EnergyProfile { tx_draw_mw: draws })
    }

    pub fn tx_draw_mw(&self, tp: i32) -> Result<f64> {
        if !(MIN_TP_DBM..=MAX_TP_DBM).contains(&tp) {
            return Err(Error::Config(format!("no energy profile entry for {tp} dBm")));
        }
        Ok(self.tx_draw_mw[(tp - MIN_TP_DBM) as usize])
    }
}

impl Default for EnergyProfile {
    /// SX127x-class supply current at 3.0 V for 2..=14 dBm on the RFO/PA_BOOST
    /// path, smoothed so that every step draws strictly more.
    fn default() -> Self {
        const SUPPLY_V: f64 = 3.0;
        const CURRENT_MA: [f64; 13] =
            [24.0, 24.5, 25.0, 25.5, 26.0, 27.0, 28.0, 29.0, 31.0, 32.0, 34.0, 35.0, 44.0];
        EnergyProfile { tx_draw_mw: CURRENT_MA.iter().map(|ma| ma * SUPPLY_V).collect() }
    }
}

/// Energy in joules spent transmitting for `airtime` seconds at `tp` dBm.
pub fn tx_energy(airtime: f64, tp: i32, profile: &EnergyProfile) -> Result<f64> {
    Ok(airtime * profile.tx_draw_mw(tp)? / 1000.0)
}

/// Receiver sensitivity model.
#[derive(Debug, Clone, PartialEq)]
pub enum Sensitivity {
    /// The same floor for every (sf, bw).
    Floor(f64),
    /// Per-(sf, bw) values in dBm, rows SF7..SF12, columns 125/250/500 kHz.
    Table([[f64; 3]; 6]),
}

impl Default for Sensitivity {
    fn default() -> Self {
        Sensitivity::Floor(DEFAULT_SENSITIVITY_FLOOR_DBM)
    }
}

impl Sensitivity {
    /// SX1276 datasheet sensitivities.
    pub fn datasheet() -> Self {
        Sensitivity::Table([
            [-123.0, -120.0, -116.0],
            [-126.0, -123.0, -119.0],
            [-129.0, -125.0, -122.0],
            [-132.0, -128.0, -125.0],
            [-134.5, -130.0, -128.0],
            [-137.0, -133.0, -130.0],
        ])
    }

    pub fn dbm(&self, sf: SpreadingFactor, bw: Bandwidth) -> f64 {
        match self {
            Sensitivity::Floor(v) => *v,
            Sensitivity::Table(t) => t[sf.index()][bw.index()],
        }
    }

    pub fn decodable(&self, rx_dbm: f64, sf: SpreadingFactor, bw: Bandwidth) -> bool {
        rx_dbm >= self.dbm(sf, bw)
    }
}

/// Co-channel interference rejection thresholds in dB.
///
/// Entry `(i, j)` is the margin by which a signal on SF `7+i` must exceed an
/// interferer on SF `7+j` to survive.
#[derive(Debug, Clone, PartialEq)]
pub struct CirMatrix {
    thresholds: [[f64; 6]; 6],
}

impl CirMatrix {
    pub fn new(thresholds: [[f64; 6]; 6]) -> Result<Self> {
        for (i, row) in thresholds.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("CIR matrix entries must be finite".into()));
            }
            if row[i] <= 0.0 {
                return Err(Error::Config(format!("same-SF CIR threshold for SF{} must be > 0", i + 7)));
            }
        }
        Ok(CirMatrix { thresholds })
    }

    pub fn uniform(db: f64) -> Result<Self> {
        CirMatrix::new([[db; 6]; 6])
    }

    pub fn threshold(&self, signal: SpreadingFactor, interferer: SpreadingFactor) -> f64 {
        self.thresholds[signal.index()][interferer.index()]
    }

    /// Smallest entry, the safe margin shared by every SF pair.
    pub fn min(&self) -> f64 {
        self.thresholds.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.thresholds.iter().flatten().copied()
    }
}

impl Default for CirMatrix {
    /// 6 dB for every SF pair.
    fn default() -> Self {
        CirMatrix { thresholds: [[6.0; 6]; 6] }
    }
}
