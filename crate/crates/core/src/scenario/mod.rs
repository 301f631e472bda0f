//! Experiment description: radio, UEs, channel, timing and logging, plus
//! validation and the UE mobility engine.
//!
//! Units follow the field names' documentation: MHz for carrier frequency and
//! bandwidth, kHz for subcarrier spacing, dBm for transmit power, meters,
//! m/s and degrees for mobility, seconds for timing.

mod mobility;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelScenario, MimoCorrelation, Tap, TdlPreset};
use crate::iq::SUBCARRIER_SPACINGS_KHZ;
use crate::{Error, GridDims, Result};

pub use mobility::{
    distance_to_antenna, preview_document, step_mobility, trajectory, velocity_vector, MobilityState, PreviewDocument, TrajectorySample, UePreview,
};

/// Upper bound on snapshots per run.
pub const MAX_SNAPSHOTS: usize = 100_000;

const LTE_BANDWIDTH_MHZ: (f64, f64) = (1.4, 20.0);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadioMode {
    #[default]
    Nr,
    Lte,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaType {
    #[default]
    Isotropic,
    /// 120° sector centred on `azimuth` (degrees).
    Sector { azimuth: f64 },
}

impl AntennaType {
    pub const SECTOR_GAIN_DBI: f64 = 8.0;
    pub const SECTOR_BACK_DBI: f64 = -12.0;

    /// Gain offset towards a UE at `ue_azimuth` degrees as seen from the antenna.
    pub fn gain_dbi(&self, ue_azimuth: f64) -> f64 {
        match *self {
            AntennaType::Isotropic => 0.0,
            AntennaType::Sector { azimuth } => {
                let off = (ue_azimuth - azimuth).rem_euclid(360.0);
                let off = off.min(360.0 - off);
                if off <= 60.0 {
                    Self::SECTOR_GAIN_DBI
                } else {
                    Self::SECTOR_BACK_DBI
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub mode: RadioMode,
    pub num_cells: u32,
    /// MHz.
    pub carrier_frequency: f64,
    /// MHz.
    pub bandwidth: f64,
    /// kHz.
    pub subcarrier_spacing: u32,
    /// dBm per resource element of the reference grid.
    pub tx_power: f64,
    pub num_dl_antennas: u32,
    pub num_ul_antennas: u32,
    pub max_mcs: u8,
    /// Slots; carried as metadata and echoed in KPI logs.
    pub rx_tx_latency: u32,
    /// Meters (x, y, z).
    pub antenna_position: [f64; 3],
    pub antenna_type: AntennaType,
    /// Reference-grid subcarriers per snapshot.
    pub grid_subcarriers: usize,
    /// Reference-grid symbols per snapshot.
    pub grid_symbols: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            mode: RadioMode::Nr,
            num_cells: 1,
            carrier_frequency: 3500.0,
            bandwidth: 20.0,
            subcarrier_spacing: 30,
            tx_power: 0.0,
            num_dl_antennas: 1,
            num_ul_antennas: 1,
            max_mcs: 28,
            rx_tx_latency: 2,
            antenna_position: [0.0, 0.0, 10.0],
            antenna_type: AntennaType::Isotropic,
            grid_subcarriers: 360,
            grid_symbols: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityArea {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl MobilityArea {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

impl Default for MobilityArea {
    fn default() -> Self {
        Self {
            min: [-50.0, -50.0, 0.0],
            max: [50.0, 50.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityLogic {
    #[default]
    Static,
    LinearBounce,
    Waypoint { points: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficProfile {
    None,
    #[default]
    PeriodicSsbOnly,
    Cbr { rate_kbps: f64 },
}

/// A tap Doppler that is either given in Hz or derived from UE speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DopplerSpec {
    Hz(f64),
    FromMobility,
}

impl Default for DopplerSpec {
    fn default() -> Self {
        DopplerSpec::FromMobility
    }
}

const FROM_MOBILITY: &str = "from-mobility";

impl Serialize for DopplerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DopplerSpec::Hz(v) => s.serialize_f64(*v),
            DopplerSpec::FromMobility => s.serialize_str(FROM_MOBILITY),
        }
    }
}

impl<'de> Deserialize<'de> for DopplerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(DopplerSpec::Hz(v)),
            Raw::Str(s) if s == FROM_MOBILITY => Ok(DopplerSpec::FromMobility),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "doppler must be a number or {FROM_MOBILITY:?}, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapSpec {
    pub delay_ns: f64,
    pub power_db: f64,
    #[serde(default)]
    pub doppler: DopplerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// A named TDL preset such as `tdla30`; `delay_spread_ns` overrides the encoded spread.
    Preset { name: String, delay_spread_ns: Option<f64> },
    Taps { taps: Vec<TapSpec> },
    /// Path to a tap file (`delay_ns power_db doppler_hz` per line).
    TapFile { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    /// Doppler applied to preset taps.
    pub doppler: DopplerSpec,
    pub mimo_correlation: MimoCorrelation,
    pub num_ports: usize,
    /// dBm/Hz; `null` disables noise.
    pub noise_spectral_density: Option<f64>,
    /// Path-loss intercept A (dB).
    pub path_loss_a: f64,
    /// Path-loss slope B (dB per decade of distance).
    pub path_loss_b: f64,
    pub normalize_power: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: ChannelModel::Preset {
                name: "tdla30".into(),
                delay_spread_ns: None,
            },
            doppler: DopplerSpec::FromMobility,
            mimo_correlation: MimoCorrelation::Low,
            num_ports: 1,
            noise_spectral_density: Some(-174.0),
            path_loss_a: 28.0,
            path_loss_b: 22.0,
            normalize_power: true,
        }
    }
}

/// Channel taps with a record of which Dopplers are derived from UE speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedChannel {
    pub scenario: ChannelScenario,
    pub from_mobility: Vec<bool>,
}

impl ResolvedChannel {
    /// Tap Dopplers for a UE moving at `speed` m/s: f_D = v f_c / c for derived taps.
    pub fn dopplers(&self, speed: f64, carrier_frequency_mhz: f64) -> Vec<f64> {
        let fd = max_doppler_hz(speed, carrier_frequency_mhz);
        self.scenario
            .taps
            .iter()
            .zip(&self.from_mobility)
            .map(|(t, derived)| if *derived { fd } else { t.doppler_hz })
            .collect()
    }
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn max_doppler_hz(speed_mps: f64, carrier_frequency_mhz: f64) -> f64 {
    speed_mps * carrier_frequency_mhz * 1e6 / SPEED_OF_LIGHT
}

impl ChannelConfig {
    /// Builds the emulator scenario. Derived Dopplers are left at 0 and flagged.
    pub fn resolve(&self, seed: u64) -> Result<ResolvedChannel> {
        let (taps, from_mobility): (Vec<Tap>, Vec<bool>) = match &self.model {
            ChannelModel::Preset { name, delay_spread_ns } => {
                let preset: TdlPreset = name.parse()?;
                let (fd, derived) = match self.doppler {
                    DopplerSpec::Hz(v) => (v, false),
                    DopplerSpec::FromMobility => (0.0, true),
                };
                channel::load_tdl_preset(preset, *delay_spread_ns)?
                    .into_iter()
                    .map(|t| Ok((Tap::new(t.delay_ns, t.power_db, fd)?, derived)))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .unzip()
            }
            ChannelModel::Taps { taps } => taps
                .iter()
                .map(|t| {
                    let (fd, derived) = match t.doppler {
                        DopplerSpec::Hz(v) => (v, false),
                        DopplerSpec::FromMobility => (0.0, true),
                    };
                    Ok((Tap::new(t.delay_ns, t.power_db, fd)?, derived))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip(),
            ChannelModel::TapFile { path } => {
                let taps = channel::read_tap_file(Path::new(path))?;
                let n = taps.len();
                (taps, vec![false; n])
            }
        };
        if taps.is_empty() {
            return Err(Error::Empty("channel taps"));
        }
        let mut scenario = ChannelScenario::new(taps)?.with_seed(seed).with_noise(self.noise_spectral_density);
        scenario.mimo_correlation = self.mimo_correlation;
        scenario.num_ports = self.num_ports;
        scenario.path_loss_a_db = self.path_loss_a;
        scenario.path_loss_b_db_per_decade = self.path_loss_b;
        if self.normalize_power {
            scenario = scenario.normalized();
        }
        scenario.validate()?;
        Ok(ResolvedChannel {
            scenario,
            from_mobility,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UeSpec {
    pub id: String,
    /// Meters (x, y, z).
    pub initial_position: [f64; 3],
    /// m/s.
    pub speed: f64,
    /// Azimuth, degrees from +x towards +y.
    pub direction: f64,
    /// Degrees above the horizontal plane.
    pub elevation: f64,
    pub mobility_area: MobilityArea,
    pub mobility_logic: MobilityLogic,
    pub traffic_profile: TrafficProfile,
    pub channel: ChannelConfig,
}

impl Default for UeSpec {
    fn default() -> Self {
        Self {
            id: "ue0".into(),
            initial_position: [10.0, 0.0, 1.5],
            speed: 0.0,
            direction: 0.0,
            elevation: 0.0,
            mobility_area: MobilityArea::default(),
            mobility_logic: MobilityLogic::Static,
            traffic_profile: TrafficProfile::PeriodicSsbOnly,
            channel: ChannelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verbosity {
    Off,
    #[default]
    Summary,
    Full,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogVerbosity {
    pub phy: Verbosity,
    pub mac: Verbosity,
    pub rrc: Verbosity,
    pub nas: Verbosity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub radio: RadioConfig,
    pub ues: Vec<UeSpec>,
    /// Seconds.
    pub duration: f64,
    /// Seconds between snapshots.
    pub snapshot_interval: f64,
    pub log_verbosity: LogVerbosity,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "default".into(),
            radio: RadioConfig::default(),
            ues: vec![UeSpec::default()],
            duration: 0.1,
            snapshot_interval: 0.001,
            log_verbosity: LogVerbosity::default(),
            seed: 1,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// ⌈duration / snapshot_interval⌉, tolerant of floating-point noise in the ratio.
    pub fn num_snapshots(&self) -> usize {
        snapshot_count(self.duration, self.snapshot_interval)
    }

    pub fn grid_dims(&self) -> GridDims {
        GridDims {
            num_subcarriers: self.radio.grid_subcarriers,
            num_symbols: self.radio.grid_symbols,
            num_snapshots: self.num_snapshots(),
            subcarrier_spacing_khz: self.radio.subcarrier_spacing,
        }
    }

    /// Channel seed for UE `index`, decorrelated from the experiment seed.
    pub fn channel_seed(&self, index: usize) -> u64 {
        self.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

pub(crate) fn snapshot_count(duration: f64, interval: f64) -> usize {
    if !(duration > 0.0 && interval > 0.0) {
        return 0;
    }
    let ratio = duration / interval;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

/// One failed check: a dotted field path and what is wrong with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

/// Every violated constraint, in field order. An empty list means the spec is runnable.
pub fn validate_spec(spec: &ExperimentSpec) -> Vec<Violation> {
    let mut v = Vec::new();
    validate_radio(&spec.radio, &mut v);

    if !(spec.duration > 0.0 && spec.duration.is_finite()) {
        v.push(Violation::new("duration", format!("must be > 0 s, got {}", spec.duration)));
    }
    if !(spec.snapshot_interval > 0.0 && spec.snapshot_interval.is_finite()) {
        v.push(Violation::new(
            "snapshot_interval",
            format!("must be > 0 s, got {}", spec.snapshot_interval),
        ));
    }
    if spec.duration > 0.0 && spec.snapshot_interval > 0.0 {
        let n = spec.num_snapshots();
        if spec.duration / spec.snapshot_interval < 1.0 - 1e-9 {
            v.push(Violation::new(
                "snapshot_interval",
                format!("duration / snapshot_interval must be >= 1, got {}", spec.duration / spec.snapshot_interval),
            ));
        } else if n > MAX_SNAPSHOTS {
            v.push(Violation::new(
                "snapshot_interval",
                format!("{n} snapshots exceeds the limit of {MAX_SNAPSHOTS}"),
            ));
        }
    }

    if spec.ues.is_empty() {
        v.push(Violation::new("ues", "at least one UE is required"));
    }
    let mut seen = std::collections::HashSet::new();
    for (i, ue) in spec.ues.iter().enumerate() {
        if !seen.insert(ue.id.as_str()) {
            v.push(Violation::new(format!("ues[{}].id", ue.id), format!("duplicate UE id at index {i}")));
        }
        validate_ue(ue, &spec.radio, spec.channel_seed(i), &mut v);
    }
    v
}

fn validate_radio(r: &RadioConfig, v: &mut Vec<Violation>) {
    if r.num_cells == 0 {
        v.push(Violation::new("radio.num_cells", "must be >= 1"));
    }
    if !(r.carrier_frequency > 0.0 && r.carrier_frequency.is_finite()) {
        v.push(Violation::new("radio.carrier_frequency", format!("must be > 0 MHz, got {}", r.carrier_frequency)));
    }
    match r.mode {
        RadioMode::Nr => {
            if !(r.bandwidth > 0.0 && r.bandwidth <= 100.0) {
                v.push(Violation::new("radio.bandwidth", format!("NR bandwidth must be in (0, 100] MHz, got {}", r.bandwidth)));
            }
        }
        RadioMode::Lte => {
            let (lo, hi) = LTE_BANDWIDTH_MHZ;
            if !(r.bandwidth >= lo && r.bandwidth <= hi) {
                v.push(Violation::new(
                    "radio.bandwidth",
                    format!("LTE bandwidth must be in [{lo}, {hi}] MHz, got {}", r.bandwidth),
                ));
            }
        }
    }
    if !SUBCARRIER_SPACINGS_KHZ.contains(&r.subcarrier_spacing) {
        v.push(Violation::new(
            "radio.subcarrier_spacing",
            format!("must be one of {SUBCARRIER_SPACINGS_KHZ:?} kHz, got {}", r.subcarrier_spacing),
        ));
    }
    if !(r.tx_power >= -40.0 && r.tx_power <= 50.0) {
        v.push(Violation::new("radio.tx_power", format!("must be within [-40, 50] dBm, got {}", r.tx_power)));
    }
    if r.num_dl_antennas == 0 {
        v.push(Violation::new("radio.num_dl_antennas", "must be >= 1"));
    }
    if r.num_ul_antennas == 0 {
        v.push(Violation::new("radio.num_ul_antennas", "must be >= 1"));
    }
    if r.max_mcs > 28 {
        v.push(Violation::new("radio.max_mcs", format!("must be within 0..=28, got {}", r.max_mcs)));
    }
    if r.antenna_position.iter().any(|c| !c.is_finite()) {
        v.push(Violation::new("radio.antenna_position", "coordinates must be finite"));
    }
    if r.grid_subcarriers < 2 {
        v.push(Violation::new("radio.grid_subcarriers", "must be >= 2"));
    }
    if r.grid_symbols == 0 {
        v.push(Violation::new("radio.grid_symbols", "must be >= 1"));
    }
    if SUBCARRIER_SPACINGS_KHZ.contains(&r.subcarrier_spacing) && r.bandwidth > 0.0 {
        let occupied_mhz = r.grid_subcarriers as f64 * f64::from(r.subcarrier_spacing) * 1e-3;
        if occupied_mhz > r.bandwidth + 1e-9 {
            v.push(Violation::new(
                "radio.grid_subcarriers",
                format!(
                    "{} subcarriers at {} kHz occupy {occupied_mhz} MHz, more than the {} MHz bandwidth",
                    r.grid_subcarriers, r.subcarrier_spacing, r.bandwidth
                ),
            ));
        }
    }
}

fn validate_ue(ue: &UeSpec, radio: &RadioConfig, seed: u64, v: &mut Vec<Violation>) {
    let p = |f: &str| format!("ues[{}].{f}", ue.id);
    let area = ue.mobility_area;
    if (0..3).any(|i| !(area.min[i] <= area.max[i])) {
        v.push(Violation::new(p("mobility_area"), "min must be <= max on every axis"));
    }
    if !area.contains(ue.initial_position) {
        v.push(Violation::new(
            p("initial_position"),
            format!("UE {} starts at {:?}, outside its mobility area", ue.id, ue.initial_position),
        ));
    }
    if !(ue.speed >= 0.0 && ue.speed.is_finite()) {
        v.push(Violation::new(p("speed"), format!("must be >= 0 m/s, got {}", ue.speed)));
    }
    if !ue.direction.is_finite() || !ue.elevation.is_finite() {
        v.push(Violation::new(p("direction"), "direction and elevation must be finite"));
    }
    match &ue.mobility_logic {
        MobilityLogic::Static if ue.speed != 0.0 => {
            v.push(Violation::new(p("speed"), "static UEs must have speed 0"));
        }
        MobilityLogic::Waypoint { points } => {
            if points.is_empty() {
                v.push(Violation::new(p("mobility_logic"), "waypoint logic needs at least one point"));
            }
            for (i, wp) in points.iter().enumerate() {
                if !area.contains(*wp) {
                    v.push(Violation::new(
                        p("mobility_logic"),
                        format!("waypoint {i} {wp:?} is outside the mobility area"),
                    ));
                }
            }
        }
        _ => {}
    }
    if let TrafficProfile::Cbr { rate_kbps } = ue.traffic_profile {
        if !(rate_kbps > 0.0 && rate_kbps.is_finite()) {
            v.push(Violation::new(p("traffic_profile"), format!("cbr rate must be > 0 kbps, got {rate_kbps}")));
        }
    }
    let ch = &ue.channel;
    if ch.num_ports == 0 || ch.num_ports as u32 > radio.num_dl_antennas.max(1) {
        v.push(Violation::new(
            p("channel.num_ports"),
            format!("must be within 1..={} (radio.num_dl_antennas), got {}", radio.num_dl_antennas.max(1), ch.num_ports),
        ));
    }
    if let Some(n0) = ch.noise_spectral_density {
        if !n0.is_finite() {
            v.push(Violation::new(p("channel.noise_spectral_density"), "must be finite or null"));
        }
    }
    if !ch.path_loss_a.is_finite() || !ch.path_loss_b.is_finite() {
        v.push(Violation::new(p("channel.path_loss_a"), "path-loss coefficients must be finite"));
    }
    if let DopplerSpec::Hz(f) = ch.doppler {
        if !(f >= 0.0 && f.is_finite()) {
            v.push(Violation::new(p("channel.doppler"), format!("must be >= 0 Hz, got {f}")));
        }
    }
    if let Err(e) = ch.resolve(seed) {
        v.push(Violation::new(p("channel.model"), e.to_string()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(v: &[Violation]) -> Vec<&str> {
        v.iter().map(|x| x.field.as_str()).collect()
    }

    #[test]
    fn default_spec_is_valid() {
        let spec = ExperimentSpec::default();
        assert_eq!(validate_spec(&spec), vec![]);
        assert_eq!(spec.num_snapshots(), 100);
    }

    #[test]
    fn bad_subcarrier_spacing_named() {
        let mut spec = ExperimentSpec::default();
        spec.radio.subcarrier_spacing = 17;
        assert!(fields(&validate_spec(&spec)).contains(&"radio.subcarrier_spacing"));
    }

    #[test]
    fn initial_position_outside_area_names_ue() {
        let mut spec = ExperimentSpec::default();
        spec.ues[0].id = "robot-7".into();
        spec.ues[0].initial_position = [500.0, 0.0, 1.5];
        let v = validate_spec(&spec);
        assert_eq!(fields(&v), vec!["ues[robot-7].initial_position"]);
        assert!(v[0].reason.contains("robot-7"));
    }

    #[test]
    fn range_checks() {
        let mut spec = ExperimentSpec::default();
        spec.radio.bandwidth = 120.0;
        spec.radio.tx_power = 60.0;
        spec.radio.max_mcs = 29;
        spec.duration = 0.0;
        spec.ues[0].speed = 2.0; // static with speed
        let f = validate_spec(&spec);
        let names = fields(&f);
        for want in ["radio.bandwidth", "radio.tx_power", "radio.max_mcs", "duration", "ues[ue0].speed"] {
            assert!(names.contains(&want), "missing {want} in {names:?}");
        }
    }

    #[test]
    fn lte_bandwidths() {
        let mut spec = ExperimentSpec::default();
        spec.radio.mode = RadioMode::Lte;
        spec.radio.bandwidth = 15.0;
        assert!(validate_spec(&spec).is_empty());
        spec.radio.bandwidth = 25.0;
        assert!(fields(&validate_spec(&spec)).contains(&"radio.bandwidth"));
    }

    #[test]
    fn grid_must_fit_bandwidth() {
        let mut spec = ExperimentSpec::default();
        spec.radio.bandwidth = 5.0;
        assert!(fields(&validate_spec(&spec)).contains(&"radio.grid_subcarriers"));
    }

    #[test]
    fn interval_longer_than_duration_rejected() {
        let mut spec = ExperimentSpec::default();
        spec.duration = 0.001;
        spec.snapshot_interval = 0.002;
        assert!(fields(&validate_spec(&spec)).contains(&"snapshot_interval"));
    }

    #[test]
    fn unknown_preset_reported() {
        let mut spec = ExperimentSpec::default();
        spec.ues[0].channel.model = ChannelModel::Preset { name: "tdlz9".into(), delay_spread_ns: None };
        assert!(fields(&validate_spec(&spec)).contains(&"ues[ue0].channel.model"));
    }

    #[test]
    fn validation_is_idempotent() {
        let mut spec = ExperimentSpec::default();
        spec.radio.subcarrier_spacing = 17;
        let before = spec.clone();
        assert_eq!(validate_spec(&spec), validate_spec(&spec));
        assert_eq!(spec, before);
    }

    #[test]
    fn snapshot_count_rounding() {
        assert_eq!(snapshot_count(1.0, 0.1), 10);
        assert_eq!(snapshot_count(0.3, 0.1), 3);
        assert_eq!(snapshot_count(0.7, 0.1), 7);
        assert_eq!(snapshot_count(1.05, 0.1), 11);
        assert_eq!(snapshot_count(1.0, 0.5), 2);
    }

    #[test]
    fn json_round_trip_and_doppler_sentinel() {
        let mut spec = ExperimentSpec::default();
        spec.ues[0].channel.model = ChannelModel::Taps {
            taps: vec![
                TapSpec { delay_ns: 0.0, power_db: 0.0, doppler: DopplerSpec::Hz(12.5) },
                TapSpec { delay_ns: 50.0, power_db: -3.0, doppler: DopplerSpec::FromMobility },
            ],
        };
        spec.ues[0].mobility_logic = MobilityLogic::Waypoint { points: vec![[1.0, 2.0, 1.5]] };
        spec.ues[0].speed = 1.0;
        spec.ues[0].traffic_profile = TrafficProfile::Cbr { rate_kbps: 500.0 };
        spec.radio.antenna_type = AntennaType::Sector { azimuth: 30.0 };
        let text = spec.to_json_pretty();
        assert!(text.contains("\"from-mobility\""));
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), spec);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let spec = ExperimentSpec::from_json(r#"{"name": "x", "ues": [{"id": "a"}]}"#).unwrap();
        assert_eq!(spec.radio, RadioConfig::default());
        assert_eq!(spec.ues[0].id, "a");
        assert!(ExperimentSpec::from_json(r#"{"nope": 1}"#).is_err());
    }

    #[test]
    fn resolve_marks_mobility_dopplers() {
        let cfg = ChannelConfig::default();
        let r = cfg.resolve(3).unwrap();
        assert_eq!(r.scenario.taps.len(), 23);
        assert!(r.from_mobility.iter().all(|d| *d));
        assert!(r.scenario.normalize_power);
        // 3 m/s at 3.5 GHz.
        let fd = r.dopplers(3.0, 3500.0);
        assert!((fd[0] - 3.0 * 3.5e9 / SPEED_OF_LIGHT).abs() < 1e-9);
    }

    #[test]
    fn sector_gain() {
        let s = AntennaType::Sector { azimuth: 0.0 };
        assert_eq!(s.gain_dbi(30.0), AntennaType::SECTOR_GAIN_DBI);
        assert_eq!(s.gain_dbi(-50.0), AntennaType::SECTOR_GAIN_DBI);
        assert_eq!(s.gain_dbi(180.0), AntennaType::SECTOR_BACK_DBI);
        assert_eq!(AntennaType::Isotropic.gain_dbi(123.0), 0.0);
    }
}
