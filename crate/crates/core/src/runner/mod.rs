//! End-to-end run loop: mobility, path loss and Doppler, channel emulation,
//! IQ capture, KPIs and event markers, plus the on-disk dataset format.

mod dataset;
mod kpi;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{path_loss_db, ChannelEmulator};
use crate::scenario::{distance_to_antenna, trajectory, validate_spec, ExperimentSpec, LogVerbosity, TrajectorySample, UeSpec, Verbosity};
use crate::waveform::{generate_reference, ReferenceSignal};
use crate::{Error, GridDims, IqTensor, Result, FORMAT_VERSION};

pub use dataset::{iq_digest, read_dataset, read_iq_bin, write_dataset, IQ_FORMAT};
pub use kpi::{compute_kpis, kpi_formula_ids, mcs_for_snr, Kpis, SnapshotContext, MAX_SPECTRAL_EFFICIENCY};

/// One KPI row. Columns disabled by `log_verbosity` are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub n: usize,
    pub t: f64,
    pub rsrp_dbm: Option<f64>,
    pub rsrq_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub timing_advance_s: Option<f64>,
    pub throughput_kbps: Option<f64>,
    pub dl_mcs: Option<u8>,
    pub rx_tx_latency_slots: Option<u32>,
}

impl KpiRecord {
    pub fn gated(n: usize, t: f64, k: &Kpis, latency_slots: u32, v: LogVerbosity) -> Self {
        let phy = v.phy >= Verbosity::Summary;
        let mac = v.mac >= Verbosity::Summary;
        Self {
            n,
            t,
            rsrp_dbm: phy.then_some(k.rsrp_dbm),
            rsrq_db: phy.then_some(k.rsrq_db),
            snr_db: phy.then_some(k.snr_db),
            timing_advance_s: (v.phy == Verbosity::Full).then_some(k.timing_advance_s),
            throughput_kbps: mac.then_some(k.throughput_kbps),
            dl_mcs: mac.then_some(k.dl_mcs),
            rx_tx_latency_slots: (v.mac == Verbosity::Full).then_some(latency_slots),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Register,
    PduSessionSetup,
    RrcReconfig,
    Release,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Register => "REGISTER",
            EventKind::PduSessionSetup => "PDU_SESSION_SETUP",
            EventKind::RrcReconfig => "RRC_RECONFIG",
            EventKind::Release => "RELEASE",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "REGISTER" => EventKind::Register,
            "PDU_SESSION_SETUP" => EventKind::PduSessionSetup,
            "RRC_RECONFIG" => EventKind::RrcReconfig,
            "RELEASE" => EventKind::Release,
            _ => return Err(Error::invalid("event kind", format!("unknown event {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digests {
    /// SHA-256 over every UE's iq.bin, concatenated in UE order.
    pub iq_sha256: String,
    /// SHA-256 per file, keyed by path relative to the dataset root.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub generator: String,
    pub name: String,
    pub seed: u64,
    pub spec: ExperimentSpec,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub dims: GridDims,
    pub iq_format: String,
    /// UE ids in directory order: `ue0`, `ue1`, ...
    pub ues: Vec<String>,
    pub kpi_formula_ids: BTreeMap<String, String>,
    /// Always-empty CSV columns kept for schema stability.
    pub reserved_columns: Vec<String>,
    pub digests: Digests,
}

impl Manifest {
    /// Snapshot n is captured at (n + 1) · snapshot_interval.
    pub fn snapshot_times(&self) -> Vec<f64> {
        snapshot_times(self.dims.num_snapshots, self.spec.snapshot_interval)
    }
}

pub fn snapshot_times(count: usize, interval: f64) -> Vec<f64> {
    (1..=count).map(|i| i as f64 * interval).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeDataset {
    pub id: String,
    /// Port-0 received grid at f32 precision, as stored in iq.bin.
    pub iq: IqTensor,
    pub kpis: Vec<KpiRecord>,
    pub mobility: Vec<TrajectorySample>,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunDataset {
    pub manifest: Manifest,
    pub ues: Vec<UeDataset>,
}

impl RunDataset {
    pub fn reference(&self) -> Result<ReferenceSignal> {
        generate_reference(self.manifest.seed, self.manifest.dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunDataset> {
    run_experiment_with_progress(spec, &|_| {})
}

/// Runs every UE (in parallel, each sequentially over its snapshots) and
/// reports progress as total completed UE-snapshots.
pub fn run_experiment_with_progress(spec: &ExperimentSpec, progress: &(dyn Fn(Progress) + Sync)) -> Result<RunDataset> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(Error::InvalidSpec(violations));
    }
    let started = unix_now();
    let dims = spec.grid_dims();
    let reference = generate_reference(spec.seed, dims)?;
    let total = dims.num_snapshots * spec.ues.len();
    let done = AtomicUsize::new(0);
    let tick = || {
        let completed = done.fetch_add(1, Ordering::Relaxed) + 1;
        progress(Progress { completed, total });
    };

    let results: Vec<Result<UeDataset>> = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .ues
            .iter()
            .enumerate()
            .map(|(i, ue)| {
                let reference = &reference;
                let tick = &tick;
                scope.spawn(move || run_ue(spec, i, ue, reference, dims, tick))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("UE worker panicked")).collect()
    });
    let ues = results.into_iter().collect::<Result<Vec<_>>>()?;

    let iq_sha256 = iq_digest(ues.iter().map(|u| &u.iq));
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        generator: concat!("nextsense-core ", env!("CARGO_PKG_VERSION")).to_string(),
        name: spec.name.clone(),
        seed: spec.seed,
        spec: spec.clone(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        dims,
        iq_format: IQ_FORMAT.to_string(),
        ues: ues.iter().map(|u| u.id.clone()).collect(),
        kpi_formula_ids: kpi_formula_ids(),
        reserved_columns: vec!["dl_bler".into(), "dl_rounds".into()],
        digests: Digests {
            iq_sha256,
            files: BTreeMap::new(),
        },
    };
    Ok(RunDataset { manifest, ues })
}

fn run_ue(spec: &ExperimentSpec, index: usize, ue: &UeSpec, reference: &ReferenceSignal, dims: GridDims, tick: &(dyn Fn() + Sync)) -> Result<UeDataset> {
    let radio = &spec.radio;
    let resolved = ue.channel.resolve(spec.channel_seed(index))?;
    let mut emulator = ChannelEmulator::new(resolved.scenario.clone(), dims)?;
    let scs_hz = dims.subcarrier_spacing_hz();
    let noise_power_dbm = resolved.scenario.noise_spectral_density_dbm_hz.map(|_| resolved.scenario.noise_power_dbm(scs_hz));
    let path = trajectory(ue, spec.duration, spec.snapshot_interval);
    let verbosity = spec.log_verbosity;

    let mut iq = IqTensor::with_capacity(dims.num_subcarriers, dims.num_symbols, dims.num_snapshots, dims.subcarrier_spacing_khz);
    let mut kpis = Vec::with_capacity(dims.num_snapshots);
    let mut events = Vec::new();
    let detail = |p: [f64; 3], extra: String| {
        let mut d = format!("ue={}", ue.id);
        if verbosity.nas == Verbosity::Full || verbosity.rrc == Verbosity::Full {
            d.push_str(&format!(" pos={},{},{}", p[0], p[1], p[2]));
        }
        if !extra.is_empty() {
            d.push(' ');
            d.push_str(&extra);
        }
        d
    };
    if verbosity.nas >= Verbosity::Summary {
        events.push(EventRecord { t: 0.0, kind: EventKind::Register, detail: detail(ue.initial_position, String::new()) });
        events.push(EventRecord { t: 0.0, kind: EventKind::PduSessionSetup, detail: detail(ue.initial_position, String::new()) });
    }

    let mut last_mcs = None;
    for (n, sample) in path.iter().skip(1).enumerate().take(dims.num_snapshots) {
        emulator.set_dopplers(&resolved.dopplers(sample.speed, radio.carrier_frequency))?;
        let d = distance_to_antenna(sample.position, radio);
        let pl = path_loss_db(ue.channel.path_loss_a, ue.channel.path_loss_b, d)?;
        let a = radio.antenna_position;
        let azimuth = (sample.position[1] - a[1]).atan2(sample.position[0] - a[0]).to_degrees();
        let gain_db = radio.tx_power + radio.antenna_type.gain_dbi(azimuth) - pl;
        let out = emulator.step(reference, sample.t, gain_db)?;

        let k = compute_kpis(&SnapshotContext {
            response: &out.response[0],
            received: &out.received[0],
            reference,
            noise_power_dbm,
            subcarrier_spacing_hz: scs_hz,
            radio,
            traffic: ue.traffic_profile,
        })?;
        let stored: Vec<Complex64> = out.received[0]
            .iter()
            .map(|v| Complex64::new(f64::from(v.re as f32), f64::from(v.im as f32)))
            .collect();
        iq.push_snapshot(&stored)?;
        kpis.push(KpiRecord::gated(n, sample.t, &k, radio.rx_tx_latency, verbosity));

        let mcs_changed = last_mcs != Some(k.dl_mcs);
        if (n == 0 && verbosity.rrc >= Verbosity::Summary) || (n > 0 && mcs_changed && verbosity.rrc == Verbosity::Full) {
            events.push(EventRecord { t: sample.t, kind: EventKind::RrcReconfig, detail: detail(sample.position, format!("dl_mcs={}", k.dl_mcs)) });
        }
        last_mcs = Some(k.dl_mcs);
        tick();
    }

    if verbosity.nas >= Verbosity::Summary {
        let last = path.last().expect("trajectory has t=0");
        events.push(EventRecord { t: last.t, kind: EventKind::Release, detail: detail(last.position, String::new()) });
    }

    Ok(UeDataset {
        id: ue.id.clone(),
        iq,
        kpis,
        mobility: path,
        events,
    })
}
