//! Per-snapshot KPI conventions. Each formula has a stable id recorded in the manifest.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::estimation::{impulse_response, power_delay_profile, FreqChannelEstimate};
use crate::scenario::{RadioConfig, TrafficProfile};
use crate::waveform::ReferenceSignal;
use crate::Result;

/// Highest spectral efficiency (bit/s/Hz) credited to the throughput estimate:
/// 256QAM at code rate 948/1024.
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 7.4063;

const MCS_TABLE: &str = include_str!("../../data/mcs_snr_table.csv");

pub fn kpi_formula_ids() -> BTreeMap<String, String> {
    [
        ("rsrp", "rsrp.v1: tx_power + antenna_gain - path_loss + 10*log10(mean_k |H(k)|^2)"),
        ("snr", "snr.v1: rsrp - (N0 + 10*log10(subcarrier_spacing)); +inf (null) when noise is disabled"),
        ("rsrq", "rsrq.v1: 10*log10(snr / (12 * (1 + snr))), snr linear"),
        ("timing_advance", "ta.v1: argmax_l |IDFT_k(mean_s Y/X)|^2 * bin_duration"),
        (
            "throughput",
            "tput.v1: bandwidth * min(log2(1 + snr), 7.4063) kbps; cbr caps at rate; none gives 0",
        ),
        ("dl_mcs", "mcs.v1: highest index in mcs_snr_table with min_snr_db <= snr, capped at max_mcs"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn mcs_thresholds() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        MCS_TABLE
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("mcs"))
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (_, snr) = l.split_once(',').expect("mcs table rows are `index,snr`");
                snr.trim().parse().expect("mcs table thresholds are numeric")
            })
            .collect()
    })
}

/// DL MCS for `snr_db`, capped at `max_mcs`.
pub fn mcs_for_snr(snr_db: f64, max_mcs: u8) -> u8 {
    let idx = mcs_thresholds().iter().rposition(|th| *th <= snr_db).unwrap_or(0);
    (idx as u8).min(max_mcs)
}

/// Everything a KPI needs about one snapshot of one UE.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotContext<'a> {
    /// Port-0 frequency response including transmit power, antenna gain and path loss.
    pub response: &'a [Complex64],
    /// Port-0 received grid, symbol-major.
    pub received: &'a [Complex64],
    pub reference: &'a ReferenceSignal,
    /// Noise power per resource element; `None` when noise is disabled.
    pub noise_power_dbm: Option<f64>,
    pub subcarrier_spacing_hz: f64,
    pub radio: &'a RadioConfig,
    pub traffic: TrafficProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    /// `+inf` when noise is disabled.
    pub snr_db: f64,
    pub timing_advance_s: f64,
    pub throughput_kbps: f64,
    pub dl_mcs: u8,
}

pub fn compute_kpis(ctx: &SnapshotContext<'_>) -> Result<Kpis> {
    let k = ctx.response.len();
    let mean_h2 = ctx.response.iter().map(Complex64::norm_sqr).sum::<f64>() / k as f64;
    let rsrp_dbm = 10.0 * mean_h2.log10();
    let snr_db = match ctx.noise_power_dbm {
        Some(n) => rsrp_dbm - n,
        None => f64::INFINITY,
    };
    let snr = 10f64.powf(snr_db / 10.0);
    let rsrq_db = if snr.is_infinite() {
        -10.0 * 12f64.log10()
    } else {
        10.0 * (snr / (12.0 * (1.0 + snr))).log10()
    };

    let s_count = ctx.reference.num_symbols();
    let mut h_hat = vec![Complex64::new(0.0, 0.0); k];
    for s in 0..s_count {
        for (kk, h) in h_hat.iter_mut().enumerate() {
            *h += ctx.received[s * k + kk] / ctx.reference.get(kk, s);
        }
    }
    h_hat.iter_mut().for_each(|h| *h /= s_count as f64);
    let est = FreqChannelEstimate::from_snapshots(ctx.subcarrier_spacing_hz, &[h_hat])?;
    let pdp = power_delay_profile(&impulse_response(&est)?)?;
    let strongest = pdp
        .power
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if *p > pdp.power[best] { i } else { best });
    let timing_advance_s = pdp.delay_of(strongest);

    let shannon_kbps = ctx.radio.bandwidth * 1e3 * (1.0 + snr).log2().min(MAX_SPECTRAL_EFFICIENCY);
    let throughput_kbps = match ctx.traffic {
        TrafficProfile::None => 0.0,
        TrafficProfile::PeriodicSsbOnly => shannon_kbps,
        TrafficProfile::Cbr { rate_kbps } => shannon_kbps.min(rate_kbps),
    };

    Ok(Kpis {
        rsrp_dbm,
        rsrq_db,
        snr_db,
        timing_advance_s,
        throughput_kbps,
        dl_mcs: mcs_for_snr(snr_db, ctx.radio.max_mcs),
    })
}
