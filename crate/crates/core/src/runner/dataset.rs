//! Dataset directory layout:
//!
//! ```text
//! manifest.json
//! ue<u>/iq.bin        f32 LE, I then Q, snapshot-major, then symbol, then subcarrier
//! ue<u>/kpis.csv
//! ue<u>/mobility.csv  one more row than kpis.csv (t = 0 included)
//! ue<u>/events.log    t<TAB>KIND<TAB>detail
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::{EventRecord, KpiRecord, Manifest, RunDataset, UeDataset};
use crate::scenario::TrajectorySample;
use crate::{Error, GridDims, IqTensor, Result};

pub const IQ_FORMAT: &str = "f32le interleaved IQ; snapshot-major, then symbol, then subcarrier";

const KPI_COLUMNS: [&str; 11] = [
    "n",
    "t_s",
    "rsrp_dbm",
    "rsrq_db",
    "snr_db",
    "timing_advance_s",
    "throughput_kbps",
    "dl_mcs",
    "dl_bler",
    "dl_rounds",
    "rx_tx_latency_slots",
];

fn iq_bytes(t: &IqTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(t.len() * 8);
    for v in t.as_slice() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

/// SHA-256 (hex) of the concatenated iq.bin payloads.
pub fn iq_digest<'a>(tensors: impl IntoIterator<Item = &'a IqTensor>) -> String {
    let mut h = Sha256::new();
    for t in tensors {
        h.update(iq_bytes(t));
    }
    hex::encode(h.finalize())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn ue_dir(index: usize) -> String {
    format!("ue{index}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn kpi_csv(rows: &[KpiRecord]) -> String {
    let mut out = KPI_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},,,{}",
            r.n,
            r.t,
            opt(r.rsrp_dbm),
            opt(r.rsrq_db),
            opt(r.snr_db),
            opt(r.timing_advance_s),
            opt(r.throughput_kbps),
            opt(r.dl_mcs),
            opt(r.rx_tx_latency_slots),
        );
    }
    out
}

fn mobility_csv(rows: &[TrajectorySample]) -> String {
    let mut out = String::from("t_s,x_m,y_m,z_m,speed_mps\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.t, r.position[0], r.position[1], r.position[2], r.speed);
    }
    out
}

fn events_log(rows: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}", r.t, r.kind, r.detail);
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the dataset and returns the IQ digest recorded in the manifest.
pub fn write_dataset(ds: &RunDataset, dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    let mut all_iq = Sha256::new();
    for (u, ue) in ds.ues.iter().enumerate() {
        let sub = dir.join(ue_dir(u));
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let iq = iq_bytes(&ue.iq);
        all_iq.update(&iq);
        let payloads: [(&str, Vec<u8>); 4] = [
            ("iq.bin", iq),
            ("kpis.csv", kpi_csv(&ue.kpis).into_bytes()),
            ("mobility.csv", mobility_csv(&ue.mobility).into_bytes()),
            ("events.log", events_log(&ue.events).into_bytes()),
        ];
        for (name, bytes) in payloads {
            write_file(&sub.join(name), &bytes)?;
            files.insert(format!("{}/{name}", ue_dir(u)), sha256_hex(&bytes));
        }
    }
    let mut manifest = ds.manifest.clone();
    manifest.digests.iq_sha256 = hex::encode(all_iq.finalize());
    manifest.digests.files = files;
    let text = serde_json::to_string_pretty(&manifest)?;
    write_file(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest.digests.iq_sha256)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn utf8(path: &Path, bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        reason: "not valid UTF-8".into(),
    })
}

/// Decodes an iq.bin payload of the given dimensions.
pub fn read_iq_bin(path: &Path, bytes: &[u8], dims: GridDims) -> Result<IqTensor> {
    let want = dims.len() * 8;
    if bytes.len() != want {
        return Err(Error::integrity(path, format!("expected {want} bytes for {}, found {}", dims.shape_string(), bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(f64::from(re), f64::from(im))
        })
        .collect();
    IqTensor::from_vec(dims, data)
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        reason: format!("line {line}: {}", reason.into()),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: Option<&&str>) -> Result<Option<T>> {
    match raw.map(|s| s.trim()) {
        None | Some("") => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|_| parse_err(path, line, format!("{name}: not a number: {s:?}"))),
    }
}

fn parse_kpis(path: &Path, text: &str) -> Result<Vec<KpiRecord>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| parse_err(path, 1, "missing header"))?.split(',').collect();
    if header != KPI_COLUMNS {
        return Err(parse_err(path, 1, format!("unexpected header {header:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let ln = i + 2;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != KPI_COLUMNS.len() {
                return Err(parse_err(path, ln, format!("expected {} columns, found {}", KPI_COLUMNS.len(), cols.len())));
            }
            let get = |i: usize| cols.get(i);
            Ok(KpiRecord {
                n: field(path, ln, "n", get(0))?.ok_or_else(|| parse_err(path, ln, "missing n"))?,
                t: field(path, ln, "t_s", get(1))?.ok_or_else(|| parse_err(path, ln, "missing t_s"))?,
                rsrp_dbm: field(path, ln, "rsrp_dbm", get(2))?,
                rsrq_db: field(path, ln, "rsrq_db", get(3))?,
                snr_db: field(path, ln, "snr_db", get(4))?,
                timing_advance_s: field(path, ln, "timing_advance_s", get(5))?,
                throughput_kbps: field(path, ln, "throughput_kbps", get(6))?,
                dl_mcs: field(path, ln, "dl_mcs", get(7))?,
                rx_tx_latency_slots: field(path, ln, "rx_tx_latency_slots", get(10))?,
            })
        })
        .collect()
}

fn parse_mobility(path: &Path, text: &str) -> Result<Vec<TrajectorySample>> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, line)| {
            let ln = i + 1;
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| parse_err(path, ln, format!("not a number: {s:?}"))))
                .collect::<Result<_>>()?;
            if v.len() != 5 {
                return Err(parse_err(path, ln, format!("expected 5 columns, found {}", v.len())));
            }
            Ok(TrajectorySample {
                t: v[0],
                position: [v[1], v[2], v[3]],
                speed: v[4],
            })
        })
        .collect()
}

fn parse_events(path: &Path, text: &str) -> Result<Vec<EventRecord>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let ln = i + 1;
            let mut parts = line.splitn(3, '\t');
            let t = parts.next().unwrap_or_default();
            let kind = parts.next().ok_or_else(|| parse_err(path, ln, "missing event kind"))?;
            Ok(EventRecord {
                t: t.parse().map_err(|_| parse_err(path, ln, format!("bad time {t:?}")))?,
                kind: kind.parse().map_err(|e: Error| parse_err(path, ln, e.to_string()))?,
                detail: parts.next().unwrap_or_default().to_string(),
            })
        })
        .collect()
}

/// Loads a dataset written by [`write_dataset`], verifying every digest and
/// the snapshot alignment between IQ, KPI and mobility files.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<RunDataset> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&utf8(&manifest_path, read_file(&manifest_path)?)?).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        reason: e.to_string(),
    })?;
    let dims = manifest.dims;
    let mut all_iq = Sha256::new();
    let mut ues = Vec::with_capacity(manifest.ues.len());
    for (u, id) in manifest.ues.iter().enumerate() {
        let load = |name: &str| -> Result<(PathBuf, Vec<u8>)> {
            let rel = format!("{}/{name}", ue_dir(u));
            let path = dir.join(&rel);
            let bytes = read_file(&path)?;
            match manifest.digests.files.get(&rel) {
                Some(want) if *want == sha256_hex(&bytes) => Ok((path, bytes)),
                Some(_) => Err(Error::integrity(&path, "SHA-256 does not match the manifest")),
                None => Err(Error::integrity(&path, "file is not listed in the manifest")),
            }
        };
        let iq_path = dir.join(format!("{}/iq.bin", ue_dir(u)));
        let iq_raw = read_file(&iq_path)?;
        all_iq.update(&iq_raw);
        // Length first so truncation is reported as such, then the digest.
        let iq = read_iq_bin(&iq_path, &iq_raw, dims)?;
        load("iq.bin")?;
        let (kp, kb) = load("kpis.csv")?;
        let kpis = parse_kpis(&kp, &utf8(&kp, kb)?)?;
        let (mp, mb) = load("mobility.csv")?;
        let mobility = parse_mobility(&mp, &utf8(&mp, mb)?)?;
        let (ep, eb) = load("events.log")?;
        let events = parse_events(&ep, &utf8(&ep, eb)?)?;
        if kpis.len() != dims.num_snapshots {
            return Err(Error::integrity(&kp, format!("{} rows for {} snapshots", kpis.len(), dims.num_snapshots)));
        }
        if mobility.len() != dims.num_snapshots + 1 {
            return Err(Error::integrity(&mp, format!("{} rows for {} snapshots (expected one more)", mobility.len(), dims.num_snapshots)));
        }
        ues.push(UeDataset {
            id: id.clone(),
            iq,
            kpis,
            mobility,
            events,
        });
    }
    if hex::encode(all_iq.finalize()) != manifest.digests.iq_sha256 {
        return Err(Error::integrity(&manifest_path, "iq_sha256 does not match the iq.bin payloads"));
    }
    Ok(RunDataset { manifest, ues })
}
