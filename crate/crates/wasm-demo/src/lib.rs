//! Browser bindings for three engine operations. Each takes and returns JSON
//! text so the page stays framework-free; the plain functions are the
//! natively tested surface and the `#[wasm_bindgen]` wrappers only map errors.

use nextsense_core::channel::{apply_channel, format_tap_file, frequency_response, parse_tap_file, uniform_times, ChannelScenario};
use nextsense_core::estimation::{reconstruct_taps, TapSelectionPolicy};
use nextsense_core::scenario::{preview_document, validate_spec, ExperimentSpec};
use nextsense_core::validation::waterfall;
use nextsense_core::waveform::generate_reference;
use nextsense_core::GridDims;
use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct ResponseDoc {
    subcarrier_spacing_khz: u32,
    db: Vec<f64>,
}

/// |H(k)|² in dB for a static tap table, after power normalization.
pub fn channel_response(tap_text: &str, num_subcarriers: usize, subcarrier_spacing_khz: u32) -> Result<String, String> {
    let taps = parse_tap_file(tap_text).map_err(err)?;
    let scenario = ChannelScenario::new(taps).map_err(err)?.normalized();
    let dims = GridDims::new(num_subcarriers, 1, 1, subcarrier_spacing_khz).map_err(err)?;
    let h = frequency_response(&scenario, &vec![Complex64::new(1.0, 0.0); scenario.taps.len()], dims).map_err(err)?;
    let db = h.iter().map(|v| (10.0 * v.norm_sqr().log10()).max(-120.0)).collect();
    serde_json::to_string(&ResponseDoc { subcarrier_spacing_khz, db }).map_err(err)
}

#[derive(Serialize)]
struct ReconstructDoc {
    bin_duration_ns: f64,
    recovered: String,
    waterfall_db: Vec<Vec<f64>>,
}

/// Plays the taps over the reference grid for `num_snapshots` snapshots and
/// recovers a tap table from the received grid alone.
pub fn reconstruct(tap_text: &str, seed: u64, num_snapshots: usize, interval_ms: f64) -> Result<String, String> {
    let taps = parse_tap_file(tap_text).map_err(err)?;
    let scenario = ChannelScenario::new(taps).map_err(err)?.normalized().with_seed(seed);
    let dims = GridDims::new(120, 2, num_snapshots, 30).map_err(err)?;
    let x = generate_reference(seed, dims).map_err(err)?;
    let times = uniform_times(num_snapshots, interval_ms * 1e-3);
    let y = apply_channel(&x, &scenario, &times, 30).map_err(err)?;
    let recovered = reconstruct_taps(&y, &x, &times, TapSelectionPolicy::default()).map_err(err)?;
    let w = waterfall(&y);
    let waterfall_db = (0..w.num_subcarriers).map(|k| w.row(k).to_vec()).collect();
    serde_json::to_string(&ReconstructDoc {
        bin_duration_ns: dims.bin_duration() * 1e9,
        recovered: format_tap_file(&recovered),
        waterfall_db,
    })
    .map_err(err)
}

/// Violations as `{"violations": [...]}`, or the preview document of a valid spec.
pub fn preview(spec_json: &str) -> Result<String, String> {
    let spec = ExperimentSpec::from_json(spec_json).map_err(err)?;
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        return serde_json::to_string(&serde_json::json!({ "violations": violations })).map_err(err);
    }
    serde_json::to_string(&preview_document(&spec)).map_err(err)
}

/// Default experiment document, for seeding the page's editor.
pub fn default_spec() -> String {
    ExperimentSpec::default().to_json_pretty()
}

#[wasm_bindgen(js_name = channelResponse)]
pub fn channel_response_js(tap_text: &str, num_subcarriers: usize, subcarrier_spacing_khz: u32) -> Result<String, JsError> {
    channel_response(tap_text, num_subcarriers, subcarrier_spacing_khz).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = reconstruct)]
pub fn reconstruct_js(tap_text: &str, seed: u64, num_snapshots: usize, interval_ms: f64) -> Result<String, JsError> {
    reconstruct(tap_text, seed, num_snapshots, interval_ms).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = preview)]
pub fn preview_js(spec_json: &str) -> Result<String, JsError> {
    preview(spec_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = defaultSpec)]
pub fn default_spec_js() -> String {
    default_spec()
}
