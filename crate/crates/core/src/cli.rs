//! Configuration layering, CSV output and run manifests for the `cfidd`
//! binary.
//!
//! Configuration files are flat `key = value` text with dotted keys and
//! `#` comment lines. Resolution starts from the built-in defaults,
//! applies the file, then command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::detectors::{DetectionOrder, DetectorKind};
use crate::harness::{sort_records, BerRecord, SimConfig};
use crate::{Error, Result};

/// Every configuration key, in emission order.
pub const KEYS: &[&str] = &[
    "channel.side",
    "channel.d0",
    "channel.d1",
    "channel.h_ap",
    "channel.h_ue",
    "channel.carrier_mhz",
    "channel.shadowing_db",
    "channel.aps",
    "channel.ues",
    "channel.freeze_geometry",
    "code.n",
    "code.m",
    "code.seed",
    "code.alist",
    "detect.detectors",
    "detect.order",
    "detect.threshold",
    "detect.candidates",
    "idd.iterations",
    "idd.ldpc_max_iter",
    "idd.ldpc_early_exit",
    "idd.warm_start",
    "idd.early_stop",
    "idd.interleaver_seed",
    "sim.snr_db",
    "sim.realizations",
    "sim.frames_per_realization",
    "sim.seed",
    "sim.signal_power",
    "sim.uncoded",
    "sim.workers",
];

pub const CSV_HEADER: &str = "detector,snr_db,idd_iters,L,K,bits,bit_errors,ber,frames,frame_errors,fer";

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Flag,
}

/// A key set both in the file and on the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Override {
    pub key: String,
    pub file_value: String,
    pub flag_value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: SimConfig,
    pub sources: BTreeMap<String, Source>,
    pub overrides: Vec<Override>,
}

fn parse_num<V: std::str::FromStr>(value: &str, expected: &str) -> std::result::Result<V, String> {
    value.trim().parse().map_err(|_| format!("expected {expected}, got '{value}'"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{value}'")),
    }
}

/// Parses `START:STEP:END` (inclusive) or a comma-separated list of dB
/// values.
pub fn parse_snr_grid(value: &str) -> std::result::Result<Vec<f64>, String> {
    let value = value.trim();
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| parse_num::<f64>(p, "a number"))
            .collect::<std::result::Result<_, _>>()?;
        let (start, step, end) = (nums[0], nums[1], nums[2]);
        if !(start.is_finite() && step.is_finite() && end.is_finite()) {
            return Err(format!("range bounds must be finite, got '{value}'"));
        }
        if step == 0.0 || (end - start) * step < 0.0 {
            return Err(format!("step {step} never reaches {end} from {start}"));
        }
        let span = (end - start) / step;
        let n = (span + 1e-9).floor() as usize;
        if n > 10_000 {
            return Err(format!("range '{value}' has more than 10000 points"));
        }
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    if parts.len() != 1 {
        return Err(format!("expected START:STEP:END or a comma-separated list, got '{value}'"));
    }
    value
        .split(',')
        .map(|p| {
            let v: f64 = parse_num(p, "an SNR value in dB")?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("SNR values must be finite, got '{p}'"))
            }
        })
        .collect()
}

fn parse_detectors(value: &str) -> std::result::Result<Vec<DetectorKind>, String> {
    let mut out = Vec::new();
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let d: DetectorKind = name.parse().map_err(|_| {
            format!("unknown detector '{name}' (expected mmse, sic, pic, mf-sic, mf-pic or ml)")
        })?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Sets one key on `cfg`.
pub fn set_key(cfg: &mut SimConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let g = &mut cfg.geometry;
    let positive = "a positive number";
    let count = "a non-negative integer";
    match key {
        "channel.side" => g.side_m = parse_num(value, positive)?,
        "channel.d0" => g.d0_m = parse_num(value, positive)?,
        "channel.d1" => g.d1_m = parse_num(value, positive)?,
        "channel.h_ap" => g.ap_height_m = parse_num(value, positive)?,
        "channel.h_ue" => g.ue_height_m = parse_num(value, positive)?,
        "channel.carrier_mhz" => g.carrier_mhz = parse_num(value, positive)?,
        "channel.shadowing_db" => g.shadowing_db = parse_num(value, "a number >= 0")?,
        "channel.aps" => g.aps = parse_num(value, count)?,
        "channel.ues" => g.ues = parse_num(value, count)?,
        "channel.freeze_geometry" => cfg.freeze_geometry = parse_bool(value)?,
        "code.n" => cfg.code.n = parse_num(value, count)?,
        "code.m" => cfg.code.m = parse_num(value, count)?,
        "code.seed" => cfg.code.seed = parse_num(value, count)?,
        "code.alist" => {
            let v = value.trim();
            cfg.code.alist = (!v.is_empty()).then(|| PathBuf::from(v));
        }
        "detect.detectors" => cfg.detectors = parse_detectors(value)?,
        "detect.order" => {
            cfg.order = value
                .trim()
                .parse::<DetectionOrder>()
                .map_err(|_| format!("expected natural or norm, got '{value}'"))?
        }
        "detect.threshold" => {
            let v = value.trim();
            cfg.mf.threshold = if v == "inf" { f64::INFINITY } else { parse_num(v, "a number >= 0 or inf")? }
        }
        "detect.candidates" => cfg.mf.candidates = parse_num(value, "an integer in 1..=4")?,
        "idd.iterations" => cfg.idd.iterations = parse_num(value, "a positive integer")?,
        "idd.ldpc_max_iter" => cfg.idd.decoder.max_iterations = parse_num(value, "a positive integer")?,
        "idd.ldpc_early_exit" => cfg.idd.decoder.early_exit = parse_bool(value)?,
        "idd.warm_start" => cfg.idd.warm_start = parse_bool(value)?,
        "idd.early_stop" => cfg.idd.early_stop = parse_bool(value)?,
        "idd.interleaver_seed" => cfg.interleaver_seed = parse_num(value, count)?,
        "sim.snr_db" => cfg.snr_db = parse_snr_grid(value)?,
        "sim.realizations" => cfg.realizations = parse_num(value, "a positive integer")?,
        "sim.frames_per_realization" => cfg.frames_per_realization = parse_num(value, "a positive integer")?,
        "sim.seed" => cfg.seed = parse_num(value, count)?,
        "sim.signal_power" => cfg.signal_power = parse_num(value, positive)?,
        "sim.uncoded" => cfg.uncoded = parse_bool(value)?,
        "sim.workers" => cfg.workers = parse_num(value, "a non-negative integer (0 = all cores)")?,
        _ => return Err("unknown key".to_string()),
    }
    Ok(())
}

fn join<V: ToString>(values: &[V]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Current value of every key, in [`KEYS`] order.
pub fn config_entries(cfg: &SimConfig) -> Vec<(&'static str, String)> {
    let g = &cfg.geometry;
    let values = [
        g.side_m.to_string(),
        g.d0_m.to_string(),
        g.d1_m.to_string(),
        g.ap_height_m.to_string(),
        g.ue_height_m.to_string(),
        g.carrier_mhz.to_string(),
        g.shadowing_db.to_string(),
        g.aps.to_string(),
        g.ues.to_string(),
        cfg.freeze_geometry.to_string(),
        cfg.code.n.to_string(),
        cfg.code.m.to_string(),
        cfg.code.seed.to_string(),
        cfg.code.alist.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        cfg.detectors.iter().map(|d| d.name()).collect::<Vec<_>>().join(","),
        cfg.order.name().to_string(),
        cfg.mf.threshold.to_string(),
        cfg.mf.candidates.to_string(),
        cfg.idd.iterations.to_string(),
        cfg.idd.decoder.max_iterations.to_string(),
        cfg.idd.decoder.early_exit.to_string(),
        cfg.idd.warm_start.to_string(),
        cfg.idd.early_stop.to_string(),
        cfg.interleaver_seed.to_string(),
        join(&cfg.snr_db),
        cfg.realizations.to_string(),
        cfg.frames_per_realization.to_string(),
        cfg.seed.to_string(),
        cfg.signal_power.to_string(),
        cfg.uncoded.to_string(),
        cfg.workers.to_string(),
    ];
    KEYS.iter().copied().zip(values).collect()
}

/// The fully resolved configuration as config-file text.
pub fn emit_config(cfg: &SimConfig) -> String {
    let mut out = String::new();
    let mut section = "";
    for (key, value) in config_entries(cfg) {
        let s = key.split('.').next().unwrap_or("");
        if s != section {
            if !section.is_empty() {
                out.push('\n');
            }
            section = s;
        }
        let _ = writeln!(out, "{key} = {value}");
    }
    out
}

/// Splits config text into `(line, key, value)` triples.
pub fn parse_entries(text: &str) -> std::result::Result<Vec<(usize, String, String)>, Vec<String>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                let key = k.trim().to_string();
                if let Some((first, ..)) = out.iter().find(|e| e.1 == key) {
                    errors.push(format!("line {}: {key}: already set on line {first}", i + 1));
                } else {
                    out.push((i + 1, key, v.trim().to_string()));
                }
            }
            _ => errors.push(format!("line {}: expected 'key = value', got '{line}'", i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

fn unknown_key(key: &str) -> String {
    format!("{key}: unknown key (valid keys: {})", KEYS.join(", "))
}

/// Defaults, then `file` text, then `flags`; every problem is reported.
pub fn resolve(file: Option<&str>, flags: &[(String, String)]) -> Result<Resolved> {
    let mut cfg = SimConfig::default();
    let mut sources: BTreeMap<String, Source> = KEYS.iter().map(|k| (k.to_string(), Source::Default)).collect();
    let mut errors = Vec::new();
    let mut file_values = BTreeMap::new();
    if let Some(text) = file {
        match parse_entries(text) {
            Ok(entries) => {
                for (line, key, value) in entries {
                    if !KEYS.contains(&key.as_str()) {
                        errors.push(format!("line {line}: {}", unknown_key(&key)));
                    } else if let Err(e) = set_key(&mut cfg, &key, &value) {
                        errors.push(format!("line {line}: {key}: {e}"));
                    } else {
                        sources.insert(key.clone(), Source::File);
                        file_values.insert(key, value);
                    }
                }
            }
            Err(e) => errors.extend(e),
        }
    }
    let mut overrides = Vec::new();
    for (key, value) in flags {
        if !KEYS.contains(&key.as_str()) {
            errors.push(unknown_key(key));
        } else if let Err(e) = set_key(&mut cfg, key, value) {
            errors.push(format!("{key}: {e}"));
        } else {
            sources.insert(key.clone(), Source::Flag);
            if let Some(fv) = file_values.get(key) {
                overrides.retain(|o: &Override| &o.key != key);
                overrides.push(Override { key: key.clone(), file_value: fv.clone(), flag_value: value.clone() });
            }
        }
    }
    if errors.is_empty() {
        errors = cfg.problems();
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    Ok(Resolved { config: cfg, sources, overrides })
}

/// Parses config-file text on top of the defaults.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    resolve(Some(text), &[]).map(|r| r.config)
}

/// Reads the optional config file at `path` and applies `flags`.
pub fn load_config(path: Option<&Path>, flags: &[(String, String)]) -> Result<Resolved> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.to_path_buf(), source })?),
        None => None,
    };
    resolve(text.as_deref(), flags)
}

/// CSV text for `records` in canonical row order.
pub fn format_csv(records: &[BerRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Contract("no records to write".to_string()));
    }
    let mut rows = records.to_vec();
    sort_records(&mut rows);
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.detector.name(),
            r.snr_db,
            r.idd_iterations,
            r.aps,
            r.users,
            r.bits,
            r.bit_errors,
            r.ber(),
            r.frames,
            r.frame_errors,
            r.fer()
        );
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn emit_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    write_text(path, &format_csv(records)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRuntime {
    pub detector: String,
    pub snr_db: f64,
    pub idd_iters: usize,
    /// Summed worker time over all realizations.
    pub seconds: f64,
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub sources: BTreeMap<String, Source>,
    pub overrides: Vec<Override>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub cells: Vec<CellRuntime>,
    pub failures: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    pub fn new(resolved: &Resolved, records: &[BerRecord], failures: &[String], started: f64, finished: f64) -> Self {
        let cfg = &resolved.config;
        let mut rows = records.to_vec();
        sort_records(&mut rows);
        Self {
            tool: "cfidd".to_string(),
            version: version(),
            seed: cfg.seed,
            config: config_entries(cfg).into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            sources: resolved.sources.clone(),
            overrides: resolved.overrides.clone(),
            started_unix: started,
            finished_unix: finished,
            cells: rows
                .iter()
                .map(|r| CellRuntime {
                    detector: r.detector.name().to_string(),
                    snr_db: r.snr_db,
                    idd_iters: r.idd_iterations,
                    seconds: r.elapsed.as_secs_f64(),
                    failures: r.failures,
                })
                .collect(),
            failures: failures.to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}
