//! Monte Carlo sweeps over channel realizations.
//!
//! Realization `r` draws everything it needs (geometry, channel, messages,
//! noise) from its own ChaCha8 stream `r` of the master seed, so results
//! do not depend on how realizations are spread over worker threads.
//! Within a realization every detector and SNR point sees the same
//! messages and the same unit-variance noise, scaled to the SNR.

use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{db_to_linear, draw_channel, draw_channel_at, draw_positions, standard_complex_normal, GeometryConfig};
use crate::detectors::{detect, DetectionOrder, DetectorContext, DetectorKind, Link, MfConfig};
use crate::error::contract;
use crate::idd::{receive, IddConfig, Transceiver};
use crate::ldpc::{read_alist, LinearCode, DEFAULT_M, DEFAULT_N};
use crate::modem::{Constellation, SoftSymbol};
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::{Error, Result};

/// Stream reserved for the frozen AP/UE layout.
const GEOMETRY_STREAM: u64 = u64::MAX;

/// LDPC code selection: a PEG construction or an alist file.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub alist: Option<PathBuf>,
}

impl Default for CodeSpec {
    fn default() -> Self {
        Self { n: DEFAULT_N, m: DEFAULT_M, seed: 1, alist: None }
    }
}

impl CodeSpec {
    pub fn build(&self) -> Result<LinearCode> {
        match &self.alist {
            Some(path) => read_alist(path),
            None => LinearCode::build(self.n, self.m, self.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub geometry: GeometryConfig,
    /// Draw AP and UE positions once for the whole run.
    pub freeze_geometry: bool,
    pub code: CodeSpec,
    pub detectors: Vec<DetectorKind>,
    pub idd: IddConfig,
    pub interleaver_seed: u64,
    pub mf: MfConfig,
    pub order: DetectionOrder,
    pub snr_db: Vec<f64>,
    pub realizations: usize,
    pub frames_per_realization: usize,
    pub seed: u64,
    /// Transmit power σ_s².
    pub signal_power: f64,
    /// Bypass the code: hard detection of random symbols without priors.
    pub uncoded: bool,
    /// Worker threads; zero uses every available core.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            freeze_geometry: false,
            code: CodeSpec::default(),
            detectors: vec![
                DetectorKind::Mmse,
                DetectorKind::Sic,
                DetectorKind::Pic,
                DetectorKind::MfSic,
                DetectorKind::MfPic,
            ],
            idd: IddConfig::default(),
            interleaver_seed: 7,
            mf: MfConfig::default(),
            order: DetectionOrder::Natural,
            snr_db: vec![-5.0, 0.0, 5.0, 10.0, 15.0],
            realizations: 1000,
            frames_per_realization: 1,
            seed: 1,
            signal_power: 1.0,
            uncoded: false,
            workers: 0,
        }
    }
}

impl SimConfig {
    /// Every violated constraint, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = &self.geometry;
        if !(g.d0_m > 0.0 && g.d0_m < g.d1_m) {
            out.push(format!("channel.d0 / channel.d1: need 0 < d0 < d1, got {} and {}", g.d0_m, g.d1_m));
        }
        if !(g.d1_m < g.side_m) {
            out.push(format!("channel.side: must exceed channel.d1 = {}, got {}", g.d1_m, g.side_m));
        }
        if !(g.carrier_mhz > 0.0) {
            out.push(format!("channel.carrier_mhz: must be positive, got {}", g.carrier_mhz));
        }
        if !(g.ap_height_m > 0.0) {
            out.push(format!("channel.h_ap: must be positive, got {}", g.ap_height_m));
        }
        if !(g.ue_height_m > 0.0) {
            out.push(format!("channel.h_ue: must be positive, got {}", g.ue_height_m));
        }
        if !(g.shadowing_db >= 0.0) {
            out.push(format!("channel.shadowing_db: must be >= 0, got {}", g.shadowing_db));
        }
        if g.ues == 0 {
            out.push("channel.ues: must be >= 1".to_string());
        }
        if g.aps < g.ues {
            out.push(format!("channel.aps: must be >= channel.ues = {}, got {}", g.ues, g.aps));
        }
        if self.code.alist.is_none() && !(self.code.m > 0 && self.code.m < self.code.n) {
            out.push(format!("code.m: must lie in 1..{} (code.n), got {}", self.code.n, self.code.m));
        }
        if self.code.alist.is_none() && !self.code.n.is_multiple_of(2) {
            out.push(format!("code.n: must be even for QPSK, got {}", self.code.n));
        }
        if self.detectors.is_empty() {
            out.push("detect.detectors: must name at least one detector".to_string());
        }
        if !self.uncoded && self.detectors.contains(&DetectorKind::Ml) {
            out.push("detect.detectors: ml is only available with sim.uncoded = true".to_string());
        }
        if self.idd.iterations == 0 {
            out.push("idd.iterations: must be >= 1".to_string());
        }
        if self.idd.decoder.max_iterations == 0 {
            out.push("idd.ldpc_max_iter: must be >= 1".to_string());
        }
        if !(self.mf.threshold >= 0.0) {
            out.push(format!("detect.threshold: must be >= 0, got {}", self.mf.threshold));
        }
        if !(1..=4).contains(&self.mf.candidates) {
            out.push(format!("detect.candidates: must lie in 1..=4, got {}", self.mf.candidates));
        }
        if self.snr_db.is_empty() {
            out.push("sim.snr_db: must contain at least one value".to_string());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            out.push("sim.snr_db: values must be finite".to_string());
        }
        if self.realizations == 0 {
            out.push("sim.realizations: must be >= 1".to_string());
        }
        if self.frames_per_realization == 0 {
            out.push("sim.frames_per_realization: must be >= 1".to_string());
        }
        if !(self.signal_power > 0.0 && self.signal_power.is_finite()) {
            out.push(format!("sim.signal_power: must be positive, got {}", self.signal_power));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Error counts of one (detector, SNR, IDD passes) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub detector: DetectorKind,
    pub snr_db: f64,
    /// Detection/decoding passes; zero in uncoded mode.
    pub idd_iterations: usize,
    pub aps: usize,
    pub users: usize,
    pub bits: u64,
    pub bit_errors: u64,
    /// Codewords (symbols in uncoded mode).
    pub frames: u64,
    pub frame_errors: u64,
    /// Realizations whose processing failed for this cell.
    pub failures: u64,
    pub elapsed: Duration,
}

impl BerRecord {
    pub fn zero(detector: DetectorKind, snr_db: f64, idd_iterations: usize, aps: usize, users: usize) -> Self {
        Self {
            detector,
            snr_db,
            idd_iterations,
            aps,
            users,
            bits: 0,
            bit_errors: 0,
            frames: 0,
            frame_errors: 0,
            failures: 0,
            elapsed: Duration::ZERO,
        }
    }

    fn key(&self) -> (DetectorKind, usize, u64, usize, usize) {
        (self.detector, self.idd_iterations, self.snr_db.to_bits(), self.aps, self.users)
    }

    pub fn same_cell(&self, other: &Self) -> bool {
        self.key() == other.key()
    }

    /// Sum of the counters of two records of the same cell.
    pub fn accumulate(&self, other: &Self) -> Result<Self> {
        if !self.same_cell(other) {
            return Err(contract(format!(
                "cannot merge ({}, {} dB, idd {}) with ({}, {} dB, idd {})",
                self.detector, self.snr_db, self.idd_iterations, other.detector, other.snr_db, other.idd_iterations
            )));
        }
        Ok(Self {
            bits: self.bits + other.bits,
            bit_errors: self.bit_errors + other.bit_errors,
            frames: self.frames + other.frames,
            frame_errors: self.frame_errors + other.frame_errors,
            failures: self.failures + other.failures,
            elapsed: self.elapsed + other.elapsed,
            ..self.clone()
        })
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }
}

/// Canonical record order: detector, IDD passes, SNR ascending.
pub fn sort_records(records: &mut [BerRecord]) {
    records.sort_by(|a, b| {
        (a.detector, a.idd_iterations)
            .cmp(&(b.detector, b.idd_iterations))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
}

/// Everything one realization produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub index: usize,
    pub records: Vec<BerRecord>,
    /// Digest of the received signal each (detector, SNR) cell consumed.
    pub digests: Vec<(DetectorKind, f64, u64)>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub records: Vec<BerRecord>,
    pub failures: Vec<String>,
    /// Per-realization results, kept only when requested.
    pub realizations: Vec<RealizationResult>,
}

#[derive(Default)]
pub struct SweepOptions<'a> {
    pub keep_realizations: bool,
    /// Called with (completed, total) after every realization.
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

/// State shared by all realizations of a sweep.
#[derive(Debug)]
pub struct Sweep {
    cfg: SimConfig,
    trx: Option<Transceiver<f64>>,
    constellation: Constellation<f64>,
    frozen_layout: Option<(Vec<crate::channel::Point>, Vec<crate::channel::Point>)>,
}

impl Sweep {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let constellation = Constellation::qpsk();
        let trx = if cfg.uncoded {
            None
        } else {
            let code = cfg.code.build()?;
            Some(Transceiver::new(code, constellation.clone(), cfg.geometry.ues, cfg.interleaver_seed)?)
        };
        let frozen_layout = cfg.freeze_geometry.then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(GEOMETRY_STREAM);
            draw_positions(&cfg.geometry, &mut rng)
        });
        Ok(Self { cfg, trx, constellation, frozen_layout })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Channel uses per frame: one codeword, or as many symbols uncoded.
    pub fn symbols_per_frame(&self) -> usize {
        match &self.trx {
            Some(trx) => trx.symbols_per_frame(),
            None => self.cfg.code.n / self.constellation.bits_per_symbol(),
        }
    }

    fn rate(&self) -> f64 {
        self.trx.as_ref().map_or(1.0, |t| t.code.rate())
    }

    fn empty_records(&self) -> Vec<BerRecord> {
        let (l, k) = (self.cfg.geometry.aps, self.cfg.geometry.ues);
        let passes: Vec<usize> = if self.cfg.uncoded { vec![0] } else { (1..=self.cfg.idd.iterations).collect() };
        let mut out = Vec::new();
        for &d in &self.cfg.detectors {
            for &p in &passes {
                for &snr in &self.cfg.snr_db {
                    out.push(BerRecord::zero(d, snr, p, l, k));
                }
            }
        }
        sort_records(&mut out);
        out
    }

    /// Simulates realization `index` on its own random stream.
    pub fn run_realization(&self, index: usize) -> RealizationResult {
        let mut result = RealizationResult { index, records: self.empty_records(), digests: Vec::new(), failures: Vec::new() };
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index as u64);
        let channel = match &self.frozen_layout {
            Some((aps, ues)) => draw_channel_at(&self.cfg.geometry, aps.clone(), ues.clone(), &mut rng),
            None => draw_channel(&self.cfg.geometry, &mut rng),
        };
        let g = match channel.and_then(|c| normalised_channel(&c.g, self.cfg.signal_power)) {
            Ok(g) => g,
            Err(e) => {
                for r in result.records.iter_mut() {
                    r.failures += 1;
                }
                result.failures.push(format!("realization {index}: {e}"));
                return result;
            }
        };
        let (l, k) = (g.rows(), g.cols());
        let sym = self.symbols_per_frame();
        let frames: Vec<Frame> = (0..self.cfg.frames_per_realization)
            .map(|_| {
                let payload = match &self.trx {
                    Some(trx) => (0..k).map(|_| random_bits(&mut rng, trx.code.message_len())).collect(),
                    None => (0..k).map(|_| random_bits(&mut rng, sym * self.constellation.bits_per_symbol())).collect(),
                };
                let noise = (0..sym).map(|_| (0..l).map(|_| standard_complex_normal(&mut rng)).collect()).collect();
                (payload, noise)
            })
            .collect();

        for &snr_db in &self.cfg.snr_db {
            let noise_var = self.cfg.signal_power * self.rate() / db_to_linear(snr_db);
            let link = match Link::new(g.clone(), noise_var, 1.0, self.cfg.order) {
                Ok(link) => link,
                Err(e) => {
                    self.fail_snr(&mut result, snr_db, &e);
                    continue;
                }
            };
            let sd = noise_var.sqrt();
            for (payload, unit_noise) in &frames {
                let noise: Vec<ComplexVector<f64>> =
                    unit_noise.iter().map(|n| n.iter().map(|z| z * sd).collect()).collect();
                let sent = match &self.trx {
                    Some(trx) => trx.transmit(payload),
                    None => uncoded_symbols(&self.constellation, payload, sym),
                };
                let received = match sent.and_then(|s| receive(&link, &s, &noise)) {
                    Ok(r) => r,
                    Err(e) => {
                        self.fail_snr(&mut result, snr_db, &e);
                        continue;
                    }
                };
                let digest = digest(&received);
                for &det in &self.cfg.detectors {
                    result.digests.push((det, snr_db, digest));
                    let start = Instant::now();
                    let outcome = match &self.trx {
                        Some(trx) => self.coded_cell(trx, &link, &received, payload, det),
                        None => self.uncoded_cell(&link, &received, payload, det),
                    };
                    let elapsed = start.elapsed();
                    match outcome {
                        Ok(counts) => {
                            for (pass, c) in counts.into_iter().enumerate() {
                                let idd = if self.trx.is_some() { pass + 1 } else { 0 };
                                let rec = find(&mut result.records, det, snr_db, idd);
                                rec.bits += c.bits;
                                rec.bit_errors += c.bit_errors;
                                rec.frames += c.frames;
                                rec.frame_errors += c.frame_errors;
                                rec.elapsed += elapsed;
                            }
                        }
                        Err(e) => {
                            for r in result.records.iter_mut().filter(|r| r.detector == det && r.snr_db == snr_db) {
                                r.failures += 1;
                            }
                            result.failures.push(format!("realization {index}, {det} at {snr_db} dB: {e}"));
                        }
                    }
                }
            }
        }
        result
    }

    fn fail_snr(&self, result: &mut RealizationResult, snr_db: f64, e: &Error) {
        for r in result.records.iter_mut().filter(|r| r.snr_db == snr_db) {
            r.failures += 1;
        }
        result.failures.push(format!("realization {}, {snr_db} dB: {e}", result.index));
    }

    fn coded_cell(
        &self,
        trx: &Transceiver<f64>,
        link: &Link<f64>,
        received: &[ComplexVector<f64>],
        messages: &[Vec<u8>],
        det: DetectorKind,
    ) -> Result<Vec<Counts>> {
        let passes = trx.run_frame(link, received, det, &self.cfg.mf, &self.cfg.idd)?;
        Ok(passes
            .iter()
            .map(|pass| {
                let mut c = Counts::default();
                for (got, sent) in pass.messages.iter().zip(messages) {
                    let errs = got.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
                    c.bits += sent.len() as u64;
                    c.bit_errors += errs;
                    c.frames += 1;
                    c.frame_errors += u64::from(errs > 0);
                }
                c
            })
            .collect())
    }

    fn uncoded_cell(
        &self,
        link: &Link<f64>,
        received: &[ComplexVector<f64>],
        bits: &[Vec<u8>],
        det: DetectorKind,
    ) -> Result<Vec<Counts>> {
        let q = &self.constellation;
        let bps = q.bits_per_symbol();
        let priors = vec![SoftSymbol::uninformed(q.energy()); link.users()];
        let mut c = Counts::default();
        for (t, y) in received.iter().enumerate() {
            let ctx = DetectorContext::new(link, y, &priors, q)?;
            let out = detect(det, &ctx, &self.cfg.mf)?;
            for (u, &label) in out.hard.iter().enumerate() {
                let sent = &bits[u][t * bps..(t + 1) * bps];
                let errs = (0..bps).filter(|&b| q.label_bit(label, b) != sent[b]).count() as u64;
                c.bits += bps as u64;
                c.bit_errors += errs;
                c.frames += 1;
                c.frame_errors += u64::from(errs > 0);
            }
        }
        Ok(vec![c])
    }

    /// Runs every realization on a pool of `cfg.workers` threads and sums
    /// the counters per cell.
    pub fn run(&self, options: &SweepOptions<'_>) -> Result<SweepReport> {
        let total = self.cfg.realizations;
        let done = AtomicUsize::new(0);
        let work = || -> Vec<RealizationResult> {
            (0..total)
                .into_par_iter()
                .map(|i| {
                    let r = self.run_realization(i);
                    let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                    if let Some(cb) = options.progress {
                        cb(n, total);
                    }
                    r
                })
                .collect()
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
        let results = pool.install(work);

        let mut totals: BTreeMap<usize, BerRecord> = self.empty_records().into_iter().enumerate().collect();
        let mut failures = Vec::new();
        for r in &results {
            for (i, rec) in r.records.iter().enumerate() {
                let merged = totals[&i].accumulate(rec)?;
                totals.insert(i, merged);
            }
            failures.extend(r.failures.iter().cloned());
        }
        Ok(SweepReport {
            records: totals.into_values().collect(),
            failures,
            realizations: if options.keep_realizations { results } else { Vec::new() },
        })
    }
}

/// Runs the sweep described by `cfg`.
pub fn run_sweep(cfg: &SimConfig) -> Result<SweepReport> {
    Sweep::new(cfg.clone())?.run(&SweepOptions::default())
}

/// Per-user payload bits and unit-variance noise of one frame.
type Frame = (Vec<Vec<u8>>, Vec<ComplexVector<f64>>);

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    bits: u64,
    bit_errors: u64,
    frames: u64,
    frame_errors: u64,
}

fn find(records: &mut [BerRecord], det: DetectorKind, snr_db: f64, idd: usize) -> &mut BerRecord {
    records
        .iter_mut()
        .find(|r| r.detector == det && r.snr_db.to_bits() == snr_db.to_bits() && r.idd_iterations == idd)
        .expect("record exists for every configured cell")
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn uncoded_symbols(q: &Constellation<f64>, bits: &[Vec<u8>], sym: usize) -> Result<Vec<ComplexVector<f64>>> {
    let per_user: Vec<Vec<Complex<f64>>> = bits.iter().map(|b| q.modulate(b)).collect::<Result<_>>()?;
    Ok((0..sym).map(|t| per_user.iter().map(|s| s[t]).collect()).collect())
}

/// `√σ_s² · G / ρ` with `ρ² = tr(GGᴴ)/(LK)`. The SNR definition only
/// involves `G` through `tr(GGᴴ)`, so detection on the rescaled channel
/// with noise variance `σ_s² R / snr` is equivalent and keeps the matrix
/// entries near unit magnitude.
pub fn normalised_channel(g: &ComplexMatrix<f64>, signal_power: f64) -> Result<ComplexMatrix<f64>> {
    let power = g.frobenius_sq() / (g.rows() * g.cols()) as f64;
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::DegenerateChannel(format!("mean channel power {power}")));
    }
    Ok(g.scale((signal_power / power).sqrt()))
}

fn digest(received: &[ComplexVector<f64>]) -> u64 {
    let mut h = DefaultHasher::new();
    for y in received {
        for z in y {
            z.re.to_bits().hash(&mut h);
            z.im.to_bits().hash(&mut h);
        }
    }
    h.finish()
}
