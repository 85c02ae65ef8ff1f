//! Iterative detection and decoding of one frame.
//!
//! Every user sends one LDPC codeword, interleaved and QPSK-mapped onto
//! `N / 2` consecutive channel uses of a fixed channel. A pass detects all
//! channel uses with priors taken from the decoder's last extrinsic
//! output, deinterleaves the detector's extrinsic LLRs and decodes each
//! user. The first pass runs without priors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detectors::{detect, extrinsic_llrs, DetectorContext, DetectorKind, Link, MfConfig};
use crate::error::contract;
use crate::ldpc::{Decoder, DecoderConfig, LinearCode};
use crate::modem::{Constellation, SoftSymbol};
use crate::numerics::ComplexVector;
use crate::{Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IddConfig {
    /// Detection/decoding passes; one means no feedback.
    pub iterations: usize,
    pub decoder: DecoderConfig,
    /// Keep decoder messages between passes instead of starting fresh.
    pub warm_start: bool,
    /// Skip remaining passes once every user's parity checks hold.
    pub early_stop: bool,
}

impl Default for IddConfig {
    fn default() -> Self {
        Self { iterations: 2, decoder: DecoderConfig::default(), warm_start: false, early_stop: false }
    }
}

impl IddConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(contract("at least one IDD iteration is required"));
        }
        if self.decoder.max_iterations == 0 {
            return Err(contract("at least one decoder iteration is required"));
        }
        Ok(())
    }
}

/// Seeded uniform random permutation of a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(n: usize, seed: u64) -> Self {
        Self::for_stream(n, seed, 0)
    }

    /// Independent permutation for `stream` (one per user) from one seed.
    pub fn for_stream(n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `out[i] = block[π(i)]`
    pub fn interleave<V: Copy>(&self, block: &[V]) -> Vec<V> {
        assert_eq!(block.len(), self.perm.len(), "block length differs from interleaver length");
        self.perm.iter().map(|&p| block[p]).collect()
    }

    /// Inverse of [`Interleaver::interleave`].
    pub fn deinterleave<V: Copy + Default>(&self, block: &[V]) -> Vec<V> {
        assert_eq!(block.len(), self.perm.len(), "block length differs from interleaver length");
        let mut out = vec![V::default(); block.len()];
        for (&p, &v) in self.perm.iter().zip(block) {
            out[p] = v;
        }
        out
    }
}

/// LLR buffers exchanged inside one frame, all in codeword bit order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState<T> {
    /// Detector extrinsic LLRs `L_E` per user.
    pub detector_extrinsic: Vec<Vec<T>>,
    /// Decoder extrinsic LLRs `L_U` per user, the priors of the next pass.
    pub decoder_extrinsic: Vec<Vec<T>>,
    /// Hard decisions on the code bits after the last decode.
    pub decoded: Vec<Vec<u8>>,
    pub parity_ok: Vec<bool>,
}

impl<T: Real> FrameState<T> {
    pub fn new(users: usize, n: usize) -> Self {
        Self {
            detector_extrinsic: vec![vec![T::zero(); n]; users],
            decoder_extrinsic: vec![vec![T::zero(); n]; users],
            decoded: vec![vec![0; n]; users],
            parity_ok: vec![false; users],
        }
    }
}

/// Decoded messages and parity status after one pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassOutcome {
    pub messages: Vec<Vec<u8>>,
    pub parity_ok: Vec<bool>,
}

/// Per-user transmit chain shared by all frames of a run.
#[derive(Debug, Clone)]
pub struct Transceiver<T> {
    pub code: LinearCode,
    pub constellation: Constellation<T>,
    pub interleavers: Vec<Interleaver>,
}

impl<T: Real> Transceiver<T> {
    pub fn new(code: LinearCode, constellation: Constellation<T>, users: usize, interleaver_seed: u64) -> Result<Self> {
        if !code.n().is_multiple_of(constellation.bits_per_symbol()) {
            return Err(contract(format!(
                "code length {} is not a multiple of {} bits per symbol",
                code.n(),
                constellation.bits_per_symbol()
            )));
        }
        let interleavers = (0..users as u64).map(|u| Interleaver::for_stream(code.n(), interleaver_seed, u)).collect();
        Ok(Self { code, constellation, interleavers })
    }

    pub fn users(&self) -> usize {
        self.interleavers.len()
    }

    /// Channel uses per frame.
    pub fn symbols_per_frame(&self) -> usize {
        self.code.n() / self.constellation.bits_per_symbol()
    }

    /// Encodes, interleaves and maps every user's message; the result is
    /// indexed `[channel use][user]`.
    pub fn transmit(&self, messages: &[Vec<u8>]) -> Result<Vec<ComplexVector<T>>> {
        if messages.len() != self.users() {
            return Err(contract(format!("{} messages for {} users", messages.len(), self.users())));
        }
        let mut per_user = Vec::with_capacity(self.users());
        for (msg, il) in messages.iter().zip(&self.interleavers) {
            let cw = self.code.encode(msg)?;
            per_user.push(self.constellation.modulate(&il.interleave(&cw))?);
        }
        Ok((0..self.symbols_per_frame()).map(|t| per_user.iter().map(|s| s[t]).collect()).collect())
    }

    /// One detection sweep over all channel uses, filling
    /// `state.detector_extrinsic` from `state.decoder_extrinsic`.
    pub fn detect_pass(
        &self,
        link: &Link<T>,
        received: &[ComplexVector<T>],
        kind: DetectorKind,
        mf: &MfConfig,
        first_pass: bool,
        state: &mut FrameState<T>,
    ) -> Result<()> {
        if !kind.is_soft() {
            return Err(contract(format!("detector {kind} has no soft output")));
        }
        let users = self.users();
        let bps = self.constellation.bits_per_symbol();
        if received.len() != self.symbols_per_frame() || link.users() != users {
            return Err(contract("frame dimensions do not match the transceiver"));
        }
        let priors_il: Vec<Vec<T>> = self
            .interleavers
            .iter()
            .zip(&state.decoder_extrinsic)
            .map(|(il, l)| il.interleave(l))
            .collect();
        let mut out_il = vec![vec![T::zero(); self.code.n()]; users];
        let uninformed = vec![SoftSymbol::uninformed(self.constellation.energy()); users];
        let mut priors = uninformed.clone();
        for (t, y) in received.iter().enumerate() {
            let bits = t * bps..(t + 1) * bps;
            if !first_pass {
                for (p, l) in priors.iter_mut().zip(&priors_il) {
                    *p = self.constellation.soft_symbol(&l[bits.clone()]);
                }
            }
            let ctx = DetectorContext::new(link, y, if first_pass { &uninformed } else { &priors }, &self.constellation)?;
            let det = detect(kind, &ctx, mf)?;
            for (u, est) in det.soft.iter().enumerate() {
                let prior: Vec<T> = if first_pass { vec![T::zero(); bps] } else { priors_il[u][bits.clone()].to_vec() };
                let llrs = extrinsic_llrs(est, &prior, &self.constellation)?;
                out_il[u][bits.clone()].copy_from_slice(&llrs);
            }
        }
        for ((il, out), dst) in self.interleavers.iter().zip(&out_il).zip(state.detector_extrinsic.iter_mut()) {
            *dst = il.deinterleave(out);
        }
        Ok(())
    }

    /// Decodes every user from `state.detector_extrinsic` and stores the
    /// decoder's extrinsic output for the next pass.
    pub fn decode_pass(&self, decoders: &mut [Decoder<T>], cfg: &IddConfig, state: &mut FrameState<T>) -> Result<PassOutcome> {
        let mut messages = Vec::with_capacity(self.users());
        for (u, dec) in decoders.iter_mut().enumerate() {
            let input = &state.detector_extrinsic[u];
            let res = if cfg.warm_start {
                dec.decode_warm(&self.code, input, cfg.decoder)?
            } else {
                dec.decode(&self.code, input, cfg.decoder)?
            };
            messages.push(self.code.extract_message(&res.hard));
            state.decoder_extrinsic[u] = res.extrinsic;
            state.decoded[u] = res.hard;
            state.parity_ok[u] = res.parity_ok;
        }
        Ok(PassOutcome { messages, parity_ok: state.parity_ok.clone() })
    }

    /// Runs all IDD passes on one frame and returns the outcome after each
    /// pass, so that a run with `P` passes also yields every `p < P` result.
    pub fn run_frame(
        &self,
        link: &Link<T>,
        received: &[ComplexVector<T>],
        kind: DetectorKind,
        mf: &MfConfig,
        cfg: &IddConfig,
    ) -> Result<Vec<PassOutcome>> {
        cfg.validate()?;
        let mut state = FrameState::new(self.users(), self.code.n());
        let mut decoders: Vec<Decoder<T>> = (0..self.users()).map(|_| Decoder::new(&self.code)).collect();
        let mut passes = Vec::with_capacity(cfg.iterations);
        for pass in 0..cfg.iterations {
            if cfg.early_stop && pass > 0 && state.parity_ok.iter().all(|&ok| ok) {
                let last = passes.last().cloned().expect("at least one pass done");
                passes.push(last);
                continue;
            }
            self.detect_pass(link, received, kind, mf, pass == 0, &mut state)?;
            passes.push(self.decode_pass(&mut decoders, cfg, &mut state)?);
        }
        Ok(passes)
    }
}

/// `G s_t + n_t` for every channel use, with the noise samples supplied.
pub fn receive<T: Real>(
    link: &Link<T>,
    symbols: &[ComplexVector<T>],
    noise: &[ComplexVector<T>],
) -> Result<Vec<ComplexVector<T>>> {
    if symbols.len() != noise.len() {
        return Err(contract("symbol and noise blocks differ in length"));
    }
    symbols
        .iter()
        .zip(noise)
        .map(|(s, n)| {
            let mut y = link.g().mul_vec(s)?;
            if n.len() != y.len() {
                return Err(contract("noise vector length differs from AP count"));
            }
            for (a, b) in y.iter_mut().zip(n) {
                *a += *b;
            }
            Ok(y)
        })
        .collect()
}
