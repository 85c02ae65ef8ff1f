//! Cell-free uplink channel: AP/UE geometry, three-slope path loss with
//! log-normal shadowing, Rayleigh small-scale fading and AWGN.
//!
//! All large-scale quantities are computed in `f64`; the channel matrix is
//! `L×K` with entry `(l, k)` the coefficient between UE `k` and AP `l`.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::contract;
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::{Error, Result};

/// Deployment geometry and propagation constants.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Side of the square deployment area, meters.
    pub side_m: f64,
    /// Below this distance the path loss is flat, meters.
    pub d0_m: f64,
    /// Above this distance the 35 dB/decade slope applies, meters.
    pub d1_m: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
    pub carrier_mhz: f64,
    /// Shadowing standard deviation, dB.
    pub shadowing_db: f64,
    /// Number of single-antenna APs (L).
    pub aps: usize,
    /// Number of single-antenna UEs (K).
    pub ues: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            side_m: 1000.0,
            d0_m: 10.0,
            d1_m: 50.0,
            ap_height_m: 15.0,
            ue_height_m: 1.65,
            carrier_mhz: 1900.0,
            shadowing_db: 8.0,
            aps: 100,
            ues: 40,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.d0_m > 0.0 && self.d0_m < self.d1_m) {
            errs.push(format!("need 0 < d0 < d1, got d0 = {}, d1 = {}", self.d0_m, self.d1_m));
        }
        if !(self.d1_m < self.side_m) {
            errs.push(format!("need d1 < D, got d1 = {}, D = {}", self.d1_m, self.side_m));
        }
        if !(self.carrier_mhz > 0.0) {
            errs.push(format!("carrier frequency must be positive, got {}", self.carrier_mhz));
        }
        if !(self.ap_height_m > 0.0 && self.ue_height_m > 0.0) {
            errs.push("antenna heights must be positive".to_string());
        }
        if !(self.shadowing_db >= 0.0) {
            errs.push(format!("shadowing std must be >= 0, got {}", self.shadowing_db));
        }
        if self.ues == 0 || self.aps < self.ues {
            errs.push(format!(
                "need L >= K >= 1, got L = {}, K = {}",
                self.aps, self.ues
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Contract(errs.join("; ")))
        }
    }

    /// Hata-COST231 constant for this geometry.
    pub fn lambda_db(&self) -> Result<f64> {
        hata_lambda(self.carrier_mhz, self.ap_height_m, self.ue_height_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One draw of the network: positions, large-scale gains and the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `L×K` channel matrix, `g[(l, k)] = sqrt(beta[l][k]) h[l][k]`.
    pub g: ComplexMatrix<f64>,
    /// Linear large-scale gains, row-major `L×K`.
    pub beta: Vec<f64>,
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
}

impl ChannelRealization {
    pub fn beta(&self, ap: usize, ue: usize) -> f64 {
        self.beta[ap * self.ue_positions.len() + ue]
    }
}

/// Hata-COST231 constant Λ in dB for carrier `f` (MHz) and antenna heights
/// in meters.
pub fn hata_lambda(carrier_mhz: f64, ap_height_m: f64, ue_height_m: f64) -> Result<f64> {
    if !(carrier_mhz > 0.0 && ap_height_m > 0.0 && ue_height_m > 0.0) {
        return Err(contract(format!(
            "Hata parameters must be positive (f = {carrier_mhz}, h_AP = {ap_height_m}, h_u = {ue_height_m})"
        )));
    }
    let lf = carrier_mhz.log10();
    Ok(46.3 + 33.9 * lf - 13.82 * ap_height_m.log10() - (1.1 * lf - 0.7) * ue_height_m
        + (1.56 * lf - 0.8))
}

fn path_loss_with_lambda(d: f64, lambda: f64, d0: f64, d1: f64) -> f64 {
    if d > d1 {
        -lambda - 35.0 * d.log10()
    } else if d > d0 {
        -lambda - 15.0 * d1.log10() - 20.0 * d.log10()
    } else {
        -lambda - 15.0 * d1.log10() - 20.0 * d0.log10()
    }
}

/// Three-slope path loss in dB (a negative number) at distance `d` meters.
pub fn path_loss_db(d: f64, geom: &GeometryConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(contract(format!("distance must be positive, got {d}")));
    }
    Ok(path_loss_with_lambda(d, geom.lambda_db()?, geom.d0_m, geom.d1_m))
}

/// Linear large-scale gain from path loss, shadowing std and a standard
/// normal draw; shadowing is added in the dB domain.
pub fn large_scale_gain(pl_db: f64, shadowing_db: f64, zeta: f64) -> f64 {
    10f64.powf((pl_db + shadowing_db * zeta) / 10.0)
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Independent uniform AP and UE positions over the square.
pub fn draw_positions<R: Rng + ?Sized>(
    geom: &GeometryConfig,
    rng: &mut R,
) -> (Vec<Point>, Vec<Point>) {
    let point = |rng: &mut R| Point {
        x: rng.random::<f64>() * geom.side_m,
        y: rng.random::<f64>() * geom.side_m,
    };
    let aps = (0..geom.aps).map(|_| point(rng)).collect();
    let ues = (0..geom.ues).map(|_| point(rng)).collect();
    (aps, ues)
}

/// Draws positions, shadowing and fading for one channel realization.
pub fn draw_channel<R: Rng + ?Sized>(geom: &GeometryConfig, rng: &mut R) -> Result<ChannelRealization> {
    geom.validate()?;
    let (aps, ues) = draw_positions(geom, rng);
    draw_channel_at(geom, aps, ues, rng)
}

/// Draws shadowing and fading for fixed positions.
pub fn draw_channel_at<R: Rng + ?Sized>(
    geom: &GeometryConfig,
    ap_positions: Vec<Point>,
    ue_positions: Vec<Point>,
    rng: &mut R,
) -> Result<ChannelRealization> {
    geom.validate()?;
    if ap_positions.len() != geom.aps || ue_positions.len() != geom.ues {
        return Err(contract("position counts do not match the geometry"));
    }
    let lambda = geom.lambda_db()?;
    let (l, k) = (geom.aps, geom.ues);
    let mut beta = Vec::with_capacity(l * k);
    let mut g = ComplexMatrix::zeros(l, k);
    for (a, ap) in ap_positions.iter().enumerate() {
        for (u, ue) in ue_positions.iter().enumerate() {
            let d = ap.distance(ue).max(f64::MIN_POSITIVE);
            let pl = path_loss_with_lambda(d, lambda, geom.d0_m, geom.d1_m);
            let zeta: f64 = rng.sample(StandardNormal);
            let b = large_scale_gain(pl, geom.shadowing_db, zeta);
            beta.push(b);
            g[(a, u)] = standard_complex_normal(rng) * b.sqrt();
        }
    }
    Ok(ChannelRealization { g, beta, ap_positions, ue_positions })
}

/// `G s + n` with `n` drawn i.i.d. CN(0, noise_var).
pub fn apply_channel<R: Rng + ?Sized>(
    g: &ComplexMatrix<f64>,
    s: &[Complex<f64>],
    noise_var: f64,
    rng: &mut R,
) -> Result<ComplexVector<f64>> {
    if !(noise_var >= 0.0) {
        return Err(contract(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let mut y = g.mul_vec(s)?;
    if noise_var > 0.0 {
        let sd = noise_var.sqrt();
        for yi in y.iter_mut() {
            *yi += standard_complex_normal(rng) * sd;
        }
    }
    Ok(y)
}

/// Average receive SNR for a given noise variance:
/// `tr(σ_s² G Gᴴ) R / (L K σ_w²)`.
pub fn snr_for_noise_variance(g: &ComplexMatrix<f64>, signal_power: f64, rate: f64, noise_var: f64) -> f64 {
    signal_power * g.frobenius_sq() * rate / ((g.rows() * g.cols()) as f64 * noise_var)
}

/// Noise variance that puts this channel realization at `snr_linear`.
pub fn noise_variance_for_snr(
    g: &ComplexMatrix<f64>,
    signal_power: f64,
    rate: f64,
    snr_linear: f64,
) -> Result<f64> {
    if !(snr_linear > 0.0) {
        return Err(contract(format!("SNR must be positive, got {snr_linear}")));
    }
    let trace = signal_power * g.frobenius_sq();
    if !(trace > 0.0) {
        return Err(Error::DegenerateChannel("tr(G Gᴴ) is zero".to_string()));
    }
    Ok(trace * rate / ((g.rows() * g.cols()) as f64 * snr_linear))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
