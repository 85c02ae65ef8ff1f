//! Link-level simulation of the uplink of an LDPC-coded cell-free massive
//! MIMO network with iterative detection and decoding (IDD).
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense complex matrices, Hermitian and general solves.
//! * [`channel`]: AP/UE geometry, three-slope path loss with shadowing,
//!   Rayleigh small-scale fading and the AWGN channel.
//! * [`modem`]: QPSK mapping and LLR-to-symbol-statistics conversion.
//! * [`ldpc`]: PEG code construction, systematic encoding, alist I/O and
//!   the box-plus sum-product decoder.
//! * [`detectors`]: MMSE, soft PIC/SIC, MF-SIC and MF-PIC detectors plus
//!   the extrinsic LLR computation shared by all of them.
//! * [`idd`]: the detector/decoder loop for one frame.
//! * [`harness`]: the Monte Carlo sweep producing [`harness::BerRecord`]s.
//! * [`cli`]: layered configuration, CSV emission and run manifests.
//!
//! Numerical code is generic over the real scalar type through [`Real`];
//! the `*64`/`*32` aliases below pin the common instantiations.

pub mod channel;
pub mod cli;
pub mod detectors;
mod error;
pub mod harness;
pub mod idd;
pub mod ldpc;
pub mod modem;
pub mod numerics;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub use num_complex::Complex;

pub type Complex64 = Complex<f64>;
pub type Complex32 = Complex<f32>;

pub type ComplexMatrix64 = numerics::ComplexMatrix<f64>;
pub type ComplexMatrix32 = numerics::ComplexMatrix<f32>;

pub type Constellation64 = modem::Constellation<f64>;
pub type Constellation32 = modem::Constellation<f32>;

pub type SoftSymbol64 = modem::SoftSymbol<f64>;
pub type SoftSymbol32 = modem::SoftSymbol<f32>;

pub type Decoder64 = ldpc::Decoder<f64>;
pub type Decoder32 = ldpc::Decoder<f32>;

pub type DecodeResult64 = ldpc::DecodeResult<f64>;
pub type DecodeResult32 = ldpc::DecodeResult<f32>;

pub type Link64 = detectors::Link<f64>;
pub type Link32 = detectors::Link<f32>;
