//! LDPC codes: construction, encoding, alist interchange and decoding.

mod alist;
mod code;
mod decoder;
mod peg;

pub use alist::{read_alist, write_alist, parse_alist, format_alist};
pub use code::LinearCode;
pub use decoder::{box_plus, decode, DecodeResult, Decoder, DecoderConfig};
pub use peg::peg_checks;

/// Default code parameters: N = 256 coded bits, M = 128 checks, rate 1/2.
pub const DEFAULT_N: usize = 256;
pub const DEFAULT_M: usize = 128;
pub const DEFAULT_COLUMN_WEIGHT: usize = 3;

/// PEG attempts (with consecutive seeds) before construction gives up.
pub const CONSTRUCTION_RETRIES: u64 = 64;
