//! Link-level Monte-Carlo simulator for uplink cell-free massive MIMO.
//!
//! The receive chain runs at a central processor that sees every access
//! point (AP): pilot-based MMSE channel estimation, large-scale-fading AP
//! selection, an MMSE soft interference cancellation (soft-IC) detector
//! and its list-based variant, and an LDPC box-plus sum-product decoder
//! that exchanges extrinsic LLRs with the detector in an iterative
//! detection and decoding (IDD) loop.
//!
//! Module map:
//!
//! * [`geometry`] network placement, pathloss, spatial correlation, fading.
//! * [`estimation`] pilot assignment, pilot reception, MMSE estimates.
//! * [`selection`] master-AP and threshold AP selection masks.
//! * [`soft`] constellations and LLR to symbol statistics.
//! * [`detect`] closed-form MMSE soft-IC filters and their limits.
//! * [`list`] list detection with a shadow-area reliability test.
//! * [`ldpc`] code construction, encoding, alist I/O and decoding.
//! * [`idd`] effective AWGN model, extrinsic LLRs and the IDD loop.
//! * [`sim`] configuration, trials, sweeps and CSV output.

pub mod detect;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod idd;
pub mod ldpc;
pub mod linalg;
pub mod list;
pub mod selection;
pub mod sim;
pub mod soft;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
