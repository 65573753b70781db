//! Pilot assignment for cell-free massive MIMO.
//!
//! The crate simulates uplink and downlink throughput of a cell-free network
//! in which `K` users share `tau_p` orthogonal pilots, and assigns those
//! pilots by solving a capacity-constrained diverse clustering problem.
//!
//! - [`scenario`]: radio parameters, AP/UE placement on a wrapped square,
//!   deterministic per-drop random streams.
//! - [`channel`]: path loss, shadowing, MMSE estimation statistics and a
//!   Monte Carlo check of the closed-form rate terms.
//! - [`rates`]: uplink/downlink SINR, max-min power control, throughput.
//! - [`dcp`]: the clustering objective and its O(1) move evaluation.
//! - [`solvers`]: Iterative Maxima Search and the baseline assignments.
//! - [`harness`]: configuration, Monte Carlo drops, statistics and output.

pub mod channel;
pub mod dcp;
pub mod harness;
pub mod rates;
pub mod scenario;
pub mod solvers;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenario.md")]
    mod scenario {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/ims.md")]
    mod ims {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
