//! Coordination of two nodes through a rate-limited relay.
//!
//! Two nodes `A1`, `A2` talk to a relay `A0` over backward links (rates
//! `Rb1`, `Rb2`) and then listen on forward links (`Rf1`, `Rf2`); they must
//! end up with `n` symbols `(Y1^n, Y2^n)` whose joint law is close in total
//! variation to `q^n`. This crate provides:
//!
//! * [`pmf`] / [`info`]: exact finite distributions, entropies, mutual
//!   informations, Markov slacks.
//! * [`wyner`]: a multi-start solver for Wyner's common information.
//! * [`region`]: inner- and outer-bound evaluation and membership search
//!   over auxiliary couplings, plus frontier scans.
//! * [`fme`]: Fourier–Motzkin elimination over rate inequalities, used to
//!   check that projecting out the auxiliary binning rates gives the inner
//!   bound.
//! * [`osrb`]: exact finite-`n` simulation of the random-binning protocol,
//!   including Slepian–Wolf decoding and derandomization of the shared
//!   indices.

pub mod error;
pub mod fme;
pub mod info;
pub mod osrb;
pub mod pmf;
pub mod region;
pub mod seeding;
pub mod sources;
pub mod wyner;

mod channel_search;

pub use error::{Error, Result};
pub use pmf::{make_joint, total_variation, Alphabet, ConditionalPmf, JointPmf};
