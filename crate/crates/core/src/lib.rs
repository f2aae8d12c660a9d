//! Discrete-event simulation of event-driven time-domain Tsetlin machine
//! inference datapaths.
//!
//! The crate is organised around a deterministic integer-picosecond event
//! kernel ([`kernel`]) on which the behavioural hardware models are built:
//!
//! * [`model`] — trained machine description (dimensions, include/exclude
//!   masks, clause weights), dataset loading and booleanization.
//! * [`inference`] — the untimed digital golden model: clause evaluation,
//!   class sums, argmax. Every timed mode is checked against it.
//! * [`click`] — two-phase bundled-data handshake machinery: click-element
//!   pipeline stages, the Muller C-element, and the two-to-four phase bridge.
//! * [`time_domain`] — delay encodings for classification: Hamming-distance
//!   race delays, signed split, leading-ones coarse/fine compression, Vernier
//!   TDC and the digitally-controlled delay element.
//! * [`arbitration`] — the Winner-Takes-All terminal: Mutex with behavioural
//!   metastability, tree-based and mesh arbiters.
//! * [`sim`] — assembles kernel, pipeline, delay paths and arbitration into a
//!   full batch run with per-sample diagnostics.
//! * [`metrics`] — throughput and energy-efficiency formulas plus the
//!   transition-count activity proxy.
//! * [`report`] — deterministic CSV / text emission of run results.
//! * [`config`] — flat key-value run configuration shared with the CLI.

pub mod arbitration;
pub mod click;
pub mod config;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod metrics;
pub mod model;
pub mod report;
pub mod sim;
pub mod time_domain;
pub mod vcd;

pub use error::Error;
pub use kernel::{Edge, Kernel, SignalId, SimTime};
pub use model::{Sample, TmModel, Variant};
