//! Intent-aware runtime permissions.
//!
//! * [`model`]: permissions, purpose labels, scope limitations and the
//!   intent registry.
//! * [`pipeline`]: builds the registry from privacy-policy text.
//! * [`broker`]: runtime mediation of permission requests.
//! * [`harness`]: scenario replay, automated decisions and benchmarks.

pub mod data;
pub mod exec;
pub mod model;
pub mod pipeline;
pub mod broker;
pub mod harness;
pub mod text;

pub use exec::ExecMode;
