//! Robust total-least-mean-squares adaptive filtering and multi-layered
//! joint estimation of self-interference and remote-transmission channels
//! for full-duplex (simultaneous transmit and receive) receivers.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the simulation harness uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod filters;
pub mod joint;
pub mod metrics;
pub mod robust;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use filters::{Algorithm, RegressionSample};
pub use scalar::Real;
pub use sim::StarScenario;

pub type FilterState = filters::FilterState<f64>;
pub type FilterState32 = filters::FilterState<f32>;
pub type MEstimateState = robust::MEstimateState<f64>;
pub type MEstimateConfig = robust::MEstimateConfig<f64>;
pub type LayerStack = joint::LayerStack<f64>;
pub type LayerStack32 = joint::LayerStack<f32>;
pub type LayerParams = joint::LayerParams<f64>;
pub type JointChannelEstimate = joint::JointChannelEstimate<f64>;
pub type TrainingTrace = joint::TrainingTrace<f64>;
pub type SignalRecord = sim::SignalRecord<f64>;
pub type ChannelRealization = sim::ChannelRealization<f64>;
