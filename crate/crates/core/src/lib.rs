//! Engagement scoring, bias removal, describable aesthetic features and
//! what-if tuning for promotional images.

pub mod aesthetics;
pub mod biasdetect;
pub mod corpus;
pub mod debias;
pub mod model;
pub mod tuner;
pub mod config;
pub mod pipeline;
pub mod service;
pub mod synth;
