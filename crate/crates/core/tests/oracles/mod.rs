//! Slow, direct reference implementations shared by the test targets.
#![allow(dead_code)]

pub mod attention;
pub mod crf;
pub mod flood;
pub mod loss;
pub mod metrics;
pub mod saliency;
