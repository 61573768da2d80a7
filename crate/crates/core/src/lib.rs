//! Learning to bid in repeated first-price auctions under max-shilling
//! feedback: distributions, protocol environment, statistical certificates,
//! the epoch-elimination learner and baselines, lemma checks, and the
//! experiment harness.

pub mod certificates;
pub mod distributions;
pub mod environment;
pub mod harness;
pub mod linalg;
pub mod policy;
pub mod verify;
