//! Interactive AC-3 tutor with a behavior-mined learner model.
//!
//! The crate covers the stepping constraint engine, the offline discovery
//! pipeline that turns interaction logs into weighted class association
//! rules, the online classifier and hint engine driven by those rules, the
//! why/how explanation pages, an HTTP session service and a simulator.

pub mod classifier;
pub mod csp;
pub mod discovery;
pub mod explain;
pub mod fixtures;
pub mod hints;
pub mod interaction;
pub mod problem;
pub mod service;
pub mod sim;
