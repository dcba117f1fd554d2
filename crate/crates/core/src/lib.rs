//! Real-time notifiable-disease surveillance for dengue.
//!
//! Hospitals register suspected cases, which are routed through the
//! administrative hierarchy to the Public Health Inspector (PHI) who covers
//! the patient's residence. PHIs record field attendance and 14-day travel
//! histories; the travel histories are folded into deduplicated *risk
//! places*. Everything is event-sourced, so the per-district live table,
//! weekly returns (H399) and response-cycle metrics are pure functions of
//! the event log.
//!
//! The main entry point is [`service::Surveillance`]. Runnable walkthroughs
//! of each capability live under `examples/`:
//!
//! ```bash
//! cargo run -p dengue-surveillance --example gazetteer_lookup
//! cargo run -p dengue-surveillance --example live_update
//! ```

pub mod alerting;
pub mod api;
pub mod case_registry;
pub mod config;
pub mod event;
pub mod fixtures;
pub mod gazetteer;
pub mod http;
pub mod log;
pub mod normalize;
pub mod ops;
pub mod reporting;
pub mod service;
pub mod state;
pub mod time;
pub mod travel_risk;
pub mod vocab;
pub mod workflow;

pub use case_registry::{CaseId, CaseIntakeForm, CaseRecord};
pub use gazetteer::{Gazetteer, ResidencePath};
pub use service::Surveillance;
pub use time::{Clock, DisplayZone, ManualClock, SystemClock};
