//! Influence campaigns on follower networks under bounded-confidence opinion
//! dynamics.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`]: directed follower graphs with per-edge share rates.
//! - [`dynamics`]: the bounded-confidence shift function, the opinion drift
//!   field and a fixed-step RK4 integrator driven by a content policy.
//! - [`objectives`]: mean / variance campaign objectives and their gradients.
//! - [`policy`]: the greedy nudging content policy and the static DeGroot
//!   baseline.
//! - [`targeting`]: greedy target selection for several agents.
//! - [`oracle`]: brute-force references and regression counterexamples.
//! - [`campaign`]: config-driven end-to-end experiments and exports.
//! - [`llm`]: rendering numeric content opinions into chat-completion prompts.
//!
//! Edge direction convention: an edge `(source, target, rate)` means `target`
//! follows `source` and receives its posts at `rate` posts per unit time.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod dynamics;
pub mod error;
pub mod llm;
pub mod network;
pub mod objectives;
pub mod oracle;
pub mod policy;
pub mod targeting;

pub use dynamics::{ModelParams, Trajectory};
pub use error::{Error, Result};
pub use network::Network;
pub use objectives::ObjectiveKind;
pub use policy::{PolicyFamily, PolicyParams};
pub use targeting::{TargetMatrix, TargetingConfig};
