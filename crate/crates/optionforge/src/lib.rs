//! optionforge: intrinsically motivated option learning on enumerable MDPs.
//!
//! The crate trains option-conditioned policies with three empowerment-style
//! objectives (final-state, per-state, and trajectory discrimination), and
//! pairs them with an exact mutual-information oracle so that learning
//! progress can be measured in closed form rather than by proxy.
//!
//! Modules:
//! - [`env`]: enumerable MDPs with explicit transition tensors.
//! - [`option_core`]: option identifiers, priors over options, trajectories.
//! - [`discriminator`]: tabular and MLP classifiers from observations to options.
//! - [`policy`]: tabular softmax policies with REINFORCE updates.
//! - [`rewards`]: intrinsic reward definitions for the three objectives.
//! - [`trainers`]: episode loops tying the pieces together.
//! - [`oracle`]: exact MI, channel capacity, and occupancy diagnostics.
//! - [`harness`]: config/manifest parsing, checkpoints, and run orchestration.

pub mod discriminator;
pub mod env;
pub mod error;
pub mod harness;
pub mod option_core;
pub mod oracle;
pub mod policy;
pub mod rewards;
pub mod trainers;

pub use error::{Error, Result};
