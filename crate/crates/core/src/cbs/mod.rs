//! Component-based systems: atomic components, interactions, the composite
//! semantics and structural checks.

pub mod semantics;
pub mod serialize;
pub mod structure;
pub mod system;

pub use semantics::{sys_explore, sys_steps, Semantics, SemError, SysExploration, SysLabel, SysRule, SysState, SysStep};
pub use serialize::{from_text, to_text};
pub use structure::check_structure;
pub use system::{Component, CompositeSystem, Interaction, Transition};
