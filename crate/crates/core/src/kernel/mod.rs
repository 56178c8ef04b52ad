//! Random infectivity/susceptibility kernels and their laws.

mod duration;
mod initial;
mod law;
mod path;
mod step;

pub use duration::Duration;
pub use initial::{AgeLaw, InitialLaw, RecoveredInit, StartState};
pub use law::{Atom, Family, GammaStar, IndicatorForm, KernelLaw, LawStatistics};
pub use path::{KernelPath, PathBuilder};
pub use step::StepFunction;
