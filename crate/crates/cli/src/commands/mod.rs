//! Subcommand implementations. Each command derives everything it needs
//! from the config (no cross-command artifact dependencies), writes its
//! artifacts into the output directory, and registers them in the manifest.

mod augment;
mod cpicf_cmd;
mod delta;
mod gen_data;
mod train;
mod width_map;

pub use augment::cmd_augment;
pub use cpicf_cmd::{cmd_cpicf, CpicfArgs};
pub use delta::cmd_delta;
pub use gen_data::cmd_gen_data;
pub use train::cmd_train;
pub use width_map::cmd_width_map;

/// Whether a run completed cleanly or hit a soft failure (attrition above
/// the configured threshold). Artifacts are written either way.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Clean,
    SoftFailure(String),
}

/// Renders a float for CSV cells: shortest representation that parses back
/// to the same value.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
