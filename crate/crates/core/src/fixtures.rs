//! The smart-home management system model shipped with the crate.

use crate::model::SystemModel;

pub const SMART_HOME: &str = include_str!("../fixtures/smart_home.morph");

/// Known differences between the published case-study results and values
/// recomputed from its tables (TOML).
pub const SMART_HOME_ERRATA: &str = include_str!("../fixtures/smart_home.errata.toml");

pub fn smart_home() -> SystemModel {
    crate::modelfile::parse(SMART_HOME).expect("bundled fixture parses")
}
