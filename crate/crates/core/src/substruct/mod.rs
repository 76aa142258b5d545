//! Substructure patterns, key tables and functional-group labels.

mod pattern;
mod table;

pub use pattern::{Pattern, PatternError, MAX_PATTERN_ATOMS};
pub use table::{
    functional_group_table, functional_groups, functional_groups_with, maccs_keys, maccs_table, FunctionalGroupLabel,
    KeyEntry, KeyPresence, KeyTable, TableError, FUNCTIONAL_GROUP_COUNT,
};
