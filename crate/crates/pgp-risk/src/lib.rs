//! Temporary build scaffold; full module map restored as modules land.
pub mod gp;
pub mod oracle;
pub mod pattern;
pub mod series;
pub mod risk;
