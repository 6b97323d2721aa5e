//! Model files, output writers and commands behind the `certilind` binary.

pub mod commands;
pub mod expr;
pub mod model_file;
pub mod output;
pub mod poly;
pub mod presets;
