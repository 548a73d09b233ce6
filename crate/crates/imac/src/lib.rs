//! File formats, run manifests, wall clocks, parallel fan-out and the `imac`
//! command line on top of `imac-core`.

pub mod bench;
pub mod cli;
pub mod clock;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod parallel;

pub use clock::{ClockKind, WallClock};
pub use error::{CliError, ErrorClass};
pub use manifest::{manifest_path, RunManifest};
