//! Algorithmic core of the imac toolkit: THz network snapshots, lexicographic
//! association scoring, metaheuristic local search, relative labeling,
//! tree/Bayes classifiers, the codebook beam-selection environment and the
//! LoS/NLoS scene generator.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, wall clocks or threads lives in the `imac` companion crate.

#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod beamsim;
pub mod clock;
pub mod geom;
pub mod labeling;
pub mod learn;
pub mod lospredict;
pub mod pipeline;
pub mod rng;
pub mod scoring;
pub mod search;
pub mod topology;

pub use clock::{Clock, VirtualClock};
pub use geom::{Point, PolarPoint};
pub use labeling::{Quadrant, RelativeLabel};
pub use scoring::{Assignment, KpiReport, ScoreDelta, ScoreOrder, ScoreVector, ScoreWeights};
pub use search::{AcceptorConfig, Budget, Move, SearchTrace, SolveOutcome};
pub use topology::{AccessPoint, ApId, Snapshot, SnapshotConfig, UeId, UserEquipment};
