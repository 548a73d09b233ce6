//! Clock selection for budgets and traces.

use std::time::Instant;

use imac_core::clock::{Clock, VirtualClock};

/// Real elapsed time since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn start() -> Self {
        Self { start: Instant::now() }
    }

    pub fn seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

impl Clock for WallClock {
    fn elapsed_seconds(&mut self, _moves_evaluated: u64) -> f64 {
        self.seconds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockKind {
    /// Time advances with evaluated moves; seeded runs are reproducible.
    #[default]
    Virtual,
    Wall,
}

impl ClockKind {
    /// A fresh clock starting at zero.
    pub fn start(self) -> Box<dyn Clock + Send> {
        match self {
            ClockKind::Virtual => Box::new(VirtualClock::default()),
            ClockKind::Wall => Box::new(WallClock::start()),
        }
    }
}
