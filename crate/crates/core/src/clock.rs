//! Time sources for budgets and traces.

/// Elapsed-time source queried by the search loop. Implementations receive the
/// number of moves evaluated so far, which lets a virtual clock advance
/// deterministically.
pub trait Clock {
    fn elapsed_seconds(&mut self, moves_evaluated: u64) -> f64;
}

/// Deterministic clock: time advances by `1 / moves_per_second` per evaluated
/// move. Seconds budgets become reproducible step budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualClock {
    pub moves_per_second: f64,
}

impl VirtualClock {
    pub const DEFAULT_RATE: f64 = 200_000.0;

    pub fn new(moves_per_second: f64) -> Self {
        Self { moves_per_second }
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new(Self::DEFAULT_RATE)
    }
}

impl Clock for VirtualClock {
    fn elapsed_seconds(&mut self, moves_evaluated: u64) -> f64 {
        moves_evaluated as f64 / self.moves_per_second
    }
}

impl<C: Clock + ?Sized> Clock for alloc::boxed::Box<C> {
    fn elapsed_seconds(&mut self, moves_evaluated: u64) -> f64 {
        (**self).elapsed_seconds(moves_evaluated)
    }
}

impl<C: Clock + ?Sized> Clock for &mut C {
    fn elapsed_seconds(&mut self, moves_evaluated: u64) -> f64 {
        (**self).elapsed_seconds(moves_evaluated)
    }
}
