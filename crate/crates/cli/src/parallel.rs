//! Thread-pool executor and wall clock for the core pipeline.

use std::time::Instant;

use nodalquad_core::exec::{Clock, Executor};
use rayon::prelude::*;

/// Runs per-cell work on the global rayon pool. Results keep cell order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl Executor for RayonExecutor {
    fn map_cells<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order() {
        let v = RayonExecutor.map_cells(1000, |k| k * 2);
        assert!(v.iter().enumerate().all(|(k, &x)| x == 2 * k));
    }
}
