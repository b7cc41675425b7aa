//! Stage timing and campaign throughput accounting.

use std::time::Duration;

use crate::{Error, Result};

/// A fuzzing-loop stage whose time is attributed separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Seed selection plus chromosome mutation plus translation.
    Mutation,
    /// Driving the DUT cycle by cycle.
    Simulation,
    /// Reading coverage out of the DUT.
    CoverageCollect,
    /// Folding results back into the corpus.
    CorpusUpdate,
}

/// Per-stage accumulated durations plus work counters.
#[derive(Clone, Copy, Debug, Default)]
pub struct StageTimer {
    mutation: Duration,
    simulation: Duration,
    coverage_collect: Duration,
    corpus_update: Duration,
    pub iterations: u64,
    pub cycles: u64,
}

/// Fraction of attributed time spent in mutation, simulation, and coverage
/// (collection plus corpus update). Sums to 1 when any time was recorded.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageShares {
    pub mutation: f64,
    pub simulation: f64,
    pub coverage: f64,
}

impl StageTimer {
    pub fn record(&mut self, stage: Stage, elapsed: Duration) {
        match stage {
            Stage::Mutation => self.mutation += elapsed,
            Stage::Simulation => self.simulation += elapsed,
            Stage::CoverageCollect => self.coverage_collect += elapsed,
            Stage::CorpusUpdate => self.corpus_update += elapsed,
        }
    }

    pub fn merge(&mut self, other: &StageTimer) {
        self.mutation += other.mutation;
        self.simulation += other.simulation;
        self.coverage_collect += other.coverage_collect;
        self.corpus_update += other.corpus_update;
        self.iterations += other.iterations;
        self.cycles += other.cycles;
    }

    pub fn stage(&self, stage: Stage) -> Duration {
        match stage {
            Stage::Mutation => self.mutation,
            Stage::Simulation => self.simulation,
            Stage::CoverageCollect => self.coverage_collect,
            Stage::CorpusUpdate => self.corpus_update,
        }
    }

    /// Total time attributed to any stage.
    pub fn attributed(&self) -> Duration {
        self.mutation + self.simulation + self.coverage_collect + self.corpus_update
    }

    pub fn shares(&self) -> StageShares {
        let total = self.attributed().as_secs_f64();
        if total <= 0.0 {
            return StageShares::default();
        }
        StageShares {
            mutation: self.mutation.as_secs_f64() / total,
            simulation: self.simulation.as_secs_f64() / total,
            coverage: (self.coverage_collect + self.corpus_update).as_secs_f64() / total,
        }
    }
}

/// Input clock cycles simulated per wall-clock second.
pub fn throughput(cycles: u64, wall: Duration) -> Result<f64> {
    if wall.is_zero() {
        return Err(Error::ZeroElapsed);
    }
    Ok(cycles as f64 / wall.as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throughput_is_cycles_over_wall_seconds() {
        let t = throughput(1000, Duration::from_secs(2)).unwrap();
        assert!((t - 500.0).abs() < 1e-9);
    }

    #[test]
    fn zero_wall_time_is_an_error() {
        assert!(matches!(
            throughput(1000, Duration::ZERO),
            Err(Error::ZeroElapsed)
        ));
    }

    #[test]
    fn shares_partition_attributed_time() {
        let mut timer = StageTimer::default();
        timer.record(Stage::Mutation, Duration::from_millis(250));
        timer.record(Stage::Simulation, Duration::from_millis(250));
        timer.record(Stage::CoverageCollect, Duration::from_millis(300));
        timer.record(Stage::CorpusUpdate, Duration::from_millis(200));
        let s = timer.shares();
        assert!((s.mutation - 0.25).abs() < 1e-9);
        assert!((s.simulation - 0.25).abs() < 1e-9);
        assert!((s.coverage - 0.5).abs() < 1e-9);
        assert!((s.mutation + s.simulation + s.coverage - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_timer_has_zero_shares() {
        let s = StageTimer::default().shares();
        assert_eq!(s, StageShares::default());
    }

    #[test]
    fn merge_adds_all_fields() {
        let mut a = StageTimer::default();
        a.record(Stage::Mutation, Duration::from_millis(10));
        a.iterations = 2;
        a.cycles = 100;
        let mut b = StageTimer::default();
        b.record(Stage::Mutation, Duration::from_millis(30));
        b.record(Stage::Simulation, Duration::from_millis(60));
        b.iterations = 3;
        b.cycles = 900;
        a.merge(&b);
        assert_eq!(a.stage(Stage::Mutation), Duration::from_millis(40));
        assert_eq!(a.stage(Stage::Simulation), Duration::from_millis(60));
        assert_eq!(a.iterations, 5);
        assert_eq!(a.cycles, 1000);
    }
}
