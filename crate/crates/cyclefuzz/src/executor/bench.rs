//! Throughput sweeps across executor modes and worker counts.
//!
//! Every point runs the same campaign configuration under a fixed
//! wall-clock budget; iteration and stagnation limits are lifted so the
//! budget is the only stop condition. Speedups are relative to the serial
//! executor, which is measured first.

use std::time::Duration;

use crate::{Error, Result};

use super::{run_campaign, ExecMode, FuzzConfig};

/// One measured cell of a sweep.
#[derive(Clone, Copy, Debug)]
pub struct BenchPoint {
    pub mode: ExecMode,
    pub threads: usize,
    pub throughput: f64,
    pub speedup: f64,
}

pub const CSV_HEADER: &str = "mode,threads,throughput_cycles_per_sec,speedup";

/// Renders sweep results as CSV, one row per point.
pub fn to_csv(points: &[BenchPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{:.3},{:.4}\n",
            p.mode.as_str(),
            p.threads,
            p.throughput,
            p.speedup
        ));
    }
    out
}

fn configure(base: &FuzzConfig, mode: ExecMode, threads: usize, budget: Duration) -> FuzzConfig {
    let mut cfg = base.clone();
    cfg.mode = mode;
    cfg.threads = threads;
    cfg.batch_size = None;
    cfg.max_wall = Some(budget);
    cfg.max_iterations = u64::MAX;
    cfg.stagnation_window = u64::MAX;
    cfg.output_dir = None;
    cfg.trace_lineage = false;
    cfg
}

fn measure(base: &FuzzConfig, mode: ExecMode, threads: usize, budget: Duration) -> Result<f64> {
    let cfg = configure(base, mode, threads, budget);
    let out = run_campaign(&cfg)?;
    out.report.throughput()
}

/// Runs the full `modes x threads` grid. The serial mode only exists on one
/// worker, so other thread counts are skipped for it. Returns points in
/// grid order.
pub fn run_sweep(
    base: &FuzzConfig,
    modes: &[ExecMode],
    threads: &[usize],
    budget: Duration,
) -> Result<Vec<BenchPoint>> {
    if modes.is_empty() || threads.is_empty() {
        return Err(Error::Config(
            "bench sweep needs at least one mode and one thread count".into(),
        ));
    }
    if budget.is_zero() {
        return Err(Error::Config("bench budget must be positive".into()));
    }
    let baseline = measure(base, ExecMode::Serial, 1, budget)?;
    let mut points = Vec::new();
    for &mode in modes {
        for &t in threads {
            if mode == ExecMode::Serial && t != 1 {
                continue;
            }
            let throughput = if mode == ExecMode::Serial {
                baseline
            } else {
                measure(base, mode, t, budget)?
            };
            points.push(BenchPoint {
                mode,
                threads: t,
                throughput,
                speedup: throughput / baseline,
            });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dut::toy_cpu;
    use crate::executor::{DutSelection, SeedSource};

    #[test]
    fn csv_layout_is_stable() {
        let points = [
            BenchPoint {
                mode: ExecMode::Batch,
                threads: 1,
                throughput: 1234.5,
                speedup: 1.0,
            },
            BenchPoint {
                mode: ExecMode::Pipelined,
                threads: 4,
                throughput: 4321.0,
                speedup: 3.5,
            },
        ];
        let csv = to_csv(&points);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("mode,threads,throughput_cycles_per_sec,speedup")
        );
        assert_eq!(lines.next(), Some("batch,1,1234.500,1.0000"));
        assert_eq!(lines.next(), Some("pipelined,4,4321.000,3.5000"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn sweep_skips_multi_worker_serial_and_measures_the_rest() {
        let base = FuzzConfig::new(
            DutSelection::Bundled("toy-cpu".to_string()),
            SeedSource::Inline(toy_cpu::starter_corpus()),
        );
        let points = run_sweep(
            &base,
            &[ExecMode::Serial, ExecMode::Batch],
            &[1, 2],
            Duration::from_millis(60),
        )
        .unwrap();
        let cells: Vec<(ExecMode, usize)> = points.iter().map(|p| (p.mode, p.threads)).collect();
        assert_eq!(
            cells,
            vec![
                (ExecMode::Serial, 1),
                (ExecMode::Batch, 1),
                (ExecMode::Batch, 2)
            ]
        );
        for p in &points {
            assert!(p.throughput > 0.0, "no cycles measured for {cells:?}");
            assert!(p.speedup > 0.0);
        }
        let serial = points
            .iter()
            .find(|p| p.mode == ExecMode::Serial && p.threads == 1)
            .unwrap();
        assert!((serial.speedup - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let base = FuzzConfig::new(
            DutSelection::Bundled("toy-cpu".to_string()),
            SeedSource::Inline(toy_cpu::starter_corpus()),
        );
        assert!(run_sweep(&base, &[], &[1], Duration::from_millis(10)).is_err());
        assert!(run_sweep(&base, &[ExecMode::Batch], &[], Duration::from_millis(10)).is_err());
        assert!(run_sweep(&base, &[ExecMode::Batch], &[1], Duration::ZERO).is_err());
    }
}
