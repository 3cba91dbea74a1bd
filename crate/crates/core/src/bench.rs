//! Explicit vs reduced engine comparisons for trend inspection.

use serde::Serialize;

use crate::engine::{verify, Engine, EngineConfig, Epsilon, GridStep, VerdictKind};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::property::{Property, RobustnessProperty};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub percent: f64,
    pub engine: Engine,
    pub wall_ms: f64,
    /// Grid points (explicit) or boxes explored (reduced).
    pub work: u64,
    pub verdict: VerdictKind,
}

fn work_of(engine: Engine, stats: &crate::engine::Stats) -> u64 {
    match engine {
        Engine::Explicit => stats.points,
        Engine::Reduced => stats.boxes_explored,
    }
}

/// Run both engines at every noise level of `sweep`.
pub fn noise_sweep(net: &Network, base: &RobustnessProperty, sweep: &[f64], cfg: &EngineConfig) -> Result<Vec<BenchRow>> {
    if sweep.is_empty() {
        return Err(Error::Config("noise sweep is empty".into()));
    }
    let mut rows = Vec::with_capacity(sweep.len() * 2);
    for &percent in sweep {
        let prop = Property::Robustness(base.with_percent(percent)?);
        for engine in [Engine::Explicit, Engine::Reduced] {
            let v = verify(net, &prop, engine, cfg)?;
            rows.push(BenchRow {
                percent,
                engine,
                wall_ms: v.stats.wall_ms,
                work: work_of(engine, &v.stats),
                verdict: v.kind,
            });
        }
    }
    Ok(rows)
}

/// Columns: `percent,engine,wall_ms,work,verdict`.
pub fn write_bench_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["percent", "engine", "wall_ms", "work", "verdict"])?;
    for r in rows {
        let engine = match r.engine {
            Engine::Explicit => "explicit",
            Engine::Reduced => "reduced",
        };
        w.write_record(&[
            r.percent.to_string(),
            engine.to_string(),
            format!("{:.6}", r.wall_ms),
            r.work.to_string(),
            r.verdict.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub divisions: u64,
    pub explicit_ms: f64,
    pub explicit_points: u64,
    pub explicit_verdict: VerdictKind,
    pub reduced_ms: f64,
    pub reduced_boxes: u64,
    pub reduced_verdict: VerdictKind,
}

/// For each grid density, time the explicit engine with `divisions` steps
/// per node and the reduced engine with epsilon `1/divisions` of the box
/// width. Times are the minimum over `repeats` runs.
pub fn density_trend(
    net: &Network,
    prop: &Property,
    divisions: &[u64],
    repeats: usize,
    cfg: &EngineConfig,
) -> Result<Vec<DensityRow>> {
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(divisions.len());
    for &d in divisions {
        if d == 0 {
            return Err(Error::Config("grid divisions must be positive".into()));
        }
        let c = EngineConfig {
            grid_step: GridStep::Divisions(d),
            epsilon: Epsilon::Relative(1.0 / d as f64),
            ..cfg.clone()
        };
        let best = |engine: Engine| -> Result<(f64, u64, VerdictKind)> {
            let mut out = (f64::INFINITY, 0, VerdictKind::Timeout);
            for _ in 0..repeats {
                let v = verify(net, prop, engine, &c)?;
                if v.stats.wall_ms < out.0 {
                    out = (v.stats.wall_ms, work_of(engine, &v.stats), v.kind);
                }
            }
            Ok(out)
        };
        let (explicit_ms, explicit_points, explicit_verdict) = best(Engine::Explicit)?;
        let (reduced_ms, reduced_boxes, reduced_verdict) = best(Engine::Reduced)?;
        rows.push(DensityRow {
            divisions: d,
            explicit_ms,
            explicit_points,
            explicit_verdict,
            reduced_ms,
            reduced_boxes,
            reduced_verdict,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::random_net;
    use crate::property::NoiseSpec;

    #[test]
    fn sweep_has_two_rows_per_level() {
        let net = random_net(&[2, 3, 2], 7);
        let base = RobustnessProperty::new(&net, "b", vec![0.5, -0.4], NoiseSpec::uniform(1.0, 2).unwrap()).unwrap();
        let rows = noise_sweep(&net, &base, &[2.0, 5.0, 8.0, 10.0], &EngineConfig::default()).unwrap();
        assert_eq!(rows.len(), 8);
        let mut buf = Vec::new();
        write_bench_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("percent,engine,wall_ms,work,verdict\n"));
    }

    #[test]
    fn explicit_work_tracks_density() {
        let net = random_net(&[3, 5, 3], 2);
        let base = RobustnessProperty::new(&net, "b", vec![0.5, -0.4, 0.2], NoiseSpec::uniform(0.5, 3).unwrap()).unwrap();
        let rows = density_trend(&net, &Property::Robustness(base), &[2, 4], 1, &EngineConfig::default()).unwrap();
        if rows.iter().all(|r| r.explicit_verdict == VerdictKind::Unsat) {
            assert_eq!(rows[0].explicit_points, 27);
            assert_eq!(rows[1].explicit_points, 125);
        }
    }
}
