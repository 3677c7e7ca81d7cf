//! The sums-to-n scaling benchmark, written as CSV.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use kanren_core::rel::{standard_relations, sums_to_n};
use kanren_core::{EngineError, Limit, Query};

use crate::exec::{build_engine, EngineKind};

pub const DEFAULT_NUMS: [u64; 6] = [16, 64, 128, 256, 512, 1024];

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub nums: Vec<u64>,
    /// Engine and worker count per cell; the worker count is reported as 1
    /// for the baseline and 0 for the actor engine.
    pub engines: Vec<(EngineKind, usize)>,
    pub repeats: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub engine: EngineKind,
    pub workers: usize,
    pub num: u64,
    pub run: usize,
    pub seconds: f64,
    pub answers: usize,
}

pub const HEADER: &str = "engine,workers,num,run,seconds,answers";

impl Record {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{}",
            self.engine, self.workers, self.num, self.run, self.seconds, self.answers
        )
    }
}

/// Times one `run*` of `(sums-to-n q num)`.
pub fn time_once(
    engine: EngineKind,
    workers: usize,
    num: u64,
) -> Result<(f64, usize), EngineError> {
    let table = Arc::new(standard_relations());
    let e = build_engine(engine, workers, None);
    let q = Query::new(1, |v| sums_to_n(v[0].clone(), num));
    let start = Instant::now();
    let answers = q.solve(e.as_ref(), &table, Limit::All)?;
    Ok((start.elapsed().as_secs_f64(), answers.len()))
}

fn reported_workers(engine: EngineKind, workers: usize) -> usize {
    match engine {
        EngineKind::Baseline => 1,
        EngineKind::Actor => 0,
        EngineKind::Pool => workers,
    }
}

/// Runs every cell `repeats` times, writing a row per run and a `mean` row
/// per cell. Returns the individual records.
pub fn run(cfg: &BenchConfig, out: &mut dyn Write) -> io::Result<Vec<Record>> {
    writeln!(out, "{HEADER}")?;
    let mut all = Vec::new();
    for &(engine, workers) in &cfg.engines {
        let workers = reported_workers(engine, workers);
        for &num in &cfg.nums {
            let mut cell = Vec::new();
            for run in 1..=cfg.repeats {
                let (seconds, answers) = time_once(engine, workers.max(1), num)
                    .map_err(|e| io::Error::other(e.to_string()))?;
                let rec = Record {
                    engine,
                    workers,
                    num,
                    run,
                    seconds,
                    answers,
                };
                writeln!(out, "{}", rec.csv())?;
                out.flush()?;
                cell.push(rec);
            }
            if !cell.is_empty() {
                let mean = cell.iter().map(|r| r.seconds).sum::<f64>() / cell.len() as f64;
                writeln!(
                    out,
                    "{engine},{workers},{num},mean,{mean:.6},{}",
                    cell[0].answers
                )?;
            }
            all.extend(cell);
        }
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_means() {
        let cfg = BenchConfig {
            nums: vec![3, 8],
            engines: vec![(EngineKind::Baseline, 1), (EngineKind::Pool, 2)],
            repeats: 2,
        };
        let mut buf = Vec::new();
        let recs = run(&cfg, &mut buf).unwrap();
        assert_eq!(recs.len(), 8);
        assert!(recs.iter().all(|r| r.answers as u64 == r.num + 1));
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines.len(), 1 + 8 + 4);
        assert!(lines[3].starts_with("baseline,1,3,mean,"));
        assert!(lines.iter().any(|l| l.starts_with("pool,2,8,2,")));
    }
}
