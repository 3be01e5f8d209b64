//! Mesh convergence studies and thread-scaling benchmarks.

use std::fmt::Write as _;
use std::time::Instant;

use crate::analysis::{convergence_rate, mean_rate, ConvergenceInput, MeshSeries, RatePoint};
use crate::deck::Deck;
use crate::error::{Error, Result};
use crate::output::num;
use crate::runtime::{PerfCounters, Runtime};
use crate::simulation::Simulation;

/// Rate curves of every window of three consecutive meshes.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub spacings: Vec<f64>,
    pub ratio: f64,
    pub times: Vec<f64>,
    /// `sets[k]` uses meshes `k, k + 1, k + 2`.
    pub sets: Vec<Vec<RatePoint>>,
}

impl ConvergenceStudy {
    /// Time-averaged rate of each set, skipping times inside `exclude`.
    pub fn means(&self, exclude: Option<(f64, f64)>) -> Vec<Option<f64>> {
        self.sets.iter().map(|s| mean_rate(s, exclude)).collect()
    }

    /// `time,alpha_1,...` with `nan` where a rate is undefined.
    pub fn csv(&self) -> String {
        let mut out = String::from("time");
        for k in 1..=self.sets.len() {
            let _ = write!(out, ",alpha_{k}");
        }
        out.push('\n');
        for (t, time) in self.times.iter().enumerate() {
            out.push_str(&num(*time));
            for set in &self.sets {
                match set[t].alpha {
                    Some(a) => {
                        let _ = write!(out, ",{}", num(a));
                    }
                    None => out.push_str(",nan"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Common ratio of consecutive spacings.
pub fn refinement_ratio(spacings: &[f64]) -> Result<f64> {
    if spacings.len() < 3 {
        return Err(Error::Convergence(format!(
            "a convergence study needs at least 3 meshes, got {}",
            spacings.len()
        )));
    }
    if spacings.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::Convergence(format!("mesh spacings must be positive, got {spacings:?}")));
    }
    let ratio = spacings[0] / spacings[1];
    if !(ratio > 1.0) {
        return Err(Error::Convergence("mesh spacings must decrease".into()));
    }
    for w in spacings.windows(2) {
        let r = w[0] / w[1];
        if (r - ratio).abs() > 1e-9 * ratio {
            return Err(Error::Convergence(format!("spacings {spacings:?} are not refined by a constant ratio")));
        }
    }
    Ok(ratio)
}

/// Runs `deck` once per spacing and estimates the convergence rate at the
/// snapshot times.
pub fn run_convergence(deck: &Deck, spacings: &[f64], rt: &Runtime) -> Result<ConvergenceStudy> {
    let ratio = refinement_ratio(spacings)?;
    let mut meshes = Vec::with_capacity(spacings.len());
    let mut times: Option<Vec<f64>> = None;
    for &h in spacings {
        let mut mesh_deck = deck.clone();
        mesh_deck.geometry.h = h;
        let sim = Simulation::from_deck(mesh_deck, rt)?;
        let result = sim.run(rt)?;
        let t: Vec<f64> = result.snapshots.iter().map(|s| s.state.time).collect();
        match &times {
            None => times = Some(t),
            Some(first) => {
                let same = first.len() == t.len() && first.iter().zip(&t).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
                if !same {
                    return Err(Error::Convergence(format!("mesh h = {h} was sampled at different times")));
                }
            }
        }
        meshes.push(MeshSeries {
            cloud: sim.body.cloud,
            fields: result.snapshots.into_iter().map(|s| s.state.u).collect(),
        });
    }
    let times = times.unwrap_or_default();
    let sets = meshes
        .windows(3)
        .map(|w| {
            convergence_rate(&ConvergenceInput {
                meshes: [w[0].clone(), w[1].clone(), w[2].clone()],
                ratio,
                times: times.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy {
        spacings: spacings.to_vec(),
        ratio,
        times,
        sets,
    })
}

pub const BENCH_HEADER: &str = "threads,wall_s,speedup,efficiency,model_s";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub threads: usize,
    pub wall_s: f64,
    /// Relative to the first entry of the thread list.
    pub speedup: f64,
    pub efficiency: f64,
    /// Work model `c / p`, with `c` fitted to the first entry.
    pub model_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub counters: Vec<(usize, PerfCounters)>,
    /// Whether every thread count produced bitwise identical final fields.
    pub identical: bool,
}

impl BenchReport {
    pub fn csv(&self) -> String {
        let mut out = format!("{BENCH_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.threads,
                num(r.wall_s),
                num(r.speedup),
                num(r.efficiency),
                num(r.model_s)
            );
        }
        out
    }

    /// Per-thread counters of every run, prefixed by its thread count.
    pub fn counters_csv(&self) -> String {
        let mut out = String::from("threads,thread,busy_s,wall_s,utilization\n");
        for (threads, c) in &self.counters {
            for t in &c.threads {
                let _ = writeln!(
                    out,
                    "{threads},{},{},{},{}",
                    t.thread,
                    num(t.busy_s),
                    num(t.wall_s),
                    num(t.utilization)
                );
            }
        }
        out
    }
}

/// Times `deck` on a fresh runtime for each thread count.
pub fn run_bench(deck: &Deck, threads: &[usize]) -> Result<BenchReport> {
    if threads.is_empty() {
        return Err(Error::Parameter("the thread list is empty".into()));
    }
    let mut rows: Vec<BenchRow> = Vec::with_capacity(threads.len());
    let mut counters = Vec::with_capacity(threads.len());
    let mut reference: Option<Vec<u64>> = None;
    let mut identical = true;
    for &p in threads {
        let rt = Runtime::new(p)?;
        let sim = Simulation::from_deck(deck.clone(), &rt)?;
        rt.reset_counters();
        let start = Instant::now();
        let result = sim.run(&rt)?;
        let wall_s = start.elapsed().as_secs_f64();
        counters.push((p, rt.collect_counters()));
        let bits: Vec<u64> = result.last().u.iter().map(|x| x.to_bits()).collect();
        match &reference {
            None => reference = Some(bits),
            Some(r) => identical &= *r == bits,
        }
        let (base_threads, base_wall) = rows.first().map_or((p, wall_s), |r| (r.threads, r.wall_s));
        let speedup = base_wall / wall_s;
        rows.push(BenchRow {
            threads: p,
            wall_s,
            speedup,
            efficiency: speedup * base_threads as f64 / p as f64,
            model_s: base_wall * base_threads as f64 / p as f64,
        });
    }
    Ok(BenchReport {
        rows,
        counters,
        identical,
    })
}
