//! Data-parallel loops, task futures and utilisation counters.
//!
//! All hot loops of the toolkit go through [`Runtime`]. The contract is
//! small:
//!
//! * [`Runtime::parallel_for`] and friends run a body for every index of a
//!   range exactly once. Bodies may only write to index-disjoint outputs; the
//!   row variants ([`Runtime::for_each_row`]) enforce this through the borrow
//!   checker.
//! * Asynchronous work is launched inside [`Runtime::scope`] (or with
//!   [`Runtime::spawn`] for `'static` jobs) and yields a [`TaskHandle`] that
//!   must be joined. [`wait_all`] joins a set of handles and aggregates every
//!   failure.
//! * Reductions ([`Runtime::sum`], [`Runtime::dot`]) use fixed-size blocks
//!   combined in block order, so results are bitwise identical for any
//!   number of worker threads.
//!
//! Per-thread busy time is accumulated for every chunk executed by the pool
//! and reported by [`Runtime::collect_counters`].

use std::any::Any;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "PERIDYN_THREADS";

/// Block length of deterministic reductions. Must not depend on the thread
/// count.
const REDUCTION_BLOCK: usize = 1024;

/// Execution policy of a parallel loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Return once every index has been processed.
    Sync,
    /// Launch the loop and hand back a [`TaskHandle`].
    Async,
}

struct Counters {
    epoch: Mutex<Instant>,
    busy_ns: Vec<AtomicU64>,
}

impl Counters {
    fn new(threads: usize) -> Self {
        Counters {
            epoch: Mutex::new(Instant::now()),
            busy_ns: (0..threads).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    fn record(&self, start: Instant) {
        if let Some(idx) = rayon::current_thread_index() {
            if let Some(slot) = self.busy_ns.get(idx) {
                slot.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
            }
        }
    }
}

pub struct Runtime {
    pool: rayon::ThreadPool,
    threads: usize,
    counters: Arc<Counters>,
}

impl fmt::Debug for Runtime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runtime").field("threads", &self.threads).finish()
    }
}

impl Runtime {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::Parameter("thread count must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("peridyn-worker-{i}"))
            .build()
            .map_err(|e| Error::Parameter(format!("cannot start thread pool: {e}")))?;
        Ok(Runtime {
            pool,
            threads,
            counters: Arc::new(Counters::new(threads)),
        })
    }

    /// Single worker thread.
    pub fn serial() -> Self {
        Runtime::new(1).expect("a single-thread pool can always be created")
    }

    /// Worker count from `PERIDYN_THREADS`, falling back to the number of
    /// available cores.
    pub fn from_env() -> Result<Self> {
        Runtime::new(default_threads()?)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Static partition of `0..n` into at most `threads` contiguous ranges.
    fn partition(&self, n: usize) -> Vec<std::ops::Range<usize>> {
        let chunks = self.threads.min(n);
        (0..chunks)
            .map(|c| (c * n / chunks)..((c + 1) * n / chunks))
            .collect()
    }

    /// Runs `body(i)` for every `i` in `0..n`, blocking until all are done.
    ///
    /// A panic in `body` is re-raised at the call site.
    pub fn parallel_for<F>(&self, n: usize, body: F)
    where
        F: Fn(usize) + Sync + Send,
    {
        if n == 0 {
            return;
        }
        let ranges = self.partition(n);
        let counters = &self.counters;
        self.pool.install(|| {
            ranges.into_par_iter().for_each(|range| {
                let start = Instant::now();
                for i in range {
                    body(i);
                }
                counters.record(start);
            })
        });
    }

    /// Runs `body(i, row)` over the rows of `out`, each row `width` wide.
    pub fn for_each_row<T, F>(&self, out: &mut [T], width: usize, body: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        self.try_for_each_row(out, width, |i, row| {
            body(i, row);
            Ok::<(), std::convert::Infallible>(())
        })
        .unwrap_or_else(|never| match never {});
    }

    /// Fallible row loop. When several rows fail, the error of the lowest
    /// row index is returned.
    pub fn try_for_each_row<T, E, F>(&self, out: &mut [T], width: usize, body: F) -> Result<(), E>
    where
        T: Send,
        E: Send,
        F: Fn(usize, &mut [T]) -> Result<(), E> + Sync + Send,
    {
        assert!(width > 0, "row width must be positive");
        assert_eq!(out.len() % width, 0, "output length is not a multiple of the row width");
        let n = out.len() / width;
        if n == 0 {
            return Ok(());
        }
        let mut pieces = Vec::new();
        let mut rest = out;
        for range in self.partition(n) {
            let (head, tail) = rest.split_at_mut(range.len() * width);
            pieces.push((range.start, head));
            rest = tail;
        }
        let counters = &self.counters;
        let failures: Vec<(usize, E)> = self.pool.install(|| {
            pieces
                .into_par_iter()
                .filter_map(|(first, chunk)| {
                    let start = Instant::now();
                    let mut failed = None;
                    for (k, row) in chunk.chunks_mut(width).enumerate() {
                        if let Err(e) = body(first + k, row) {
                            failed = Some((first + k, e));
                            break;
                        }
                    }
                    counters.record(start);
                    failed
                })
                .collect()
        });
        match failures.into_iter().min_by_key(|(i, _)| *i) {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    }

    /// Ordered parallel map over `0..n`.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send + Default + Clone,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out = vec![T::default(); n];
        self.for_each_row(&mut out, 1, |i, slot| slot[0] = f(i));
        out
    }

    /// Sum of `term(i)` over `0..n` in a thread-count independent order.
    pub fn sum<F>(&self, n: usize, term: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let blocks = n.div_ceil(REDUCTION_BLOCK);
        let partials = self.map(blocks, |b| {
            let lo = b * REDUCTION_BLOCK;
            let hi = (lo + REDUCTION_BLOCK).min(n);
            (lo..hi).map(&term).sum::<f64>()
        });
        partials.into_iter().sum()
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        self.sum(a.len(), |i| a[i] * b[i])
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    /// Runs two closures potentially in parallel and returns both results.
    pub fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        self.pool.install(|| rayon::join(a, b))
    }

    /// Opens a scope for asynchronous tasks that may borrow local data.
    /// Every task is finished when `scope` returns.
    pub fn scope<'env, F, R>(&'env self, f: F) -> R
    where
        F: for<'scope> FnOnce(&TaskScope<'scope, 'env>) -> R,
    {
        thread::scope(|s| {
            let scope = TaskScope { inner: s, rt: self };
            f(&scope)
        })
    }

    /// Launches a detached job; the handle must be joined before the data it
    /// produces is used.
    pub fn spawn<T, E, F>(&self, name: &str, f: F) -> TaskHandle<'static, T>
    where
        T: Send + 'static,
        E: fmt::Display,
        F: FnOnce() -> std::result::Result<T, E> + Send + 'static,
    {
        let handle = thread::Builder::new()
            .name(format!("peridyn-task-{name}"))
            .spawn(move || f().map_err(|e| e.to_string()))
            .expect("failed to spawn task thread");
        TaskHandle {
            name: name.to_string(),
            inner: Join::Detached(handle),
        }
    }

    /// Restarts the wall clock and clears busy times.
    pub fn reset_counters(&self) {
        *self.counters.epoch.lock().expect("counter lock poisoned") = Instant::now();
        for slot in &self.counters.busy_ns {
            slot.store(0, Ordering::Relaxed);
        }
    }

    /// Busy and wall time per worker since construction or the last reset.
    pub fn collect_counters(&self) -> PerfCounters {
        let wall_s = self
            .counters
            .epoch
            .lock()
            .expect("counter lock poisoned")
            .elapsed()
            .as_secs_f64();
        let threads = self
            .counters
            .busy_ns
            .iter()
            .enumerate()
            .map(|(thread, ns)| {
                let busy_s = ns.load(Ordering::Relaxed) as f64 * 1e-9;
                let utilization = if wall_s > 0.0 {
                    (busy_s / wall_s).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                ThreadCounter {
                    thread,
                    busy_s,
                    wall_s,
                    utilization,
                }
            })
            .collect();
        PerfCounters { wall_s, threads }
    }
}

fn default_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(value) => value.trim().parse::<usize>().ok().filter(|&t| t > 0).ok_or_else(|| {
            Error::Parameter(format!("{THREADS_ENV} must be a positive integer, got {value:?}"))
        }),
        Err(_) => Ok(thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Spawning side of [`Runtime::scope`].
pub struct TaskScope<'scope, 'env: 'scope> {
    inner: &'scope thread::Scope<'scope, 'env>,
    rt: &'env Runtime,
}

impl<'scope, 'env> TaskScope<'scope, 'env> {
    pub fn runtime(&self) -> &'env Runtime {
        self.rt
    }

    pub fn spawn<T, E, F>(&self, name: &str, f: F) -> TaskHandle<'scope, T>
    where
        T: Send + 'scope,
        E: fmt::Display,
        F: FnOnce() -> std::result::Result<T, E> + Send + 'scope,
    {
        let handle = thread::Builder::new()
            .name(format!("peridyn-task-{name}"))
            .spawn_scoped(self.inner, move || f().map_err(|e| e.to_string()))
            .expect("failed to spawn task thread");
        TaskHandle {
            name: name.to_string(),
            inner: Join::Scoped(handle),
        }
    }

    /// Asynchronous [`Runtime::parallel_for`].
    pub fn parallel_for<F>(&self, name: &str, n: usize, body: F) -> TaskHandle<'scope, ()>
    where
        F: Fn(usize) + Sync + Send + 'scope,
    {
        let rt = self.rt;
        self.spawn(name, move || {
            rt.parallel_for(n, body);
            Ok::<(), std::convert::Infallible>(())
        })
    }

    /// Runs `parallel_for` with either policy; the sync policy returns an
    /// already completed handle.
    pub fn for_loop<F>(&self, policy: Policy, name: &str, n: usize, body: F) -> TaskHandle<'scope, ()>
    where
        F: Fn(usize) + Sync + Send + 'scope,
    {
        match policy {
            Policy::Async => self.parallel_for(name, n, body),
            Policy::Sync => {
                self.rt.parallel_for(n, body);
                TaskHandle {
                    name: name.to_string(),
                    inner: Join::Ready(Ok(())),
                }
            }
        }
    }
}

enum Join<'scope, T> {
    Scoped(thread::ScopedJoinHandle<'scope, std::result::Result<T, String>>),
    Detached(thread::JoinHandle<std::result::Result<T, String>>),
    Ready(std::result::Result<T, String>),
}

/// Completion token of an asynchronously launched job.
pub struct TaskHandle<'scope, T> {
    name: String,
    inner: Join<'scope, T>,
}

impl<T> TaskHandle<'_, T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_finished(&self) -> bool {
        match &self.inner {
            Join::Scoped(h) => h.is_finished(),
            Join::Detached(h) => h.is_finished(),
            Join::Ready(_) => true,
        }
    }

    /// Waits for the task and propagates its error or panic.
    pub fn join(self) -> Result<T, TaskError> {
        let outcome = match self.inner {
            Join::Scoped(h) => h.join().map_err(panic_message).and_then(|r| r),
            Join::Detached(h) => h.join().map_err(panic_message).and_then(|r| r),
            Join::Ready(r) => r,
        };
        outcome.map_err(|message| TaskError {
            failures: vec![TaskFailure {
                name: self.name,
                message,
            }],
        })
    }
}

fn panic_message(payload: Box<dyn Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".to_string()
    }
}

/// Joins every handle, in order. Each task is awaited even after a failure;
/// the error lists all failed tasks.
pub fn wait_all<'scope, T, I>(handles: I) -> Result<Vec<T>, TaskError>
where
    I: IntoIterator<Item = TaskHandle<'scope, T>>,
{
    let mut values = Vec::new();
    let mut failures = Vec::new();
    for handle in handles {
        match handle.join() {
            Ok(v) => values.push(v),
            Err(e) => failures.extend(e.failures),
        }
    }
    if failures.is_empty() {
        Ok(values)
    } else {
        Err(TaskError { failures })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskFailure {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct TaskError {
    pub failures: Vec<TaskFailure>,
}

impl fmt::Display for TaskError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} task(s) failed:", self.failures.len())?;
        for failure in &self.failures {
            write!(f, " [{}] {}", failure.name, failure.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadCounter {
    pub thread: usize,
    pub busy_s: f64,
    pub wall_s: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfCounters {
    pub wall_s: f64,
    pub threads: Vec<ThreadCounter>,
}

impl PerfCounters {
    pub const CSV_HEADER: &'static str = "thread,busy_s,wall_s,utilization";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for t in &self.threads {
            out.push_str(&format!("{},{},{},{}\n", t.thread, t.busy_s, t.wall_s, t.utilization));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    #[test]
    fn zero_threads_rejected() {
        assert!(Runtime::new(0).is_err());
    }

    #[test]
    fn empty_range_is_noop() {
        let rt = Runtime::new(3).unwrap();
        rt.parallel_for(0, |_| panic!("must not run"));
        let mut empty: Vec<f64> = Vec::new();
        rt.for_each_row(&mut empty, 2, |_, _| panic!("must not run"));
    }

    #[test]
    fn every_index_once() {
        let rt = Runtime::new(4).unwrap();
        let tally: Vec<AtomicUsize> = (0..1013).map(|_| AtomicUsize::new(0)).collect();
        rt.parallel_for(tally.len(), |i| {
            tally[i].fetch_add(1, Ordering::Relaxed);
        });
        assert!(tally.iter().all(|t| t.load(Ordering::Relaxed) == 1));
    }

    #[test]
    fn lowest_failing_row_wins() {
        let rt = Runtime::new(4).unwrap();
        let mut out = vec![0.0; 100];
        let err = rt
            .try_for_each_row(&mut out, 1, |i, _| if i % 30 == 29 { Err(i) } else { Ok(()) })
            .unwrap_err();
        assert_eq!(err, 29);
    }

    #[test]
    fn sum_is_thread_independent() {
        let values: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.37).sin() * 1e3).collect();
        let reference = Runtime::serial().sum(values.len(), |i| values[i]);
        for t in [2, 3, 7] {
            let rt = Runtime::new(t).unwrap();
            assert_eq!(rt.sum(values.len(), |i| values[i]).to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn failed_task_is_named() {
        let rt = Runtime::new(2).unwrap();
        let err = rt.scope(|s| {
            let ok = s.spawn("fine", || Ok::<_, String>(1));
            let bad = s.spawn("broken", || Err::<i32, _>("boom".to_string()));
            wait_all([ok, bad]).unwrap_err()
        });
        assert_eq!(err.failures.len(), 1);
        assert_eq!(err.failures[0].name, "broken");
        assert!(err.to_string().contains("boom"));
    }

    #[test]
    fn panics_surface_at_join() {
        let rt = Runtime::new(2).unwrap();
        let handle = rt.spawn("panicky", || -> Result<(), String> { panic!("kaboom") });
        let err = handle.join().unwrap_err();
        assert!(err.failures[0].message.contains("kaboom"));
    }

    #[test]
    fn serial_workload_leaves_threads_idle() {
        let rt = Runtime::new(4).unwrap();
        rt.reset_counters();
        rt.parallel_for(1, |_| {
            let t = Instant::now();
            while t.elapsed().as_millis() < 20 {}
        });
        let counters = rt.collect_counters();
        assert_eq!(counters.threads.len(), 4);
        let idle = counters.threads.iter().filter(|t| t.utilization < 0.05).count();
        assert!(idle >= 3, "{counters:?}");
        assert!(counters.threads.iter().all(|t| (0.0..=1.0).contains(&t.utilization)));
    }
}
