use std::any::Any;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{BoxError, JobError, Message};
use crate::plan::{PlanKind, PlanNode, Source};
use crate::value::{fnv1a64, Row};
use crate::Error;

static NEXT_JOB: AtomicU64 = AtomicU64::new(1);
static NEXT_BROADCAST: AtomicU64 = AtomicU64::new(1);

const IDLE_POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub workers: usize,
    pub min_workers: usize,
    pub max_workers: usize,
    pub seed: u64,
    /// `(worker, task ordinal)` pairs. In every job, the task a worker starts
    /// with that ordinal (counting from 0 across the job's stages) has its
    /// output discarded and is rescheduled, as if the worker died.
    pub fault_plan: Vec<(usize, usize)>,
}

impl EngineConfig {
    pub fn new(workers: usize) -> EngineConfig {
        EngineConfig {
            workers,
            min_workers: 1,
            max_workers: workers,
            seed: 0,
            fault_plan: Vec::new(),
        }
    }

    pub fn with_bounds(mut self, min: usize, max: usize) -> EngineConfig {
        self.min_workers = min;
        self.max_workers = max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> EngineConfig {
        self.seed = seed;
        self
    }

    pub fn with_faults(mut self, faults: Vec<(usize, usize)>) -> EngineConfig {
        self.fault_plan = faults;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.min_workers < 1 {
            return Err(Error::InvalidConfig("minWorkers must be at least 1".into()));
        }
        if !(self.min_workers <= self.workers && self.workers <= self.max_workers) {
            return Err(Error::InvalidConfig(format!(
                "need minWorkers <= workers <= maxWorkers, got {} <= {} <= {}",
                self.min_workers, self.workers, self.max_workers
            )));
        }
        Ok(())
    }
}

/// Where a running task is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskContext {
    job_id: u64,
    worker: usize,
    partition: usize,
}

impl TaskContext {
    pub fn job_id(&self) -> u64 {
        self.job_id
    }

    pub fn worker(&self) -> usize {
        self.worker
    }

    /// The partition of the plan node being computed.
    pub fn partition(&self) -> usize {
        self.partition
    }

    fn at(self, partition: usize) -> TaskContext {
        TaskContext { partition, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JobMetrics {
    pub job_id: u64,
    pub wall_time_ms: f64,
    /// First-attempt time of every executed task, stage by stage.
    pub per_partition_ms: Vec<f64>,
    /// Time of every retried attempt.
    pub recompute_ms: Vec<f64>,
    /// Rows in the job's output.
    pub rows_processed: usize,
    pub recomputed_partitions: usize,
    /// `(ms since engine start, workers)`: the count at job start, then every
    /// change made while the job ran.
    pub worker_count_timeline: Vec<(f64, usize)>,
}

/// A read-only payload published by the driver. Tasks turn it into a value
/// with [`Broadcast::value`], which deserializes at most once per worker per
/// job.
pub struct Broadcast {
    id: u64,
    payload: Arc<[u8]>,
    state: Mutex<BroadcastState>,
}

#[derive(Default)]
struct BroadcastState {
    live: HashMap<(u64, usize), Arc<dyn Any + Send + Sync>>,
    counts: BTreeMap<u64, BTreeMap<usize, u64>>,
}

impl Broadcast {
    pub fn new(payload: Vec<u8>) -> Result<Arc<Broadcast>, Error> {
        if payload.is_empty() {
            return Err(Error::Invalid("broadcast payload is empty".into()));
        }
        Ok(Arc::new(Broadcast {
            id: NEXT_BROADCAST.fetch_add(1, Ordering::Relaxed),
            payload: Arc::from(payload),
            state: Mutex::new(BroadcastState::default()),
        }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// The materialized value for this task's worker, deserializing with
    /// `materialize` if the worker has not done so in this job.
    pub fn value<T, F>(&self, ctx: &TaskContext, materialize: F) -> Result<Arc<T>, BoxError>
    where
        T: Any + Send + Sync,
        F: FnOnce(&[u8]) -> Result<T, BoxError>,
    {
        let key = (ctx.job_id, ctx.worker);
        let existing = self.state.lock().unwrap().live.get(&key).cloned();
        let value = match existing {
            Some(v) => v,
            None => {
                // Only this worker uses this key, so nobody races the insert.
                let v: Arc<dyn Any + Send + Sync> = Arc::new(materialize(&self.payload)?);
                let mut st = self.state.lock().unwrap();
                st.live.retain(|(job, _), _| *job == ctx.job_id);
                st.live.insert(key, v.clone());
                *st.counts
                    .entry(ctx.job_id)
                    .or_default()
                    .entry(ctx.worker)
                    .or_default() += 1;
                v
            }
        };
        value
            .downcast::<T>()
            .map_err(|_| Message("broadcast value requested with a different type".into()).into())
    }

    /// Materializations per worker in job `job_id`.
    pub fn materializations(&self, job_id: u64) -> BTreeMap<usize, u64> {
        self.state
            .lock()
            .unwrap()
            .counts
            .get(&job_id)
            .cloned()
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy)]
struct Task {
    index: usize,
    first_attempt: bool,
    avoid: Option<usize>,
}

struct Sched<T> {
    queue: VecDeque<Task>,
    inbox: Vec<Option<Task>>,
    results: Vec<Option<T>>,
    first_ms: Vec<f64>,
    retry_ms: Vec<f64>,
    remaining: usize,
    error: Option<Error>,
}

struct StageSignal {
    lock: Mutex<()>,
    cv: Condvar,
}

/// Per-job bookkeeping shared by all stages.
struct JobState {
    id: u64,
    faults: HashSet<(usize, usize)>,
    ordinals: Mutex<Vec<usize>>,
    per_partition_ms: Mutex<Vec<f64>>,
    recompute_ms: Mutex<Vec<f64>>,
    recomputed: AtomicUsize,
}

type ShuffleOutput = Vec<Vec<Vec<Row>>>;

/// A pool of workers that executes plans partition by partition.
pub struct Engine {
    config: EngineConfig,
    active: AtomicUsize,
    created: Instant,
    timeline: Mutex<Vec<(f64, usize)>>,
    signal: Mutex<Option<Arc<StageSignal>>>,
    job_lock: Mutex<()>,
    last: Mutex<Option<JobMetrics>>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Arc<Engine>, Error> {
        config.validate()?;
        Ok(Arc::new(Engine {
            active: AtomicUsize::new(config.workers),
            config,
            created: Instant::now(),
            timeline: Mutex::new(Vec::new()),
            signal: Mutex::new(None),
            job_lock: Mutex::new(()),
            last: Mutex::new(None),
        }))
    }

    /// An engine with `workers` fixed workers.
    pub fn with_workers(workers: usize) -> Result<Arc<Engine>, Error> {
        Engine::new(EngineConfig::new(workers))
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn workers(&self) -> usize {
        self.active.load(Ordering::SeqCst)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Partition count used when none is given: twice the worker count.
    pub fn default_partitions(&self) -> usize {
        2 * self.workers()
    }

    /// Resizes the pool, including while a job runs. Queued tasks go to the
    /// new pool; tasks already running finish where they are.
    pub fn set_worker_count(&self, n: usize) -> Result<(), Error> {
        if n < self.config.min_workers || n > self.config.max_workers {
            return Err(Error::OutOfBounds {
                requested: n,
                min: self.config.min_workers,
                max: self.config.max_workers,
            });
        }
        self.active.store(n, Ordering::SeqCst);
        self.timeline
            .lock()
            .unwrap()
            .push((self.created.elapsed().as_secs_f64() * 1e3, n));
        if let Some(signal) = self.signal.lock().unwrap().as_ref() {
            let _g = signal.lock.lock().unwrap();
            signal.cv.notify_all();
        }
        Ok(())
    }

    /// Every worker-count change since the engine started.
    pub fn worker_timeline(&self) -> Vec<(f64, usize)> {
        self.timeline.lock().unwrap().clone()
    }

    pub fn last_metrics(&self) -> Result<JobMetrics, Error> {
        self.last.lock().unwrap().clone().ok_or(Error::NoJobYet)
    }

    pub fn broadcast(&self, payload: Vec<u8>) -> Result<Arc<Broadcast>, Error> {
        Broadcast::new(payload)
    }

    /// Executes `plan`, returning its partitions in index order.
    pub fn run_job(&self, plan: &Arc<PlanNode>) -> Result<(Vec<Vec<Row>>, JobMetrics), Error> {
        self.job(|engine, job| {
            for shuffle in pending_shuffles(plan) {
                let child = &shuffle.children[0];
                let out = shuffle.num_partitions();
                let buckets = engine.run_stage(job, child.num_partitions(), &|ctx| {
                    let mut writes = Vec::new();
                    let rows = compute(child, ctx, &job.shuffles(), &mut writes)?;
                    Ok((bucket(&shuffle, ctx.partition, rows, out), writes))
                })?;
                job.shuffle_out
                    .lock()
                    .unwrap()
                    .insert(shuffle.id(), Arc::new(buckets));
            }
            let parts = engine.run_stage(job, plan.num_partitions(), &|ctx| {
                let mut writes = Vec::new();
                let rows = compute(plan, ctx, &job.shuffles(), &mut writes)?;
                Ok((rows, writes))
            })?;
            let rows = parts.iter().map(Vec::len).sum();
            Ok((parts, rows))
        })
    }

    /// Runs `f` for `0..n` on the pool as a job of its own, returning results
    /// in index order. For driver-side parallel work outside plans.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Result<Vec<T>, Error>
    where
        T: Send,
        F: Fn(&TaskContext) -> Result<T, BoxError> + Sync,
    {
        self.job(|engine, job| {
            let out = engine.run_stage(job, n, &|ctx| {
                let v = f(ctx).map_err(|e| user_error(ctx.partition, e))?;
                Ok((v, Vec::new()))
            })?;
            Ok((out, 0))
        })
        .map(|(out, _)| out)
    }

    fn job<T>(
        &self,
        body: impl FnOnce(&Engine, &RunningJob) -> Result<(T, usize), Error>,
    ) -> Result<(T, JobMetrics), Error> {
        let _exclusive = self.job_lock.lock().unwrap_or_else(|e| e.into_inner());
        let start = Instant::now();
        let start_ms = (start - self.created).as_secs_f64() * 1e3;
        let timeline_mark = self.timeline.lock().unwrap().len();
        let job = RunningJob {
            state: JobState {
                id: NEXT_JOB.fetch_add(1, Ordering::Relaxed),
                faults: self.config.fault_plan.iter().copied().collect(),
                ordinals: Mutex::new(vec![0; self.config.max_workers]),
                per_partition_ms: Mutex::new(Vec::new()),
                recompute_ms: Mutex::new(Vec::new()),
                recomputed: AtomicUsize::new(0),
            },
            shuffle_out: Mutex::new(HashMap::new()),
            initial_workers: self.workers(),
        };
        let (out, rows) = body(self, &job)?;
        let mut timeline = vec![(start_ms, job.initial_workers)];
        timeline.extend_from_slice(&self.timeline.lock().unwrap()[timeline_mark..]);
        let metrics = JobMetrics {
            job_id: job.state.id,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            per_partition_ms: job.state.per_partition_ms.into_inner().unwrap(),
            recompute_ms: job.state.recompute_ms.into_inner().unwrap(),
            rows_processed: rows,
            recomputed_partitions: job.state.recomputed.into_inner(),
            worker_count_timeline: timeline,
        };
        *self.last.lock().unwrap() = Some(metrics.clone());
        Ok((out, metrics))
    }

    /// Runs tasks `0..n` to completion. A task returns its result plus cache
    /// writes, which are committed only once the task is known to have
    /// succeeded.
    fn run_stage<T: Send>(
        &self,
        job: &RunningJob,
        n: usize,
        task: &TaskFn<'_, T>,
    ) -> Result<Vec<T>, Error> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let slots = self.config.max_workers;
        let active = self.workers();
        let mut sched = Sched {
            queue: VecDeque::new(),
            inbox: vec![None; slots],
            results: (0..n).map(|_| None).collect(),
            first_ms: vec![0.0; n],
            retry_ms: Vec::new(),
            remaining: n,
            error: None,
        };
        // The first wave goes one task per worker so every worker takes part.
        for index in 0..n {
            let t = Task {
                index,
                first_attempt: true,
                avoid: None,
            };
            if index < active {
                sched.inbox[index] = Some(t);
            } else {
                sched.queue.push_back(t);
            }
        }
        let sched = Mutex::new(sched);
        let signal = Arc::new(StageSignal {
            lock: Mutex::new(()),
            cv: Condvar::new(),
        });
        *self.signal.lock().unwrap() = Some(signal.clone());
        let pending_writes: Mutex<Vec<CacheWrite>> = Mutex::new(Vec::new());

        std::thread::scope(|scope| {
            for w in 0..slots {
                let (sched, signal, pending_writes) = (&sched, &signal, &pending_writes);
                scope.spawn(move || self.worker_loop(w, job, sched, signal, task, pending_writes));
            }
        });
        *self.signal.lock().unwrap() = None;

        let sched = sched.into_inner().unwrap();
        if let Some(e) = sched.error {
            return Err(e);
        }
        for write in pending_writes.into_inner().unwrap() {
            write.node.store(write.partition, write.rows);
        }
        job.state
            .per_partition_ms
            .lock()
            .unwrap()
            .extend_from_slice(&sched.first_ms);
        job.state
            .recompute_ms
            .lock()
            .unwrap()
            .extend_from_slice(&sched.retry_ms);
        Ok(sched
            .results
            .into_iter()
            .map(|r| r.expect("every task completed"))
            .collect())
    }

    fn worker_loop<T: Send>(
        &self,
        w: usize,
        job: &RunningJob,
        sched: &Mutex<Sched<T>>,
        signal: &StageSignal,
        task: &TaskFn<'_, T>,
        pending_writes: &Mutex<Vec<CacheWrite>>,
    ) {
        loop {
            let picked = {
                let mut s = sched.lock().unwrap();
                if s.remaining == 0 || s.error.is_some() {
                    return;
                }
                let active = self.workers();
                if w >= active {
                    if let Some(t) = s.inbox[w].take() {
                        s.queue.push_front(t);
                        drop(s);
                        notify(signal);
                    }
                    None
                } else {
                    s.inbox[w].take().or_else(|| {
                        let pos = s.queue.iter().position(|t| match t.avoid {
                            Some(a) => a != w || a >= active || active == 1,
                            None => true,
                        })?;
                        s.queue.remove(pos)
                    })
                }
            };
            let Some(t) = picked else {
                let g = signal.lock.lock().unwrap();
                let _ = signal.cv.wait_timeout(g, IDLE_POLL).unwrap();
                continue;
            };

            let ordinal = {
                let mut ords = job.state.ordinals.lock().unwrap();
                let o = ords[w];
                ords[w] += 1;
                o
            };
            let ctx = TaskContext {
                job_id: job.state.id,
                worker: w,
                partition: t.index,
            };
            let started = Instant::now();
            let outcome = catch_unwind(AssertUnwindSafe(|| task(&ctx)));
            let ms = started.elapsed().as_secs_f64() * 1e3;

            let mut s = sched.lock().unwrap();
            if t.first_attempt {
                s.first_ms[t.index] = ms;
            } else {
                s.retry_ms.push(ms);
            }
            match outcome {
                Ok(Ok((value, writes))) => {
                    if job.state.faults.contains(&(w, ordinal)) {
                        // The worker "died": its output and cache writes are dropped.
                        job.state.recomputed.fetch_add(1, Ordering::SeqCst);
                        s.queue.push_back(Task {
                            index: t.index,
                            first_attempt: false,
                            avoid: Some(w),
                        });
                    } else {
                        pending_writes.lock().unwrap().extend(writes);
                        s.results[t.index] = Some(value);
                        s.remaining -= 1;
                    }
                }
                Ok(Err(TaskFailure(e))) => {
                    if s.error.is_none() {
                        s.error = Some(Error::Job(e));
                    }
                }
                Err(panic) => {
                    let what = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    if s.error.is_none() {
                        s.error = Some(Error::Job(JobError {
                            partition: t.index,
                            cause: Arc::new(Message(format!("panic: {what}"))),
                        }));
                    }
                }
            }
            drop(s);
            notify(signal);
        }
    }
}

fn notify(signal: &StageSignal) {
    let _g = signal.lock.lock().unwrap();
    signal.cv.notify_all();
}

struct RunningJob {
    state: JobState,
    shuffle_out: Mutex<HashMap<u64, Arc<ShuffleOutput>>>,
    initial_workers: usize,
}

impl RunningJob {
    fn shuffles(&self) -> HashMap<u64, Arc<ShuffleOutput>> {
        self.shuffle_out.lock().unwrap().clone()
    }
}

pub(crate) struct CacheWrite {
    node: Arc<PlanNode>,
    partition: usize,
    rows: Arc<Vec<Row>>,
}

pub(crate) struct TaskFailure(JobError);

type TaskFn<'a, T> = dyn Fn(&TaskContext) -> Result<(T, Vec<CacheWrite>), TaskFailure> + Sync + 'a;

fn user_error(partition: usize, e: BoxError) -> TaskFailure {
    TaskFailure(JobError {
        partition,
        cause: Arc::from(e),
    })
}

/// Shuffle nodes that must run before `root`, children first. Fully cached
/// subplans need nothing.
fn pending_shuffles(root: &Arc<PlanNode>) -> Vec<Arc<PlanNode>> {
    fn walk(n: &Arc<PlanNode>, seen: &mut HashSet<u64>, out: &mut Vec<Arc<PlanNode>>) {
        if !seen.insert(n.id()) || n.fully_cached() {
            return;
        }
        for c in &n.children {
            walk(c, seen, out);
        }
        if n.is_shuffle() {
            out.push(n.clone());
        }
    }
    let mut out = Vec::new();
    walk(root, &mut HashSet::new(), &mut out);
    out
}

/// Computes partition `ctx.partition` of `node`, pipelining narrow
/// dependencies and reading shuffle inputs produced earlier in the job.
fn compute(
    node: &Arc<PlanNode>,
    ctx: &TaskContext,
    shuffles: &HashMap<u64, Arc<ShuffleOutput>>,
    writes: &mut Vec<CacheWrite>,
) -> Result<Vec<Row>, TaskFailure> {
    let p = ctx.partition;
    let rows = match &node.kind {
        PlanKind::Source(Source::Rows(parts)) => parts[p].as_ref().clone(),
        PlanKind::Source(Source::Generator(g)) => g(ctx).map_err(|e| user_error(p, e))?,
        PlanKind::MapPartitions(f) => {
            let input = compute(&node.children[0], ctx, shuffles, writes)?;
            f(ctx, input).map_err(|e| user_error(p, e))?
        }
        PlanKind::Filter(pred) => {
            let input = compute(&node.children[0], ctx, shuffles, writes)?;
            let mut kept = Vec::with_capacity(input.len());
            for row in input {
                if pred(&row).map_err(|e| user_error(p, e))? {
                    kept.push(row);
                }
            }
            kept
        }
        PlanKind::Repartition => gather(node, p, shuffles),
        PlanKind::GroupByKey { key } => group(gather(node, p, shuffles), *key),
        PlanKind::Union => {
            let mut offset = p;
            let mut out = None;
            for c in &node.children {
                if offset < c.num_partitions() {
                    out = Some(compute(c, &ctx.at(offset), shuffles, writes)?);
                    break;
                }
                offset -= c.num_partitions();
            }
            out.expect("union partition index in range")
        }
        PlanKind::Cache(_) => match node.cached(p) {
            Some(rows) => rows.as_ref().clone(),
            None => {
                let rows = compute(&node.children[0], ctx, shuffles, writes)?;
                writes.push(CacheWrite {
                    node: node.clone(),
                    partition: p,
                    rows: Arc::new(rows.clone()),
                });
                rows
            }
        },
    };
    if cfg!(debug_assertions) {
        for row in &rows {
            node.schema()
                .check_row(row)
                .map_err(|e| user_error(p, Box::new(e)))?;
        }
    }
    Ok(rows)
}

fn gather(node: &PlanNode, p: usize, shuffles: &HashMap<u64, Arc<ShuffleOutput>>) -> Vec<Row> {
    let out = shuffles
        .get(&node.id())
        .expect("shuffle map stage ran before its reader");
    out.iter()
        .flat_map(|buckets| buckets[p].iter().cloned())
        .collect()
}

/// Splits one map-side partition into destination buckets. Repartition deals
/// rows round-robin starting at an offset given by the source partition;
/// grouping hashes the key.
fn bucket(shuffle: &PlanNode, source: usize, rows: Vec<Row>, out: usize) -> Vec<Vec<Row>> {
    let mut buckets: Vec<Vec<Row>> = vec![Vec::new(); out];
    match shuffle.kind {
        PlanKind::Repartition => {
            for (i, row) in rows.into_iter().enumerate() {
                buckets[(source + i) % out].push(row);
            }
        }
        PlanKind::GroupByKey { key } => {
            for row in rows {
                let h = fnv1a64(&row.get(key).encode());
                buckets[(h % out as u64) as usize].push(row);
            }
        }
        _ => unreachable!("only shuffles are bucketed"),
    }
    buckets
}

/// Groups rows by key cell in order of first appearance.
fn group(rows: Vec<Row>, key: usize) -> Vec<Row> {
    let mut order: Vec<(Row, Vec<Row>)> = Vec::new();
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    for row in rows {
        let enc = row.get(key).encode();
        let slot = *index.entry(enc).or_insert_with(|| {
            order.push((Row::new(vec![row.get(key).clone()]), Vec::new()));
            order.len() - 1
        });
        order[slot].1.push(row);
    }
    order
        .into_iter()
        .map(|(k, members)| k.with(crate::Value::Rows(Arc::from(members))))
        .collect()
}

/// One row of a scaling benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub workers: usize,
    pub median_ms: f64,
    pub runs: Vec<f64>,
}

/// Runs `task` `repetitions` times on a fresh engine per worker count and
/// reports median wall time.
pub fn benchmark_scaling<F>(
    base: &EngineConfig,
    worker_counts: &[usize],
    repetitions: usize,
    task: F,
) -> Result<Vec<ScalingRow>, Error>
where
    F: Fn(&Arc<Engine>) -> Result<(), Error>,
{
    if worker_counts.is_empty() || worker_counts.contains(&0) {
        return Err(Error::Invalid(
            "worker counts must be nonempty and each at least 1".into(),
        ));
    }
    if repetitions == 0 {
        return Err(Error::Invalid("repetitions must be at least 1".into()));
    }
    let mut table = Vec::new();
    for &workers in worker_counts {
        let config = EngineConfig {
            workers,
            min_workers: 1,
            max_workers: workers,
            ..base.clone()
        };
        let engine = Engine::new(config)?;
        let mut runs = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let start = Instant::now();
            task(&engine)?;
            runs.push(start.elapsed().as_secs_f64() * 1e3);
        }
        table.push(ScalingRow {
            workers,
            median_ms: median(&runs),
            runs,
        });
    }
    Ok(table)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// The benchmark CSV: `workers,median_ms,runs`.
pub fn scaling_csv(table: &[ScalingRow]) -> String {
    let mut out = String::from("workers,median_ms,runs\n");
    for row in table {
        out.push_str(&format!(
            "{},{:.3},{}\n",
            row.workers,
            row.median_ms,
            row.runs.len()
        ));
    }
    out
}
