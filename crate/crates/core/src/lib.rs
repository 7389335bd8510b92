//! Lazy partitioned datasets, the worker pool that executes them, and the
//! estimator/transformer pipeline API.
//!
//! A [`Dataset`] is a schema plus a plan. Building one runs nothing; actions
//! such as [`Dataset::collect`] hand the plan to its [`Engine`], which runs
//! one task per partition on a pool of worker threads. Narrow operations are
//! pipelined inside a task, `repartition` and `group_by_key` shuffle between
//! stages, and cached partitions that go missing are recomputed from lineage.
//!
//! Output order depends only on the plan and its partitioning, never on the
//! number of workers or on which worker ran which task.

mod dataset;
mod engine;
mod error;
pub mod interchange;
pub mod pipeline;
mod plan;
mod value;

pub use dataset::Dataset;
pub use engine::{
    benchmark_scaling, median, scaling_csv, Broadcast, Engine, EngineConfig, JobMetrics,
    ScalingRow, TaskContext,
};
pub use error::{BoxError, Error, JobError, Message};
pub use plan::PlanNode;
pub use value::{canonical, canonical_sort, fnv1a64, DType, Field, Row, Schema, Value};
