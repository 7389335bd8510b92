use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::engine::TaskContext;
use crate::error::BoxError;
use crate::value::{Row, Schema};

pub type PartitionFn =
    Arc<dyn Fn(&TaskContext, Vec<Row>) -> Result<Vec<Row>, BoxError> + Send + Sync>;
pub type Predicate = Arc<dyn Fn(&Row) -> Result<bool, BoxError> + Send + Sync>;
pub type Generator = Arc<dyn Fn(&TaskContext) -> Result<Vec<Row>, BoxError> + Send + Sync>;

pub(crate) enum Source {
    Rows(Vec<Arc<Vec<Row>>>),
    Generator(Generator),
}

pub(crate) enum PlanKind {
    Source(Source),
    MapPartitions(PartitionFn),
    Filter(Predicate),
    Repartition,
    GroupByKey { key: usize },
    Union,
    Cache(Mutex<Vec<Option<Arc<Vec<Row>>>>>),
}

/// One node of a logical plan. Plans are immutable DAGs rooted at sources;
/// every node knows its schema and partition count without executing.
pub struct PlanNode {
    id: u64,
    pub(crate) kind: PlanKind,
    pub(crate) children: Vec<Arc<PlanNode>>,
    schema: Schema,
    partitions: usize,
}

static NEXT_NODE: AtomicU64 = AtomicU64::new(1);

impl PlanNode {
    pub(crate) fn new(
        kind: PlanKind,
        children: Vec<Arc<PlanNode>>,
        schema: Schema,
        partitions: usize,
    ) -> Arc<PlanNode> {
        Arc::new(PlanNode {
            id: NEXT_NODE.fetch_add(1, Ordering::Relaxed),
            kind,
            children,
            schema,
            partitions,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions
    }

    pub fn children(&self) -> &[Arc<PlanNode>] {
        &self.children
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            PlanKind::Source(_) => "Source",
            PlanKind::MapPartitions(_) => "MapPartitions",
            PlanKind::Filter(_) => "Filter",
            PlanKind::Repartition => "Repartition",
            PlanKind::GroupByKey { .. } => "GroupByKey",
            PlanKind::Union => "Union",
            PlanKind::Cache(_) => "Cache",
        }
    }

    pub(crate) fn is_shuffle(&self) -> bool {
        matches!(
            self.kind,
            PlanKind::Repartition | PlanKind::GroupByKey { .. }
        )
    }

    /// For cache nodes, whether every partition is materialized.
    pub(crate) fn fully_cached(&self) -> bool {
        match &self.kind {
            PlanKind::Cache(store) => store.lock().unwrap().iter().all(Option::is_some),
            _ => false,
        }
    }

    pub(crate) fn cached(&self, p: usize) -> Option<Arc<Vec<Row>>> {
        match &self.kind {
            PlanKind::Cache(store) => store.lock().unwrap()[p].clone(),
            _ => None,
        }
    }

    pub(crate) fn store(&self, p: usize, rows: Arc<Vec<Row>>) {
        if let PlanKind::Cache(store) = &self.kind {
            store.lock().unwrap()[p] = Some(rows);
        }
    }

    /// Drops a cached partition. Returns whether one was present.
    pub(crate) fn evict(&self, p: usize) -> bool {
        match &self.kind {
            PlanKind::Cache(store) => store
                .lock()
                .unwrap()
                .get_mut(p)
                .is_some_and(|slot| slot.take().is_some()),
            _ => false,
        }
    }

    /// Lineage as an indented tree.
    pub fn explain(&self) -> String {
        fn walk(n: &PlanNode, depth: usize, out: &mut String) {
            out.push_str(&format!(
                "{}{} #{} [{} partitions] ({})\n",
                "  ".repeat(depth),
                n.kind_name(),
                n.id,
                n.partitions,
                n.schema.names().join(", ")
            ));
            for c in &n.children {
                walk(c, depth + 1, out);
            }
        }
        let mut out = String::new();
        walk(self, 0, &mut out);
        out
    }
}

impl fmt::Debug for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.explain())
    }
}
