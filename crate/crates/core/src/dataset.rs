use std::sync::{Arc, Mutex};

use crate::engine::{Engine, JobMetrics, TaskContext};
use crate::error::BoxError;
use crate::plan::{PlanKind, PlanNode, Source};
use crate::value::{DType, Row, Schema, Value};
use crate::Error;

/// A schema plus a lazy plan over partitioned rows. Nothing runs until an
/// action (`collect`, `count`, ...) is called.
#[derive(Clone)]
pub struct Dataset {
    engine: Arc<Engine>,
    plan: Arc<PlanNode>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("schema", self.schema())
            .field("partitions", &self.num_partitions())
            .finish()
    }
}

impl Dataset {
    /// Rows dealt round-robin into `partitions` partitions.
    pub fn from_rows(
        engine: &Arc<Engine>,
        schema: Schema,
        rows: Vec<Row>,
        partitions: usize,
    ) -> Result<Dataset, Error> {
        if partitions < 1 {
            return Err(Error::InvalidPartitionCount(partitions));
        }
        for row in &rows {
            schema.check_row(row)?;
        }
        let mut parts: Vec<Vec<Row>> = vec![Vec::new(); partitions];
        for (i, row) in rows.into_iter().enumerate() {
            parts[i % partitions].push(row);
        }
        let parts = parts.into_iter().map(Arc::new).collect();
        Ok(Dataset {
            engine: engine.clone(),
            plan: PlanNode::new(
                PlanKind::Source(Source::Rows(parts)),
                vec![],
                schema,
                partitions,
            ),
        })
    }

    /// Like [`from_rows`](Self::from_rows) with the engine's default
    /// partition count.
    pub fn from_rows_default(
        engine: &Arc<Engine>,
        schema: Schema,
        rows: Vec<Row>,
    ) -> Result<Dataset, Error> {
        Dataset::from_rows(engine, schema, rows, engine.default_partitions())
    }

    /// A source whose partition `ctx.partition()` is produced on demand by `f`.
    pub fn from_generator<F>(
        engine: &Arc<Engine>,
        schema: Schema,
        partitions: usize,
        f: F,
    ) -> Result<Dataset, Error>
    where
        F: Fn(&TaskContext) -> Result<Vec<Row>, BoxError> + Send + Sync + 'static,
    {
        if partitions < 1 {
            return Err(Error::InvalidPartitionCount(partitions));
        }
        Ok(Dataset {
            engine: engine.clone(),
            plan: PlanNode::new(
                PlanKind::Source(Source::Generator(Arc::new(f))),
                vec![],
                schema,
                partitions,
            ),
        })
    }

    pub fn schema(&self) -> &Schema {
        self.plan.schema()
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn plan(&self) -> &Arc<PlanNode> {
        &self.plan
    }

    pub fn num_partitions(&self) -> usize {
        self.plan.num_partitions()
    }

    fn derive(&self, kind: PlanKind, schema: Schema, partitions: usize) -> Dataset {
        Dataset {
            engine: self.engine.clone(),
            plan: PlanNode::new(kind, vec![self.plan.clone()], schema, partitions),
        }
    }

    /// Applies `f` to whole partitions. `f` must produce rows of `schema`.
    pub fn map_partitions<F>(&self, schema: Schema, f: F) -> Dataset
    where
        F: Fn(&TaskContext, Vec<Row>) -> Result<Vec<Row>, BoxError> + Send + Sync + 'static,
    {
        self.derive(
            PlanKind::MapPartitions(Arc::new(f)),
            schema,
            self.num_partitions(),
        )
    }

    /// Applies `f` to every row.
    pub fn map_rows<F>(&self, schema: Schema, f: F) -> Dataset
    where
        F: Fn(&Row) -> Result<Row, BoxError> + Send + Sync + 'static,
    {
        self.map_partitions(schema, move |_, rows| rows.iter().map(&f).collect())
    }

    /// Appends column `name` computed from each row.
    pub fn with_column<F>(&self, name: &str, dtype: DType, f: F) -> Result<Dataset, Error>
    where
        F: Fn(&Row) -> Result<Value, BoxError> + Send + Sync + 'static,
    {
        let schema = self.schema().with(name, dtype)?;
        Ok(self.map_rows(schema, move |row| Ok(row.with(f(row)?))))
    }

    pub fn filter<F>(&self, predicate: F) -> Dataset
    where
        F: Fn(&Row) -> Result<bool, BoxError> + Send + Sync + 'static,
    {
        self.derive(
            PlanKind::Filter(Arc::new(predicate)),
            self.schema().clone(),
            self.num_partitions(),
        )
    }

    /// Redistributes rows into exactly `n` partitions through a shuffle.
    pub fn repartition(&self, n: usize) -> Result<Dataset, Error> {
        if n < 1 {
            return Err(Error::InvalidPartitionCount(n));
        }
        Ok(self.derive(PlanKind::Repartition, self.schema().clone(), n))
    }

    /// One row per distinct key: `(key, rows)` where `rows` holds every input
    /// row with that key. Rows are routed by a hash of the key.
    pub fn group_by_key(&self, key: &str) -> Result<Dataset, Error> {
        let k = self
            .schema()
            .index_of(key)
            .ok_or_else(|| Error::UnknownColumn(key.to_string()))?;
        let dtype = self.schema().dtype(k).clone();
        if !dtype.is_hashable() {
            return Err(Error::UnhashableKey(key.to_string()));
        }
        let schema = Schema::new(vec![
            (key.to_string(), dtype),
            (
                "rows".to_string(),
                DType::Rows(Box::new(self.schema().clone())),
            ),
        ])?;
        Ok(self.derive(
            PlanKind::GroupByKey { key: k },
            schema,
            self.num_partitions(),
        ))
    }

    /// Flattens the output of [`group_by_key`](Self::group_by_key).
    pub fn ungroup(&self) -> Result<Dataset, Error> {
        let inner = match self.schema().fields() {
            [_, rows] => match &rows.dtype {
                DType::Rows(s) => s.as_ref().clone(),
                _ => return Err(Error::Invalid("ungroup needs a (key, rows) dataset".into())),
            },
            _ => return Err(Error::Invalid("ungroup needs a (key, rows) dataset".into())),
        };
        Ok(self.map_partitions(inner, |_, groups| {
            Ok(groups
                .iter()
                .flat_map(|g| g.get(1).as_rows().unwrap_or(&[]).iter().cloned())
                .collect())
        }))
    }

    /// Partitions of `self` followed by those of `other`.
    pub fn union(&self, other: &Dataset) -> Result<Dataset, Error> {
        if self.schema() != other.schema() {
            return Err(Error::SchemaMismatch("union of differing schemas".into()));
        }
        Ok(Dataset {
            engine: self.engine.clone(),
            plan: PlanNode::new(
                PlanKind::Union,
                vec![self.plan.clone(), other.plan.clone()],
                self.schema().clone(),
                self.num_partitions() + other.num_partitions(),
            ),
        })
    }

    /// Keeps partitions in memory once computed.
    pub fn cache(&self) -> Dataset {
        let store = Mutex::new(vec![None; self.num_partitions()]);
        self.derive(
            PlanKind::Cache(store),
            self.schema().clone(),
            self.num_partitions(),
        )
    }

    /// Drops cached partition `p`, as if its worker had been lost. The next
    /// action recomputes it from lineage.
    pub fn evict(&self, p: usize) -> Result<bool, Error> {
        if !matches!(self.plan.kind, PlanKind::Cache(_)) {
            return Err(Error::Invalid("evict needs a cached dataset".into()));
        }
        if p >= self.num_partitions() {
            return Err(Error::InvalidPartitionCount(p));
        }
        Ok(self.plan.evict(p))
    }

    pub fn select(&self, columns: &[&str]) -> Result<Dataset, Error> {
        let indices = columns
            .iter()
            .map(|c| {
                self.schema()
                    .index_of(c)
                    .ok_or_else(|| Error::UnknownColumn(c.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.project(indices)
    }

    pub fn drop_columns(&self, columns: &[&str]) -> Result<Dataset, Error> {
        for c in columns {
            if self.schema().index_of(c).is_none() {
                return Err(Error::UnknownColumn(c.to_string()));
            }
        }
        let keep = (0..self.schema().len())
            .filter(|&i| !columns.contains(&self.schema().fields()[i].name.as_str()))
            .collect();
        self.project(keep)
    }

    fn project(&self, indices: Vec<usize>) -> Result<Dataset, Error> {
        let schema = self.schema().project(&indices)?;
        Ok(self.map_rows(schema, move |row| Ok(row.project(&indices))))
    }

    /// Runs the plan and returns its partitions.
    pub fn collect_partitions(&self) -> Result<Vec<Vec<Row>>, Error> {
        Ok(self.engine.run_job(&self.plan)?.0)
    }

    pub fn collect_with_metrics(&self) -> Result<(Vec<Row>, JobMetrics), Error> {
        let (parts, metrics) = self.engine.run_job(&self.plan)?;
        Ok((parts.into_iter().flatten().collect(), metrics))
    }

    /// All rows, by partition index then position within the partition.
    pub fn collect(&self) -> Result<Vec<Row>, Error> {
        Ok(self.collect_with_metrics()?.0)
    }

    pub fn count(&self) -> Result<usize, Error> {
        Ok(self.collect_partitions()?.iter().map(Vec::len).sum())
    }
}
