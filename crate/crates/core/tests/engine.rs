mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use common::*;
use tundra_core::{
    benchmark_scaling, canonical, median, scaling_csv, Broadcast, Dataset, Engine, EngineConfig,
    Error, Row, Value,
};

fn squares(e: &Arc<Engine>, n: i64, parts: usize) -> Dataset {
    Dataset::from_rows(e, int_schema(), ints(0..n), parts)
        .unwrap()
        .map_rows(int_schema(), |r| {
            let x = r.get(0).as_i64().unwrap();
            Ok(Row::new(vec![Value::Int64(x * x)]))
        })
}

#[test]
fn config_validation() {
    assert!(Engine::new(EngineConfig::new(0)).is_err());
    assert!(Engine::new(EngineConfig::new(4).with_bounds(1, 2)).is_err());
    assert!(Engine::new(EngineConfig::new(1).with_bounds(2, 4)).is_err());
    assert!(Engine::new(EngineConfig::new(2).with_bounds(1, 4)).is_ok());
}

#[test]
fn fault_free_job_recomputes_nothing() {
    let e = engine(2);
    let (_, m) = squares(&e, 20, 4).collect_with_metrics().unwrap();
    assert_eq!(m.recomputed_partitions, 0);
    assert_eq!(m.per_partition_ms.len(), 4);
    assert!(m.recompute_ms.is_empty());
    assert_eq!(m.rows_processed, 20);
    assert_eq!(e.last_metrics().unwrap(), m);
}

#[test]
fn no_job_yet() {
    assert!(matches!(engine(1).last_metrics(), Err(Error::NoJobYet)));
}

#[test]
fn injected_failure_is_recomputed_elsewhere() {
    let clean = squares(&engine(4), 40, 8).collect().unwrap();
    let e = Engine::new(EngineConfig::new(4).with_faults(vec![(0, 0)])).unwrap();
    let (rows, m) = squares(&e, 40, 8).collect_with_metrics().unwrap();
    assert_eq!(rows, clean);
    assert_eq!(m.recomputed_partitions, 1);
    assert_eq!(m.per_partition_ms.len(), 8);
    assert_eq!(m.recompute_ms.len(), 1);
}

#[test]
fn failed_task_output_never_reaches_the_cache() {
    let e = Engine::new(EngineConfig::new(2).with_faults(vec![(0, 0), (1, 0)])).unwrap();
    let (src, counts) = counted_source(&e, 10, 2);
    let cached = src.cache();
    let (rows, m) = cached.collect_with_metrics().unwrap();
    assert_eq!(sorted(values(&rows)), (0..10).collect::<Vec<_>>());
    assert_eq!(m.recomputed_partitions, 2);
    // Two discarded attempts plus two good ones.
    assert_eq!(total(&counts), 4);
    // Faults fire per job at the same ordinals, but cached partitions are read,
    // not recomputed from the source.
    let again = cached.collect().unwrap();
    assert_eq!(again, rows);
    assert_eq!(total(&counts), 4);
}

#[test]
fn single_worker_retries_on_itself() {
    let e = Engine::new(EngineConfig::new(1).with_faults(vec![(0, 1)])).unwrap();
    let (rows, m) = squares(&e, 9, 3).collect_with_metrics().unwrap();
    assert_eq!(rows, squares(&engine(1), 9, 3).collect().unwrap());
    assert_eq!(m.recomputed_partitions, 1);
}

#[test]
fn faults_in_shuffle_stages_keep_output_exact() {
    let run = |e: &Arc<Engine>| {
        squares(e, 60, 6)
            .repartition(4)
            .unwrap()
            .collect_with_metrics()
            .unwrap()
    };
    let (clean, _) = run(&engine(3));
    let e = Engine::new(EngineConfig::new(3).with_faults(vec![(1, 0), (2, 2)])).unwrap();
    let (rows, m) = run(&e);
    assert_eq!(rows, clean);
    assert_eq!(m.recomputed_partitions, 2);
    assert_eq!(m.per_partition_ms.len(), 10);
}

fn touching(e: &Arc<Engine>, handle: &Arc<Broadcast>, parts: usize) -> Dataset {
    let h = handle.clone();
    Dataset::from_rows(e, int_schema(), ints(0..64), parts)
        .unwrap()
        .map_partitions(int_schema(), move |ctx, rows| {
            let table = h.value(ctx, |bytes| {
                Ok(bytes.iter().map(|&b| b as i64).sum::<i64>())
            })?;
            Ok(rows
                .iter()
                .map(|r| Row::new(vec![Value::Int64(r.get(0).as_i64().unwrap() + *table)]))
                .collect())
        })
}

#[test]
fn broadcast_materializes_once_per_worker() {
    for _ in 0..5 {
        let e = engine(4);
        let h = e.broadcast(vec![1, 2, 3]).unwrap();
        let (rows, m) = touching(&e, &h, 16).collect_with_metrics().unwrap();
        assert_eq!(rows.len(), 64);
        assert_eq!(rows[0].get(0).as_i64(), Some(6));
        let mat = h.materializations(m.job_id);
        assert_eq!(mat.len(), 4, "all four workers took part");
        assert!(mat.values().all(|&c| c == 1));
        assert_eq!(mat.values().sum::<u64>(), 4);
    }

    let e = engine(1);
    let h = e.broadcast(vec![9]).unwrap();
    let (_, m) = touching(&e, &h, 8).collect_with_metrics().unwrap();
    assert_eq!(h.materializations(m.job_id).values().sum::<u64>(), 1);

    let unused = e.broadcast(vec![9]).unwrap();
    let (_, m) = squares(&e, 8, 8).collect_with_metrics().unwrap();
    assert!(unused.materializations(m.job_id).is_empty());

    assert!(e.broadcast(vec![]).is_err());
}

#[test]
fn broadcast_ceiling_holds_across_stages_and_retries() {
    let e = Engine::new(EngineConfig::new(3).with_faults(vec![(0, 0), (2, 1)])).unwrap();
    let h = e.broadcast(vec![1]).unwrap();
    let h2 = h.clone();
    let ds = touching(&e, &h, 9).repartition(5).unwrap().map_partitions(
        int_schema(),
        move |ctx, rows| {
            h2.value(ctx, |_| Ok(0i64))?;
            Ok(rows)
        },
    );
    let (_, m) = ds.collect_with_metrics().unwrap();
    assert!(h.materializations(m.job_id).values().all(|&c| c == 1));
}

/// A plan whose tasks sleep, so the pool can be resized while it runs.
fn slow(e: &Arc<Engine>, started: Arc<AtomicUsize>) -> Dataset {
    Dataset::from_rows(e, int_schema(), ints(0..48), 24)
        .unwrap()
        .map_partitions(int_schema(), move |_, rows| {
            started.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            Ok(rows)
        })
}

fn resize_mid_job(from: usize, to: usize) {
    let fixed = slow(&engine(4), Arc::new(AtomicUsize::new(0)))
        .collect()
        .unwrap();
    let e = Engine::new(EngineConfig::new(from).with_bounds(1, 4)).unwrap();
    let started = Arc::new(AtomicUsize::new(0));
    let ds = slow(&e, started.clone());
    let job = std::thread::spawn(move || ds.collect_with_metrics().unwrap());
    while started.load(Ordering::SeqCst) < 3 {
        std::thread::yield_now();
    }
    e.set_worker_count(to).unwrap();
    let (rows, m) = job.join().unwrap();
    assert_eq!(canonical(rows.clone()), canonical(fixed.clone()));
    assert_eq!(rows, fixed);
    assert_eq!(m.worker_count_timeline.first().map(|t| t.1), Some(from));
    assert_eq!(m.worker_count_timeline.last().map(|t| t.1), Some(to));
    assert_eq!(e.workers(), to);
}

#[test]
fn grow_mid_job() {
    resize_mid_job(2, 4);
}

#[test]
fn shrink_mid_job() {
    resize_mid_job(4, 1);
}

#[test]
fn set_worker_count_bounds_and_noop() {
    let e = Engine::new(EngineConfig::new(2).with_bounds(1, 3)).unwrap();
    assert!(matches!(
        e.set_worker_count(4),
        Err(Error::OutOfBounds {
            requested: 4,
            min: 1,
            max: 3
        })
    ));
    assert!(matches!(
        e.set_worker_count(0),
        Err(Error::OutOfBounds { .. })
    ));
    e.set_worker_count(2).unwrap();
    assert_eq!(e.workers(), 2);
    assert_eq!(e.worker_timeline().len(), 1);
    assert_eq!(e.worker_timeline()[0].1, 2);
}

#[test]
fn map_indexed_returns_in_order() {
    let e = engine(3);
    let out = e.map_indexed(10, |ctx| Ok(ctx.partition() * 2)).unwrap();
    assert_eq!(out, (0..10).map(|i| i * 2).collect::<Vec<_>>());
    assert!(e.map_indexed(0, |_| Ok(())).unwrap().is_empty());
}

#[test]
fn benchmark_reports_medians() {
    let table = benchmark_scaling(&EngineConfig::new(1), &[1, 2], 3, |e| {
        squares(e, 10, 4).count().map(|_| ())
    })
    .unwrap();
    assert_eq!(table.len(), 2);
    assert!(table.iter().all(|r| r.runs.len() == 3));
    assert_eq!(table[1].workers, 2);
    let csv = scaling_csv(&table);
    assert!(csv.starts_with("workers,median_ms,runs\n1,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().ends_with(",3"));
    assert!(benchmark_scaling(&EngineConfig::new(1), &[], 1, |_| Ok(())).is_err());
    assert!(benchmark_scaling(&EngineConfig::new(1), &[0], 1, |_| Ok(())).is_err());
    assert!(benchmark_scaling(&EngineConfig::new(1), &[1], 0, |_| Ok(())).is_err());
}

#[test]
fn median_of_runs() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
}
