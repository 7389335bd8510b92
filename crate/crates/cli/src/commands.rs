use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tundra_core::interchange::{read_rows, write_rows};
use tundra_core::{Dataset, Engine};
use tundra_graph::reference;
use tundra_image::synth::{generate, write_corpus, CorpusConfig};
use tundra_ml::corpus::read_corpus;
use tundra_ml::experiment::{run_experiment, ExperimentConfig, Variant};
use tundra_ml::registry;
use tundra_repo::{cache_dir_from_env, sha256_file, verify, Manifest, ManifestEntry, Repository};

use crate::bench::{parse_worker_list, Workload};
use crate::{rpc, Command, Failure, RepoCommand};

pub const OUTPUT_ROWS: &str = "output.rows";
pub const MODEL_DIR: &str = "model";
pub const REGISTRY_FILE: &str = "registry.json";
pub const MODEL_MANIFEST: &str = "models.manifest";
pub const REFERENCE_MANIFEST: &str = "reference.tgraph";

pub fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Run {
            pipeline,
            input,
            output,
            partitions,
            workers,
        } => run_pipeline(
            &pipeline,
            &input,
            &output,
            partitions,
            &workers.engine()?,
            out,
        ),
        Command::Experiment {
            data,
            out: dir,
            seed,
            variants,
            model,
            epochs,
            workers,
        } => {
            let variants = Variant::parse_list(&variants)?;
            experiment(
                &data,
                &dir,
                seed,
                variants,
                model,
                epochs,
                &workers.engine()?,
                out,
            )
        }
        Command::GenCorpus {
            out: dir,
            cameras,
            bursts_per_camera,
            burst_len,
            leopard_frac,
            seed,
        } => {
            let cfg = CorpusConfig {
                cameras,
                bursts_per_camera,
                burst_len,
                leopard_frac,
                seed,
                ..CorpusConfig::default()
            };
            gen_corpus(&dir, &cfg, out)
        }
        Command::Bench {
            images,
            workers,
            repetitions,
            partitions,
            out: csv,
        } => bench(
            images,
            &workers,
            repetitions,
            partitions,
            csv.as_deref(),
            out,
        ),
        Command::Repo { action } => repo(action, out, err),
        Command::GenModel { out: dir, seed } => gen_model(&dir, seed, out),
        Command::GenBindings { out: dir } => {
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(REGISTRY_FILE);
            std::fs::write(&path, registry().document_json())?;
            writeln!(out, "{}", path.display())?;
            Ok(())
        }
        Command::ServeRpc { workers } => {
            let stdin = std::io::stdin();
            rpc::serve(workers.engine()?, stdin.lock(), out)?;
            Ok(())
        }
        Command::Export {
            input,
            output,
            columns,
            partitions,
            workers,
        } => export(
            &input,
            &output,
            columns.as_deref(),
            partitions,
            &workers.engine()?,
            out,
        ),
    }
}

/// A corpus directory or a rows file.
pub fn load_input(
    engine: &Arc<Engine>,
    input: &Path,
    partitions: Option<usize>,
) -> Result<Dataset, Failure> {
    let partitions = partitions.unwrap_or_else(|| engine.default_partitions());
    if input.is_dir() {
        Ok(read_corpus(engine, input, partitions)?)
    } else if input.is_file() {
        let (schema, rows) = read_rows(File::open(input)?)?;
        Ok(Dataset::from_rows(engine, schema, rows, partitions)?)
    } else {
        Err(Failure::usage(format!(
            "input {} does not exist",
            input.display()
        )))
    }
}

fn read_text(path: &Path, what: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn write_dataset(ds: &Dataset, path: &Path) -> Result<usize, Failure> {
    let rows = ds.collect()?;
    let file = BufWriter::new(File::create(path)?);
    write_rows(file, ds.schema(), &rows)?;
    Ok(rows.len())
}

fn run_pipeline(
    spec: &Path,
    input: &Path,
    output: &Path,
    partitions: Option<usize>,
    engine: &Arc<Engine>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let pipeline = registry().pipeline_from_spec(&read_text(spec, "pipeline spec")?)?;
    let ds = load_input(engine, input, partitions)?;
    let model = pipeline.fit(&ds)?;
    let result = model.transform(&ds)?;
    std::fs::create_dir_all(output)?;
    let n = write_dataset(&result, &output.join(OUTPUT_ROWS))?;
    model.save(&output.join(MODEL_DIR))?;
    writeln!(
        out,
        "wrote {n} rows and {} fitted stages to {}",
        model.stages().len(),
        output.display()
    )?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    data: &Path,
    dir: &Path,
    seed: u64,
    variants: Vec<Variant>,
    model: Option<PathBuf>,
    epochs: Option<i64>,
    engine: &Arc<Engine>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    if !data.is_dir() {
        return Err(Failure::usage(format!(
            "corpus directory {} does not exist",
            data.display()
        )));
    }
    std::fs::create_dir_all(dir)?;
    let model = match model {
        Some(m) => m,
        None => {
            let m = dir.join(MODEL_DIR).join(REFERENCE_MANIFEST);
            std::fs::create_dir_all(m.parent().expect("has parent"))?;
            tundra_graph::save_graph(&reference::build(reference::DEFAULT_SEED), &m)
                .map_err(|e| Failure::exec(e.to_string()))?;
            m
        }
    };
    let mut cfg = ExperimentConfig::new(seed, model);
    cfg.variants = variants;
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let report = run_experiment(engine, data, &cfg)?;
    report.write(dir)?;
    write!(out, "{}", report.summary_csv())?;
    Ok(())
}

fn gen_corpus(dir: &Path, cfg: &CorpusConfig, out: &mut dyn Write) -> Result<(), Failure> {
    if cfg.cameras == 0 || cfg.bursts_per_camera == 0 || cfg.burst_len == 0 {
        return Err(Failure::usage(
            "cameras, bursts per camera and burst length must be positive",
        ));
    }
    if !(0.0..=1.0).contains(&cfg.leopard_frac) {
        return Err(Failure::usage(format!(
            "leopard fraction {} is outside [0, 1]",
            cfg.leopard_frac
        )));
    }
    let images = generate(cfg);
    write_corpus(dir, &images)?;
    let positives = images.iter().filter(|i| i.label == 1).count();
    writeln!(
        out,
        "wrote {} images ({positives} positive) to {}",
        images.len(),
        dir.display()
    )?;
    Ok(())
}

fn bench(
    images: usize,
    workers: &str,
    repetitions: usize,
    partitions: usize,
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let counts = parse_worker_list(workers).map_err(Failure::usage)?;
    if images == 0 || partitions == 0 || repetitions == 0 {
        return Err(Failure::usage(
            "images, partitions and repetitions must be positive",
        ));
    }
    let workload = Workload::new(images, partitions)?;
    let table = workload.scaling(&counts, repetitions)?;
    let text = tundra_core::scaling_csv(&table);
    match csv {
        Some(path) => {
            std::fs::write(path, &text)?;
            writeln!(out, "{}", path.display())?;
        }
        None => write!(out, "{text}")?,
    }
    Ok(())
}

fn repo(action: RepoCommand, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match action {
        RepoCommand::Fetch {
            manifest,
            name,
            cache,
        } => {
            let cache = cache.unwrap_or_else(|| cache_dir_from_env(Path::new("tundra-cache")));
            let repo = Repository::open(&manifest, cache)?;
            let outcome = repo.fetch(&name)?;
            if let Some(problem) = &outcome.repaired {
                writeln!(err, "repaired cache entry: {problem}")?;
            }
            writeln!(out, "{}", outcome.path.display())?;
        }
        RepoCommand::List { manifest } => {
            for entry in Manifest::load(&manifest)?.entries() {
                writeln!(out, "{}", entry.to_line())?;
            }
        }
        RepoCommand::Verify { path, sha256 } => {
            if !tundra_repo::is_sha256_hex(&sha256.to_ascii_lowercase()) {
                return Err(Failure::usage(format!(
                    "{sha256:?} is not a SHA-256 hex digest"
                )));
            }
            if !path.is_file() {
                return Err(Failure::usage(format!("{} is not a file", path.display())));
            }
            if verify(&path, &sha256)? {
                writeln!(out, "ok")?;
            } else {
                return Err(Failure::exec(format!(
                    "{} does not match {sha256}",
                    path.display()
                )));
            }
        }
    }
    Ok(())
}

fn gen_model(dir: &Path, seed: u64, out: &mut dyn Write) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join(REFERENCE_MANIFEST);
    tundra_graph::save_graph(&reference::build(seed), &manifest_path)
        .map_err(|e| Failure::exec(e.to_string()))?;
    let weights = tundra_graph::weights_file_of(&std::fs::read(&manifest_path)?)
        .map_err(|e| Failure::exec(e.to_string()))?;
    let mut lines = String::new();
    for name in [REFERENCE_MANIFEST, weights.as_str()] {
        let path = dir.join(name);
        let entry = ManifestEntry {
            name: name.to_string(),
            uri: format!("file://{name}"),
            sha256: sha256_file(&path)?,
            size_bytes: std::fs::metadata(&path)?.len(),
        };
        lines.push_str(&entry.to_line());
        lines.push('\n');
    }
    std::fs::write(dir.join(MODEL_MANIFEST), lines)?;
    writeln!(out, "{}", manifest_path.display())?;
    Ok(())
}

fn export(
    input: &Path,
    output: &Path,
    columns: Option<&str>,
    partitions: Option<usize>,
    engine: &Arc<Engine>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let mut ds = load_input(engine, input, partitions)?;
    if let Some(cols) = columns {
        let cols: Vec<&str> = cols.split(',').map(str::trim).collect();
        ds = ds.select(&cols)?;
    }
    let n = write_dataset(&ds, output)?;
    writeln!(out, "wrote {n} rows to {}", output.display())?;
    Ok(())
}
