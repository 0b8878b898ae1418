//! The operator commands, callable in-process (the binary is a thin
//! argument-parsing wrapper).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use mmvgae::chem::fingerprint_matrix;
use mmvgae::graph::{load_graph, split_edges, FeatureMap, FeatureSpec, Partition, Schema, SplitRatios};
use mmvgae::model::{
    build_latents, link_probability, score_pairs, Architecture, DecoderKind, ForwardInput,
    ParamBinder, TrainConfig,
};
use mmvgae::num::{Dtype, Scalar};
use mmvgae::tensor::{checkpoint, DenseMatrix, ParamStore, Tape};
use mmvgae::train::{build_adjacency, evaluate, train};
use mmvgae::{Error, Result};

use crate::bundle::{self, load_bundle, Bundle, FeatureSource};
use crate::manifest::RunManifest;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CONFIG_ECHO_FILE: &str = "model.config.txt";

#[derive(Debug, Clone)]
pub struct PrepareArgs {
    pub edges: PathBuf,
    pub schema: PathBuf,
    /// type=path SMILES sources; fingerprints are computed and stored.
    pub smiles: Vec<(String, PathBuf)>,
    /// type=path dense feature CSVs.
    pub dense: Vec<(String, PathBuf)>,
    /// type=one-hot|fingerprint|dense node feature choices.
    pub features: Vec<(String, String)>,
    pub ratios: SplitRatios,
    pub fp_width: usize,
    pub fp_radius: usize,
    pub strict_smiles: bool,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_prepare(args: &PrepareArgs) -> Result<()> {
    let schema = Schema::from_json(&fs::read_to_string(&args.schema)?);
    let schema = schema?;
    let graph = load_graph(&args.edges, &schema, &FeatureMap::new())?;

    // Fingerprints per requested type, aligned to dense indices.
    let mut fingerprints: BTreeMap<String, DenseMatrix<f64>> = BTreeMap::new();
    for (type_name, path) in &args.smiles {
        let t = graph.type_id(type_name)?;
        let table = fingerprint_matrix(path, args.fp_width, args.fp_radius, args.strict_smiles)?;
        let aligned = bundle::align_rows(&graph, t, &table.ids, &table.matrix, true)?;
        fingerprints.insert(type_name.clone(), aligned);
    }

    let mut graph = graph;
    let mut feature_sources: BTreeMap<String, FeatureSource> = BTreeMap::new();
    for (type_name, kind) in &args.features {
        let t = graph.type_id(type_name)?;
        match kind.as_str() {
            "one-hot" => {
                feature_sources.insert(type_name.clone(), FeatureSource::OneHot);
            }
            "fingerprint" => {
                let matrix = fingerprints.get(type_name).ok_or_else(|| {
                    Error::Config(format!(
                        "fingerprint features for type '{type_name}' need --smiles {type_name}=<file>"
                    ))
                })?;
                graph.set_features(t, FeatureSpec::Fingerprint(matrix.clone()))?;
                feature_sources.insert(type_name.clone(), FeatureSource::Fingerprint);
            }
            "dense" => {
                let path = args
                    .dense
                    .iter()
                    .find(|(n, _)| n == type_name)
                    .map(|(_, p)| p)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "dense features for type '{type_name}' need --dense {type_name}=<file>"
                        ))
                    })?;
                let (ids, rows) = bundle::read_dense_csv(path)?;
                let aligned = bundle::align_rows(&graph, t, &ids, &rows, false)?;
                graph.set_features(t, FeatureSpec::Dense(aligned))?;
                feature_sources.insert(type_name.clone(), FeatureSource::Dense);
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown feature kind '{other}' (expected one-hot, fingerprint, or dense)"
                )));
            }
        }
    }

    let split = split_edges(&graph, &args.ratios, args.seed)?;
    bundle::save_bundle(
        &args.out,
        &graph,
        &schema,
        &split,
        &feature_sources,
        &fingerprints,
        args.fp_width,
        args.fp_radius,
    )?;

    let mut manifest = RunManifest::new("prepare", args.seed);
    manifest.record_input("edges", &args.edges)?;
    manifest.record_input("schema", &args.schema)?;
    for (type_name, path) in &args.smiles {
        manifest.record_input(&format!("smiles.{type_name}"), path)?;
    }
    for (type_name, path) in &args.dense {
        manifest.record_input(&format!("dense.{type_name}"), path)?;
    }
    manifest.config.insert("ratios".into(), format!(
        "{},{},{}",
        args.ratios.train, args.ratios.val, args.ratios.test
    ));
    manifest.config.insert("message_frac".into(), args.ratios.message_frac.to_string());
    manifest.config.insert("fp_width".into(), args.fp_width.to_string());
    manifest.config.insert("fp_radius".into(), args.fp_radius.to_string());
    manifest.stats.insert("relations".into(), serde_json::json!(graph.relations().len()));
    manifest.stats.insert("edges".into(), serde_json::json!(graph.edge_count()));
    let node_counts: BTreeMap<String, usize> =
        graph.node_types().iter().map(|t| (t.name.clone(), t.count())).collect();
    manifest.stats.insert("nodes".into(), serde_json::json!(node_counts));
    manifest.outputs = vec!["bundle.json".into(), "schema.json".into(), "edges.tsv".into()];
    manifest.write(&args.out.join("manifest.json"))?;
    info!(
        "prepared bundle at {}: {} relations, {} edges",
        args.out.display(),
        graph.relations().len(),
        graph.edge_count()
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub bundle: PathBuf,
    pub config: PathBuf,
    /// Extra `key=value` overrides, applied after the file.
    pub sets: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub f32_mode: bool,
    pub out: PathBuf,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let mut cfg = TrainConfig::from_file(&args.config)?;
    for (k, v) in &args.sets {
        cfg.apply(k, v)?;
    }
    if let Some(seed) = args.seed {
        cfg.apply("seed", &seed.to_string())?;
    }
    cfg.validate()?;

    fs::create_dir_all(&args.out)?;
    // The manifest lands before training starts.
    let mut manifest = RunManifest::new("train", cfg.seed);
    let (bundle_json, schema_json, edges_tsv) = bundle::bundle_paths(&args.bundle);
    manifest.record_input("bundle", &bundle_json)?;
    manifest.record_input("schema", &schema_json)?;
    manifest.record_input("edges", &edges_tsv)?;
    manifest.record_input("config", &args.config)?;
    manifest.record_config_text(&cfg.echo());
    manifest.config.insert("dtype".into(), if args.f32_mode { "f32" } else { "f64" }.into());
    manifest.outputs = vec![
        CHECKPOINT_FILE.into(),
        CONFIG_ECHO_FILE.into(),
        "report.csv".into(),
        "summary.json".into(),
    ];
    manifest.write(&args.out.join("manifest.json"))?;

    if args.f32_mode {
        run_train::<f32>(&bundle, &cfg, &args.out)
    } else {
        run_train::<f64>(&bundle, &cfg, &args.out)
    }
}

fn augmentation_fingerprints<'a>(
    bundle: &'a Bundle,
    cfg: &TrainConfig,
    arch: &Architecture,
) -> Result<Option<&'a DenseMatrix<f64>>> {
    if !cfg.fingerprints {
        return Ok(None);
    }
    let focus_name = &bundle.graph.node_type(arch.focus_type).name;
    bundle
        .fingerprints
        .get(focus_name)
        .map(Some)
        .ok_or_else(|| {
            Error::Config(format!(
                "fingerprint augmentation needs a stored fingerprint table for type '{focus_name}' \
                 (prepare with --smiles {focus_name}=<file>)"
            ))
        })
}

fn run_train<S: Scalar>(bundle: &Bundle, cfg: &TrainConfig, out: &Path) -> Result<()> {
    let arch = Architecture::resolve(&bundle.graph, cfg)?;
    let fp = augmentation_fingerprints(bundle, cfg, &arch)?;
    let outcome = train::<S>(&bundle.graph, &bundle.split, cfg, fp)?;

    checkpoint::save(&outcome.params, &out.join(CHECKPOINT_FILE))?;
    fs::write(out.join(CONFIG_ECHO_FILE), cfg.echo())?;
    fs::write(out.join("report.csv"), outcome.report.to_csv())?;

    let adjacency = build_adjacency::<S>(&bundle.graph, &bundle.split, &arch)?;
    let has_val = bundle
        .split
        .per_relation
        .iter()
        .any(|rs| !rs.validation.is_empty());
    let final_eval = if has_val {
        Some(evaluate(
            &bundle.graph,
            &bundle.split,
            cfg,
            &arch,
            &outcome.params,
            &adjacency,
            fp.map(DenseMatrix::cast).as_ref(),
            Partition::Validation,
        )?)
    } else {
        None
    };
    let summary = outcome.report.summary_json(final_eval.as_ref());
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary).expect("json"))?;
    info!("trained {} epochs, outputs in {}", outcome.report.epochs_run(), out.display());
    Ok(())
}

/// Load a checkpoint and verify every parameter matches the shapes the
/// architecture expects for this bundle.
fn load_checked_params<S: Scalar>(
    path: &Path,
    arch: &Architecture,
    bundle: &Bundle,
) -> Result<ParamStore<S>> {
    let params: ParamStore<S> = checkpoint::load(path)?;
    let expected = arch.parameter_shapes(&bundle.graph);
    if params.len() != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{}: {} parameters stored, architecture defines {}",
            path.display(),
            params.len(),
            expected.len()
        )));
    }
    for (name, rows, cols, _) in expected {
        let m = params.get(&name).map_err(|_| {
            Error::Checkpoint(format!("{}: missing parameter '{name}'", path.display()))
        })?;
        if m.shape() != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "{}: parameter '{name}' is {}x{}, bundle and config require {rows}x{cols}",
                path.display(),
                m.shape().0,
                m.shape().1
            )));
        }
    }
    Ok(params)
}

/// Configuration for checkpoint-consuming commands: an explicit
/// --config wins, otherwise the echo written next to the checkpoint.
fn config_for_checkpoint(checkpoint_path: &Path, explicit: Option<&Path>) -> Result<TrainConfig> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => checkpoint_path
            .parent()
            .map(|d| d.join(CONFIG_ECHO_FILE))
            .filter(|p| p.exists())
            .ok_or_else(|| {
                Error::Config(format!(
                    "no --config given and no {CONFIG_ECHO_FILE} next to {}",
                    checkpoint_path.display()
                ))
            })?,
    };
    TrainConfig::from_file(&path)
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub bundle: PathBuf,
    pub checkpoint: PathBuf,
    pub split: String,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let partition = match args.split.as_str() {
        "val" => Partition::Validation,
        "test" => Partition::Test,
        "train" => Partition::TrainSupervision,
        other => return Err(Error::Config(format!("unknown split '{other}' (val|test|train)"))),
    };
    let bundle = load_bundle(&args.bundle)?;
    let cfg = config_for_checkpoint(&args.checkpoint, args.config.as_deref())?;
    let report = match checkpoint::peek_dtype(&args.checkpoint)? {
        Dtype::F64 => run_evaluate::<f64>(&bundle, &cfg, &args.checkpoint, partition)?,
        Dtype::F32 => run_evaluate::<f32>(&bundle, &cfg, &args.checkpoint, partition)?,
    };
    let csv = report.to_csv();
    let json = serde_json::to_string_pretty(&report.to_json()).expect("json");
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("metrics.csv"), &csv)?;
            fs::write(dir.join("metrics.json"), &json)?;
            let mut manifest = RunManifest::new("evaluate", cfg.seed);
            manifest.record_input("checkpoint", &args.checkpoint)?;
            let (bundle_json, _, edges_tsv) = bundle::bundle_paths(&args.bundle);
            manifest.record_input("bundle", &bundle_json)?;
            manifest.record_input("edges", &edges_tsv)?;
            manifest.config.insert("split".into(), args.split.clone());
            manifest.outputs = vec!["metrics.csv".into(), "metrics.json".into()];
            manifest.write(&dir.join("manifest.json"))?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_evaluate<S: Scalar>(
    bundle: &Bundle,
    cfg: &TrainConfig,
    checkpoint_path: &Path,
    partition: Partition,
) -> Result<mmvgae::train::EvalReport> {
    let arch = Architecture::resolve(&bundle.graph, cfg)?;
    let params = load_checked_params::<S>(checkpoint_path, &arch, bundle)?;
    let adjacency = build_adjacency::<S>(&bundle.graph, &bundle.split, &arch)?;
    let fp = augmentation_fingerprints(bundle, cfg, &arch)?.map(DenseMatrix::cast::<S>);
    evaluate(&bundle.graph, &bundle.split, cfg, &arch, &params, &adjacency, fp.as_ref(), partition)
}

#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub bundle: PathBuf,
    pub checkpoint: PathBuf,
    pub pairs: PathBuf,
    pub relation: String,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let cfg = config_for_checkpoint(&args.checkpoint, args.config.as_deref())?;
    let rel_idx = bundle.graph.relation_id(&args.relation)?;

    // Resolve external ids up front: bad rows abort with the id named.
    let (st, dt) = bundle.graph.relation_endpoint_types(rel_idx);
    let text = fs::read_to_string(&args.pairs)?;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut id_rows: Vec<(String, String)> = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(src_id), Some(dst_id)) = (fields.next(), fields.next()) else {
            return Err(Error::Parse {
                path: args.pairs.display().to_string(),
                line: line_idx + 1,
                msg: "expected 'src_id<TAB>dst_id'".into(),
            });
        };
        let src = bundle.graph.node_type(st).index_of(src_id).ok_or_else(|| Error::Parse {
            path: args.pairs.display().to_string(),
            line: line_idx + 1,
            msg: format!("unknown {} id '{src_id}'", bundle.graph.node_type(st).name),
        })?;
        let dst = bundle.graph.node_type(dt).index_of(dst_id).ok_or_else(|| Error::Parse {
            path: args.pairs.display().to_string(),
            line: line_idx + 1,
            msg: format!("unknown {} id '{dst_id}'", bundle.graph.node_type(dt).name),
        })?;
        pairs.push((src, dst));
        id_rows.push((src_id.to_string(), dst_id.to_string()));
    }

    let scores = match checkpoint::peek_dtype(&args.checkpoint)? {
        Dtype::F64 => score_checkpoint::<f64>(&bundle, &cfg, &args.checkpoint, rel_idx, &pairs)?,
        Dtype::F32 => score_checkpoint::<f32>(&bundle, &cfg, &args.checkpoint, rel_idx, &pairs)?,
    };
    let values = if cfg.task.is_regression() { scores } else { link_probability(&scores) };

    let mut out = String::new();
    for ((src_id, dst_id), value) in id_rows.iter().zip(&values) {
        out.push_str(&format!("{src_id}\t{dst_id}\t{}\t{value}\n", args.relation));
    }
    match &args.out {
        Some(path) => fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn score_checkpoint<S: Scalar>(
    bundle: &Bundle,
    cfg: &TrainConfig,
    checkpoint_path: &Path,
    rel_idx: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let arch = Architecture::resolve(&bundle.graph, cfg)?;
    let params = load_checked_params::<S>(checkpoint_path, &arch, bundle)?;
    let adjacency = build_adjacency::<S>(&bundle.graph, &bundle.split, &arch)?;
    let fp = augmentation_fingerprints(bundle, cfg, &arch)?.map(DenseMatrix::cast::<S>);
    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(&params);
    let input = ForwardInput {
        graph: &bundle.graph,
        adjacency: &adjacency,
        noise: None,
        fingerprints: fp.as_ref(),
    };
    let latents = build_latents(&mut tape, &mut binder, &arch, &input)?;
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let scores =
        score_pairs(&mut tape, &mut binder, &arch, &bundle.graph, &latents, rel_idx, pairs)?;
    Ok(tape.value(scores).data().iter().map(|v| v.as_f64()).collect())
}

#[derive(Debug, Clone)]
pub struct ExportArgs {
    pub bundle: PathBuf,
    pub checkpoint: PathBuf,
    pub what: String,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn cmd_export_embeddings(args: &ExportArgs) -> Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let cfg = config_for_checkpoint(&args.checkpoint, args.config.as_deref())?;
    let what = match args.what.as_str() {
        "drug-latent" => ExportKind::Latent("drug".to_string()),
        "protein-latent" => ExportKind::Latent("protein".to_string()),
        "side-effect" => ExportKind::SideEffect,
        other => match other.strip_prefix("latent:") {
            Some(type_name) => ExportKind::Latent(type_name.to_string()),
            None => {
                return Err(Error::Config(format!(
                    "unknown export '{other}' (drug-latent | protein-latent | latent:<type> | side-effect)"
                )));
            }
        },
    };
    let csv = match checkpoint::peek_dtype(&args.checkpoint)? {
        Dtype::F64 => run_export::<f64>(&bundle, &cfg, &args.checkpoint, &what)?,
        Dtype::F32 => run_export::<f32>(&bundle, &cfg, &args.checkpoint, &what)?,
    };
    fs::write(&args.out, csv)?;
    Ok(())
}

enum ExportKind {
    Latent(String),
    SideEffect,
}

fn run_export<S: Scalar>(
    bundle: &Bundle,
    cfg: &TrainConfig,
    checkpoint_path: &Path,
    what: &ExportKind,
) -> Result<String> {
    let arch = Architecture::resolve(&bundle.graph, cfg)?;
    let params = load_checked_params::<S>(checkpoint_path, &arch, bundle)?;

    match what {
        ExportKind::Latent(type_name) => {
            let t = bundle.graph.type_id(type_name)?;
            let adjacency = build_adjacency::<S>(&bundle.graph, &bundle.split, &arch)?;
            let fp = augmentation_fingerprints(bundle, cfg, &arch)?.map(DenseMatrix::cast::<S>);
            let mut tape = Tape::new();
            let mut binder = ParamBinder::new(&params);
            let input = ForwardInput {
                graph: &bundle.graph,
                adjacency: &adjacency,
                noise: None,
                fingerprints: fp.as_ref(),
            };
            let latents = build_latents(&mut tape, &mut binder, &arch, &input)?;
            // Deterministic embeddings: the mean head, not a sample.
            let mu = tape.value(latents.per_type[t].mu);
            let mut out = header_row("id", mu.cols());
            for (i, id) in bundle.graph.node_type(t).ids.iter().enumerate() {
                out.push_str(id);
                for v in mu.row(i) {
                    out.push_str(&format!(",{}", v.as_f64()));
                }
                out.push('\n');
            }
            Ok(out)
        }
        ExportKind::SideEffect => {
            if arch.decoder != DecoderKind::Dedicom {
                return Err(Error::Capability(
                    "side-effect embeddings are the DEDICOM diagonals; this checkpoint was \
                     trained with the mlp decoder"
                        .into(),
                ));
            }
            let mut rows = Vec::new();
            for (rel_idx, kind) in arch.decode.iter().enumerate() {
                if *kind != Some(mmvgae::model::DecodeKind::Focus) {
                    continue;
                }
                let name = &bundle.graph.relation(rel_idx).name;
                let diag = params.get(&mmvgae::model::arch::dedicom_diag(name))?;
                rows.push((name.clone(), diag.clone()));
            }
            let width = rows.first().map_or(0, |(_, d)| d.cols());
            let mut out = header_row("relation", width);
            for (name, diag) in rows {
                out.push_str(&name);
                for v in diag.row(0) {
                    out.push_str(&format!(",{}", v.as_f64()));
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

fn header_row(key: &str, dims: usize) -> String {
    let mut out = String::from(key);
    for i in 0..dims {
        out.push_str(&format!(",z{i}"));
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone)]
pub struct FingerprintArgs {
    pub smiles: PathBuf,
    pub width: usize,
    pub radius: usize,
    pub hex: bool,
    pub strict: bool,
    pub out: Option<PathBuf>,
}

pub fn cmd_fingerprint(args: &FingerprintArgs) -> Result<()> {
    let table = fingerprint_matrix(&args.smiles, args.width, args.radius, args.strict)?;
    let mut out = String::new();
    if args.hex {
        out.push_str("id,fp_hex\n");
    } else {
        out.push_str("id");
        for i in 0..args.width {
            out.push_str(&format!(",b{i}"));
        }
        out.push('\n');
    }
    for (i, id) in table.ids.iter().enumerate() {
        out.push_str(id);
        if args.hex {
            out.push(',');
            let row = table.matrix.row(i);
            let mut nibble = 0u8;
            for (k, &v) in row.iter().enumerate() {
                nibble = (nibble << 1) | u8::from(v != 0.0);
                if k % 4 == 3 {
                    out.push(char::from_digit(u32::from(nibble), 16).unwrap());
                    nibble = 0;
                }
            }
        } else {
            for &v in table.matrix.row(i) {
                out.push_str(if v != 0.0 { ",1" } else { ",0" });
            }
        }
        out.push('\n');
    }
    match &args.out {
        Some(path) => fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

/// Parse repeated `name=value` flags.
pub fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got '{s}'"))
}

/// Parse `a,b,c` ratio triples.
pub fn parse_ratios(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated ratios, got '{s}'"));
    }
    let parse = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("bad ratio '{p}'"));
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}
