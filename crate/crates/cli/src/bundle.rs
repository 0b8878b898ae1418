//! Prepared dataset bundles: a validated graph, its split, and any
//! feature matrices, serialized to a directory.
//!
//! Layout:
//!   bundle.json              type registry, feature sources, counts
//!   schema.json              relation declarations
//!   edges.tsv                canonical edges with a partition column
//!   fingerprints.<type>.csv  id + hex-packed bits (when computed)
//!   features.<type>.csv      id + dense values (when provided)

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use mmvgae::graph::{
    load_graph_with_split, EdgeSplit, FeatureMap, FeatureSpec, MultimodalGraph, Schema,
};
use mmvgae::tensor::DenseMatrix;
use mmvgae::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    OneHot,
    Fingerprint,
    Dense,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeMeta {
    pub name: String,
    pub count: usize,
    pub features: FeatureSource,
    /// External ids in dense-index order, for verification and export.
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleMeta {
    pub types: Vec<TypeMeta>,
    pub split_seed: u64,
    pub fp_width: usize,
    pub fp_radius: usize,
    /// Node types with stored fingerprint matrices.
    pub fingerprint_types: Vec<String>,
}

pub struct Bundle {
    pub meta: BundleMeta,
    pub schema: Schema,
    pub graph: MultimodalGraph,
    pub split: EdgeSplit,
    /// Dense-index-aligned fingerprint rows per node type.
    pub fingerprints: BTreeMap<String, DenseMatrix<f64>>,
    pub dir: PathBuf,
}

pub fn bundle_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("bundle.json"), dir.join("schema.json"), dir.join("edges.tsv"))
}

pub fn fingerprint_csv_path(dir: &Path, type_name: &str) -> PathBuf {
    dir.join(format!("fingerprints.{type_name}.csv"))
}

pub fn features_csv_path(dir: &Path, type_name: &str) -> PathBuf {
    dir.join(format!("features.{type_name}.csv"))
}

/// Write a fingerprint matrix as id + hex rows.
pub fn write_fingerprint_csv(
    path: &Path,
    ids: &[String],
    rows: &DenseMatrix<f64>,
) -> Result<()> {
    let mut out = String::from("id,fp_hex\n");
    for (i, id) in ids.iter().enumerate() {
        let hex = row_to_hex(rows.row(i));
        out.push_str(id);
        out.push(',');
        out.push_str(&hex);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn row_to_hex(row: &[f64]) -> String {
    let mut out = String::with_capacity(row.len() / 4);
    let mut nibble = 0u8;
    for (i, &v) in row.iter().enumerate() {
        nibble = (nibble << 1) | u8::from(v != 0.0);
        if i % 4 == 3 {
            out.push(char::from_digit(u32::from(nibble), 16).unwrap());
            nibble = 0;
        }
    }
    out
}

fn hex_to_row(hex: &str, width: usize) -> Result<Vec<f64>> {
    if hex.len() * 4 != width {
        return Err(Error::Parse {
            path: "fingerprint csv".into(),
            line: 0,
            msg: format!("hex length {} does not encode width {width}", hex.len()),
        });
    }
    let mut row = Vec::with_capacity(width);
    for c in hex.chars() {
        let nibble = c.to_digit(16).ok_or_else(|| Error::Parse {
            path: "fingerprint csv".into(),
            line: 0,
            msg: format!("bad hex digit '{c}'"),
        })?;
        for shift in (0..4).rev() {
            row.push(f64::from((nibble >> shift) & 1));
        }
    }
    Ok(row)
}

pub fn read_fingerprint_csv(path: &Path, width: usize) -> Result<(Vec<String>, DenseMatrix<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        if line_idx == 0 || line.is_empty() {
            continue; // header
        }
        let (id, hex) = line.split_once(',').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: line_idx + 1,
            msg: "expected 'id,hex'".into(),
        })?;
        ids.push(id.to_string());
        rows.push(hex_to_row(hex, width)?);
    }
    let matrix =
        if rows.is_empty() { DenseMatrix::zeros(0, width) } else { DenseMatrix::from_rows(&rows)? };
    Ok((ids, matrix))
}

pub fn write_dense_csv(path: &Path, ids: &[String], rows: &DenseMatrix<f64>) -> Result<()> {
    let mut out = String::from("id,values...\n");
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in rows.row(i) {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_dense_csv(path: &Path) -> Result<(Vec<String>, DenseMatrix<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        if line_idx == 0 || line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default();
        let values: std::result::Result<Vec<f64>, _> =
            fields.map(str::parse).collect();
        let values = values.map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: line_idx + 1,
            msg: "non-numeric feature value".into(),
        })?;
        ids.push(id.to_string());
        rows.push(values);
    }
    let matrix = DenseMatrix::from_rows(&rows)?;
    Ok((ids, matrix))
}

/// Align id-keyed rows with a type's dense indices. Missing ids become
/// zero rows (with a warning) when `lenient`, errors otherwise.
pub fn align_rows(
    graph: &MultimodalGraph,
    type_idx: usize,
    ids: &[String],
    rows: &DenseMatrix<f64>,
    lenient: bool,
) -> Result<DenseMatrix<f64>> {
    let node_type = graph.node_type(type_idx);
    let mut aligned = DenseMatrix::zeros(node_type.count(), rows.cols());
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        index.insert(id.as_str(), i);
    }
    let mut missing = 0usize;
    for (dense_idx, id) in node_type.ids.iter().enumerate() {
        match index.get(id.as_str()) {
            Some(&row) => aligned.row_mut(dense_idx).copy_from_slice(rows.row(row)),
            None if lenient => missing += 1,
            None => {
                return Err(Error::Config(format!(
                    "no feature row for node '{id}' of type '{}'",
                    node_type.name
                )));
            }
        }
    }
    if missing > 0 {
        warn!(
            "type '{}': {missing} node(s) without feature rows, zero-filled",
            node_type.name
        );
    }
    Ok(aligned)
}

/// Serialize a prepared dataset. Fingerprint tables are stored for
/// their types whether they serve as node features or as decoder
/// augmentation.
#[allow(clippy::too_many_arguments)]
pub fn save_bundle(
    dir: &Path,
    graph: &MultimodalGraph,
    schema: &Schema,
    split: &EdgeSplit,
    feature_sources: &BTreeMap<String, FeatureSource>,
    fingerprints: &BTreeMap<String, DenseMatrix<f64>>,
    fp_width: usize,
    fp_radius: usize,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (bundle_path, schema_path, edges_path) = bundle_paths(dir);

    let mut edges_out = Vec::new();
    mmvgae::graph::write_edges_tsv(graph, Some(split), &mut edges_out)?;
    fs::write(&edges_path, edges_out)?;
    fs::write(&schema_path, schema.to_json())?;

    let mut types = Vec::new();
    for t in graph.node_types() {
        let features = feature_sources.get(&t.name).cloned().unwrap_or(FeatureSource::OneHot);
        types.push(TypeMeta {
            name: t.name.clone(),
            count: t.count(),
            features,
            ids: t.ids.clone(),
        });
    }
    for (type_name, matrix) in fingerprints {
        let t = graph.type_id(type_name)?;
        write_fingerprint_csv(
            &fingerprint_csv_path(dir, type_name),
            &graph.node_type(t).ids,
            matrix,
        )?;
    }
    for t in graph.node_types() {
        if feature_sources.get(&t.name) == Some(&FeatureSource::Dense) {
            let idx = graph.type_id(&t.name)?;
            if let FeatureSpec::Dense(m) = graph.features(idx) {
                write_dense_csv(&features_csv_path(dir, &t.name), &t.ids, m)?;
            }
        }
    }

    let meta = BundleMeta {
        types,
        split_seed: split.seed,
        fp_width,
        fp_radius,
        fingerprint_types: fingerprints.keys().cloned().collect(),
    };
    fs::write(&bundle_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<Bundle> {
    let (bundle_path, schema_path, edges_path) = bundle_paths(dir);
    let meta: BundleMeta = serde_json::from_str(&fs::read_to_string(&bundle_path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", bundle_path.display())))?;
    let schema = Schema::from_json(&fs::read_to_string(&schema_path)?)?;
    let (graph, split) = load_graph_with_split(&edges_path, &schema, &FeatureMap::new())?;

    // The reloaded graph must agree with the recorded registry.
    for tm in &meta.types {
        let t = graph.type_id(&tm.name)?;
        if graph.node_type(t).ids != tm.ids {
            return Err(Error::Config(format!(
                "bundle '{}': node registry for type '{}' does not match edges.tsv",
                dir.display(),
                tm.name
            )));
        }
    }
    split.validate(&graph)?;

    let mut fingerprints = BTreeMap::new();
    for type_name in &meta.fingerprint_types {
        let path = fingerprint_csv_path(dir, type_name);
        let (ids, rows) = read_fingerprint_csv(&path, meta.fp_width)?;
        let t = graph.type_id(type_name)?;
        let aligned = align_rows(&graph, t, &ids, &rows, true)?;
        fingerprints.insert(type_name.clone(), aligned);
    }

    let mut graph = graph;
    for tm in &meta.types {
        let t = graph.type_id(&tm.name)?;
        match tm.features {
            FeatureSource::OneHot => {}
            FeatureSource::Fingerprint => {
                let matrix = fingerprints.get(&tm.name).ok_or_else(|| {
                    Error::Config(format!(
                        "type '{}' declares fingerprint features but the bundle has no table",
                        tm.name
                    ))
                })?;
                graph.set_features(t, FeatureSpec::Fingerprint(matrix.clone()))?;
            }
            FeatureSource::Dense => {
                let (ids, rows) = read_dense_csv(&features_csv_path(dir, &tm.name))?;
                let aligned = align_rows(&graph, t, &ids, &rows, false)?;
                graph.set_features(t, FeatureSpec::Dense(aligned))?;
            }
        }
    }

    let mut split = split;
    split.seed = meta.split_seed;
    Ok(Bundle { meta, schema, graph, split, fingerprints, dir: dir.to_path_buf() })
}
