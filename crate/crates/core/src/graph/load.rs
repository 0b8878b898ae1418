//! Edge-list loading and export.
//!
//! Edge files are TSV with columns
//! `src_type  src_id  relation  dst_type  dst_id  [weight]` and `#`
//! comments. Split export appends a `partition` column (the weight
//! column is kept, empty when absent).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::graph::split::{EdgeSplit, Partition, RelationSplit};
use crate::graph::types::{Edge, FeatureSpec, MultimodalGraph, Schema};

/// Per-type feature sources resolved by the caller. Types without an
/// entry default to one-hot.
pub type FeatureMap = std::collections::BTreeMap<String, FeatureSpec>;

pub fn load_graph(path: &Path, schema: &Schema, features: &FeatureMap) -> Result<MultimodalGraph> {
    let file = File::open(path)?;
    let (graph, _) = load_graph_from_reader(
        BufReader::new(file),
        &path.display().to_string(),
        schema,
        features,
        false,
    )?;
    Ok(graph)
}

/// Load an edge list that carries a trailing partition column, as
/// written by [`write_edges_tsv`] with a split.
pub fn load_graph_with_split(
    path: &Path,
    schema: &Schema,
    features: &FeatureMap,
) -> Result<(MultimodalGraph, EdgeSplit)> {
    let file = File::open(path)?;
    let (graph, split) = load_graph_from_reader(
        BufReader::new(file),
        &path.display().to_string(),
        schema,
        features,
        true,
    )?;
    Ok((graph, split.expect("partition column requested")))
}

pub fn load_graph_from_reader(
    reader: impl BufRead,
    source_name: &str,
    schema: &Schema,
    features: &FeatureMap,
    has_partition: bool,
) -> Result<(MultimodalGraph, Option<EdgeSplit>)> {
    let mut graph = MultimodalGraph::new(schema)?;
    let rel_by_name: HashMap<&str, usize> = schema
        .relations
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.as_str(), i))
        .collect();

    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source_name.to_string(),
        line,
        msg,
    };

    let mut seen: Vec<HashSet<(usize, usize)>> = vec![HashSet::new(); schema.relations.len()];
    let mut partitions: Vec<Vec<Partition>> = vec![Vec::new(); schema.relations.len()];
    let mut duplicates = 0usize;

    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        let expected = if has_partition { (6, 7) } else { (5, 6) };
        if fields.len() != expected.0 && fields.len() != expected.1 {
            return Err(parse_err(
                line_no,
                format!(
                    "expected {} or {} tab-separated columns, got {}",
                    expected.0,
                    expected.1,
                    fields.len()
                ),
            ));
        }
        let (src_type, src_id, rel_name, dst_type, dst_id) =
            (fields[0], fields[1], fields[2], fields[3], fields[4]);
        let rel_idx = *rel_by_name.get(rel_name).ok_or_else(|| {
            Error::Schema(format!("{source_name}:{line_no}: undeclared relation '{rel_name}'"))
        })?;
        let spec = &schema.relations[rel_idx];
        if src_type != spec.src_type || dst_type != spec.dst_type {
            return Err(Error::Schema(format!(
                "{source_name}:{line_no}: relation '{rel_name}' expects {} -> {}, row has {} -> {}",
                spec.src_type, spec.dst_type, src_type, dst_type
            )));
        }

        let mut weight = None;
        if fields.len() > 5 {
            let weight_field = fields[5];
            // With a partition column present, column 6 is the weight
            // only in 7-column rows.
            let is_weight_column = if has_partition { fields.len() == 7 } else { true };
            if is_weight_column && !weight_field.is_empty() {
                let w: f64 = weight_field.parse().map_err(|_| {
                    parse_err(line_no, format!("non-numeric weight '{weight_field}'"))
                })?;
                if !w.is_finite() {
                    return Err(parse_err(line_no, format!("non-finite weight '{weight_field}'")));
                }
                weight = Some(w);
            }
        }

        let partition = if has_partition {
            let field = *fields.last().unwrap();
            Some(Partition::parse(field).ok_or_else(|| {
                parse_err(line_no, format!("unknown partition '{field}'"))
            })?)
        } else {
            None
        };

        let (st, dt) = graph.relation_endpoint_types(rel_idx);
        let src = graph.intern_node(st, src_id);
        let dst = graph.intern_node(dt, dst_id);
        let (src, dst) = graph.canonical_pair(rel_idx, src, dst);
        if !seen[rel_idx].insert((src, dst)) {
            duplicates += 1;
            continue;
        }
        graph.push_edge(rel_idx, Edge { src, dst, weight });
        if let Some(p) = partition {
            partitions[rel_idx].push(p);
        }
    }

    if duplicates > 0 {
        warn!("{source_name}: deduplicated {duplicates} duplicate edge(s)");
    }
    graph.validate()?;
    attach_features(&mut graph, features)?;

    let split = if has_partition {
        let mut per_relation = Vec::new();
        for (rel_idx, parts) in partitions.iter().enumerate() {
            let mut rs = RelationSplit::default();
            for (edge_idx, p) in parts.iter().enumerate() {
                rs.list_mut(*p).push(edge_idx);
            }
            let _ = rel_idx;
            per_relation.push(rs);
        }
        Some(EdgeSplit { seed: 0, per_relation })
    } else {
        None
    };

    Ok((graph, split))
}

/// Write the canonical edge list, optionally with the partition column.
pub fn write_edges_tsv(
    graph: &MultimodalGraph,
    split: Option<&EdgeSplit>,
    mut out: impl Write,
) -> Result<()> {
    for (rel_idx, spec) in graph.relations().iter().enumerate() {
        let (st, dt) = graph.relation_endpoint_types(rel_idx);
        let partition_of: Option<Vec<Partition>> = split.map(|s| {
            let rs = &s.per_relation[rel_idx];
            let mut v = vec![Partition::Message; graph.edges(rel_idx).len()];
            for p in Partition::ALL {
                for &e in rs.list(p) {
                    v[e] = p;
                }
            }
            v
        });
        for (edge_idx, e) in graph.edges(rel_idx).iter().enumerate() {
            let src_id = &graph.node_type(st).ids[e.src];
            let dst_id = &graph.node_type(dt).ids[e.dst];
            let weight = e.weight.map_or(String::new(), |w| format!("{w}"));
            match &partition_of {
                Some(parts) => writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    spec.src_type, src_id, spec.name, spec.dst_type, dst_id, weight, parts[edge_idx]
                )?,
                None if e.weight.is_some() => writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    spec.src_type, src_id, spec.name, spec.dst_type, dst_id, weight
                )?,
                None => writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    spec.src_type, src_id, spec.name, spec.dst_type, dst_id
                )?,
            }
        }
    }
    Ok(())
}

/// Apply feature sources to a loaded graph. `keyed_rows` sources are
/// matched to dense indices through external ids.
pub fn attach_features(graph: &mut MultimodalGraph, features: &FeatureMap) -> Result<()> {
    for (type_name, spec) in features {
        let t = graph.type_id(type_name)?;
        graph.set_features(t, spec.clone())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::types::{RelationSpec, TaskRole};
    use std::io::Cursor;

    fn schema() -> Schema {
        Schema::new(vec![
            RelationSpec {
                name: "rel_a".into(),
                src_type: "drug".into(),
                dst_type: "drug".into(),
                directed: false,
                role: TaskRole::Both,
            },
            RelationSpec {
                name: "rel_b".into(),
                src_type: "drug".into(),
                dst_type: "protein".into(),
                directed: false,
                role: TaskRole::Both,
            },
        ])
        .unwrap()
    }

    fn load(text: &str) -> Result<MultimodalGraph> {
        let (g, _) = load_graph_from_reader(
            Cursor::new(text),
            "test.tsv",
            &schema(),
            &FeatureMap::new(),
            false,
        )?;
        Ok(g)
    }

    #[test]
    fn empty_file_yields_declared_types_and_no_edges() {
        let g = load("").unwrap();
        assert_eq!(g.node_types().len(), 2);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn two_row_file_counts() {
        let g = load("drug\td1\trel_a\tdrug\td2\ndrug\td1\trel_b\tprotein\tp1\n").unwrap();
        assert_eq!(g.node_type(g.type_id("drug").unwrap()).count(), 2);
        assert_eq!(g.node_type(g.type_id("protein").unwrap()).count(), 1);
        assert_eq!(g.edges(0).len(), 1);
        assert_eq!(g.edges(1).len(), 1);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let g = load("# header\n\ndrug\td1\trel_a\tdrug\td2\n").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let err = load("drug\td1\trel_a\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn non_numeric_weight_reports_line() {
        let err = load("drug\td1\trel_a\tdrug\td2\tabc\n").unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 1);
                assert!(msg.contains("abc"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn endpoint_type_mismatch_is_schema_error() {
        let err = load("protein\tp1\trel_a\tdrug\td2\n").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn undeclared_relation_is_schema_error() {
        let err = load("drug\td1\tnope\tdrug\td2\n").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn duplicates_are_deduplicated_across_orientations() {
        // rel_a is undirected: (d2, d1) duplicates (d1, d2).
        let g = load(
            "drug\td1\trel_a\tdrug\td2\ndrug\td2\trel_a\tdrug\td1\ndrug\td1\trel_a\tdrug\td2\n",
        )
        .unwrap();
        assert_eq!(g.edges(0).len(), 1);
    }

    #[test]
    fn undirected_edges_are_stored_canonically() {
        let g = load("drug\tz\trel_a\tdrug\ta\n").unwrap();
        // z interned first (index 0), a second (index 1); canonical
        // storage flips to (min, max) = (0, 1)? No: canonical means
        // src <= dst by dense index, so (0, 1) stays as loaded.
        let e = g.edges(0)[0];
        assert!(e.src <= e.dst);
    }

    #[test]
    fn ids_are_interned_in_first_seen_order() {
        let g = load("drug\tx\trel_a\tdrug\ty\ndrug\tz\trel_a\tdrug\tx\n").unwrap();
        let t = g.type_id("drug").unwrap();
        assert_eq!(g.node_type(t).ids, vec!["x", "y", "z"]);
    }

    #[test]
    fn round_trip_through_tsv_preserves_graph() {
        let g = load("drug\td1\trel_a\tdrug\td2\tx\ndrug\td1\trel_b\tprotein\tp1\n".replace("\tx\n", "\t0.5\n").as_str()).unwrap();
        let mut buf = Vec::new();
        write_edges_tsv(&g, None, &mut buf).unwrap();
        let g2 = load(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(g2.edge_count(), g.edge_count());
        assert_eq!(g2.edges(0)[0].weight, Some(0.5));
    }
}
