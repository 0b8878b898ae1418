//! Deterministic synthetic graphs for tests and benchmarks: random
//! multi-relation fixtures, and planted-structure graphs generated
//! from ground-truth latents through the DEDICOM scorer.

use std::collections::HashSet;
use std::io::Cursor;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::graph::{
    load_graph_from_reader, FeatureMap, MultimodalGraph, RelationSpec, Schema, TaskRole,
};
use crate::rng::SeedFan;
use crate::tensor::DenseMatrix;

/// Schema with `dd_relations` drug-drug relations (se0, se1, ...) plus
/// an optional drug-protein relation named "targets".
pub fn drug_protein_schema(dd_relations: usize, with_targets: bool) -> Schema {
    let mut relations = Vec::new();
    for k in 0..dd_relations {
        relations.push(RelationSpec {
            name: format!("se{k}"),
            src_type: "drug".into(),
            dst_type: "drug".into(),
            directed: false,
            role: TaskRole::Both,
        });
    }
    if with_targets {
        relations.push(RelationSpec {
            name: "targets".into(),
            src_type: "drug".into(),
            dst_type: "protein".into(),
            directed: false,
            role: TaskRole::Both,
        });
    }
    Schema::new(relations).expect("static schema")
}

fn edges_to_graph(schema: &Schema, rows: &str) -> Result<MultimodalGraph> {
    Ok(load_graph_from_reader(Cursor::new(rows), "synthetic", schema, &FeatureMap::new(), false)?.0)
}

/// Random distinct drug pairs per relation plus random drug-protein
/// edges. Every drug and protein id appears in at least one row so the
/// node universe is fixed regardless of sampling.
pub fn random_fixture(
    drugs: usize,
    proteins: usize,
    dd_relations: usize,
    edges_per_relation: usize,
    seed: u64,
) -> Result<MultimodalGraph> {
    let fan = SeedFan::new(seed);
    let schema = drug_protein_schema(dd_relations, proteins > 0);
    let mut rows = String::new();
    // Pin the node universe with a cheap cycle on the first relation.
    for i in 0..drugs {
        rows.push_str(&format!("drug\td{i}\tse0\tdrug\td{}\n", (i + 1) % drugs));
    }
    for k in 0..dd_relations {
        let mut rng = fan.stream(&format!("edges:se{k}"));
        let mut seen = HashSet::new();
        let mut placed = 0;
        while placed < edges_per_relation {
            let a = rng.gen_range(0..drugs);
            let b = rng.gen_range(0..drugs);
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                continue;
            }
            rows.push_str(&format!("drug\td{}\tse{k}\tdrug\td{}\n", key.0, key.1));
            placed += 1;
        }
    }
    if proteins > 0 {
        let mut rng = fan.stream("edges:targets");
        for p in 0..proteins {
            // At least one edge per protein, then extras.
            let d = rng.gen_range(0..drugs);
            rows.push_str(&format!("drug\td{d}\ttargets\tprotein\tp{p}\n"));
        }
        let mut seen = HashSet::new();
        for _ in 0..edges_per_relation {
            let d = rng.gen_range(0..drugs);
            let p = rng.gen_range(0..proteins);
            if seen.insert((d, p)) {
                rows.push_str(&format!("drug\td{d}\ttargets\tprotein\tp{p}\n"));
            }
        }
    }
    edges_to_graph(&schema, &rows)
}

/// Planted-structure benchmark configuration.
#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub drugs: usize,
    pub relations: usize,
    pub d_z: usize,
    /// Fraction of all pairs that become positive edges per relation.
    pub density: f64,
    /// Fraction of extra uniformly random edges mixed in per relation.
    pub noise_frac: f64,
    /// When set, ground-truth latents are a projection of random
    /// fingerprint bits, so fingerprints carry the planted signal.
    pub fingerprints: Option<PlantedFingerprints>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PlantedFingerprints {
    pub width: usize,
    pub bits_per_drug: usize,
}

pub struct PlantedData {
    pub graph: MultimodalGraph,
    /// Drug-aligned fingerprint rows when the spec plants them.
    pub fingerprints: Option<DenseMatrix<f64>>,
    /// Spurious (noise) pairs per relation, canonical order.
    pub noise_pairs: Vec<HashSet<(usize, usize)>>,
}

/// Generate edges by thresholding DEDICOM scores of ground-truth
/// latents: the densest `density` fraction of pairs under each
/// relation's scorer become positives.
pub fn planted_dedicom_graph(spec: &PlantedSpec) -> Result<PlantedData> {
    let fan = SeedFan::new(spec.seed);
    let n = spec.drugs;
    let dz = spec.d_z;

    // Ground-truth latents: standard normal, or a fingerprint projection.
    let mut latents = DenseMatrix::<f64>::zeros(n, dz);
    let fingerprints = match &spec.fingerprints {
        None => {
            let mut rng = fan.stream("latents");
            for i in 0..n {
                for k in 0..dz {
                    latents.set(i, k, normal(&mut rng));
                }
            }
            None
        }
        Some(fp) => {
            let mut rng = fan.stream("fingerprints");
            let mut bits = DenseMatrix::<f64>::zeros(n, fp.width);
            for i in 0..n {
                let mut placed = 0;
                while placed < fp.bits_per_drug {
                    let b = rng.gen_range(0..fp.width);
                    if bits.get(i, b) == 0.0 {
                        bits.set(i, b, 1.0);
                        placed += 1;
                    }
                }
            }
            let mut wrng = fan.stream("fp-projection");
            let mut w = DenseMatrix::<f64>::zeros(fp.width, dz);
            for r in 0..fp.width {
                for c in 0..dz {
                    w.set(r, c, normal(&mut wrng));
                }
            }
            // Scale so latent entries are O(1) regardless of bit count.
            let scale = 1.0 / (fp.bits_per_drug as f64).sqrt();
            for i in 0..n {
                for k in 0..dz {
                    let mut acc = 0.0;
                    for b in 0..fp.width {
                        acc += bits.get(i, b) * w.get(b, k);
                    }
                    latents.set(i, k, acc * scale);
                }
            }
            Some(bits)
        }
    };

    let schema = drug_protein_schema(spec.relations, false);
    let mut rows = String::new();
    for i in 0..n {
        rows.push_str(&format!("drug\td{i}\tse0\tdrug\td{}\n", (i + 1) % n));
    }

    let mut param_rng = fan.stream("decoder-params");
    let mut noise_pairs: Vec<HashSet<(usize, usize)>> = Vec::with_capacity(spec.relations);
    for rel in 0..spec.relations {
        // Per-relation diagonal and a shared-style symmetric core.
        let d: Vec<f64> = (0..dz).map(|_| param_rng.gen_range(0.4..1.2)).collect();
        let mut s = DenseMatrix::<f64>::zeros(dz, dz);
        for r in 0..dz {
            for c in 0..dz {
                s.set(r, c, normal(&mut param_rng) / (dz as f64).sqrt());
            }
        }
        let mut scored: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut score = 0.0;
                for a in 0..dz {
                    for b in 0..dz {
                        let r_ab = s.get(a, b) + s.get(b, a);
                        score += latents.get(i, a) * d[a] * r_ab * d[b] * latents.get(j, b);
                    }
                }
                scored.push((score, i, j));
            }
        }
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        let keep = ((n * (n - 1) / 2) as f64 * spec.density).round() as usize;
        let mut kept: HashSet<(usize, usize)> = HashSet::with_capacity(keep);
        for &(_, i, j) in scored.iter().take(keep) {
            kept.insert((i, j));
            rows.push_str(&format!("drug\td{i}\tse{rel}\tdrug\td{j}\n"));
        }
        // Spurious edges. With planted fingerprints the noise is
        // fingerprint-correlated: plausible-but-false pairs drawn from
        // the most fingerprint-similar non-edges. Without fingerprints
        // the noise is uniform.
        let n_noise = (keep as f64 * spec.noise_frac).round() as usize;
        let mut noise_rng = fan.stream(&format!("noise:se{rel}"));
        let mut rel_noise = HashSet::with_capacity(n_noise);
        if n_noise > 0 {
            match &fingerprints {
                Some(bits) => {
                    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
                    for i in 0..n {
                        for j in (i + 1)..n {
                            if kept.contains(&(i, j)) {
                                continue;
                            }
                            let overlap: f64 = (0..bits.cols())
                                .map(|b| bits.get(i, b) * bits.get(j, b))
                                .sum();
                            candidates.push((overlap, i, j));
                        }
                    }
                    candidates.sort_by(|x, y| {
                        y.0.total_cmp(&x.0).then_with(|| (x.1, x.2).cmp(&(y.1, y.2)))
                    });
                    // Sample within the most similar decile.
                    let pool = (candidates.len() / 10).max(n_noise.min(candidates.len()));
                    let mut placed = 0;
                    while placed < n_noise && placed < candidates.len() {
                        let pick = noise_rng.gen_range(0..pool.min(candidates.len()));
                        let (_, i, j) = candidates[pick];
                        if kept.insert((i, j)) {
                            rows.push_str(&format!("drug\td{i}\tse{rel}\tdrug\td{j}\n"));
                            rel_noise.insert((i, j));
                            placed += 1;
                        }
                    }
                }
                None => {
                    let mut placed = 0;
                    while placed < n_noise {
                        let i = noise_rng.gen_range(0..n);
                        let j = noise_rng.gen_range(0..n);
                        if i == j {
                            continue;
                        }
                        let key = (i.min(j), i.max(j));
                        if kept.insert(key) {
                            rows.push_str(&format!("drug\td{}\tse{rel}\tdrug\td{}\n", key.0, key.1));
                            rel_noise.insert(key);
                            placed += 1;
                        }
                    }
                }
            }
        }
        noise_pairs.push(rel_noise);
    }

    let graph = edges_to_graph(&schema, &rows)?;
    // Fingerprint rows follow the graph's dense drug order d0..dN.
    Ok(PlantedData { graph, fingerprints, noise_pairs })
}

/// Split a planted graph so held-out edges are always clean: spurious
/// pairs go to message passing and supervision only, while the
/// validation and test partitions draw from planted structure.
pub fn planted_split(
    data: &PlantedData,
    ratios: &crate::graph::SplitRatios,
    seed: u64,
) -> Result<crate::graph::EdgeSplit> {
    use crate::graph::RelationSplit;
    ratios.validate()?;
    let fan = SeedFan::new(seed);
    let graph = &data.graph;
    let mut per_relation = Vec::with_capacity(graph.relations().len());
    for (rel_idx, spec) in graph.relations().iter().enumerate() {
        let noise = data
            .noise_pairs
            .get(rel_idx)
            .cloned()
            .unwrap_or_default();
        let mut clean: Vec<usize> = Vec::new();
        let mut spurious: Vec<usize> = Vec::new();
        for (e, edge) in graph.edges(rel_idx).iter().enumerate() {
            if noise.contains(&(edge.src.min(edge.dst), edge.src.max(edge.dst))) {
                spurious.push(e);
            } else {
                clean.push(e);
            }
        }
        clean.shuffle(&mut fan.stream(&format!("planted-split:{}", spec.name)));
        let n = clean.len();
        let b_train = ((ratios.train * n as f64).round() as usize).min(n);
        let b_val = (((ratios.train + ratios.val) * n as f64).round() as usize).min(n);
        let (train, rest) = clean.split_at(b_train);
        let (val, test) = rest.split_at(b_val - b_train);
        let message_count = ((ratios.message_frac * train.len() as f64).round() as usize)
            .min(train.len());

        let mut rs = RelationSplit {
            message: train[..message_count].to_vec(),
            train_supervision: train[message_count..].to_vec(),
            validation: val.to_vec(),
            test: test.to_vec(),
        };
        // Spurious pairs corrupt the training signal only.
        let noise_message = (ratios.message_frac * spurious.len() as f64).round() as usize;
        rs.message.extend_from_slice(&spurious[..noise_message]);
        rs.train_supervision.extend_from_slice(&spurious[noise_message..]);
        for p in crate::graph::Partition::ALL {
            rs.list_mut(p).sort_unstable();
        }
        per_relation.push(rs);
    }
    let split = crate::graph::EdgeSplit { seed, per_relation };
    split.validate(graph)?;
    Ok(split)
}

/// Weighted drug/cell-line regression fixture: latent-driven response
/// weights on a bipartite relation plus similarity message edges.
pub fn response_fixture(
    drugs: usize,
    cells: usize,
    d_z: usize,
    seed: u64,
) -> Result<MultimodalGraph> {
    let fan = SeedFan::new(seed);
    let schema = Schema::new(vec![
        RelationSpec {
            name: "drug-sim".into(),
            src_type: "drug".into(),
            dst_type: "drug".into(),
            directed: false,
            role: TaskRole::MessagePassing,
        },
        RelationSpec {
            name: "cell-sim".into(),
            src_type: "cell".into(),
            dst_type: "cell".into(),
            directed: false,
            role: TaskRole::MessagePassing,
        },
        RelationSpec {
            name: "response".into(),
            src_type: "drug".into(),
            dst_type: "cell".into(),
            directed: false,
            role: TaskRole::Both,
        },
    ])
    .unwrap();

    let mut rng = fan.stream("latents");
    let dl: Vec<Vec<f64>> = (0..drugs)
        .map(|_| (0..d_z).map(|_| normal(&mut rng)).collect())
        .collect();
    let cl: Vec<Vec<f64>> = (0..cells)
        .map(|_| (0..d_z).map(|_| normal(&mut rng)).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut rows = String::new();
    // Dense weighted similarity graphs, mirroring the pairwise
    // similarity matrices of the response datasets.
    for i in 0..drugs {
        for j in (i + 1)..drugs {
            let w = 1.0 / (1.0 + (-dot(&dl[i], &dl[j])).exp());
            rows.push_str(&format!("drug\td{i}\tdrug-sim\tdrug\td{j}\t{w:.6}\n"));
        }
    }
    for i in 0..cells {
        for j in (i + 1)..cells {
            let w = 1.0 / (1.0 + (-dot(&cl[i], &cl[j])).exp());
            rows.push_str(&format!("cell\tc{i}\tcell-sim\tcell\tc{j}\t{w:.6}\n"));
        }
    }
    // Every (drug, cell) pair gets a response weight.
    let scale = 1.0 / (d_z as f64).sqrt();
    for i in 0..drugs {
        for j in 0..cells {
            let w = dot(&dl[i], &cl[j]) * scale;
            rows.push_str(&format!("drug\td{i}\tresponse\tcell\tc{j}\t{w:.6}\n"));
        }
    }
    edges_to_graph(&schema, &rows)
}

/// Standard normal via Box-Muller; deterministic given the stream.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Standard-normal matrix drawn row-major from one stream.
pub fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// Random SMILES over tree-shaped molecules, with a second spelling
/// from a different traversal root. Both spell the same molecule.
pub fn random_tree_smiles(rng: &mut impl Rng, atoms: usize) -> (String, String) {
    assert!(atoms >= 1);
    let elements = [("C", 4), ("N", 3), ("O", 2), ("S", 2), ("P", 3)];
    let picks: Vec<(&str, usize)> =
        (0..atoms).map(|_| elements[rng.gen_range(0..elements.len())]).collect();
    let kinds: Vec<&str> = picks.iter().map(|&(k, _)| k).collect();
    // Random tree: parent of node i > 0 is uniform over the earlier
    // nodes that still have valence capacity left.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); atoms];
    let mut degree = vec![0usize; atoms];
    for i in 1..atoms {
        // Capacity counting: a tree consumes 2(i-1) units among the
        // first i nodes and every element offers at least 2, so some
        // earlier node is always open.
        let open: Vec<usize> = (0..i).filter(|&p| degree[p] < picks[p].1).collect();
        let p = open[rng.gen_range(0..open.len())];
        children[p].push(i);
        degree[p] += 1;
        degree[i] += 1;
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); atoms];
    for (p, cs) in children.iter().enumerate() {
        for &c in cs {
            adjacency[p].push(c);
            adjacency[c].push(p);
        }
    }
    let spell = |root: usize| -> String {
        let mut out = String::new();
        let mut visited = vec![false; atoms];
        fn walk(
            node: usize,
            kinds: &[&str],
            adjacency: &[Vec<usize>],
            visited: &mut [bool],
            out: &mut String,
        ) {
            visited[node] = true;
            out.push_str(kinds[node]);
            let next: Vec<usize> =
                adjacency[node].iter().copied().filter(|&n| !visited[n]).collect();
            for (k, n) in next.iter().enumerate() {
                if k + 1 < next.len() {
                    out.push('(');
                    walk(*n, kinds, adjacency, visited, out);
                    out.push(')');
                } else {
                    walk(*n, kinds, adjacency, visited, out);
                }
            }
        }
        walk(root, &kinds, &adjacency, &mut visited, &mut out);
        out
    };
    let alt_root = if atoms > 1 { rng.gen_range(1..atoms) } else { 0 };
    (spell(0), spell(alt_root))
}

/// Shuffle helper with a deterministic stream.
pub fn shuffled<T: Clone>(items: &[T], rng: &mut impl Rng) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}
