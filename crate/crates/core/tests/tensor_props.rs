//! Tensor-engine properties: spmm/dense equivalence, per-op gradient
//! checks on randomized shapes, and backward linearity.

use std::collections::BTreeMap;
use std::sync::Arc;

use mmvgae::rng::SeedFan;
use mmvgae::tensor::{grad_check, DenseMatrix, NodeId, ParamStore, SparseMatrix, Tape};
use rand::Rng;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.5..1.5))
}

fn random_sparse(rng: &mut impl Rng, rows: usize, cols: usize) -> SparseMatrix<f64> {
    let mut offsets = vec![0usize];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for _ in 0..rows {
        let mut cols_here: Vec<usize> =
            (0..cols).filter(|_| rng.gen_bool(0.3)).collect();
        cols_here.dedup();
        for c in cols_here {
            indices.push(c);
            values.push(rng.gen_range(-1.0..1.0));
        }
        offsets.push(indices.len());
    }
    SparseMatrix::new(rows, cols, offsets, indices, values).unwrap()
}

#[test]
fn spmm_equals_densified_matmul_on_random_instances() {
    let mut rng = SeedFan::new(17).stream("spmm");
    for _ in 0..200 {
        let rows = rng.gen_range(1..=50);
        let inner = rng.gen_range(1..=50);
        let cols = rng.gen_range(1..=8);
        let a = random_sparse(&mut rng, rows, inner);
        let x = random_matrix(&mut rng, inner, cols);

        let sparse_result = a.mul_dense(&x);
        let dense_result = mmvgae::tensor::matrix::matmul(&a.to_dense(), &x);
        for (s, d) in sparse_result.data().iter().zip(dense_result.data()) {
            assert!((s - d).abs() < 1e-12);
        }
    }
}

/// Every op, gradient-checked against central differences on random
/// shapes. The builder binds one or two parameters and reduces with a
/// weighted sum so gradients are non-uniform.
#[test]
fn every_op_passes_grad_check_on_random_shapes() {
    let mut rng = SeedFan::new(23).stream("ops");
    let ops = [
        "matmul", "spmm", "add", "sub", "mul", "add_row", "mul_row", "relu", "tanh", "sigmoid",
        "exp", "softplus", "clamp", "transpose", "concat_cols", "concat_rows", "gather_rows",
        "sum", "mean", "square", "scalar_mul",
    ];
    let mut checked = 0;
    for round in 0..120 {
        let op = ops[round % ops.len()];
        let rows = rng.gen_range(1..=5);
        let cols = rng.gen_range(1..=5);
        let a = random_matrix(&mut rng, rows, cols);
        let b = random_matrix(&mut rng, rows, cols);
        let k = rng.gen_range(1..=4);
        let m2 = random_matrix(&mut rng, cols, k);
        let row = random_matrix(&mut rng, 1, cols);
        let sparse_rows = rng.gen_range(1..=5);
        let sparse = Arc::new(random_sparse(&mut rng, sparse_rows, rows));
        let idx: Arc<Vec<usize>> =
            Arc::new((0..rng.gen_range(1..=6)).map(|_| rng.gen_range(0..rows)).collect());
        let weights = random_matrix(&mut rng, 1, 1).get(0, 0);

        let mut params = ParamStore::new();
        params.insert("a", a).unwrap();
        params.insert("b", b).unwrap();
        params.insert("m2", m2).unwrap();
        params.insert("row", row).unwrap();

        let op_name = op.to_string();
        let sparse_c = sparse.clone();
        let idx_c = idx.clone();
        let builder = move |p: &ParamStore<f64>| -> mmvgae::Result<(
            Tape<f64>,
            NodeId,
            BTreeMap<String, NodeId>,
        )> {
            let mut tape = Tape::new();
            let a = tape.var(p.get("a")?.clone());
            let b = tape.var(p.get("b")?.clone());
            let m2 = tape.var(p.get("m2")?.clone());
            let row = tape.var(p.get("row")?.clone());
            let mut bind = BTreeMap::new();
            bind.insert("a".to_string(), a);
            let out = match op_name.as_str() {
                "matmul" => {
                    bind.insert("m2".to_string(), m2);
                    tape.matmul(a, m2)?
                }
                "spmm" => tape.spmm(sparse_c.clone(), a)?,
                "add" => {
                    bind.insert("b".to_string(), b);
                    tape.add(a, b)?
                }
                "sub" => {
                    bind.insert("b".to_string(), b);
                    tape.sub(a, b)?
                }
                "mul" => {
                    bind.insert("b".to_string(), b);
                    tape.mul(a, b)?
                }
                "add_row" => {
                    bind.insert("row".to_string(), row);
                    tape.add_row(a, row)?
                }
                "mul_row" => {
                    bind.insert("row".to_string(), row);
                    tape.mul_row(a, row)?
                }
                "relu" => tape.relu(a)?,
                "tanh" => tape.tanh(a)?,
                "sigmoid" => tape.sigmoid(a)?,
                "exp" => tape.exp(a)?,
                "softplus" => tape.softplus(a)?,
                "clamp" => tape.clamp(a, -0.75, 0.75)?,
                "transpose" => tape.transpose(a)?,
                "concat_cols" => {
                    bind.insert("b".to_string(), b);
                    tape.concat_cols(a, b)?
                }
                "concat_rows" => {
                    bind.insert("b".to_string(), b);
                    tape.concat_rows(a, b)?
                }
                "gather_rows" => tape.gather_rows(a, idx_c.clone())?,
                "sum" => tape.sum(a)?,
                "mean" => tape.mean(a)?,
                "square" => tape.square(a)?,
                "scalar_mul" => tape.scalar_mul(a, weights)?,
                other => panic!("unknown op {other}"),
            };
            // Reduce with a squash so upstream gradients vary per entry.
            let squashed = tape.tanh(out)?;
            let loss = tape.sum(squashed)?;
            Ok((tape, loss, bind))
        };

        let report = grad_check(&params, &builder, 1e-5, 1e-4).unwrap();
        assert!(
            report.pass(),
            "op {op} failed grad check: {:?}",
            report.worst()
        );
        checked += 1;
    }
    assert!(checked >= 100);
}

#[test]
fn backward_of_sum_equals_sum_of_backwards() {
    let mut rng = SeedFan::new(31).stream("lin");
    for _ in 0..20 {
        let w = random_matrix(&mut rng, 3, 3);
        let x1 = random_matrix(&mut rng, 3, 3);
        let x2 = random_matrix(&mut rng, 3, 3);

        let grad_of = |inputs: &[&DenseMatrix<f64>]| -> DenseMatrix<f64> {
            let mut tape = Tape::new();
            let wv = tape.var(w.clone());
            let mut terms = Vec::new();
            for x in inputs {
                let xc = tape.constant((*x).clone());
                let y = tape.matmul(xc, wv).unwrap();
                let y = tape.tanh(y).unwrap();
                terms.push(tape.sum(y).unwrap());
            }
            let mut total = terms[0];
            for &t in &terms[1..] {
                total = tape.add(total, t).unwrap();
            }
            let grads = tape.backward(total).unwrap();
            grads.get(wv).unwrap().clone()
        };

        let combined = grad_of(&[&x1, &x2]);
        let separate1 = grad_of(&[&x1]);
        let separate2 = grad_of(&[&x2]);
        for i in 0..combined.len() {
            let sum = separate1.data()[i] + separate2.data()[i];
            assert!((combined.data()[i] - sum).abs() < 1e-12);
        }
    }
}

#[test]
fn parallel_matmul_is_bit_identical_to_sequential_order() {
    // 200 rows crosses the row-parallel threshold; each entry must
    // match the fixed k-ascending reduction order exactly.
    let mut rng = SeedFan::new(1).stream("par");
    let a = DenseMatrix::<f64>::from_fn(200, 40, |_, _| rng.gen_range(-1.0..1.0));
    let b = DenseMatrix::<f64>::from_fn(40, 8, |_, _| rng.gen_range(-1.0..1.0));
    let big = mmvgae::tensor::matrix::matmul(&a, &b);
    for i in 0..200 {
        for j in 0..8 {
            let mut acc = 0.0f64;
            for k in 0..40 {
                acc += a.get(i, k) * b.get(k, j);
            }
            assert_eq!(acc.to_bits(), big.get(i, j).to_bits());
        }
    }
}
