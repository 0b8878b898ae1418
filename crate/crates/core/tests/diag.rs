use mmvgae::graph::{split_edges, Partition, SplitRatios};
use mmvgae::model::{TaskKind, TrainConfig, Architecture};
use mmvgae::synth::{planted_dedicom_graph, PlantedSpec, PlantedFingerprints};
use mmvgae::train::{train, build_adjacency, evaluate};

fn planted_run(seed: u64, density: f64, noise: f64, fp: bool, mode: &str, use_fp: bool, epochs: &str, lr: &str) -> (f64, f64) {
    let spec = PlantedSpec {
        drugs: 100, relations: 4, d_z: 8,
        density, noise_frac: noise,
        fingerprints: fp.then_some(PlantedFingerprints { width: 256, bits_per_drug: 24 }),
        seed: 1000 + seed,
    };
    let data = planted_dedicom_graph(&spec).unwrap();
    let split = split_edges(&data.graph, &SplitRatios::default(), seed).unwrap();
    let mut cfg = TrainConfig::for_task(TaskKind::Polypharmacy);
    for (k, v) in [("d_hidden","32"),("d_encoder","16"),("d_latent","8"),("lr",lr),("lambda","0.001"),("eval_every","20"),("epochs",epochs)] {
        cfg.apply(k, v).unwrap();
    }
    cfg.apply("seed", &seed.to_string()).unwrap();
    cfg.apply("mode", mode).unwrap();
    if use_fp {
        cfg.apply("fingerprints", "true").unwrap();
        cfg.apply("fp_width", "256").unwrap();
        cfg.apply("d_fingerprint", "8").unwrap();
    }
    let fp_matrix = data.fingerprints.as_ref();
    let outcome = train::<f64>(&data.graph, &split, &cfg, if use_fp { fp_matrix } else { None }).unwrap();
    let arch = Architecture::resolve(&data.graph, &cfg).unwrap();
    let adjacency = build_adjacency::<f64>(&data.graph, &split, &arch).unwrap();
    let fps = if use_fp { fp_matrix.map(|m| m.cast::<f64>()) } else { None };
    let report = evaluate(&data.graph, &split, &cfg, &arch, &outcome.params, &adjacency, fps.as_ref(), Partition::Test).unwrap();
    (report.macro_auroc().unwrap().mean, report.macro_auprc().unwrap().mean)
}

#[test]
fn diag_planted() {
    let t0 = std::time::Instant::now();
    for ep in ["400", "800"] {
        for seed in 0..3u64 {
            let (auroc, auprc) = planted_run(seed, 0.08, 0.0, false, "vgae", false, ep, "0.02");
            println!("clean ep {ep} seed {seed}: test auroc {auroc:.4} auprc {auprc:.4} ({:.1?})", t0.elapsed());
        }
    }
}

#[test]
fn diag_ordering() {
    let t0 = std::time::Instant::now();
    for ep in ["400", "800"] {
        let mut sums = [0.0f64; 3];
        for seed in 0..3u64 {
            let (_, mf) = planted_run(seed, 0.08, 0.4, true, "vgae", true, ep, "0.02");
            let (_, plain) = planted_run(seed, 0.08, 0.4, true, "vgae", false, ep, "0.02");
            let (_, gae) = planted_run(seed, 0.08, 0.4, true, "gae", false, ep, "0.02");
            sums[0] += mf; sums[1] += plain; sums[2] += gae;
            println!("order ep {ep} seed {seed}: mf {mf:.4} vgae {plain:.4} gae {gae:.4} ({:.1?})", t0.elapsed());
        }
        println!("order ep {ep} MEANS: mf {:.4} vgae {:.4} gae {:.4}", sums[0]/3.0, sums[1]/3.0, sums[2]/3.0);
    }
}
