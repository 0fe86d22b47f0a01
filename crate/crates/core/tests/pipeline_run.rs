// SPDX-License-Identifier: Apache-2.0

use std::fs;

use sha2::{Digest, Sha256};

use metacoarse::afg::build_afg;
use metacoarse::backtrack::is_subgraph_of;
use metacoarse::coarsen::CoarsenMethod;
use metacoarse::graphdata::{
    generate_synthetic, read_samples, write_samples, ClassMotifSpec, Level,
};
use metacoarse::pipeline::{
    characterization_curves, read_metrics_file, run_pipeline, sweep, table_rows, GcnSettings,
    RunConfig,
};

fn small_config(dir: &std::path::Path, method: CoarsenMethod, r: f64) -> RunConfig {
    let corpus = generate_synthetic(40, &ClassMotifSpec::default(), 77).unwrap();
    let input = dir.join("in.jsonl");
    write_samples(&input, &["test corpus".to_string()], &corpus).unwrap();
    RunConfig {
        input,
        output_dir: dir.join("run"),
        coarsener: method,
        r,
        ig_steps: 5,
        seed: Some(3),
        gcn: GcnSettings {
            epochs: 3,
            hidden: 16,
            ..GcnSettings::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn run_writes_hashed_artifacts_with_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), CoarsenMethod::VariationEdges, 0.5);
    let run = run_pipeline(&cfg).unwrap();
    let root = &cfg.output_dir;

    for a in &run.manifest.artifacts {
        let bytes = fs::read(root.join(&a.path)).unwrap();
        let hex: String = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(hex, a.sha256, "{}", a.path);
        if a.path.ends_with(".jsonl") || a.path.ends_with(".tsv") || a.path.ends_with(".txt") {
            let text = String::from_utf8(bytes).unwrap();
            assert!(
                text.contains(&format!("# config_hash {}", cfg.hash())),
                "{}",
                a.path
            );
        }
    }
    for needed in [
        "split.json",
        "vocab.json",
        "ccfg/maps.jsonl",
        "backtrack/records.jsonl",
        "bafg/samples.jsonl",
        "metrics.json",
    ] {
        assert!(
            run.manifest.artifacts.iter().any(|a| a.path == needed),
            "{needed}"
        );
    }
    assert_eq!(run.manifest.config_hash, cfg.hash());

    // every split sample has a B-AFG that sits inside its AFG
    let inputs = read_samples(&cfg.input).unwrap();
    assert_eq!(run.bafgs.len(), inputs.len());
    for g in &inputs {
        let (afg, _) = build_afg(g).unwrap();
        let b = &run.bafgs[g.id()];
        assert_eq!(b.level(), Level::BAfg);
        assert!(is_subgraph_of(b, &afg), "{}", g.id());
    }
    let written = read_samples(root.join("bafg/samples.jsonl")).unwrap();
    assert_eq!(written.len(), run.bafgs.len());

    // metrics.json re-renders to the same rows
    let m = read_metrics_file(root.join("metrics.json")).unwrap();
    assert_eq!(m, run.metrics);
    let (t2, t3) = table_rows(&m);
    assert_eq!(t2[0].method, "Variation Edges");
    assert_eq!(t2[0].upper_level, Level::CCfg);
    assert_eq!(t3.len(), 1);
    assert_eq!(m.report.upper.beta, 1.0);
    assert_eq!(m.report.lower.beta, 0.0);

    let curves = characterization_curves(root, &[0.5, 0.1, 0.1]).unwrap();
    assert_eq!(curves.len(), 2);
    for c in &curves {
        assert_eq!(
            c.rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(),
            vec![0.1, 0.5]
        );
        assert!(c.rows.iter().all(|r| (0.0..=1.0).contains(&r.charact)));
    }
}

#[test]
fn baseline_run_reports_cfg_level() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), CoarsenMethod::Identity, 0.0);
    let run = run_pipeline(&cfg).unwrap();
    assert_eq!(run.metrics.report.upper.level, Level::Cfg);
    assert_eq!(run.models_trained, 2);
    let avg = 0.5
        * (run.metrics.report.upper.inference.accuracy
            + run.metrics.report.lower.inference.accuracy);
    assert_eq!(run.metrics.report.average_accuracy, avg);
}

#[test]
fn invalid_configs_are_rejected_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), CoarsenMethod::Kron, 0.0);
    assert!(run_pipeline(&cfg).is_err());
    assert!(!cfg.output_dir.exists());

    let a = small_config(tmp.path(), CoarsenMethod::Kron, 0.5);
    let b = RunConfig {
        seed: Some(4),
        ..a.clone()
    };
    assert!(sweep(&[a, b]).is_err());
    assert!(sweep(&[]).is_err());

    let missing = RunConfig {
        input: tmp.path().join("nope.jsonl"),
        ..small_config(tmp.path(), CoarsenMethod::Kron, 0.5)
    };
    assert!(run_pipeline(&missing).is_err());
}
