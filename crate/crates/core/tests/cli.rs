use std::path::Path;

use rankatlas::certify::{certify, Verdict};
use rankatlas::cli::{run, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_USAGE};
use rankatlas::experiments::sample_gaussian_tensor;
use rankatlas::linalg::rng_for;
use rankatlas::pencil::SearchBudget;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rankatlas").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn trank_examples() {
    assert_eq!(cli(&["trank", "3", "3", "5"]).1.trim(), "{5, 6} (Theorem 1.3 + Theorem 8.1)");
    let (code, out, _) = cli(&["trank", "3", "3", "7"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("{7}"), "{out}");
    let (_, out, _) = cli(&["trank", "4", "4", "11", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["type"], "exact");
    assert_eq!(v["result"]["ranks"], serde_json::json!([11, 12]));
    assert_eq!(v["provenance"], "Theorem 1.2");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&["trank", "3", "3"]).0, EXIT_USAGE);
    assert_eq!(cli(&["trank", "3", "3", "5", "--frobnicate"]).0, EXIT_USAGE);
    assert_eq!(cli(&[]).0, EXIT_USAGE);
    assert_eq!(cli(&["trank", "0", "3", "5"]).0, EXIT_USAGE);
    assert_eq!(cli(&["bounds", "--max", "1"]).0, EXIT_USAGE);
    assert_eq!(cli(&["make-bilinear", "--kind", "cd", "--dim", "3"]).0, EXIT_USAGE);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("certify"));
}

#[test]
fn malformed_files_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dims":[2,2,2],"layout":"slice-major","data":[1,2,3]}"#).unwrap();
    let (code, _, err) = cli(&["certify", path_str(&bad)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("data"), "{err}");

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"shape":[3,6,3],"samples":2,"restart":5}"#).unwrap();
    let (code, _, err) = cli(&["experiment", path_str(&cfg)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("restart"), "{err}");

    let missing = dir.path().join("missing.json");
    let (code, _, err) = cli(&["afcr", path_str(&missing)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("missing.json"), "{err}");
}

#[test]
fn make_bilinear_round_trips_into_afcr() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("q.json");
    let tensor = dir.path().join("qt.json");
    assert_eq!(cli(&["make-bilinear", "--kind", "cd", "--dim", "4", "-o", path_str(&map)]).0, EXIT_OK);
    assert_eq!(cli(&["make-bilinear", "--kind", "cd", "--dim", "4", "--tensor", "-o", path_str(&tensor)]).0, EXIT_OK);
    for file in [&map, &tensor] {
        let (code, out, err) = cli(&["afcr", path_str(file), "--budget-restarts", "40"]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert_eq!(out.trim(), "AFCR, margin 1.000000");
    }
    let restricted = dir.path().join("r.json");
    cli(&["make-bilinear", "--kind", "restrict", "--dim", "4", "--rows", "3", "--cols", "3", "-o", path_str(&restricted)]);
    let (_, out, _) = cli(&["afcr", path_str(&restricted), "--json", "--budget-restarts", "40"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["afcr"], true);
    assert!(v["margin"].as_f64().unwrap() > 0.1);

    // Polynomial multiplication of degree-1 polynomials: c = 3 outputs.
    let (_, out, _) = cli(&["make-bilinear", "--kind", "convolve", "--dim", "1", "--m", "2", "--n", "2"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!((v["a"].as_u64(), v["b"].as_u64(), v["c"].as_u64()), (Some(2), Some(2), Some(3)));
    let conv = dir.path().join("conv.json");
    std::fs::write(&conv, &out).unwrap();
    // M(y)^T M(y) has eigenvalues 1 +- y1 y2 on the unit circle, minimum 1/2.
    assert_eq!(cli(&["afcr", path_str(&conv), "--budget-restarts", "40"]).1.trim(), "AFCR, margin 0.707107");

    // Fewer outputs than inputs: never AFCR.
    let t = dir.path().join("thin.txt");
    std::fs::write(&t, "2 3 2\n1 0 0\n0 1 0\n0 0 1\n1 0 0\n").unwrap();
    assert_eq!(cli(&["afcr", path_str(&t)]).1.trim(), "not AFCR, margin 0.000000");
}

#[test]
fn certify_is_reproducible_and_strict_flags_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let budget = SearchBudget::with_restarts(60).seeded(4);
    // Most Gaussian 3 x 5 x 3 tensors have too few real points for a certificate.
    let (t, _) = (0..50)
        .map(|s| {
            let t = sample_gaussian_tensor([3, 5, 3], &mut rng_for(77, s));
            let v = certify(&t, &budget).unwrap();
            (t, v)
        })
        .find(|(_, v)| matches!(v, Verdict::Inconclusive { .. }))
        .expect("an inconclusive instance among 50");
    let file = dir.path().join("t.json");
    std::fs::write(&file, t.to_json()).unwrap();
    let args = ["certify", path_str(&file), "--seed", "4", "--budget-restarts", "60"];
    let (code, first, _) = cli(&args);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["verdict"], "Inconclusive");
    assert!(v["reason"].is_string());
    let (_, second, _) = cli(&args);
    assert_eq!(first, second);
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(cli(&strict).0, EXIT_INCONCLUSIVE);

    let good = sample_gaussian_tensor([3, 6, 3], &mut rng_for(78, 0));
    let file = dir.path().join("good.txt");
    std::fs::write(&file, good.to_text()).unwrap();
    let (code, out, _) = cli(&["certify", path_str(&file), "--strict", "--budget-restarts", "60"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict"], "RankP");
    assert!(v["certificate"]["residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn experiment_command_writes_identical_files_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let csv = dir.path().join(format!("rows{run_id}.csv"));
        let summary = dir.path().join(format!("summary{run_id}.json"));
        let cfg = dir.path().join(format!("cfg{run_id}.json"));
        let body = serde_json::json!({
            "shape": [3, 6, 3],
            "samples": 4,
            "restarts": 40,
            "csv_path": csv,
            "summary_path": summary,
        });
        std::fs::write(&cfg, body.to_string()).unwrap();
        let (code, out, err) = cli(&["experiment", path_str(&cfg), "--seed", "11"]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(out.contains("prediction: {6}"), "{out}");
        outputs.push(std::fs::read(&csv).unwrap());
        let s: serde_json::Value = serde_json::from_slice(&std::fs::read(&summary).unwrap()).unwrap();
        assert_eq!(s["config"]["seed"], 11);
    }
    assert_eq!(outputs[0], outputs[1]);
    let header = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(header.starts_with("sample_id,verdict,cert_residual,als_p,als_p1,points_found,span_dim,wall_ms\n"));
}
