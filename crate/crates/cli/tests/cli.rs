use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn anyonsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyonsim")).args(args).output().expect("binary runs")
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn run_to_file(args: &[&str]) -> (Output, Vec<Value>) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.jsonl");
    let mut all = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    let o = anyonsim(&all);
    let recs = if out.exists() { records(&out) } else { Vec::new() };
    (o, recs)
}

fn find<'a>(recs: &'a [Value], op: &str, key: &str, val: &str) -> Vec<&'a Value> {
    recs.iter().filter(|r| r["operation"] == op && r["parameters"][key] == val).collect()
}

#[test]
fn abstract_fusion_passes_with_reference_rows() {
    let (o, recs) = run_to_file(&["--experiment", "fusion"]);
    assert!(o.status.success());
    let amps: Vec<_> = recs.iter().filter(|r| r["operation"] == "fusion_amplitude").collect();
    assert_eq!(amps.len(), 12);
    for r in &recs {
        assert_eq!(r["pass"], true);
        assert!(r["wall_time"].as_f64().unwrap() >= 0.0);
    }
    let cplus = find(&recs, "fusion_amplitude", "h", "c+");
    assert!(cplus.iter().all(|r| r["paper_value"] == -0.5 && r["provenance"] == "paper"));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("24 records, 0 failed"));
}

#[test]
fn encoded_layer_single_element() {
    let (o, recs) = run_to_file(&["--experiment", "fusion", "--layer", "encoded", "--element", "c+", "--basis", "x"]);
    assert!(o.status.success());
    assert_eq!(recs.len(), 1);
    assert!((recs[0]["value_re"].as_f64().unwrap() + 0.5).abs() < 1e-10);
}

#[test]
fn photonic_transposition_protocol() {
    let (o, recs) = run_to_file(&["--experiment", "fusion", "--layer", "photonic", "--element", "t0"]);
    assert!(o.status.success());
    let tt: Vec<_> = recs.iter().filter(|r| r["operation"] == "controlled_tt_protocol").collect();
    assert_eq!(tt.len(), 4);
    assert!(tt.iter().all(|r| (r["value_re"].as_f64().unwrap() - 0.5).abs() < 1e-6));
    assert_eq!(tt[0]["tolerance"], 1e-6);
}

#[test]
fn probe_distributions() {
    let (o, recs) = run_to_file(&["--experiment", "probe", "--element", "c+"]);
    assert!(o.status.success());
    let dist = find(&recs, "probe_distribution", "g", "c+");
    let values: Vec<f64> = dist.iter().map(|r| r["value_re"].as_f64().unwrap()).collect();
    for (v, want) in values.iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
        assert!((v - want).abs() < 1e-10);
    }
    let w = find(&recs, "w_expectation", "g", "c+");
    assert!((w[0]["value_re"].as_f64().unwrap() + 0.5).abs() < 1e-10);
    assert!(recs.iter().any(|r| r["operation"] == "fusion_probe" && r["parameters"]["M"] == "random0"));
}

#[test]
fn reports_are_deterministic_given_seed() {
    let strip = |recs: Vec<Value>| -> Vec<Value> {
        recs.into_iter()
            .map(|mut r| {
                r.as_object_mut().unwrap().remove("wall_time");
                r
            })
            .collect()
    };
    let a = strip(run_to_file(&["--experiment", "probe", "--element", "t1", "--seed", "11"]).1);
    let b = strip(run_to_file(&["--experiment", "probe", "--element", "t1", "--seed", "11"]).1);
    let c = strip(run_to_file(&["--experiment", "probe", "--element", "t1", "--seed", "12"]).1);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn optics_reports_heralding_discrepancy() {
    let (o, recs) = run_to_file(&["--experiment", "optics"]);
    assert_eq!(o.status.code(), Some(1));
    let h: Vec<_> = recs.iter().filter(|r| r["operation"] == "spdc_heralding_probability").collect();
    assert_eq!(h[0]["pass"], false);
    assert!((h[0]["value_re"].as_f64().unwrap() - 3.0 * 0.00970299).abs() < 1e-6);
    let fid: Vec<_> = recs.iter().filter(|r| r["operation"].as_str().unwrap().ends_with("fidelity")).collect();
    assert_eq!(fid.len(), 2);
    assert!(fid.iter().all(|r| r["pass"] == true));
}

#[test]
fn external_circuit_is_compared_to_reference_success() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prep.json");
    std::fs::write(&path, anyonsim::optics::synthesize_prep_circuit::<f64>().to_json()).unwrap();
    let (_, recs) = run_to_file(&["--experiment", "optics", "--circuit", path.to_str().unwrap()]);
    let success: Vec<_> = recs.iter().filter(|r| r["operation"] == "prep_success_probability").collect();
    assert_eq!(success[0]["paper_value"].as_f64().unwrap(), 9.0 / 55.0);
    let fid: Vec<_> = recs.iter().filter(|r| r["operation"] == "prep_fidelity").collect();
    assert_eq!(fid[0]["pass"], true);
}

#[test]
fn malformed_circuit_names_the_element() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"modes": ["a", "b"], "elements": [{"kind": "phase_shift", "modes": ["a"], "phase": 0.1}, {"kind": "mirror", "modes": ["a"]}]}"#,
    )
    .unwrap();
    let o = anyonsim(&["--experiment", "optics", "--circuit", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("element 1"), "{err}");
}

#[test]
fn usage_errors_exit_nonzero() {
    for args in [
        &["--experiment", "optics", "--layer", "abstract"][..],
        &["--experiment", "fusion", "--layer", "encoded", "--vertex", "v3"],
        &["--experiment", "fusion", "--element", "x9"],
        &["--experiment", "probe", "--circuit", "c.json"],
        &["--experiment", "optics", "--lambda", "1.5"],
    ] {
        let o = anyonsim(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn equivalence_passes() {
    let (o, recs) = run_to_file(&["--experiment", "equivalence"]);
    assert!(o.status.success());
    for cfg in ["(v1,v3)", "(v1,v2)", "(v2,v3)"] {
        let t = find(&recs, "gate_table_mismatches", "configuration", cfg);
        assert_eq!(t[0]["value_re"], 0.0);
    }
}
