use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oms(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_oms"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run oms");
    assert!(
        out.status.success(),
        "oms {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn encode_recover_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    oms(&["sphere", "--d", "2", "-D", "12", "--n", "500", "--seed", "1", "--out", "train.omsp"], d);
    oms(&["sphere", "--d", "2", "-D", "12", "--n", "5", "--seed", "2", "--out", "sig.omsp"], d);
    let build = oms(
        &["gmra", "build", "--input", "train.omsp", "--d", "2", "--jmin", "0", "--jmax", "4", "--out", "g.omsg"],
        d,
    );
    assert!(String::from_utf8_lossy(&build.stdout).contains("levels 0..=4"));
    oms(
        &[
            "encode", "--gmra", "g.omsg", "--m", "300", "--seed", "9", "--signals", "sig.omsp",
            "--out-ensemble", "a.omsa", "--out-bits", "y.txt",
        ],
        d,
    );
    let bits = fs::read_to_string(d.join("y.txt")).unwrap();
    assert_eq!(bits.lines().count(), 5);
    assert!(bits.lines().all(|l| l.len() == 300 && l.chars().all(|c| c == '+' || c == '-')));

    for variant in [&["--variant", "oms"][..], &["--variant", "oms-plus", "--beam", "5"], &["--variant", "oms-simple", "--R", "1.5"]] {
        let mut args = vec!["recover", "--gmra", "g.omsg", "--j", "3", "--ensemble", "a.omsa", "--bits", "y.txt", "--out", "x.omsp"];
        args.extend_from_slice(variant);
        let out = oms(&args, d);
        assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 6);
        let rec = fs::read(d.join("x.omsp")).unwrap();
        assert_eq!(&rec[..4], b"OMSP");
        assert_eq!(rec.len(), 12 + 5 * 12 * 8);
    }

    let audit = oms(&["audit", "--gmra", "g.omsg", "--points", "train.omsp"], d);
    let text = String::from_utf8_lossy(&audit.stdout);
    assert!(text.starts_with("j\tcells"));
    assert!(text.contains("decay exponent"));
}

#[test]
fn bench_config_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a", "b"] {
        let config = format!(
            r#"{{"dataset": {{"synthetic_sphere": {{"d": 2, "D": 10, "n": 300}}}},
                "j_list": [2], "m_list": [64, 128], "trials": 5,
                "variants": ["oms", "center_only", {{"oms_simple": {{"radius": 0.5}}}}],
                "search": {{"beam": 4}}, "seed": 3, "j_max": 4, "output": "{name}.csv"}}"#
        );
        fs::write(d.join(format!("{name}.json")), config).unwrap();
        oms(&["bench", "--config", &format!("{name}.json")], d);
    }
    let a = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "dataset,j,m,variant,trials,mean_rel_err,std_rel_err,infeasible,mean_runtime_ms,seed"
    );
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn width_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("w.json"),
        r#"{"dataset": {"synthetic_sphere": {"d": 2, "D": 10, "n": 300}}, "j_list": [1, 3],
            "trials": 200, "seed": 4, "manifold": {"d": 2, "diam": 2.0, "reach": 1.0, "volume": 12.566370614359172}}"#,
    )
    .unwrap();
    let out = oms(&["width", "--config", "w.json"], d);
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("dataset,j,w_m"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        // lower_exact, lower, upper
        assert!(row.contains(",true,true,true,"), "{row}");
    }
}

#[test]
fn bad_config_reports_fields() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("bad.json"),
        r#"{"dataset": {"synthetic_sphere": {"d": 2, "D": 10, "n": 30}}, "j_list": [2],
            "m_list": [0], "trials": 0, "variants": ["oms"], "seed": 1}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_oms"))
        .args(["bench", "--config", "bad.json"])
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m_list") && err.contains("trials"), "{err}");
}
