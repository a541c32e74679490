use std::path::Path;
use std::process::{Command, Output};

fn urbanca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urbanca"))
        .current_dir(dir)
        .args(["--log-level", "error"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

fn synth(dir: &Path, seed: &str) {
    ok(&urbanca(
        dir,
        &[
            "--seed",
            seed,
            "synth",
            "--out-dir",
            "in",
            "--cities",
            "3",
            "--parcels-per-city",
            "64",
            "--exclusion-band",
            "--samples",
            "2000",
        ],
    ));
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "5");
    for f in ["parcels.geojson", "cities.csv", "exclusions.geojson", "samples.csv", "synth.manifest.json"] {
        assert!(d.join("in").join(f).exists(), "{f}");
    }

    let ingest = urbanca(
        d,
        &["ingest", "--parcels", "in/parcels.geojson", "--cities", "in/cities.csv", "--exclusions", "in/exclusions.geojson"],
    );
    ok(&ingest);
    let report: serde_json::Value = serde_json::from_slice(&ingest.stdout).unwrap();
    assert_eq!(report["parcels"]["loaded"], 192);
    assert_eq!(report["exclusions"], 3);

    ok(&urbanca(d, &["neighbors", "--parcels", "in/parcels.geojson", "--out", "graph.txt"]));
    assert!(std::fs::read_to_string(d.join("graph.txt")).unwrap().starts_with("PCA-NG v1 500 192 "));

    let cal = urbanca(d, &["calibrate", "--samples", "in/samples.csv", "--out", "coef.json"]);
    ok(&cal);
    let cal: serde_json::Value = serde_json::from_slice(&cal.stdout).unwrap();
    assert_eq!(cal["converged"], true);

    std::fs::write(d.join("cfg.json"), r#"{"coefficients_path":"coef.json","scenario":"NTU"}"#).unwrap();
    let sim = urbanca(
        d,
        &[
            "--config",
            "cfg.json",
            "--seed",
            "1",
            "simulate",
            "--parcels",
            "in/parcels.geojson",
            "--cities",
            "in/cities.csv",
            "--exclusions",
            "in/exclusions.geojson",
            "--graph",
            "graph.txt",
            "--out",
            "run/out.geojson",
        ],
    );
    assert!(matches!(sim.status.code(), Some(0) | Some(4)), "{}", String::from_utf8_lossy(&sim.stderr));
    for f in ["out.geojson", "out.summary.csv", "out.result.json", "out.geojson.manifest.json"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("run/out.geojson.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config"]["scenario"], "NTU");
    for role in ["parcels", "cities", "exclusions", "graph", "coefficients"] {
        assert!(manifest["inputs"][role]["sha256"].is_string(), "{role}");
    }

    let rep = urbanca(d, &["report", "--result", "run/out.result.json", "--cities", "in/cities.csv", "--group-by", "admin"]);
    ok(&rep);
    assert!(String::from_utf8_lossy(&rep.stdout).starts_with("level,key,cities"));

    let cmp = urbanca(
        d,
        &["compare", "--parcels", "in/parcels.geojson", "--simulated", "run/out.geojson", "--observed", "run/out.geojson"],
    );
    ok(&cmp);
    let cmp: serde_json::Value = serde_json::from_slice(&cmp.stdout).unwrap();
    assert_eq!(cmp["overlap_precision"], 1.0);
    assert_eq!(cmp["confusion_precision"], 1.0);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "8");
    let args =
        ["--seed", "4", "simulate", "--parcels", "in/parcels.geojson", "--cities", "in/cities.csv", "--out", "run/out.geojson"];
    let read = |f: &str| std::fs::read(d.join("run").join(f)).unwrap();
    let files = ["out.geojson", "out.summary.csv", "out.result.json", "out.geojson.manifest.json"];
    urbanca(d, &args);
    let first: Vec<Vec<u8>> = files.iter().map(|f| read(f)).collect();
    urbanca(d, &args);
    for (f, before) in files.iter().zip(&first) {
        assert_eq!(&read(f), before, "{f}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(urbanca(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(urbanca(d, &["simulate"]).status.code(), Some(1));
    assert_eq!(urbanca(d, &["--help"]).status.code(), Some(0));
    std::fs::write(d.join("bad.json"), r#"{"beta": 20}"#).unwrap();
    assert_eq!(urbanca(d, &["--config", "bad.json", "synth", "--out-dir", "x"]).status.code(), Some(1));

    synth(d, "1");
    let missing = urbanca(d, &["simulate", "--parcels", "in/parcels.geojson", "--cities", "nope.csv", "--out", "o.geojson"]);
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(d.join("dup.geojson"), {
        let f = r#"{"type":"Feature","properties":{"parcel_id":1,"city_id":"A","state":"urban","raw_density":1},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}"#;
        format!(r#"{{"type":"FeatureCollection","features":[{f},{f}]}}"#)
    })
    .unwrap();
    let dup = urbanca(d, &["ingest", "--parcels", "dup.geojson"]);
    assert_eq!(dup.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&dup.stderr).contains("duplicate"));

    // A graph built for other parcels is stale.
    ok(&urbanca(d, &["neighbors", "--parcels", "in/parcels.geojson", "--out", "graph.txt"]));
    ok(&urbanca(d, &["--seed", "2", "synth", "--out-dir", "other", "--cities", "3", "--parcels-per-city", "64"]));
    let stale = urbanca(
        d,
        &[
            "simulate",
            "--parcels",
            "other/parcels.geojson",
            "--cities",
            "other/cities.csv",
            "--graph",
            "graph.txt",
            "--out",
            "o.geojson",
        ],
    );
    assert_eq!(stale.status.code(), Some(3));

    // Without disturbance no score reaches 1, so every city falls short.
    std::fs::write(d.join("strict.json"), r#"{"p_threshold": 1.0, "disturbance": "off"}"#).unwrap();
    let short = urbanca(
        d,
        &[
            "--config",
            "strict.json",
            "simulate",
            "--parcels",
            "in/parcels.geojson",
            "--cities",
            "in/cities.csv",
            "--out",
            "s/o.geojson",
        ],
    );
    assert_eq!(short.status.code(), Some(4));
    assert!(d.join("s/o.geojson").exists() && d.join("s/o.geojson.manifest.json").exists());
}
