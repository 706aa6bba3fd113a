mod common;

use common::{body, data, ofapi, scenario};

fn golden_args(out: &std::path::Path) -> Vec<String> {
    vec![
        "--trades".into(),
        data("golden/trades.csv").display().to_string(),
        "--quotes".into(),
        data("golden/quotes.csv").display().to_string(),
        "--offsets".into(),
        "0..0".into(),
        "--out".into(),
        out.display().to_string(),
    ]
}

#[test]
fn analyze_matches_golden_attribution() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["analyze".to_string(), "--no-correction".into()];
    args.extend(golden_args(dir.path()));
    let run = ofapi(&args);
    // trade E has no quote: partial success
    assert_eq!(run.code, 1, "{}", run.stderr);
    let out = dir.path().join("attribution.csv");
    let first = std::fs::read_to_string(&out).unwrap().lines().next().unwrap().to_string();
    assert!(first.starts_with("# ofapi ") && first.contains(" config_hash="), "{first}");
    let hash = first.rsplit('=').next().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(body(&out), std::fs::read_to_string(data("golden/attribution.csv")).unwrap());
}

#[test]
fn unit_calibration_equals_no_correction() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("unit.json");
    std::fs::write(
        &cal,
        r#"{"beta1": 1.0, "beta1_se": 0.0, "n_points": 10, "residual_mean": 1.0, "residual_stddev": 0.0}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut args = vec!["analyze".to_string(), "--calibration".into(), cal.display().to_string()];
    args.extend(golden_args(&a));
    assert_eq!(ofapi(&args).code, 1);
    let mut args = vec!["analyze".to_string(), "--no-correction".into()];
    args.extend(golden_args(&b));
    assert_eq!(ofapi(&args).code, 1);
    assert_eq!(body(&a.join("attribution.csv")), body(&b.join("attribution.csv")));
}

#[test]
fn missing_calibration_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["analyze".to_string()];
    args.extend(golden_args(dir.path()));
    let run = ofapi(&args);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("calibrate"), "{}", run.stderr);
}

#[test]
fn empty_trade_file_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let trades = dir.path().join("trades.csv");
    let header = std::fs::read_to_string(data("golden/trades.csv")).unwrap();
    std::fs::write(&trades, header.lines().next().unwrap().to_string() + "\n").unwrap();
    let run = ofapi([
        "analyze",
        "--no-correction",
        "--trades",
        trades.to_str().unwrap(),
        "--quotes",
        data("golden/quotes.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.code, 2, "{}", run.stderr);
}

#[test]
fn malformed_rows_are_partial_unless_strict() {
    let dir = tempfile::tempdir().unwrap();
    let trades = dir.path().join("trades.csv");
    let mut text = std::fs::read_to_string(data("golden/trades.csv")).unwrap();
    text.push_str("F,Uniswap,Classic,1,WETH_SIDEWAYS,false,1,18,1,6,1,1,0,10.00,1\n");
    std::fs::write(&trades, text).unwrap();
    let args = |strict: bool| {
        let mut a = vec![
            "analyze".to_string(),
            "--no-correction".into(),
            "--offsets".into(),
            "0..0".into(),
            "--trades".into(),
            trades.display().to_string(),
            "--quotes".into(),
            data("golden/quotes.csv").display().to_string(),
            "--out".into(),
            dir.path().display().to_string(),
        ];
        if strict {
            a.push("--strict".into());
        }
        a
    };
    assert_eq!(ofapi(args(false)).code, 1);
    let strict = ofapi(args(true));
    assert_eq!(strict.code, 2);
    assert!(strict.stderr.contains("line 7"), "{}", strict.stderr);
}

#[test]
fn single_trade_cannot_be_aggregated() {
    let dir = tempfile::tempdir().unwrap();
    let trades = dir.path().join("one.csv");
    let text = std::fs::read_to_string(data("golden/trades.csv")).unwrap();
    let lines: Vec<&str> = text.lines().take(2).collect();
    std::fs::write(&trades, lines.join("\n") + "\n").unwrap();
    let run = ofapi([
        "aggregate",
        "--no-correction",
        "--offsets",
        "0..0",
        "--trades",
        trades.to_str().unwrap(),
        "--quotes",
        data("golden/quotes.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.code, 2, "{}", run.stderr);
}

#[test]
fn quotes_and_pools_together_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = ofapi([
        "analyze",
        "--no-correction",
        "--trades",
        data("golden/trades.csv").to_str().unwrap(),
        "--quotes",
        data("golden/quotes.csv").to_str().unwrap(),
        "--pools",
        data("golden/quotes.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.code, 2);
}

#[test]
fn invalid_scenario_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("mixed.toml")).unwrap();
    std::fs::write(&spec, text.replace("n_trades = 2000", "n_trades = 2000\nmystery = 1")).unwrap();
    let run = ofapi(["synth", spec.to_str().unwrap(), "--out", dir.path().join("d").to_str().unwrap()]);
    assert_eq!(run.code, 2);
    let unnormalized = text.replace("Classic = 0.4", "Classic = 0.9");
    std::fs::write(&spec, unnormalized).unwrap();
    assert_eq!(ofapi(["synth", spec.to_str().unwrap()]).code, 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "trades = {}\nquotes = {}\noffsets = -4..3\nno_correction = true\nout = {}\n",
            data("golden/trades.csv").display(),
            data("golden/quotes.csv").display(),
            dir.path().join("from_file").display()
        ),
    )
    .unwrap();
    let out = dir.path().join("from_flag");
    let run = ofapi(["analyze", "--config", conf.to_str().unwrap(), "--offsets", "0..0", "--out", out.to_str().unwrap()]);
    assert_eq!(run.code, 1, "{}", run.stderr);
    assert_eq!(body(&out.join("attribution.csv")).lines().count(), 6);
    assert!(!dir.path().join("from_file").exists());

    std::fs::write(&conf, "colour = blue\n").unwrap();
    assert_eq!(ofapi(["analyze", "--config", conf.to_str().unwrap()]).code, 2);
}

#[test]
fn full_pipeline_outputs_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("small.toml");
    let text = std::fs::read_to_string(scenario("mixed.toml")).unwrap();
    std::fs::write(&spec, text.replace("n_trades = 2000", "n_trades = 120")).unwrap();
    let d = dir.path().join("data");
    let o = dir.path().join("out");
    let (ds, os) = (d.to_str().unwrap(), o.to_str().unwrap());
    assert_eq!(ofapi(["synth", spec.to_str().unwrap(), "--out", ds]).code, 0);
    let common = |cmd: &str| {
        vec![
            cmd.to_string(),
            "--trades".into(),
            format!("{ds}/trades.csv"),
            "--pools".into(),
            format!("{ds}/pools.csv"),
            "--out".into(),
            os.to_string(),
            "--window".into(),
            "50".into(),
        ]
    };
    for cmd in ["calibrate", "analyze", "report"] {
        let run = ofapi(common(cmd));
        assert!(run.code == 0 || run.code == 1, "{cmd}: {}", run.stderr);
    }
    for name in ["attribution.csv", "curves.csv", "rolling.csv", "rolling_path_X.csv", "rolling_interface_OneInch.csv"] {
        let text = std::fs::read_to_string(o.join(name)).unwrap();
        assert!(text.starts_with("# ofapi "), "{name}");
    }
    for name in ["calibration.json", "summary.json"] {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join(name)).unwrap()).unwrap();
        assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64, "{name}");
    }
    let report = std::fs::read_to_string(o.join("report.md")).unwrap();
    assert!(report.starts_with("<!-- ofapi "));
    let curves = body(&o.join("curves.csv"));
    assert!(curves.lines().any(|l| l.starts_with("all,0,")));
    assert!(curves.lines().any(|l| l.starts_with("path:Fusion,-4,")));
    assert!(curves.lines().any(|l| l.starts_with("interface:Uniswap,3,")));
}
