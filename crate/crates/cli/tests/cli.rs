use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_forestplay"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Exit status plus the parsed JSON error line from stderr.
fn failure(o: &Output) -> (i32, Value) {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let line = err.lines().last().expect("an error line");
    (
        o.status.code().unwrap(),
        serde_json::from_str(line).expect("json error line"),
    )
}

fn golden_digest() -> String {
    std::fs::read_to_string(data("golden_game.digest"))
        .unwrap()
        .trim()
        .to_owned()
}

#[test]
fn replay_prints_golden_digest() {
    let log = data("golden_game.log");
    let o = run(&["replay", log.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).trim(), golden_digest());
}

#[test]
fn scripted_game_reproduces_golden_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("game.log");
    let script = data("golden_script.json");
    let o = run(&[
        "new",
        "--players",
        "2",
        "--seed",
        "42",
        "--names",
        "Aino,Bertil",
        "--script",
        script.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).trim(), golden_digest());
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(written, std::fs::read_to_string(data("golden_game.log")).unwrap());
}

#[test]
fn a_finished_log_can_drive_a_new_game() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("again.log");
    let log = data("golden_game.log");
    let o = run(&[
        "new",
        "--players",
        "2",
        "--seed",
        "42",
        "--names",
        "Aino,Bertil",
        "--script",
        log.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).trim(), golden_digest());
}

#[test]
fn empty_game_scores_zero_outcomes() {
    let log = data("empty_game.log");
    let o = run(&["score", log.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["format"], "forestplay-score-report");
    assert_eq!(report["source"], "surrogate");
    let players = report["players"].as_array().unwrap();
    assert_eq!(players.len(), 2);
    for p in players {
        assert_eq!(p["final_cash"], 8000);
        for key in ["timber", "deadwood", "net_present_value", "wood_products_carbon"] {
            assert_eq!(p["raw"][key].as_f64(), Some(0.0), "{key}");
            assert!(p["raw"][key].as_f64().unwrap().is_sign_positive(), "{key}");
        }
    }
}

#[test]
fn golden_game_ranks_by_cash() {
    let log = data("golden_game.log");
    let o = run(&["score", log.to_str().unwrap()]);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = &report["players"];
    assert_eq!(p[0]["name"], "Aino");
    assert_eq!(p[0]["final_cash"], 66300);
    assert_eq!(p[1]["final_cash"], 43200);
    assert_eq!(p[0]["economic_rank"], 1);
    assert_eq!(p[1]["economic_rank"], 2);
    assert_eq!(p[0]["raw"]["timber"].as_f64(), Some(1350.0));
}

#[test]
fn export_formats() {
    let dir = tempfile::tempdir().unwrap();
    let log = data("golden_game.log");
    let csv_path = dir.path().join("report.csv");
    let o = run(&[
        "export",
        log.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().next().unwrap().contains("timber"));

    let o = run(&["export", log.to_str().unwrap(), "--format", "report-json"]);
    assert!(o.status.success(), "{o:?}");
    let json = stdout(&o);
    let score = stdout(&run(&["score", log.to_str().unwrap()]));
    assert_eq!(json, score);
}

#[test]
fn custom_coefficients_change_the_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    let log = data("golden_game.log");
    let base: Value = serde_json::from_str(&stdout(&run(&["score", log.to_str().unwrap()]))).unwrap();
    let mut coeffs = base["coefficients"].clone();
    let doubled = coeffs["carbon_per_m3"].as_f64().unwrap() * 2.0;
    coeffs["carbon_per_m3"] = doubled.into();
    let path = dir.path().join("coeffs.json");
    std::fs::write(&path, coeffs.to_string()).unwrap();
    let o = run(&["score", log.to_str().unwrap(), "--coeffs", path.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let changed: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(changed["coefficients"]["carbon_per_m3"].as_f64(), Some(doubled));
    assert_eq!(
        changed["players"][0]["raw"]["timber"],
        base["players"][0]["raw"]["timber"]
    );
}

#[test]
fn imported_indicators_replace_the_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    let log = data("golden_game.log");
    let base: Value = serde_json::from_str(&stdout(&run(&["score", log.to_str().unwrap()]))).unwrap();
    let mut players = Vec::new();
    for (p, row) in base["players"].as_array().unwrap().iter().enumerate() {
        let units = [
            ("tree_biomass_carbon", "tC"),
            ("total_soil_carbon", "tC"),
            ("ecosystem_carbon", "tC"),
            ("wood_products_carbon", "tC"),
            ("timber", "m3"),
            ("deadwood", "m3"),
            ("soil_water", "index"),
            ("net_present_value", "EUR"),
        ];
        let mut ind = serde_json::Map::new();
        for (key, unit) in units {
            let v = row["raw"][key].as_f64().unwrap() + 1.0 + p as f64;
            ind.insert(key.into(), serde_json::json!({"value": v, "unit": unit}));
        }
        players.push(serde_json::json!({"player": p, "indicators": ind}));
    }
    let doc = serde_json::json!({"format": "forestplay-indicator-import", "version": 1, "players": players});
    let path = dir.path().join("import.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let o = run(&["score", log.to_str().unwrap(), "--import", path.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["source"], "imported");
    assert_eq!(r["players"][1]["raw"]["timber"].as_f64(), Some(950.0 + 2.0));

    let mut broken = doc.clone();
    broken["players"][0]["indicators"]["timber"]["unit"] = "tC".into();
    std::fs::write(&path, broken.to_string()).unwrap();
    let o = run(&["score", log.to_str().unwrap(), "--import", path.to_str().unwrap()]);
    let (code, err) = failure(&o);
    assert_eq!(code, 4);
    assert_eq!(err["error"], "invalid_input");
}

#[test]
fn bad_player_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.log");
    let o = run(&["new", "--players", "5", "--out", out.to_str().unwrap()]);
    let (code, err) = failure(&o);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "usage");
    assert!(!out.exists());
}

#[test]
fn missing_file_is_an_io_error() {
    let o = run(&["replay", "/nonexistent/forestplay/game.log"]);
    let (code, err) = failure(&o);
    assert_eq!(code, 3);
    assert_eq!(err["error"], "io");
}

#[test]
fn corrupted_log_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("golden_game.log")).unwrap();
    let tampered =
        text.replacen("\"price_up\"", "\"price_down\"", 1)
            .replacen("\"bark_beetle\"", "\"storm_damage\"", 1);
    assert_ne!(tampered, text);
    let path = dir.path().join("bad.log");
    std::fs::write(&path, tampered).unwrap();
    let (code, err) = failure(&run(&["replay", path.to_str().unwrap()]));
    assert_eq!(code, 4);
    assert_eq!(err["error"], "invalid_input");

    std::fs::write(&path, "{not json").unwrap();
    let (code, _) = failure(&run(&["replay", path.to_str().unwrap()]));
    assert_eq!(code, 4);
}

#[test]
fn illegal_script_action_is_a_rule_error() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    let out = dir.path().join("x.log");
    let events = serde_json::json!([
        {"type": "action", "actor": 1, "phase": "y0_planting", "action": {"type": "pass"}}
    ]);
    std::fs::write(&script, events.to_string()).unwrap();
    let o = run(&[
        "new",
        "--players",
        "2",
        "--seed",
        "1",
        "--script",
        script.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let (code, err) = failure(&o);
    assert_eq!(code, 5, "{err}");
    assert_eq!(err["error"], "illegal_action");
}

#[test]
fn bots_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let exp = serde_json::json!({
        "format": "forestplay-experiment",
        "version": 1,
        "config": {"player_count": 2},
        "samples": 16,
        "master_seed": 11,
        "candidates": [{"id": "idle", "plant": {"rule": "nothing"}}],
        "grid": {"insurance": [{"rule": "never"}, {"rule": "always_at_y0"}]}
    });
    let path = dir.path().join("exp.json");
    std::fs::write(&path, exp.to_string()).unwrap();
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json", "a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&[
            "bots",
            "--experiment",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[2], outputs[3]);
    let results: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(results["format"], "forestplay-experiment-results");
    assert_eq!(results["ranking"].as_array().unwrap().len(), 3);
    let csv = String::from_utf8(outputs[2].clone()).unwrap();
    assert_eq!(csv.lines().count(), 4);

    std::fs::write(&path, exp.to_string().replace("forestplay-experiment", "other")).unwrap();
    let (code, _) = failure(&run(&[
        "bots",
        "--experiment",
        path.to_str().unwrap(),
        "--out",
        "/dev/null",
    ]));
    assert_eq!(code, 4);
}

#[test]
fn help_exits_zero() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}
