//! The `sepwit` binary driven through files.

use std::process::Command;

fn sepwit(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sepwit")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn generated_werner_state_is_solved_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("werner.json");
    let result = dir.path().join("result.json");
    let state = state.to_str().unwrap();
    let (code, _) = sepwit(&["generate", "--family", "werner", "--p", "0.7", "--output", state]);
    assert_eq!(code, 0);
    let (code, _) = sepwit(&["solve", "--input", state, "--output", result.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(v["verdict"], "ENTANGLED");
    assert_eq!(v["witness"]["certified"], true);
    assert!(v["witness"]["margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn ppt_and_solve_agree_on_a_separable_werner_state() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("werner.json");
    let state = state.to_str().unwrap();
    sepwit(&["generate", "--family", "werner", "--p", "0.2", "--output", state]);
    let (_, ppt) = sepwit(&["ppt", "--input", state]);
    let (code, solved) = sepwit(&["solve", "--input", state]);
    assert_eq!(code, 0);
    let ppt: serde_json::Value = serde_json::from_str(&ppt).unwrap();
    let solved: serde_json::Value = serde_json::from_str(&solved).unwrap();
    assert_eq!(ppt["verdict"], "PPT_POSITIVE");
    assert_eq!(solved["verdict"], "SEPARABLE");
}

#[test]
fn missing_input_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let (code, out) = sepwit(&["solve", "--input", missing.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
}
