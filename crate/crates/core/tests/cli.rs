use std::path::Path;

use sicr::cli::run;

fn go(args: &[&str]) -> i32 {
    run(args.iter().map(std::ffi::OsString::from))
}

fn ws(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(go(&[]), 2);
    assert_eq!(go(&["no-such-command"]), 2);
    assert_eq!(go(&["train-codec", "--layer", "middle"]), 2);
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let w = ws(dir.path());
    assert_eq!(go(&["evaluate", "--workspace", w]), 1);
    assert_eq!(go(&["train-codec", "--workspace", w, "--layer", "enh", "--lambda", "0.01"]), 1);
    assert_eq!(go(&["refine", "--workspace", w, "--image", "missing.png", "--lambda", "0.01", "--l", "1"]), 1);
}

#[test]
fn prepare_writes_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let w = ws(dir.path());
    assert_eq!(go(&["prepare", "--workspace", w, "--synthetic", "3", "--size", "32", "--split", "val"]), 0);
    let text = std::fs::read_to_string(dir.path().join("manifests/val.tsv")).unwrap();
    assert_eq!(sicr::imaging::DatasetManifest::parse(&text).unwrap().len(), 3);
}
