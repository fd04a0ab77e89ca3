use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lagonn(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lagonn"));
    cmd.args(args).env_remove("LAGONN_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn synthetic(dir: &Path) {
    let out = lagonn(
        &[
            "make-synthetic",
            "--n-per-class",
            "500",
            "--test-per-class",
            "20",
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_args<'a>(data: &'a str, out: &'a str, encoder: &'a str, variants: &'a str) -> Vec<String> {
    [
        "run",
        "--dataset",
        &format!("{data}/train.jsonl"),
        "--test",
        &format!("{data}/test.jsonl"),
        "--labels",
        &format!("{data}/labels.jsonl"),
        "--encoder",
        encoder,
        "--variants",
        variants,
        "--regimes",
        "BALANCED",
        "--seeds",
        "0",
        "--out",
        out,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run(args: &[String], envs: &[(&str, &str)]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    lagonn(&refs, envs)
}

#[test]
fn hash_encoder_smoke_writes_one_shard() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    synthetic(&data);
    let o = run(
        &run_args(
            data.to_str().unwrap(),
            out.to_str().unwrap(),
            "hash:64",
            "PROBE",
        ),
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let shards: Vec<_> = fs::read_dir(out.join("shards")).unwrap().collect();
    assert_eq!(shards.len(), 1);
    let text = fs::read_to_string(out.join("shards/PROBE_BALANCED_0.csv")).unwrap();
    assert_eq!(text.lines().count(), 11);

    let report = dir.path().join("report");
    let o = lagonn(
        &[
            "report",
            "--shards",
            out.join("shards").to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("PROBE"));
    assert!(report.join("report.csv").exists());
}

#[test]
fn missing_decorated_text_exits_two_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    synthetic(&data);
    let store = format!("store:{}", data.join("store.bin").display());
    let o = run(
        &run_args(
            data.to_str().unwrap(),
            out.to_str().unwrap(),
            &store,
            "LAGONN_CHEAP",
        ),
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let manifest = fs::read_to_string(out.join("pending.jsonl")).unwrap();
    assert!(manifest.lines().count() > 0);
    assert!(
        manifest.lines().all(|l| l.contains("[SEP] [class")),
        "{manifest}"
    );
}

#[test]
fn unknown_variant_exits_one_naming_valid_variants() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synthetic(&data);
    let out = dir.path().join("out");
    let o = run(
        &run_args(
            data.to_str().unwrap(),
            out.to_str().unwrap(),
            "hash:64",
            "FOO",
        ),
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("PROBE") && err.contains("LAGONN_LITE"),
        "{err}"
    );
}

#[test]
fn bad_flag_exits_one() {
    let o = lagonn(&["run", "--no-such-flag"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    synthetic(&data);
    let o = run(
        &run_args(
            data.to_str().unwrap(),
            out.to_str().unwrap(),
            "hash:64",
            "PROBE",
        ),
        &[("LAGONN_SEED", "7")],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("shards/PROBE_BALANCED_7.csv").exists());
}

#[test]
fn report_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = lagonn(
        &[
            "report",
            "--shards",
            dir.path().to_str().unwrap(),
            "--out",
            dir.path().join("r").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn make_synthetic_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    synthetic(&a);
    synthetic(&b);
    for f in ["train.jsonl", "test.jsonl", "labels.jsonl", "store.bin"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn store_info_and_pending() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synthetic(&data);
    let store = data.join("store.bin");
    let o = lagonn(&["store", "info", store.to_str().unwrap()], &[]);
    assert_eq!(
        String::from_utf8_lossy(&o.stdout).trim(),
        "dim 32 records 1042"
    );

    let extra = dir.path().join("extra.jsonl");
    fs::write(
        &extra,
        "{\"text\":\"unseen text\",\"label\":0}\n{\"text\":\"topic0 x\",\"label\":1}\n",
    )
    .unwrap();
    let manifest = dir.path().join("pending.jsonl");
    let o = lagonn(
        &[
            "store",
            "pending",
            "--store",
            store.to_str().unwrap(),
            "--labels",
            data.join("labels.jsonl").to_str().unwrap(),
            "--dataset",
            data.join("test.jsonl").to_str().unwrap(),
            extra.to_str().unwrap(),
            "--out",
            manifest.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&manifest).unwrap().lines().count(), 2);
}
