use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const WORKED: &str = "TGGTGGTGGTGCGGTGATGGTGC";
/// With a 16-byte prefetch buffer and 8-byte blocks this leaves room for
/// exactly five leaves per sub-tree.
const F5: [&str; 6] = ["--memory", "534", "--r-size", "16", "--block-size", "8"];

fn era(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_era")).args(args).output().expect("run era")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Worked {
    _dir: tempfile::TempDir,
    input: PathBuf,
    index: PathBuf,
}

fn build_worked(extra: &[&str]) -> Worked {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    std::fs::write(&input, WORKED).unwrap();
    let index = dir.path().join("s.era");
    let mut args = vec!["build", "--input", s(&input), "--output", s(&index)];
    args.extend_from_slice(&F5);
    args.extend_from_slice(extra);
    let o = era(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    Worked { _dir: dir, input, index }
}

#[test]
fn build_reports_split_prefixes() {
    let w = build_worked(&[]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(w.index.with_file_name("s.era.stats.json")).unwrap()).unwrap();
    assert_eq!(report["record_f_m"], 5);
    let prefixes: Vec<&str> =
        report["records"].as_array().unwrap().iter().map(|r| r["prefix"].as_str().unwrap()).collect();
    for p in ["TGA", "TGC", "TGG"] {
        assert!(prefixes.contains(&p), "{prefixes:?}");
    }
    assert!(!prefixes.contains(&"TG"));
    assert!(report["total_stats"]["passes"].as_u64().unwrap() > 0);
    assert!(report["peak_memory"].as_u64().unwrap() > 0);
    let groups = report["groups"].as_array().unwrap();
    assert_eq!(groups.len() as u64, report["group_count"].as_u64().unwrap());
    let freq: u64 = groups.iter().map(|g| g["frequency"].as_u64().unwrap()).sum();
    assert_eq!(freq, 24);
}

#[test]
fn tiny_budget_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    std::fs::write(&input, WORKED).unwrap();
    let out = dir.path().join("x.era");
    let o = era(&[
        "build",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--memory",
        "63",
        "--r-size",
        "1",
        "--block-size",
        "1",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn build_then_verify() {
    let w = build_worked(&[]);
    let o = era(&["verify", "--index", s(&w.index), "--input", s(&w.input)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn queries() {
    let w = build_worked(&[]);
    let q = |p: &str| era(&["query", "--index", s(&w.index), "--input", s(&w.input), p]);
    let o = q("TGC");
    assert_eq!((code(&o), stdout(&o)), (0, "9\n20\n".to_string()));
    let o = q("TGT");
    assert_eq!((code(&o), stdout(&o)), (1, String::new()));
    assert_eq!(code(&q("TGX")), 2);
    let o = q("TG");
    assert_eq!(stdout(&o), "0\n3\n6\n9\n14\n17\n20\n");
    let o = q("C$");
    assert_eq!(stdout(&o), "22\n");
}

#[test]
fn query_without_text_at_trie_level() {
    let w = build_worked(&[]);
    let o = era(&["query", "--index", s(&w.index), "TG"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "0\n3\n6\n9\n14\n17\n20\n");
    let o = era(&["query", "--index", s(&w.index), "TGCG"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn corrupt_index_is_detected() {
    let w = build_worked(&[]);
    let mut bytes = std::fs::read(&w.index).unwrap();
    let last = bytes.len() - 5;
    bytes[last] ^= 0x40;
    std::fs::write(&w.index, &bytes).unwrap();
    assert_eq!(code(&era(&["verify", "--index", s(&w.index), "--input", s(&w.input)])), 4);
    assert_eq!(code(&era(&["query", "--index", s(&w.index), "--input", s(&w.input), "TG"])), 4);
    assert_eq!(code(&era(&["stats", "--index", s(&w.index)])), 4);
}

#[test]
fn verify_large_input_is_structural() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("big.txt");
    let mut x: u64 = 12345;
    let text: String = (0..30_000)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ['A', 'C', 'G', 'T'][(x >> 33) as usize % 4]
        })
        .collect();
    std::fs::write(&input, &text).unwrap();
    let index = dir.path().join("big.era");
    let o = era(&["build", "--input", s(&input), "--output", s(&index), "--memory", "4M"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = era(&["verify", "--index", s(&index), "--input", s(&input)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("structural checks only"));
}

#[test]
fn verify_rejects_other_text() {
    let w = build_worked(&[]);
    let other = w.input.with_file_name("other.txt");
    std::fs::write(&other, "TGGTGGTGGTGCGGTGATGGTGA").unwrap();
    assert_eq!(code(&era(&["verify", "--index", s(&w.index), "--input", s(&other)])), 5);
}

#[test]
fn stats_summary() {
    let w = build_worked(&[]);
    let o = era(&["stats", "--index", s(&w.index)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["groups"].as_u64().unwrap() >= 4);
    assert_eq!(v["total_leaves"], 24);
    assert_eq!(v["format_version"], 1);
    assert_eq!(code(&era(&["stats", "--index", ""])), 2);
    assert_eq!(code(&era(&["stats", "--index", "/nonexistent/x.era"])), 2);
}

#[test]
fn parallel_stats_equal_serial() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    std::fs::write(&input, WORKED.repeat(40)).unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "2", "4"] {
        let index = dir.path().join(format!("w{workers}.era"));
        let o = era(&[
            "build",
            "--input",
            s(&input),
            "--output",
            s(&index),
            "--memory",
            "16K",
            "--r-size",
            "256",
            "--block-size",
            "64",
            "--workers",
            workers,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let st = era(&["stats", "--index", s(&index)]);
        outputs.push((stdout(&st), std::fs::read(&index).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn trace_dump() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    std::fs::write(&input, WORKED).unwrap();
    let index = dir.path().join("s.era");
    let mut args = vec!["build", "--input", s(&input), "--output", s(&index)];
    args.extend_from_slice(&F5);
    let o = Command::new(env!("CARGO_BIN_EXE_era")).args(&args).env("ERA_TRACE", "1").output().unwrap();
    assert_eq!(code(&o), 0);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("iteration 1"), "{err}");
    assert!(err.contains("\n  L: "));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&era(&[])), 2);
    assert_eq!(code(&era(&["build", "--output", "x"])), 2);
    assert_eq!(code(&era(&["build", "--input", "/nonexistent", "--output", "x"])), 2);
    assert_eq!(code(&era(&["build", "--input", "a", "--output", "b", "--memory", "lots"])), 2);
    assert_eq!(code(&era(&["--help"])), 0);
}

#[test]
fn invalid_symbol_in_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.txt");
    std::fs::write(&input, "ACGTN").unwrap();
    let o = era(&["build", "--input", s(&input), "--output", s(&dir.path().join("o.era"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn custom_alphabet_and_sentinel_only_text() {
    let dir = tempfile::tempdir().unwrap();
    let alpha = dir.path().join("alpha.txt");
    std::fs::write(&alpha, "xy\n").unwrap();
    let input = dir.path().join("s.txt");
    std::fs::write(&input, "xyxxy").unwrap();
    let index = dir.path().join("s.era");
    let o = era(&["build", "--input", s(&input), "--output", s(&index), "--alphabet", s(&alpha)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = era(&["query", "--index", s(&index), "--input", s(&input), "xy"]);
    assert_eq!(stdout(&o), "0\n3\n");

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let index = dir.path().join("e.era");
    let o = era(&["build", "--input", s(&empty), "--output", s(&index)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = era(&["query", "--index", s(&index), "--input", s(&empty), "$"]);
    assert_eq!((code(&o), stdout(&o)), (0, "0\n".to_string()));
    let v: serde_json::Value = serde_json::from_str(&stdout(&era(&["stats", "--index", s(&index)]))).unwrap();
    assert_eq!(v["trie_entries"], 1);
    assert_eq!(v["total_nodes"], 2);
    assert_eq!(code(&era(&["verify", "--index", s(&index), "--input", s(&empty)])), 0);
}
