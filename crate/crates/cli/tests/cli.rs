use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kvote::bnb::{self, SolveOptions};
use kvote::gen_io::{self, GenConfig, GenMode};
use kvote::milp_export::{self, FormulationKind};
use kvote::{polysolve, Committee};

fn kvote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvote"))
        .args(args)
        .output()
        .expect("run kvote")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn t1(dir: &Path) -> PathBuf {
    let path = dir.join("t1.txt");
    fs::write(&path, "3 3\n110\n101\n011\n").unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solves_t1_examples() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = t1(dir.path());
    for (k, z) in [(1, "1"), (2, "2"), (3, "3")] {
        let out = kvote(&["solve", "--in", s(&t1), "--k", &k.to_string()]);
        assert_eq!(code(&out), 0);
        let text = stdout(&out);
        assert_eq!(field(&text, "objective"), z);
        assert_eq!(field(&text, "optimal"), "true");
    }
    let out = kvote(&["solve", "--in", s(&t1), "--bottom-h", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(field(&stdout(&out), "objective"), "0");
    assert_eq!(field(&stdout(&out), "committee"), "110");
}

#[test]
fn sweep_csv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = t1(dir.path());
    let csv = dir.path().join("sweep.csv");
    let out = kvote(&["sweep", "--in", s(&t1), "--out", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = gen_io::read_results_csv(&csv).unwrap();
    let ks: Vec<(usize, u64)> = rows.iter().map(|r| (r.k, r.objective)).collect();
    assert_eq!(ks, vec![(3, 3), (2, 2), (1, 1)]);
    assert!(rows.iter().all(|r| r.optimal && r.instance_id == "t1"));
}

#[test]
fn generated_instance_is_bit_identical_to_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let out = kvote(&[
        "gen", "--n", "9", "--m", "7", "--mode", "biased", "--p", "0.3", "--seed", "11", "--out",
        s(&path),
    ]);
    assert_eq!(code(&out), 0);
    let config = GenConfig {
        n: 9,
        m: 7,
        mode: GenMode::Biased(0.3),
        seed: 11,
    };
    let inst = gen_io::generate(&config).unwrap();
    let expected = gen_io::format_instance(&inst, Some(&config.provenance()));
    assert_eq!(fs::read_to_string(&path).unwrap(), expected);

    for k in 1..=9 {
        let out = kvote(&["solve", "--in", s(&path), "--k", &k.to_string()]);
        let lib = bnb::solve_ksum(&inst, k, &SolveOptions::default()).unwrap();
        let text = stdout(&out);
        assert_eq!(field(&text, "committee"), lib.committee.to_string());
        assert_eq!(field(&text, "objective"), lib.value.to_string());
        assert_eq!(field(&text, "nodes"), lib.stats.nodes.to_string());
        assert_eq!(field(&text, "root_bound"), lib.stats.root_lower_bound.to_string());
    }
    let out = kvote(&["solve", "--in", s(&path), "--bottom-h", "4"]);
    let lib = polysolve::solve_bottom_h(&inst, 4).unwrap();
    assert_eq!(field(&stdout(&out), "committee"), lib.committee.to_string());
}

#[test]
fn export_writes_library_model() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = t1(dir.path());
    let lp = dir.path().join("m.lp");
    let out = kvote(&["solve", "--in", s(&t1), "--k", "1", "--export", "kcentrum", "--lp-out", s(&lp)]);
    assert_eq!(code(&out), 0);
    let inst = gen_io::read_instance(&t1).unwrap();
    let model = milp_export::build(&inst, 1, FormulationKind::KCentrum, None).unwrap();
    assert_eq!(fs::read_to_string(&lp).unwrap(), milp_export::format_lp(&model));
    let back = milp_export::read_lp(&lp).unwrap();
    let eval = milp_export::evaluate_at(&back, &"111".parse::<Committee>().unwrap()).unwrap();
    assert!(eval.feasible);
    assert_eq!(eval.objective, 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = t1(dir.path());
    let out_path = dir.path().join("x.txt");
    let x = s(&out_path);

    assert_eq!(code(&kvote(&["gen", "--n", "0", "--m", "3", "--out", x])), 2);
    assert_eq!(code(&kvote(&["gen", "--n", "3", "--m", "3", "--p", "0.5", "--out", x])), 2);
    assert_eq!(code(&kvote(&["gen", "--n", "3", "--m", "3", "--mode", "biased", "--p", "1.5", "--out", x])), 2);
    assert_eq!(code(&kvote(&["solve", "--in", s(&t1), "--k", "4"])), 2);
    assert_eq!(code(&kvote(&["solve", "--in", s(&t1), "--k", "1", "--bottom-h", "1"])), 2);
    assert_eq!(code(&kvote(&["solve", "--in", s(&t1)])), 2);
    assert_eq!(code(&kvote(&["frobnicate"])), 2);

    let missing = dir.path().join("missing.txt");
    let out = kvote(&["solve", "--in", s(&missing), "--k", "1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 3\n110\n1x1\n").unwrap();
    let out = kvote(&["solve", "--in", s(&bad), "--k", "1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let plan = dir.path().join("plan.txt");
    fs::write(&plan, "4 3 uniform 1\n").unwrap();
    assert_eq!(code(&kvote(&["bench", s(&plan)])), 3);

    let hard = dir.path().join("hard.txt");
    kvote(&["gen", "--n", "30", "--m", "20", "--seed", "1", "--out", s(&hard)]);
    let out = kvote(&["solve", "--in", s(&hard), "--k", "10", "--node-limit", "1", "--no-preprocess"]);
    assert_eq!(field(&stdout(&out), "optimal"), "false");
    assert_eq!(code(&out), 4);
}

#[test]
fn bench_is_deterministic_and_biased_fixes_more() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    fs::write(&plan, "# small\n12 10 uniform 1..3 all\n12 10 biased:0.25 1..3 all\n").unwrap();
    let run = |threads: &str, name: &str| {
        let rows = dir.path().join(format!("{name}.rows.csv"));
        let summary = dir.path().join(format!("{name}.csv"));
        let out = Command::new(env!("CARGO_BIN_EXE_kvote"))
            .env("KVOTE_THREADS", threads)
            .args(["bench", s(&plan), "--out", s(&summary), "--rows", s(&rows)])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (gen_io::read_results_csv(&rows).unwrap(), fs::read_to_string(&summary).unwrap())
    };
    let (rows1, summary) = run("1", "a");
    let (rows4, _) = run("4", "b");
    assert_eq!(rows1.len(), 2 * 3 * 12);
    let key = |rows: &[gen_io::ResultRecord]| -> Vec<(String, usize, u64, u64)> {
        rows.iter().map(|r| (r.instance_id.clone(), r.k, r.objective, r.nodes)).collect()
    };
    assert_eq!(key(&rows1), key(&rows4));

    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |line: &str, name: &str| -> f64 {
        let i = header.iter().position(|h| *h == name).unwrap();
        line.split(',').nth(i).unwrap().parse().unwrap()
    };
    assert!(col(lines[2], "pct_fixed") > col(lines[1], "pct_fixed"));
    assert_eq!(col(lines[1], "pct_optimal"), 100.0);

    let bad = Command::new(env!("CARGO_BIN_EXE_kvote"))
        .env("KVOTE_THREADS", "zero")
        .args(["bench", s(&plan)])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}
