use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn partlin(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_partlin"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bench_writes_exact_header_and_converges() {
    let dir = TempDir::new().unwrap();
    let (code, _) = partlin(&["bench", "--N", "10", "--n", "5", "--out", "b"], dir.path());
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("b/bench.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "method,N,n,it,cl,final_gap,mu_final,wall_ms"
    );
    let rows = csv_rows(&dir.path().join("b/bench.csv"));
    assert_eq!(rows[0][0], "CGM");
    assert_eq!(rows[1][0], "ACGM");
    for r in &rows {
        assert!(r[5].parse::<f64>().unwrap() <= 0.1);
    }
    let (it, cl): (u64, u64) = (rows[0][3].parse().unwrap(), rows[0][4].parse().unwrap());
    assert_eq!(cl, 5 * it);
}

#[test]
fn bench_budget_exit_reports_gap() {
    let dir = TempDir::new().unwrap();
    let (code, _) = partlin(
        &["bench", "--N", "100", "--n", "50", "--max-iters", "50", "--out", "b"],
        dir.path(),
    );
    assert_eq!(code, 2);
    let rows = csv_rows(&dir.path().join("b/bench.csv"));
    assert_eq!(rows[0][3], "50");
    assert!(rows[0][5].parse::<f64>().unwrap() > 0.1);
}

#[test]
fn single_block_bench_gives_equal_iterations() {
    let dir = TempDir::new().unwrap();
    for objective in ["f1", "f1f2"] {
        let (code, _) = partlin(
            &[
                "bench",
                "--N",
                "20",
                "--n",
                "1",
                "--objective",
                objective,
                "--eps",
                "0.01",
                "--out",
                "b",
            ],
            dir.path(),
        );
        assert_eq!(code, 0);
        let rows = csv_rows(&dir.path().join("b/bench.csv"));
        assert_eq!(rows[0][3], rows[1][3]);
    }
}

#[test]
fn invalid_inputs_exit_with_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(partlin(&["bench", "--N", "10", "--n", "3"], dir.path()).0, 1);
    assert_eq!(partlin(&["solve", "--beta", "1.5"], dir.path()).0, 1);
    fs::write(dir.path().join("bad.json"), r#"{"N": 10, "bogus": 1}"#).unwrap();
    assert_eq!(partlin(&["solve", "--config", "bad.json"], dir.path()).0, 1);
    assert_eq!(partlin(&["netassign", "missing.txt"], dir.path()).0, 1);
}

/// Gap of the f1 benchmark over standard simplices, computed from scratch.
fn f1_gap(x: &[f64], blocks: usize) -> f64 {
    let dim = x.len();
    let p = |i: usize, j: usize| -> f64 {
        let (lo, hi) = (i.min(j) as f64, i.max(j) as f64);
        lo.sin() * hi.cos()
    };
    let g: Vec<f64> = (1..=dim)
        .map(|i| {
            let off: f64 = (1..=dim).filter(|&s| s != i).map(|s| p(i, s).abs()).sum();
            let row: f64 = (1..=dim)
                .map(|j| {
                    if i == j {
                        (off + 1.0) * x[j - 1]
                    } else {
                        p(i, j) * x[j - 1]
                    }
                })
                .sum();
            row - (i as f64).sin() / i as f64
        })
        .collect();
    let t = dim / blocks;
    (0..blocks)
        .map(|b| {
            let gb = &g[b * t..(b + 1) * t];
            let xb = &x[b * t..(b + 1) * t];
            let lin: f64 = gb.iter().zip(xb).map(|(a, c)| a * c).sum();
            lin - gb.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .sum()
}

#[test]
fn solve_outputs_are_consistent_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = [
        "solve", "--N", "20", "--n", "5", "--select", "random", "--seed", "11", "--eps", "0.01",
    ];
    let (code, _) = partlin(&[&args[..], &["--out", "a"]].concat(), dir.path());
    assert_eq!(code, 0);
    let (code, _) = partlin(&[&args[..], &["--out", "b"]].concat(), dir.path());
    assert_eq!(code, 0);
    let ta = fs::read(dir.path().join("a/trace.csv")).unwrap();
    assert_eq!(ta, fs::read(dir.path().join("b/trace.csv")).unwrap());
    let header = String::from_utf8_lossy(&ta).lines().next().unwrap().to_string();
    assert_eq!(header, "stage,iter,block,phi_s,lambda,m,mu,value_calls,pg_calls");

    let mu: Vec<f64> = csv_rows(&dir.path().join("a/trace.csv"))
        .iter()
        .map(|r| r[6].parse().unwrap())
        .collect();
    assert!(mu.windows(2).all(|w| w[1] <= w[0]));

    let sol = json(&dir.path().join("a/solution.json"));
    let point: Vec<f64> = sol["point"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let gap = sol["final_gap"].as_f64().unwrap();
    assert!((f1_gap(&point, 5) - gap).abs() <= 1e-9);
    assert!(gap <= 0.01);
    assert!(sol["stages"].as_u64().unwrap() >= 1);
}

#[test]
fn manifest_file_reproduces_flag_run() {
    let dir = TempDir::new().unwrap();
    let (code, _) = partlin(
        &["solve", "--N", "20", "--n", "4", "--rule", "convex", "--out", "a"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let manifest = json(&dir.path().join("a/manifest.json"));
    assert_eq!(manifest["rule"], "convex");
    let mut m = manifest.clone();
    m["out"] = "b".into();
    fs::write(dir.path().join("m.json"), m.to_string()).unwrap();
    let (code, _) = partlin(&["solve", "--config", "m.json"], dir.path());
    assert_eq!(code, 0);
    assert_eq!(
        fs::read(dir.path().join("a/trace.csv")).unwrap(),
        fs::read(dir.path().join("b/trace.csv")).unwrap()
    );
}

#[test]
fn backtracking_exhaustion_exits_with_three() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("m.json"),
        r#"{"N": 10, "n": 5, "beta": 0.99, "max_backtracks": 0, "out": "s"}"#,
    )
    .unwrap();
    let (code, text) = partlin(&["solve", "--config", "m.json"], dir.path());
    assert_eq!(code, 3, "{text}");
}

const TWO_ARCS: &str = "# two parallel roads\nnode o\nnode d\narc o d 1 1\narc o d 2 1\nod o d 10 1 10\n";

#[test]
fn netassign_matches_two_arc_equilibrium() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("net.txt"), TWO_ARCS).unwrap();
    let (code, text) = partlin(&["netassign", "net.txt", "--out", "n"], dir.path());
    assert_eq!(code, 0, "{text}");
    let arcs = csv_rows(&dir.path().join("n/arcs.csv"));
    let f1: f64 = arcs[0][3].parse().unwrap();
    let f2: f64 = arcs[1][3].parse().unwrap();
    assert!((f1 - 10.0 / 3.0).abs() <= 1e-3);
    assert!((f2 - 7.0 / 3.0).abs() <= 1e-3);
    let pairs = csv_rows(&dir.path().join("n/pairs.csv"));
    assert!((pairs[0][3].parse::<f64>().unwrap() - 17.0 / 3.0).abs() <= 1e-3);
    assert!((pairs[0][4].parse::<f64>().unwrap() - 13.0 / 3.0).abs() <= 1e-3);
    let summary = json(&dir.path().join("n/summary.json"));
    assert!(summary["final_gap"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn netassign_zero_caps_and_disconnection() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("zero.txt"), TWO_ARCS.replace("10 1 10", "10 1 0")).unwrap();
    assert_eq!(partlin(&["netassign", "zero.txt", "--out", "z"], dir.path()).0, 0);
    for r in csv_rows(&dir.path().join("z/arcs.csv")) {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    }
    let pairs = csv_rows(&dir.path().join("z/pairs.csv"));
    assert_eq!(pairs[0][5].parse::<f64>().unwrap(), 0.0);

    fs::write(
        dir.path().join("cut.txt"),
        "node o\nnode d\narc d o 1 1\nod o d 10 1 5\n",
    )
    .unwrap();
    assert_eq!(partlin(&["netassign", "cut.txt"], dir.path()).0, 1);
}

const SEPARABLE: &str = "object_id,label,f1,f2\np,1,2,1\np,1,1,2\nq,1,3,0.5\nq,1,1.5,1\nm,-1,-1,-2\nm,-1,-2,-1\n";

#[test]
fn svm_separates_and_shrinks_with_penalty() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("d.csv"), SEPARABLE).unwrap();
    let (code, text) = partlin(
        &["svm", "d.csv", "--C", "10", "--eps", "1e-9", "--out", "s"],
        dir.path(),
    );
    assert_eq!(code, 0, "{text}");
    let report = json(&dir.path().join("s/svm.json"));
    for m in report["margins"].as_array().unwrap() {
        assert!(m.as_f64().unwrap() >= 1.0 - 1e-3);
    }

    let (code, _) = partlin(&["svm", "d.csv", "--C", "1e-9", "--out", "t"], dir.path());
    assert_eq!(code, 0);
    let report = json(&dir.path().join("t/svm.json"));
    for w in report["w"].as_array().unwrap() {
        assert!(w.as_f64().unwrap().abs() <= 1e-8);
    }

    fs::write(dir.path().join("bad.csv"), "p,0.5,1,2\n").unwrap();
    assert_eq!(partlin(&["svm", "bad.csv"], dir.path()).0, 1);
}
