use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn greenkde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenkde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = greenkde(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    greenkde(args).status.code().expect("exit code")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn gauss_pipeline(dir: &Path, threads: &str) -> Vec<PathBuf> {
    let pts = p(dir, "pts.csv");
    let model = p(dir, "model.json");
    let prof = p(dir, "profile.csv");
    let knn = p(dir, "knn.csv");
    let t = ["--threads", threads];
    ok(&[&t[..], &["gen", "--dist", "gauss", "--n", "2000", "--dim", "2", "--sigma", "1.0", "--seed", "42", "--out", &pts]].concat());
    ok(&[&t[..], &["fit", "--in", &pts, "--n-large", "20", "--n-large-eval", "3", "--restarts", "0", "--seed", "42", "--out", &model]].concat());
    ok(&[&t[..], &["profile", "--model", &model, "--bins", "40", "--rmax", "4", "--truth", "gauss:1.0", "--out", &prof]].concat());
    ok(&[&t[..], &["knn-profile", "--in", &pts, "--k", "6", "--bins", "40", "--rmax", "4", "--out", &knn]].concat());
    [pts, model, prof, knn].into_iter().map(PathBuf::from).collect()
}

#[test]
fn gaussian_pipeline_is_deterministic_across_thread_counts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let fa = gauss_pipeline(a.path(), "1");
    let fb = gauss_pipeline(b.path(), "3");
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let profile = fs::read_to_string(&fa[2]).unwrap();
    let lines: Vec<&str> = profile.lines().collect();
    assert_eq!(lines[0], "r_lo,r_hi,count,mean,spread,truth");
    assert_eq!(lines.len(), 41);
    let counts: usize = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert!(counts > 1990 && counts <= 2000);
}

#[test]
fn fit_prints_report() {
    let dir = TempDir::new().unwrap();
    let pts = p(dir.path(), "pts.csv");
    let model = p(dir.path(), "m.json");
    ok(&["gen", "--dist", "gauss", "--n", "200", "--seed", "1", "--out", &pts]);
    let out = ok(&["fit", "--in", &pts, "--n-large", "5", "--restarts", "1", "--out", &model]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("converged: true"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("restart_energies: ")));
}

#[test]
fn eval_on_empty_queries_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let pts = p(dir.path(), "pts.csv");
    let model = p(dir.path(), "m.json");
    let empty = p(dir.path(), "empty.csv");
    let dens = p(dir.path(), "dens.csv");
    ok(&["gen", "--dist", "gauss", "--n", "100", "--seed", "2", "--out", &pts]);
    ok(&["fit", "--in", &pts, "--n-large", "3", "--restarts", "0", "--out", &model]);
    fs::write(&empty, "x0,x1\n").unwrap();
    ok(&["eval", "--model", &model, "--in", &empty, "--out", &dens]);
    assert_eq!(fs::read_to_string(&dens).unwrap(), "x0,x1,density\n");

    ok(&["eval", "--model", &model, "--in", &pts, "--n-large-eval", "2", "--out", &dens]);
    let text = fs::read_to_string(&dens).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn knn_at_queries() {
    let dir = TempDir::new().unwrap();
    let pts = p(dir.path(), "pts.csv");
    let q = p(dir.path(), "q.csv");
    ok(&["gen", "--dist", "gauss", "--n", "500", "--seed", "3", "--out", &pts]);
    fs::write(&q, "x0,x1\n0.0,0.0\n5.0,5.0\n").unwrap();
    let out = ok(&["knn", "--in", &pts, "--k", "10", "--queries", &q]);
    let text = String::from_utf8(out.stdout).unwrap();
    let dens: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(dens.len(), 2);
    assert!(dens[0] > 0.05 && dens[0] < 0.4 && dens[1] < dens[0]);
}

#[test]
fn classifier_commands() {
    let dir = TempDir::new().unwrap();
    let sig = p(dir.path(), "sig.csv");
    let bkg = p(dir.path(), "bkg.csv");
    let clf = p(dir.path(), "clf.json");
    let resp = p(dir.path(), "resp.csv");
    let hist = p(dir.path(), "hist.csv");
    ok(&["gen", "--dist", "twelve", "--n", "240", "--seed", "5", "--out-signal", &sig, "--out-background", &bkg]);
    let out = ok(&["classify", "train", "--signal", &sig, "--background", &bkg, "--n-large", "3", "--restarts", "0", "--seed", "5", "--out", &clf]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("[background]"));
    ok(&["classify", "apply", "--clf", &clf, "--in", &sig, "--out", &resp]);
    let text = fs::read_to_string(&resp).unwrap();
    assert!(text.starts_with("x0,x1,response\n"));
    assert_eq!(text.lines().count(), 241);
    ok(&["classify", "hist", "--clf", &clf, "--in", &bkg, "--bins", "10", "--out", &hist]);
    let text = fs::read_to_string(&hist).unwrap();
    let total: usize = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 240);
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn validate_reports_and_passes() {
    let out = ok(&["validate", "--dim", "2", "--seed", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 7);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn failures_have_distinct_exit_codes() {
    let dir = TempDir::new().unwrap();
    let pts = p(dir.path(), "pts.csv");
    let pts3 = p(dir.path(), "pts3.csv");
    let model = p(dir.path(), "m.json");
    let bad = p(dir.path(), "bad.csv");
    let dup = p(dir.path(), "dup.csv");
    ok(&["gen", "--dist", "gauss", "--n", "60", "--seed", "1", "--out", &pts]);
    ok(&["gen", "--dist", "gauss", "--n", "60", "--dim", "3", "--seed", "1", "--out", &pts3]);
    ok(&["fit", "--in", &pts, "--n-large", "2", "--restarts", "0", "--out", &model]);
    fs::write(&bad, "x0,x1\n1.0,oops\n").unwrap();
    fs::write(&dup, "x0,x1\n1.0,2.0\n0.0,0.0\n1.0,2.0\n").unwrap();

    assert_eq!(code(&["fit", "--bogus"]), 2);
    assert_eq!(code(&["gen", "--dist", "twelve", "--n", "10"]), 2);
    assert_eq!(code(&["eval", "--model", &p(dir.path(), "missing.json"), "--in", &pts]), 3);
    assert_eq!(code(&["eval", "--model", &model, "--in", &bad]), 4);
    assert_eq!(code(&["fit", "--in", &dup, "--n-large", "1", "--out", &p(dir.path(), "x.json")]), 4);
    assert_eq!(code(&["eval", "--model", &model, "--in", &pts3]), 5);
    assert_eq!(code(&["fit", "--in", &pts, "--n-large", "40", "--out", &p(dir.path(), "y.json")]), 6);
    assert_eq!(code(&["knn", "--in", &pts, "--k", "0"]), 6);

    let err = greenkde(&["eval", "--model", &model, "--in", &bad]);
    let msg = String::from_utf8(err.stderr).unwrap();
    assert_eq!(msg.lines().count(), 1, "{msg}");
    assert!(msg.contains("bad.csv"));
}
