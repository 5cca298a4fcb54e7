use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FAST: &str =
    "rf_trees = 40\nbag_trees = 40\ncv_folds = 3\nlasso_folds = 3\nlasso_n_lambda = 15\nsvm_epochs = 50\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cartelscan"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulated(dir: &Path) -> PathBuf {
    std::fs::write(dir.join("fast.toml"), FAST).unwrap();
    let o = run(dir, &["simulate", "--out", "sim"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join("sim")
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

const DATA: [&str; 6] = [
    "--msd",
    "sim/msd.csv",
    "--mgp",
    "sim/mgp.csv",
    "--spec",
    "sim/spec_complete.toml",
];

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 1);
    assert_eq!(code(&bin().args(["simulate", "--bogus"]).output().unwrap()), 1);
    assert_eq!(code(&bin().output().unwrap()), 1);
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--config", "nowhere.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nowhere.toml"));

    std::fs::write(dir.path().join("bad.toml"), "trees = 3\n").unwrap();
    let o = run(dir.path(), &["simulate", "--config", "bad.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown key 'trees'"));

    let o = run(
        dir.path(),
        &["evaluate", "--msd", "x.csv", "--mgp", "y.csv", "--spec", "z.toml"],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn prints_resolved_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--seed", "9", "--out", "s"]);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("# master seed: 9"));
    assert!(out.contains("rf_trees = 500"));
    assert!(out.contains("n_units_mgp = 130"));
}

#[test]
fn evaluate_is_deterministic_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    let mut outputs = Vec::new();
    for (out, jobs) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let mut args = vec![
            "evaluate",
            "--config",
            "fast.toml",
            "--block",
            "combined",
            "--repetitions",
            "10",
        ];
        args.extend(["--seed", "7", "--out", out, "--jobs", jobs]);
        args.extend(DATA);
        let o = run(d, &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push((
            read(d.join(out).join("evaluation.csv")),
            read(d.join(out).join("repetitions.csv")),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let report = String::from_utf8(outputs[0].0.clone()).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(
        lines[0],
        "case,cartel_type,screen_block,repetitions,accuracy,recall,specificity"
    );
    assert!(lines[1].starts_with("sim_restricted,complete,combined,10,"));
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    let mut args = vec!["train", "--config", "fast.toml", "--block", "mgp_new", "--out", "m"];
    args.extend(DATA);
    assert_eq!(code(&run(d, &args)), 0);
    let first = read(d.join("m/model.json"));
    let args2: Vec<&str> = args.iter().map(|a| if *a == "m" { "m2" } else { a }).collect();
    assert_eq!(code(&run(d, &args2)), 0);
    assert_eq!(first, read(d.join("m2/model.json")));

    let mut p = vec!["predict", "--model", "m/model.json", "--out", "p"];
    p.extend(DATA);
    let o = run(d, &p);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(read(d.join("p/predictions.csv"))).unwrap();
    assert_eq!(text.lines().count(), 24 * 24 + 1);
    assert!(text.starts_with("tender_id,label,probability,collusive\n"));

    // A subgroup model cannot score a complete-cartel dataset.
    let mut args = vec![
        "train",
        "--config",
        "fast.toml",
        "--block",
        "msd_subgroup",
        "--out",
        "inc",
    ];
    args.extend([
        "--msd",
        "sim/msd.csv",
        "--mgp",
        "sim/mgp.csv",
        "--spec",
        "sim/spec_incomplete.toml",
    ]);
    assert_eq!(code(&run(d, &args)), 0);
    let mut p = vec!["predict", "--model", "inc/model.json", "--out", "p2"];
    p.extend(DATA);
    let o = run(d, &p);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("sub3_var_min"));
}

#[test]
fn block_must_match_cartel_type() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    let mut args = vec![
        "evaluate",
        "--config",
        "fast.toml",
        "--block",
        "msd_subgroup",
        "--repetitions",
        "1",
    ];
    args.extend(DATA);
    let o = run(d, &args);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("msd_classical"));
}

#[test]
fn report_with_figures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    let mut args = vec![
        "report",
        "--config",
        "fast.toml",
        "--repetitions",
        "1",
        "--figures",
        "--out",
        "r",
    ];
    args.extend(DATA);
    let o = run(d, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in [
        "dataset_counts.csv",
        "significance.csv",
        "evaluation.csv",
        "accuracy_table.csv",
    ] {
        assert!(d.join("r").join(f).exists(), "{f}");
    }
    let series = String::from_utf8(read(d.join("r/figures/sim_restricted_mgp_offers.csv"))).unwrap();
    assert_eq!(series.lines().count(), 24 * 24 + 1);
    assert_eq!(series.lines().filter(|l| l.ends_with(",collusive")).count(), 8 * 24);
    assert!(d.join("r/figures/sim_restricted_mgp_offers.svg").exists());
    let counts = String::from_utf8(read(d.join("r/dataset_counts.csv"))).unwrap();
    assert!(
        counts.contains("sim_restricted,complete,576,192,0.3333,0,576,384"),
        "{counts}"
    );
}

#[test]
fn ingest_reports_rejected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("msd.csv"),
        "zone,date,hour,unit_id,price\nBRNN,2016-05-01,1,U1,10.5\nBRNN,2016-05-01,25,U1,11\nBRNN,2016-05-01,2,U1,abc\n",
    )
    .unwrap();
    let o = run(d, &["ingest", "--msd", "msd.csv", "--out", "i"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rejected = String::from_utf8(read(d.join("i/msd_rejected.csv"))).unwrap();
    assert_eq!(rejected.lines().count(), 3);
    let kept = String::from_utf8(read(d.join("i/msd.csv"))).unwrap();
    assert_eq!(kept.lines().count(), 2);
}
