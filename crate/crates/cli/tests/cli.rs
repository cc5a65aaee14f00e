use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qcontract(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcontract"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small dual problem that finishes in milliseconds.
const QUICK_DUAL: &[&str] = &["--d-p", "11", "--d-e", "11", "--iters", "20000", "--k", "0.0002"];

#[test]
fn single_defaults_reach_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcontract(&["single", "--seed", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "final_tax=0.50"), "{}", stdout(&o));
    let q = fs::read_to_string(dir.path().join("out/single_qtable.csv")).unwrap();
    assert_eq!(q.lines().count(), 102);
    let traj = fs::read_to_string(dir.path().join("out/single_trajectory.jsonl")).unwrap();
    assert_eq!(traj.lines().count(), 100);
    assert!(traj.lines().last().unwrap().contains("\"final\":true"));
}

#[test]
fn config_errors_exit_2_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcontract(&["single", "--epsilon", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--epsilon"), "{}", stderr(&o));

    let o = qcontract(&["single", "--iters", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--iters"));

    let o = qcontract(&["sweep", "--param", "beta", "--grid", "0.6"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta=0.6"), "{}", stderr(&o));

    let o = qcontract(&["dual", "--blend-form", "bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    fs::write(dir.path().join("bad.json"), "{\"betta\": 0.1}").unwrap();
    let o = qcontract(&["dual", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("betta"));
}

#[test]
fn io_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcontract(&["single", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"));

    // a regular file where the output directory should be
    fs::write(dir.path().join("blocked"), "").unwrap();
    let o = qcontract(&["single", "--iters", "100", "--out", "blocked"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn innes_check_pass_and_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcontract(&["innes-check", "--xh", "2", "--xl", "1", "--i", "1.1", "--c", "2"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("D_L*=1.000000"), "{out}");
    assert!(out.contains("PASS"));
    let root = (3.0 - 0.2f64.sqrt()) / 2.0;
    let d_h: f64 = out
        .split_whitespace()
        .find_map(|t| t.strip_prefix("D_H*="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((d_h - root).abs() <= 0.001, "{d_h} vs {root}");

    let o = qcontract(&["innes-check", "--i", "5"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no feasible contract"));
}

#[test]
fn oracle_reports_optimum_and_best_responses() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcontract(&["oracle", "--p1", "0.3", "--p2", "0.7"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("joint_profit=0.125000"), "{out}");
    assert!(out.contains("served_tax=0.50"));
    assert!(out.contains("table effort=0.35,0.00"));
    assert!(out.contains("closed_form effort=0.35,0.00"));

    let o = qcontract(&["oracle", "--kappa", "0.2"], dir.path());
    assert!(stdout(&o).contains("served tax above 0.5"));
}

#[test]
fn agent_table_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcontract(&["agent-table", "--d-p", "3", "--d-e", "3"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("out/agent_table.csv")).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert_eq!(text.lines().nth(1).unwrap(), "0.000000,0.000000,0.000000,0.500000,0.250000");

    let o = qcontract(&["agent-table", "--kappa", "0.2"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("out/agent_table.csv")).unwrap();
    assert_eq!(text.lines().count(), 10202);
    // with the cost advantage, equal taxes send effort to project 1
    for row in text.lines().skip(1) {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        if f[0] == f[1] && f[0] < 1.0 {
            assert!(f[2] > 0.0 && f[3] == 0.0, "{row}");
        }
    }
}

#[test]
fn command_line_beats_config_beats_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"beta": 0.3, "alpha": 0.2, "d_p": 11, "d_e": 11, "t_max": 500, "snapshot_every": 500}"#,
    )
    .unwrap();
    let o = qcontract(&["dual", "--config", "c.json", "--beta", "0.1", "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    // one snapshot at t=500 with the default decay schedule
    let traj = fs::read_to_string(dir.path().join("o/dual_trajectory.jsonl")).unwrap();
    assert_eq!(traj.lines().count(), 1);
    let rec: serde_like::Record = serde_like::parse(traj.lines().next().unwrap());
    assert_eq!(rec.t, 500);
    assert!((rec.epsilon - (-5e-6f64 * 499.0).exp()).abs() < 1e-15);

    // beta from the command line, alpha from the file: compare against a
    // run with every value given explicitly
    let o2 = qcontract(
        &[
            "dual", "--beta", "0.1", "--alpha", "0.2", "--d-p", "11", "--d-e", "11", "--iters", "500",
            "--snapshot-every", "500", "--out", "o2",
        ],
        dir.path(),
    );
    assert!(o2.status.success());
    assert_eq!(traj, fs::read_to_string(dir.path().join("o2/dual_trajectory.jsonl")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("o/dual_qtable_p1.csv")).unwrap(),
        fs::read(dir.path().join("o2/dual_qtable_p1.csv")).unwrap()
    );

    // and the file's beta differs from the command line's
    let o3 = qcontract(
        &[
            "dual", "--beta", "0.3", "--alpha", "0.2", "--d-p", "11", "--d-e", "11", "--iters", "500",
            "--snapshot-every", "500", "--out", "o3",
        ],
        dir.path(),
    );
    assert!(o3.status.success());
    let q_file_beta = fs::read(dir.path().join("o3/dual_qtable_p1.csv")).unwrap();
    assert_ne!(q_file_beta, fs::read(dir.path().join("o/dual_qtable_p1.csv")).unwrap());
}

/// Minimal field extraction so the test does not depend on the library's
/// own trajectory reader.
mod serde_like {
    pub struct Record {
        pub t: u64,
        pub epsilon: f64,
    }

    fn field<'a>(line: &'a str, name: &str) -> &'a str {
        let key = format!("\"{name}\":");
        let start = line.find(&key).unwrap() + key.len();
        let rest = &line[start..];
        let end = rest.find([',', '}']).unwrap();
        &rest[..end]
    }

    pub fn parse(line: &str) -> Record {
        Record {
            t: field(line, "t").parse().unwrap(),
            epsilon: field(line, "epsilon").parse().unwrap(),
        }
    }
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let mut args = vec!["dual", "--seed", "5", "--beta", "0.2", "--out", out, "--dump-agent-table"];
        args.extend_from_slice(QUICK_DUAL);
        let o = qcontract(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["dual_trajectory.jsonl", "dual_qtable_p1.csv", "dual_qtable_p2.csv", "agent_table.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_output_ignores_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut stdouts = vec![];
    for (out, jobs) in [("j1", "1"), ("j4", "4")] {
        let mut args = vec![
            "sweep", "--param", "beta", "--grid", "0.5,0,0.25", "--seeds", "3", "--jobs", jobs, "--out", out,
        ];
        args.extend_from_slice(QUICK_DUAL);
        let o = qcontract(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        stdouts.push(stdout(&o));
    }
    assert_eq!(stdouts[0], stdouts[1]);
    let a = fs::read_to_string(dir.path().join("j1/sweep_beta.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("j4/sweep_beta.csv")).unwrap());
    let rows: Vec<&str> = a.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("beta,0.000000,"));
    assert!(rows[3].starts_with("beta,0.500000,"));
    assert!(rows[1].ends_with(",3"));
}

#[test]
fn help_lists_defaults_matching_the_library() {
    use qcontract::experiments::defaults;

    let dir = tempfile::tempdir().unwrap();
    let single = stdout(&qcontract(&["single", "--help"], dir.path()));
    let dual = stdout(&qcontract(&["dual", "--help"], dir.path()));
    let innes = stdout(&qcontract(&["innes-check", "--help"], dir.path()));

    let expect = |help: &str, flag: &str, default: String| {
        let pos = help.find(&format!("--{flag} ")).unwrap_or_else(|| panic!("--{flag} missing"));
        let tail = &help[pos..];
        let block = &tail[..tail[2..].find("\n      -").map_or(tail.len(), |i| i + 2)];
        assert!(block.contains(&format!("[default: {default}")), "--{flag}: {block}");
    };
    expect(&single, "alpha", defaults::ALPHA.to_string());
    expect(&single, "delta", defaults::DELTA.to_string());
    expect(&single, "epsilon", defaults::EPSILON.to_string());
    expect(&single, "iters", defaults::SINGLE_T_MAX.to_string());
    expect(&single, "snapshot-every", defaults::SNAPSHOT_EVERY.to_string());
    expect(&single, "convergence-window", defaults::CONVERGENCE_WINDOW.to_string());
    expect(&single, "d-p", defaults::TAX_LEVELS.to_string());
    expect(&single, "i1", defaults::INVESTMENT.to_string());
    expect(&single, "t1", defaults::TOP_PAYOFF.to_string());
    expect(&single, "c", defaults::EFFORT_COST.to_string());
    expect(&single, "seed", defaults::SEED.to_string());
    expect(&dual, "kappa", defaults::KAPPA.to_string());
    expect(&dual, "beta", defaults::BETA.to_string());
    expect(&dual, "d-e", defaults::EFFORT_LEVELS.to_string());
    expect(&dual, "k", format!("{:.6}", defaults::DECAY_K));
    expect(&dual, "blend-form", "algorithm2".into());
    assert!(dual.contains(&format!("{} dual", defaults::DUAL_T_MAX)));
    expect(&innes, "xh", "2".into());
    expect(&innes, "xl", "1".into());
    expect(&innes, "i", "1.1".into());
    expect(&innes, "step", "0.001".into());
    expect(&innes, "tol", "0.002".into());
}

#[cfg(unix)]
#[test]
fn interrupt_discards_partial_results() {
    use std::time::Duration;

    let dir = tempfile::tempdir().unwrap();
    let child = Command::new(env!("CARGO_BIN_EXE_qcontract"))
        .args(["dual", "--iters", "2000000000"])
        .current_dir(dir.path())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    // let the table build finish and the loop start
    std::thread::sleep(Duration::from_millis(1500));
    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(130), "{}", stderr(&o));
    assert!(stderr(&o).contains("interrupted"));
    assert!(!dir.path().join("out/dual_trajectory.jsonl").exists());
}
