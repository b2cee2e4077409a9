use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leo-irs")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweep_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &str| {
        vec!["power-sweep", "--set", "sweep.trials=3", "--set", "sweep.values=10,30", "--seed", "7", "--out"]
            .into_iter()
            .map(String::from)
            .chain([p.to_string()])
            .collect::<Vec<_>>()
    };
    for p in [&a, &b] {
        let argv = args(p.to_str().unwrap());
        let o = run(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variable,scheme,value,gamma,rate_bps_hz,trials,seed");
    assert_eq!(lines.len(), 1 + 2 * 6);
    assert!(lines[1..].iter().all(|l| l.starts_with("tx_power,") && l.ends_with(",3,7")));
}

#[test]
fn flags_take_precedence_over_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let file_out = dir.path().join("from_file.csv");
    let flag_out = dir.path().join("from_flag.csv");
    fs::write(
        &cfg,
        format!("run.seed = 1\nrun.out = {}\nsweep.trials = 2\nsweep.schemes = two_sided\n", file_out.display()),
    )
    .unwrap();
    let o = run(&["snapshot", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", flag_out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!file_out.exists());
    let text = fs::read_to_string(&flag_out).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",2,5"));

    let o = run(&["snapshot", "--config", cfg.to_str().unwrap(), "--set", "sweep.trials=1"]);
    assert!(o.status.success());
    assert!(fs::read_to_string(&file_out).unwrap().lines().nth(1).unwrap().ends_with(",1,1"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "arrays.m1 = 500\norbit.speed_mps = -1\n").unwrap();
    let o = run(&["snapshot", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("orbit.speed_mps"), "{err}");

    assert_eq!(run(&["snapshot", "--set", "nope=1"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["sweep"]).status.code(), Some(1));
    assert_eq!(run(&["snapshot", "--config", "/nonexistent/x.cfg"]).status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let o = run(&["snapshot", "--set", "sweep.trials=1", "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["tracking", "--set", "tracking.schemes=random_phase", "--set", "tracking.total_time_s=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().count() >= 4);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn help_config_lists_units() {
    let o = run(&["--help-config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("orbit.speed_mps") && text.contains("[m/s]"));
}

#[test]
fn tracking_emits_three_series() {
    let o = run(&[
        "tracking",
        "--set",
        "tracking.total_time_s=2",
        "--set",
        "tracking.sample_interval_s=1",
        "--set",
        "arrays.m1=40",
        "--set",
        "arrays.m2=40",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 9);
    for mode in ["proposed", "benchmark", "perfect"] {
        assert_eq!(text.matches(&format!("two_sided:{mode}")).count(), 3);
    }
}

#[test]
fn element_sweep_rows_match_cardinality() {
    let o = run(&[
        "element-sweep",
        "--set",
        "sweep.values=100,200,300",
        "--set",
        "sweep.schemes=two_sided,sat_irs_only",
        "--set",
        "sweep.trials=2",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1 + 6);
}
