use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsedamp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(report: &str, key: &str) -> String {
    let prefix = format!("{key}: ");
    report
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("missing key {key} in\n{report}"))
        .to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn design_ode_certifies() {
    let o = run(&["design-ode", "--lambda", "1", "--rate", "1", "--certify"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("pulsedamp report v1\n"));
    assert!(value(&text, "measured_margin").parse::<f64>().unwrap() >= 1.0);
    assert_eq!(value(&text, "verified"), "true");
}

#[test]
fn epsilon_out_of_range_is_input_error() {
    let o = run(&["design-lip", "--lambda", "1", "--rate", "0.5", "--epsilon", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon out of range"));
}

#[test]
fn missing_argument_is_input_error() {
    assert_eq!(run(&["design-ode", "--lambda", "1"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn spectrum_table_has_harmonic_row() {
    let o = run(&["spectrum-table", "--model", "wave", "--dim", "1", "--count", "32"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,lambda,rate,T,S,U,ln_phi"));
    let row3: Vec<f64> = lines.nth(2).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row3[0], 3.0);
    assert!((row3[3] - 11.0 * std::f64::consts::PI / 12.0).abs() < 1e-14);
}

#[test]
fn falsified_claim_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let profile = path(dir.path(), "p.txt");
    assert_eq!(run(&["design-ode", "--lambda", "1", "--rate", "2", "--profile-out", &profile]).status.code(), Some(0));
    let t0 = std::f64::consts::FRAC_PI_2.to_string();
    let o = run(&["certify", "--profile", &profile, "--lambda", "1", "--rate", "2.5", "--offset", &t0]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(value(&stdout(&o), "verified"), "false");
}

#[test]
fn written_profile_reproduces_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let profile = path(dir.path(), "p.txt");
    let a = stdout(&run(&["design-ode", "--lambda", "1.5", "--rate", "0.7", "--certify", "--profile-out", &profile]));
    let b = stdout(&run(&[
        "certify", "--profile", &profile, "--lambda", "1.5", "--rate", "0.7", "--periods", "10",
    ]));
    for key in ["measured_margin", "worst_case_margin", "critical_time", "checked_times"] {
        assert_eq!(value(&a, key), value(&b, key), "{key}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run_id in 0..2 {
        let names: Vec<String> =
            ["p.txt", "s.csv", "r.txt"].iter().map(|n| path(dir.path(), &format!("{run_id}{n}"))).collect();
        let o = run(&[
            "design-system", "--spectrum", "1,1.4142135623730951,2", "--rate", "0.5", "--certify", "--profile-out",
            &names[0], "--samples-out", &names[1], "--report-out", &names[2],
        ]);
        assert_eq!(o.status.code(), Some(0));
        files.push(names.iter().map(|n| fs::read(n).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(files[0], files[1]);
    let sequential = run(&["design-system", "--spectrum", "1,1.4142135623730951,2", "--rate", "0.5", "--certify", "--sequential"]);
    assert_eq!(sequential.stdout, files[0][2]);
}

#[test]
fn envelope_must_be_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let env = path(dir.path(), "env.csv");
    fs::write(&env, "t,phi\n0,1\n1,0.5\n2,0.7\n").unwrap();
    let o = run(&["design-any", "--lambda", "1", "--envelope", &env]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonincreasing"));
}

#[test]
fn design_any_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let env = path(dir.path(), "env.csv");
    let rows: String = (0..12).map(|k| format!("{k},{}\n", (-(k as f64) * 0.5).exp())).collect();
    fs::write(&env, format!("t,phi\n{rows}")).unwrap();
    let o = run(&["design-any", "--lambda", "1", "--envelope", &env, "--blocks", "4", "--certify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "schedule_consistent"), "true");
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = bin().args(["design-ode", "--lambda", "1", "--rate", "1"]).env("PULSEDAMP_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["design-ode", "--lambda", "1", "--rate", "1", "--certify"]).env("PULSEDAMP_THREADS", "2").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn lower_bound_and_slow_solution() {
    let o = run(&["lower-bound", "--lambda", "1", "--delta", "1", "--times", "1,2,4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = run(&["slow-solution", "--lambda", "1", "--delta", "1", "--times", "2,5,10,20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(value(&stdout(&o), "min_ratio").parse::<f64>().unwrap() >= 1.0);
    let o = run(&["slow-solution", "--lambda", "1", "--delta", "0.5", "--times", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "sweep.csv");
    let o = run(&["sweep", "--lambdas", "1,2", "--rates", "0.5,1", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with("verified")));
}

#[test]
fn pde_and_ultra_run() {
    let o = run(&["design-pde", "--model", "wave", "--count", "20", "--rate", "1", "--certify", "--batch", "16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(value(&stdout(&o), "coercive_holds"), "true");
    let o = run(&["design-ultra", "--model", "wave", "--count", "8", "--certify", "--batch", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["design-pde", "--lambda", "1", "--rate", "1"]);
    assert_eq!(o.status.code(), Some(1));
}
