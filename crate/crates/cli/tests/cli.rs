use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dmimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmimo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SCENARIO: &str = "preset = desk\nnum_ues = 8\nmc.trials = 200\n";
const EXPERIMENT: &str = "sweep = num_pilots\nvalues = 3, 5\nschemes = gpfzf, pwpfzf, mr\narchitectures = local, olsfd, uniform\ndrops = 6\noutputs = sum_se, per_user_cdf, strong_pilot_histogram, costs, mc_validation\n";

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.cfg", SCENARIO);
    let experiment = write(dir.path(), "e.exp", EXPERIMENT);
    let outs = ["a", "b"].map(|n| dir.path().join(n));
    for out in &outs {
        let o = dmimo(&[
            "run",
            "--scenario",
            &scenario,
            "--experiment",
            &experiment,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
            "--mc-report",
            "ci",
            "--dump-stats",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 11);
    for name in names {
        assert_eq!(
            fs::read(outs[0].join(&name)).unwrap(),
            fs::read(outs[1].join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
    let csv = fs::read_to_string(outs[0].join("sum_se.csv")).unwrap();
    assert!(
        csv.starts_with("# schema: dmimo/sum_se/v1\nsweep_var,sweep_value,scheme,architecture,")
    );
    assert_eq!(csv.lines().count(), 2 + 2 * 3 * 3);
    let mc = fs::read_to_string(outs[0].join("mc_validation.csv")).unwrap();
    assert!(mc.lines().nth(1).unwrap().ends_with("gn_stderr"));
}

#[test]
fn seed_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.cfg", SCENARIO);
    let experiment = write(dir.path(), "e.exp", "outputs = sum_se\ndrops = 3\n");
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let o = dmimo(&[
            "run",
            "--scenario",
            &scenario,
            "--experiment",
            &experiment,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--grouping",
            "gpfzf",
        ]);
        assert!(o.status.success());
        fs::read_to_string(out.join("sum_se.csv")).unwrap()
    };
    let a = run("1", "x");
    assert_ne!(a, run("2", "y"));
    assert!(a.lines().skip(2).all(|l| l.contains(",gpfzf,")));
}

#[test]
fn config_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.cfg", "preset = desk\n\nnum_pilots = many\n");
    let experiment = write(dir.path(), "e.exp", "drops = 1\n");
    let out = dir.path().join("out");
    let o = dmimo(&[
        "run",
        "--scenario",
        &scenario,
        "--experiment",
        &experiment,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("s.cfg:3: key `num_pilots`"), "{err}");
    assert!(!out.exists());

    let scenario = write(dir.path(), "ok.cfg", SCENARIO);
    let experiment = write(dir.path(), "bad.exp", "sweep = antennas\nvalues = 4,\n");
    let o = dmimo(&[
        "run",
        "--scenario",
        &scenario,
        "--experiment",
        &experiment,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.exp:2: key `values`"));
}

#[test]
fn costs_print_csv() {
    let o = dmimo(&["costs", "--sweep", "num_ues", "--values", "10,20,40"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("sweep_var,sweep_value,metric,series,cost")
    );
    assert_eq!(lines.count(), 3 * 8);
    // full-scale baseline: 100 APs, L_u = 96.5
    assert!(text.contains("num_ues,10,fronthaul,local,9650\n"));
    assert!(text.contains("num_ues,10,fronthaul,olsfd,11200\n"));
    let o = dmimo(&["costs", "--sweep", "bandwidth", "--values", "1"]);
    assert!(!o.status.success());
}

#[test]
fn validate_emits_machine_readable_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.cfg",
        "preset = desk\nantennas_per_ap = 4\nnum_pilots = 3\nmc.trials = 300\n",
    );
    let json = dir.path().join("report.json");
    let o = dmimo(&[
        "validate",
        "--scenario",
        &scenario,
        "--json",
        json.to_str().unwrap(),
        "--moment-trials",
        "500",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks
        .iter()
        .any(|c| c["id"] == "gradient:gpfzf" && c["pass"] == true));
    assert!(checks.iter().any(|c| c["id"]
        .as_str()
        .unwrap()
        .starts_with("moment:wishart-diagonal:A4")));
    let all_pass = checks.iter().all(|c| c["pass"] == true);
    assert_eq!(o.status.success(), all_pass);
    if !all_pass {
        assert_eq!(o.status.code(), Some(1));
    }
}
