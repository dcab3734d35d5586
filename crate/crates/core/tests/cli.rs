use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shocklab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shocklab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn profile_run_writes_csv_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = shocklab(&["profile", "--flux", "quadratic:a=0.5", "--ul", "1", "--ur", "0"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,S1,S1_prime"));
    let first = lines.next().unwrap();
    // 17 significant digits: one before the point, sixteen after
    for field in first.split(',') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{field}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "profile");
    assert_eq!(manifest["config"]["u_plus"], 0.0);
    assert_eq!(manifest["config"]["profile_tol"], 1e-6);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn failed_assertion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = shocklab(&["profile", "--set", "profile_tol=-1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL closed-form profile"));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&shocklab(&["evolve", "--nx", "10"], dir.path())), 2);
    assert_eq!(code(&shocklab(&["profile", "--set", "no_such_key=1"], dir.path())), 2);
    assert_eq!(code(&shocklab(&["profile", "--ul", "-1", "--ur", "1"], dir.path())), 2);
    assert_eq!(code(&shocklab(&["counterexample", "--alpha", "0.3"], dir.path())), 2);
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&shocklab(&["poincare", "--config", missing.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn inadmissible_flux_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = shocklab(&["contraction", "--flux", "quadratic_plus_sine:a=1,amp=0.5,freq=1"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_drives_a_contraction_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "flux = \"quadratic:a=1\"\nL = 16.0\nnx = 161\nt_end = 0.3\nsnap_every = 0.1\nenergy_dts = [0.1, 0.05]\nperturbation = \"gaussian_bump:amp=0.2,center=0,width=1\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = shocklab(&["contraction", "--config", cfg.to_str().unwrap()], &out);
    assert!(matches!(code(&o), 0 | 1), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("contraction.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,L2,L1,D_x,D_y,I1,I2,I3,I4,X,Xdot"));
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let args = ["evolve", "--nx", "129", "--tend", "0.3", "--snap-every", "0.1", "--set", "leak_rel_tol=1e-3"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&shocklab(&args, a.path())), 0);
    assert_eq!(code(&shocklab(&args, b.path())), 0);
    for name in ["snapshots.csv", "trajectory.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }

    let sweep = ["contraction", "--mode", "dissipation", "--nx", "257", "--set", "cases=50", "--seed", "9"];
    let (c, d) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    shocklab(&sweep, c.path());
    shocklab(&sweep, d.path());
    let x = fs::read(c.path().join("dissipation_cases.csv")).unwrap();
    assert_eq!(x, fs::read(d.path().join("dissipation_cases.csv")).unwrap());
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 51);
}
