use std::path::Path;
use std::process::{Command, Output};

fn hmhf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmhf"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_config_applies_and_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "command = \"profile\"\n").unwrap();
    let o = hmhf(&["--config", "c.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["stages"], serde_json::json!(["profile"]));
    assert_eq!(m["config"]["Y_max"], 30.0);
    assert_eq!(m["config"]["profile"]["tol"], 1e-10);
    let files: Vec<&str> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["profile.csv", "profile.json", "profile.svg"]);
    for f in m["files"].as_array().unwrap() {
        let bytes =
            std::fs::read(dir.path().join("out").join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn invalid_values_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("command = \"profile\"\nY_max = -1\n", "Y_max"),
        ("command = \"profile\"\nresolution = 2\n", "resolution"),
        ("command = \"tune\"\n[tune]\ntol = -1.0\n", "tol"),
        ("command = \"profile\"\nbogus = 1\n", "bogus"),
        ("command = \"profile\"\n[evolve]\nds = \"big\"\n", "ds"),
        (
            "command = \"tune\"\n[perturbation]\namplitude = 0.5\n",
            "amplitude",
        ),
    ] {
        std::fs::write(dir.path().join("c.toml"), text).unwrap();
        let o = hmhf(&["--config", "c.toml"], dir.path());
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(key), "{text}: {}", stderr(&o));
    }
}

#[test]
fn subcommand_must_agree_with_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "command = \"profile\"\n").unwrap();
    let o = hmhf(&["spectrum", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("command"));
    let o = hmhf(&[], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn full_pipeline_chains_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = hmhf(&["all", "--out", "run", "--workers", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&dir.path().join("run"));
    assert_eq!(
        m["stages"],
        serde_json::json!(["profile", "spectrum", "tune", "blowup"])
    );
    assert_eq!(m["workers"], 2);
    let spectrum = &m["records"][1];
    assert_eq!(spectrum["name"], "spectrum");
    assert!(spectrum["inputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|i| i == "profile.csv"));
    let tune: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/tune.json")).unwrap())
            .unwrap();
    for key in [
        "T_h",
        "bracket",
        "escape_signs",
        "omega_fit",
        "c0_reference",
    ] {
        assert!(!tune[key].is_null(), "{key}");
    }
    assert!((tune["T_h"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    let traj = std::fs::read_to_string(dir.path().join("run/tuned_trajectory.csv")).unwrap();
    assert!(traj.starts_with("s,norm_rho,norm_X,a,flags\n"));
    for f in [
        "blowup.json",
        "convergence.csv",
        "blowup_rate.svg",
        "eigenfunctions.csv",
    ] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn oversized_perturbation_reports_no_sign_change() {
    let dir = tempfile::tempdir().unwrap();
    let text = "command = \"tune\"\n[perturbation]\namplitude = 2.0\nmax_amplitude = 10.0\n[tune]\ndelta = 0.01\ns_end = 10.0\n";
    std::fs::write(dir.path().join("c.toml"), text).unwrap();
    let o = hmhf(&["--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no sign change"), "{}", stderr(&o));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["status"], "failed");
    assert!(m["failure"].as_str().unwrap().contains("no sign change"));
}

#[test]
fn evolve_accepts_csv_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let g = std::sync::Arc::new(
        hmhf_core::radial::RadialGrid::new(hmhf_core::radial::GridSpec::new(10.0, 200, 2.0))
            .unwrap(),
    );
    let h = hmhf_core::radial::RadialFunction::from_fn(g, hmhf_core::radial::Parity::Odd, |y| {
        y * (-y * y).exp()
    });
    h.write_csv(dir.path().join("h.csv")).unwrap();
    let text = "command = \"evolve\"\n[perturbation]\nshape = \"csv\"\npath = \"h.csv\"\namplitude = 1e-4\n[evolve]\ns_end = 2.0\n";
    std::fs::write(dir.path().join("c.toml"), text).unwrap();
    let o = hmhf(&["--config", "c.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&dir.path().join("out"));
    assert!(m["records"][0]["inputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|i| i == "h.csv"));
    assert!(dir.path().join("out/trajectory.csv").exists());
}

#[test]
fn profile_artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert!(hmhf(&["spectrum", "--out", out], dir.path())
            .status
            .success());
    }
    for f in ["spectrum.json", "eigenfunctions.csv", "eigenfunctions.svg"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
