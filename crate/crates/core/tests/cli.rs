use std::path::Path;
use std::process::Command;

const SMALL: &str = "\
preset = numerical_inner
eps_list = 0.01, 0.0031622776601683794, 0.001
nx = 16
ny = 128
n_eta = 128
l_eta = 24
t_end = 0.1
dt_inner = 0.005
dt_layer = 0.005
dt_viscous = 0.001
cadence = 5
";

fn run(dir: &Path, args: &[&str]) -> std::process::Output {
    let cfg = dir.join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    Command::new(env!("CARGO_BIN_EXE_prandtl-mhd"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("inner0", "inner0/inner0_manifest.txt"),
        ("bl0", "bl0_hp_min.csv"),
        ("inner1", "inner1/inner1_manifest.txt"),
        ("bl1", "bl1/bl1_manifest.txt"),
        ("assemble", "remainder_norms_eps_1.000e-2.csv"),
        ("viscous", "energy_eps_1.000e-3.csv"),
        ("diagnose", "diagnostics_eps_1.000e-2.csv"),
    ] {
        let o = run(dir.path(), &[cmd]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join("out").join(file).exists(), "{cmd} did not write {file}");
    }
}

#[test]
fn study_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["study", "--jobs", "3", "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("eps,linf_error,l2_error,linf_u,linf_v,linf_h,linf_g,r1_l2,r2_l2,r3_l2,r4_l2,walltime_s"));
    assert!(std::fs::read_to_string(out.join("rate.txt")).unwrap().contains("n_points = 3"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("slope="));
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "nx = 16\nbogus = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_prandtl-mhd")).args(["inner0", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key 'bogus'"));
}
