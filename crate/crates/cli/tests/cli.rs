use std::process::Command as Process;

use geomech::geometry::TangentState;
use geomech_cli::commands::{derive, frame, simulate};
use geomech_cli::config::{Source, BUNDLED};
use geomech_cli::verify::verify;
use geomech_cli::{CliError, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn text(f: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn csv(model: &Model) -> (Vec<String>, Vec<Vec<f64>>) {
    let out = text(|b| simulate(model, b));
    let mut lines = out.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

const FREE: &str = r#"
[chart]
coords = ["x"]

[metric]
diagonal = ["1"]

[integration]
h = 0.5
t_end = 1.0
q0 = [0.0]
qdot0 = [1.0]
"#;

#[test]
fn every_bundled_config_verifies() {
    for (name, _) in BUNDLED {
        let m = Model::load(name).unwrap();
        let out = text(|b| verify(&m, b));
        assert!(!out.contains("FAIL"), "{name}:\n{out}");
    }
}

#[test]
fn free_particle_rows() {
    let m = Model::from_str("free", FREE).unwrap();
    let (header, rows) = csv(&m);
    assert_eq!(header, ["t", "x", "x_dot", "energy"]);
    assert_eq!(rows.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>(), vec![(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]);
    let out = text(|b| verify(&m, b));
    assert!(!out.contains("FAIL"), "{out}");
}

#[test]
fn free_particle_derivation_is_flat() {
    let m = Model::from_str("free", FREE).unwrap();
    let out = text(|b| derive(&m, &m.parse_state("0.3;2").unwrap(), b));
    assert!(out.contains("(all zero)"));
    assert!(out.contains("field free: accel = [0.000000000000e0]"), "{out}");
}

#[test]
fn sphere_derivation() {
    let m = Model::load("sphere_r_const").unwrap();
    let out = text(|b| derive(&m, &m.parse_state("1,0,0;0,1,0").unwrap(), b));
    assert!(out.contains("field constrained: accel = [-1.000000000000e0, 0.000000000000e0, 0.000000000000e0]"), "{out}");
    assert!(out.contains("multipliers: [-1.000000000000e0]"), "{out}");
}

#[test]
fn rotation_derivation_shows_centrifugal_force() {
    let m = Model::load("frame_rotation").unwrap();
    let out = text(|b| derive(&m, &m.parse_state("0,1,0;1,0,0").unwrap(), b));
    assert!(out.contains("inertial force: [0.000000000000e0, 1.000000000000e0, 0.000000000000e0]"), "{out}");
}

#[test]
fn frame_verdicts() {
    for (name, want) in [
        ("frame_translation", "inertial=true isometry=true preserves=true"),
        ("frame_rotation", "inertial=false isometry=true preserves=false"),
        ("frame_dilatation", "inertial=false isometry=false preserves=false"),
    ] {
        let out = text(|b| frame(&Model::load(name).unwrap(), b));
        assert!(out.contains(want), "{name}:\n{out}");
        assert!(out.contains("consistent: true"));
    }
}

#[test]
fn distance_equals_time() {
    let (h, rows) = csv(&Model::load("sphere_r_equals_t").unwrap());
    let r = column(&h, &rows, "r");
    assert!((r.last().unwrap() - 2.0).abs() <= 1e-6);
    assert_eq!(rows.last().unwrap()[0], 1.0);
}

#[test]
fn oscillator_energy_channel() {
    let (h, rows) = csv(&Model::load("oscillator").unwrap());
    let e = column(&h, &rows, "energy");
    assert!(e.iter().all(|v| (v - e[0]).abs() <= 1e-6));
    assert_eq!(e[0], 0.625);
}

#[test]
fn csv_is_byte_stable() {
    let m = Model::load("moving_wire").unwrap();
    let a = text(|b| simulate(&m, b));
    let b = text(|b| simulate(&Model::load("moving_wire").unwrap(), b));
    assert_eq!(a, b);
    let header = a.lines().next().unwrap();
    assert_eq!(header, "t,t,x,y,t_dot,x_dot,y_dot,beta_dot_1,level_1,tau_dot");
}

#[test]
fn dependent_constraints_fail_verification() {
    let cfg = r#"
[chart]
coords = ["x", "y", "z"]
[metric]
diagonal = ["1", "1", "1"]
[constraints]
forms = [["1", "0", "0"], ["2", "0", "0"]]
"#;
    let m = Model::from_str("dependent", cfg).unwrap();
    let mut buf = Vec::new();
    let err = verify(&m, &mut buf).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let out = String::from_utf8(buf).unwrap();
    assert!(out.contains("FAIL") && out.contains("dependent"), "{out}");
}

#[test]
fn config_errors_carry_lines() {
    let bad = "[chart]\ncoords = [\"x\", \"y\"]\n\n[metric]\nrows = [[\"1\"], [\"0\", \"1 + z\"]]\n";
    let err = Model::from_str("bad", bad).err().unwrap();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("line 5") && err.to_string().contains("`z`"), "{err}");
    let unknown = "[chart]\ncoords = [\"x\"]\nunits = \"m\"\n[metric]\ndiagonal = [\"1\"]\n";
    let err = Model::from_str("unknown", unknown).err().unwrap();
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn round_trip_gives_identical_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (name, _) in BUNDLED {
        let first = Model::load(name).unwrap();
        let dumped = first.config().to_toml().unwrap();
        let second = Model::build(Source::parse("dump", &dumped).unwrap()).unwrap();
        assert_eq!(second.config().to_toml().unwrap(), dumped);
        let (a, b) = (first.field().unwrap(), second.field().unwrap());
        let n = first.state_chart().dim();
        for _ in 0..10 {
            let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.2)).collect();
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if first.frame.is_some() || first.time.is_some() {
                q[0] = rng.gen_range(0.0..1.0);
                v[0] = 1.0;
            }
            let s = TangentState::new(q, v).unwrap();
            assert_eq!(a.accel(&s).unwrap(), b.accel(&s).unwrap(), "{name}");
        }
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_geomech");
    let run = |args: &[&str]| Process::new(bin).args(args).output().unwrap();
    let ok = run(&["verify", "--config", "sphere_r_const"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(run(&["simulate", "--config", "no_such_config"]).status.code(), Some(1));
    assert_eq!(run(&["derive", "--config", "oscillator", "--state", "1,2,3;0,0"]).status.code(), Some(1));
    assert_eq!(run(&["frame", "--config", "oscillator"]).status.code(), Some(1));

    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let dep = dir.join("dependent.toml");
    std::fs::write(&dep, "[chart]\ncoords = [\"x\", \"y\", \"z\"]\n[metric]\ndiagonal = [\"1\", \"1\", \"1\"]\n[constraints]\nforms = [[\"1\", \"0\", \"0\"], [\"2\", \"0\", \"0\"]]\n").unwrap();
    assert_eq!(run(&["verify", "--config", dep.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(run(&["derive", "--config", dep.to_str().unwrap(), "--state", "0,0,0;0,1,0"]).status.code(), Some(2));

    let blowup = dir.join("blowup.toml");
    std::fs::write(
        &blowup,
        "[chart]\ncoords = [\"x\"]\n[metric]\ndiagonal = [\"1\"]\n[forces]\nforce = [\"x^3\"]\n[integration]\nh = 0.1\nt_end = 10.0\nq0 = [2.0]\nqdot0 = [0.0]\n",
    )
    .unwrap();
    let out = run(&["simulate", "--config", blowup.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).lines().count() > 2);
}
