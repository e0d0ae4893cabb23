use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
training.n_trajectories = 8
training.traj_duration = 10
sweep.duration = 150
run.duration = 150
run.log_start = 10
";

fn kesc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kesc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn kesc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), format!("{SMALL}{extra}")).unwrap();
    dir
}

#[test]
fn train_writes_model_and_mode_table() {
    let dir = setup("");
    let o = kesc(
        dir.path(),
        &["train", "--config", "small.cfg", "--out", "m.txt"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model = fs::read_to_string(dir.path().join("m.txt")).unwrap();
    assert!(model.starts_with("p=10\nn_modes=8\n"));
    let table = fs::read_to_string(dir.path().join("m.modes.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "mode,eig_re,eig_im,modulus,energy,selected"
    );
    assert_eq!(table.lines().count(), 11);
    assert_eq!(table.lines().filter(|l| l.ends_with(",1")).count(), 8);
}

#[test]
fn reruns_are_byte_identical_and_seed_matters() {
    let dir = setup("");
    for out in ["a.txt", "b.txt"] {
        assert_eq!(
            code(&kesc(
                dir.path(),
                &["train", "--config", "small.cfg", "--out", out]
            )),
            0
        );
    }
    let c = kesc(
        dir.path(),
        &[
            "train",
            "--config",
            "small.cfg",
            "--out",
            "c.txt",
            "--seed",
            "5",
        ],
    );
    assert_eq!(code(&c), 0);
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.txt"), read("b.txt"));
    assert_ne!(read("a.txt"), read("c.txt"));

    for out in ["r1.csv", "r2.csv"] {
        let o = kesc(
            dir.path(),
            &[
                "run",
                "--config",
                "small.cfg",
                "--mode",
                "lifted",
                "--model",
                "a.txt",
                "--out",
                out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(read("r1.csv"), read("r2.csv"));
}

#[test]
fn missing_or_bad_config_exits_2() {
    let dir = setup("");
    let o = kesc(dir.path(), &["train", "--config", "absent.cfg"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.cfg"));

    fs::write(dir.path().join("bad.cfg"), "plant.nu = 1\n").unwrap();
    let o = kesc(dir.path(), &["train", "--config", "bad.cfg"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));

    fs::write(dir.path().join("zero.cfg"), "run.duration = 0\n").unwrap();
    assert_eq!(code(&kesc(dir.path(), &["run", "--config", "zero.cfg"])), 2);
}

#[test]
fn usage_errors_exit_2() {
    let dir = setup("");
    assert_eq!(
        code(&kesc(
            dir.path(),
            &["static-map", "--config", "small.cfg", "--mode", "lifted"]
        )),
        2
    );
    assert_eq!(code(&kesc(dir.path(), &["run", "--mode", "sideways"])), 2);
    assert_eq!(code(&kesc(dir.path(), &["explode"])), 2);
}

#[test]
fn existing_output_needs_force() {
    let dir = setup("");
    fs::write(dir.path().join("map.csv"), "keep me").unwrap();
    let o = kesc(
        dir.path(),
        &["static-map", "--config", "small.cfg", "--out", "map.csv"],
    );
    assert_eq!(code(&o), 3);
    assert_eq!(
        fs::read_to_string(dir.path().join("map.csv")).unwrap(),
        "keep me"
    );
    let o = kesc(
        dir.path(),
        &[
            "static-map",
            "--config",
            "small.cfg",
            "--out",
            "map.csv",
            "--force",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("argmin_theta=") && text.contains("min_r="));
    assert!(fs::read_to_string(dir.path().join("map.csv"))
        .unwrap()
        .starts_with("theta,r\n"));
}

#[test]
fn divergence_exits_4_with_partial_log() {
    let dir = setup("plant.force_amp = 1e9\n");
    let o = kesc(
        dir.path(),
        &["run", "--config", "small.cfg", "--out", "run.csv"],
    );
    assert_eq!(code(&o), 4);
    assert!(!dir.path().join("run.csv").exists());
    let partial = fs::read_to_string(dir.path().join("run.partial.csv")).unwrap();
    assert!(partial.starts_with("t,x_true,y_true,x_meas,y_meas,y_out,r,theta,epsilon\n"));
}

#[test]
fn run_prints_metrics_block_and_row() {
    let dir = setup("");
    let o = kesc(
        dir.path(),
        &["run", "--config", "small.cfg", "--out", "run.csv"],
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for key in ["iae=", "ise=", "t_hit=", "e_ss=", "log_start=10"] {
        assert!(text.contains(key), "missing {key} in {text}");
    }
    assert!(text.contains("method,iae,ise,t_hit,e_ss\nraw,"));
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 28_001);
}

#[test]
fn compare_writes_three_rows() {
    let dir = setup("output.dir = results\n");
    assert_eq!(
        code(&kesc(dir.path(), &["train", "--config", "small.cfg"])),
        0
    );
    assert!(dir.path().join("results/model.txt").exists());
    let o = kesc(
        dir.path(),
        &[
            "compare",
            "--config",
            "small.cfg",
            "--model",
            "results/model.txt",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("results/compare.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], "method,iae,ise,t_hit,e_ss");
    assert!(
        rows[1].starts_with("raw,")
            && rows[2].starts_with("lifted,")
            && rows[3].starts_with("ratio,")
    );
    assert_eq!(stdout(&o), table);
    assert!(dir.path().join("results/compare.raw.csv").exists());
}
