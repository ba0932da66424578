use std::fs;
use std::process::{Command, Output};

fn opmul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opmul"))
        .args(args)
        .env_remove("OPMUL_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const WORKED: [&str; 6] = ["--a", "28510", "--b", "38672", "--m", "36057"];

#[test]
fn conv_trace_ends_with_the_product() {
    let o = opmul(&[&["modmul"], &WORKED[..], &["--variant", "conv"]].concat());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.ends_with("c_bar = 1040632\nc = 23831\n"), "{out}");
    assert!(out.contains("k1 = (1,1,2,3,2,4,4,3,5,4,4,5,4,4,6,6,5,3,3,4,3,2,3,2,1,1,2,2,1) = 737329445"));
}

#[test]
fn exact_and_hilo_variants() {
    for variant in ["exact", "hilo"] {
        let o = opmul(&[&["modmul"], &WORKED[..], &["--variant", variant]].concat());
        assert!(o.status.success());
        let out = stdout(&o);
        assert!(out.ends_with("c_bar = 31036\nc = 23831\n"), "{variant}: {out}");
    }
}

#[test]
fn missing_program_exits_1() {
    let o = opmul(&["run", "missing.txt"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing.txt"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(opmul(&["modmul", "--bogus"]).status.code(), Some(2));
    assert_eq!(opmul(&["--threads", "0", "validate-aperture"]).status.code(), Some(2));
    assert_eq!(opmul(&["--backend", "slow", "validate-aperture"]).status.code(), Some(2));
    assert_eq!(opmul(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn even_modulus_is_a_module_error() {
    let o = opmul(&["modmul", "--a", "3", "--b", "5", "--m", "16"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generated_script_runs_and_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let expected = dir.path().join("expected.txt");
    let gen = opmul(&[
        "scriptgen",
        "--a",
        "11",
        "--b",
        "13",
        "--m",
        "9",
        "--grid",
        "251",
        "--pitch",
        "0.002",
        "--expected-out",
        expected.to_str().unwrap(),
    ]);
    assert!(gen.status.success());
    let script = dir.path().join("prog.txt");
    fs::write(&script, &gen.stdout).unwrap();
    assert_eq!(fs::read_to_string(&expected).unwrap(), "(0,0,1,1,2,1,1,2,0)\n");

    let report = |threads: &str| {
        let out_dir = dir.path().join(format!("out{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_opmul"))
            .args(["--threads", threads, "run", script.to_str().unwrap(), "--expected"])
            .arg(&expected)
            .arg("--tap-dir")
            .arg(out_dir.join("tap"))
            .env("OPMUL_OUTPUT_DIR", &out_dir)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out_dir.join("readout_beam_1.pgm").exists());
        stdout(&o)
    };
    let one = report("1");
    assert!(one.contains("digits = 0 0 1 1 2 1 1 2 0\n"), "{one}");
    assert_eq!(one, report("3"));
}

#[test]
fn crop_experiment_prints_fidelity() {
    let o = opmul(&["crop-exp", "--grid", "128", "--crop", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("fidelity = "));
}

#[test]
fn aperture_validation_passes() {
    let o = opmul(&["validate-aperture"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("relative_l2 = "));
}

#[test]
fn bench_reports_each_grid() {
    let o = opmul(&["bench", "--grid", "64", "96"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("grid 64 ") && out.contains("grid 96 "), "{out}");
}
