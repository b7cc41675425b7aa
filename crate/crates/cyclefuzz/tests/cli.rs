//! Black-box tests of the installed binary: exit codes, config-file
//! precedence, artifact layout, and the report/corpus inspection commands.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cyclefuzz::dut::witness_corpus;
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cyclefuzz"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn cyclefuzz");
    assert_eq!(
        out.status.code(),
        Some(0),
        "expected exit 0\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output()
        .expect("spawn cyclefuzz")
        .status
        .code()
        .unwrap()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Writes each witness input as `seed-<i>.bin` so a campaign can start from
/// inputs that already trip the planted check.
fn write_seed_dir(dir: &Path, seeds: &[Vec<u8>]) {
    fs::create_dir_all(dir).unwrap();
    for (i, bytes) in seeds.iter().enumerate() {
        fs::write(dir.join(format!("seed-{i}.bin")), bytes).unwrap();
    }
}

fn starter_dir(dir: &Path, dut: &str) {
    run_ok(bin().args(["corpus", "--init", "--dut", dut]).arg(dir));
}

fn kv_value(report: &str, key: &str) -> String {
    let prefix = format!("{key} = ");
    report
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("missing key '{key}' in report:\n{report}"))
        .to_string()
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempdir().unwrap();
    let seeds = tmp.path().join("seeds");
    starter_dir(&seeds, "toy-cpu");

    // Unknown DUT name.
    let code = exit_code(
        bin()
            .args(["run", "--dut", "no-such-model", "--seeds"])
            .arg(&seeds),
    );
    assert_eq!(code, 2);

    // No DUT given at all.
    assert_eq!(exit_code(bin().args(["run", "--max-iters", "1"])), 2);

    // Bad enum value for a flag.
    let code = exit_code(
        bin()
            .args(["run", "--dut", "toy-cpu", "--readback", "bogus", "--seeds"])
            .arg(&seeds),
    );
    assert_eq!(code, 2);

    // Config file with an unrecognized key.
    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "dut = toy-cpu\nmax_itres = 5\n").unwrap();
    let code = exit_code(bin().args(["--config"]).arg(&cfg).args(["list-duts"]));
    assert_eq!(code, 2);
}

#[test]
fn missing_inputs_map_to_the_right_exit_codes() {
    let tmp = tempdir().unwrap();

    // A seeds directory that does not exist is caught while the flags are
    // resolved: usage error.
    let out = tmp.path().join("out");
    let code = exit_code(
        bin()
            .args(["run", "--dut", "toy-cpu", "--max-iters", "1", "--seeds"])
            .arg(tmp.path().join("nowhere"))
            .arg("--output")
            .arg(&out),
    );
    assert_eq!(code, 2);

    // Reading a campaign back from a directory with no report in it is a
    // runtime failure.
    assert_eq!(exit_code(bin().arg("report").arg(tmp.path())), 1);
    assert_eq!(exit_code(bin().arg("corpus").arg(tmp.path())), 1);
}

#[test]
fn quiet_campaign_exits_0_and_writes_artifacts() {
    let tmp = tempdir().unwrap();
    let seeds = tmp.path().join("seeds");
    starter_dir(&seeds, "toy-cpu");
    let out_dir = tmp.path().join("out");

    let out = run_ok(
        bin()
            .args(["run", "--dut", "toy-cpu", "--max-iters", "50", "--seeds"])
            .arg(&seeds)
            .arg("--output")
            .arg(&out_dir),
    );
    let text = stdout_of(&out);
    assert!(text.contains("artifacts written to"), "stdout: {text}");

    for file in ["report.kv", "report.txt", "coverage.tsv", "trajectory.tsv"] {
        assert!(out_dir.join(file).is_file(), "missing {file}");
    }
    assert!(out_dir.join("corpus").join("manifest.txt").is_file());

    let report = fs::read_to_string(out_dir.join("report.kv")).unwrap();
    assert_eq!(kv_value(&report, "iterations"), "50");
    assert_eq!(kv_value(&report, "findings"), "0");
}

#[test]
fn check_findings_exit_3() {
    let tmp = tempdir().unwrap();
    let seeds = tmp.path().join("seeds");
    write_seed_dir(&seeds, &witness_corpus("periph-fsm").unwrap());
    let out_dir = tmp.path().join("out");

    // The witness corpus trips the check during the seed pass; no mutation
    // budget is needed.
    let out = bin()
        .args(["run", "--dut", "periph-fsm", "--max-iters", "0", "--seeds"])
        .arg(&seeds)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout_of(&out);
    assert!(text.contains("finding(s) recorded"), "stdout: {text}");

    let findings: Vec<_> = fs::read_dir(out_dir.join("findings"))
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    assert!(!findings.is_empty());
}

#[test]
fn identical_invocations_reproduce_identical_artifacts() {
    let tmp = tempdir().unwrap();
    let seeds = tmp.path().join("seeds");
    starter_dir(&seeds, "toy-cpu");

    let campaign = |out_dir: &Path| {
        bin()
            .args([
                "run",
                "--dut",
                "toy-cpu",
                "--max-iters",
                "1000",
                "--master-seed",
                "7",
                "--seeds",
            ])
            .arg(&seeds)
            .arg("--output")
            .arg(out_dir)
            .output()
            .unwrap()
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out_a = campaign(&a);
    let out_b = campaign(&b);
    assert_eq!(out_a.status.code(), out_b.status.code());

    for file in ["corpus/manifest.txt", "trajectory.tsv", "coverage.tsv"] {
        let bytes_a = fs::read(a.join(file)).unwrap();
        let bytes_b = fs::read(b.join(file)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{file} differs between identical runs");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempdir().unwrap();
    let seeds = tmp.path().join("seeds");
    starter_dir(&seeds, "synth-delay");

    let cfg = tmp.path().join("fuzz.conf");
    fs::write(
        &cfg,
        format!(
            "dut = synth-delay\nseeds = {}\nmax_iters = 5\nsynth_delay_micros = 0\n",
            seeds.display()
        ),
    )
    .unwrap();

    // All engine settings from the file.
    let out_a = tmp.path().join("a");
    run_ok(
        bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(&out_a),
    );
    let report = fs::read_to_string(out_a.join("report.kv")).unwrap();
    assert_eq!(kv_value(&report, "dut"), "synth-delay");
    assert_eq!(kv_value(&report, "iterations"), "5");

    // A flag on the command line wins over the file.
    let out_b = tmp.path().join("b");
    run_ok(
        bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--max-iters", "9", "--output"])
            .arg(&out_b),
    );
    let report = fs::read_to_string(out_b.join("report.kv")).unwrap();
    assert_eq!(kv_value(&report, "iterations"), "9");
}

#[test]
fn report_and_corpus_commands_read_a_campaign_back() {
    let tmp = tempdir().unwrap();
    let seeds = tmp.path().join("seeds");
    starter_dir(&seeds, "toy-cpu");
    let out_dir = tmp.path().join("out");
    run_ok(
        bin()
            .args(["run", "--dut", "toy-cpu", "--max-iters", "200", "--seeds"])
            .arg(&seeds)
            .arg("--output")
            .arg(&out_dir),
    );

    // Digest of the key-value report.
    let out = run_ok(bin().arg("report").arg(&out_dir));
    let text = stdout_of(&out);
    assert!(text.contains("toy-cpu campaign"), "stdout: {text}");
    assert!(text.contains("coverage_rate"), "stdout: {text}");

    // Re-executing the retained corpus must agree with the recorded
    // covering-seed counts.
    let out = run_ok(
        bin()
            .arg("corpus")
            .arg(&out_dir)
            .args(["--recompute", "--dut", "toy-cpu"]),
    );
    let text = stdout_of(&out);
    assert!(
        text.contains("matches recorded covering-seed counts"),
        "stdout: {text}"
    );
}

#[test]
fn list_duts_names_every_bundled_model() {
    let out = run_ok(bin().arg("list-duts"));
    let text = stdout_of(&out);
    for name in ["toy-cpu", "periph-fsm", "synth-delay"] {
        assert!(text.contains(name), "stdout: {text}");
    }
}
