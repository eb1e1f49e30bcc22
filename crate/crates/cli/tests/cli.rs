use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use orthohmc_cli::container::import_chain;
use orthohmc_cli::plot::data_rows;
use serde_json::Value;

const SMALL_MIXTURE: &str = r#"
experiment = "mixture"
method = ["hmc", "ohmc"]
seed = 3

[sampler]
eps = 0.1
eps_hmc = 0.3
m = 10
n_samples = 300
n_burn = 100
thin = 2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orthohmc"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn sample(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("sample")
        .arg("-c")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn only_run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

fn error_report(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("stderr is empty");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {stderr}"))
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn unknown_config_key_is_rejected_with_exit_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        &format!("{SMALL_MIXTURE}\nstep_size = 0.1\n"),
    );
    let out = sample(&cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["code"], "config");
    assert_eq!(report["exit_code"], 2);
    assert!(report["message"].as_str().unwrap().contains("step_size"));
}

#[test]
fn missing_config_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sample(&tmp.path().join("absent.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_report(&out)["code"], "io");
}

#[test]
fn invalid_values_fail_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    let out = sample(&cfg, tmp.path(), &["--n-burn", "500"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn malformed_ratings_file_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write(tmp.path(), "u.data", "1\t1\t4\t0\n1\t2\tfive\t0\n");
    let cfg = write(
        tmp.path(),
        "f.toml",
        "experiment = \"factorize\"\nmethod = \"osghmc\"\n[target]\nrank = 1\n",
    );
    let out = sample(&cfg, tmp.path(), &["--dataset", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let report = error_report(&out);
    assert_eq!(report["code"], "parse");
    assert!(
        report["message"].as_str().unwrap().contains(":2"),
        "{report}"
    );
}

#[test]
fn run_directory_holds_every_artifact_tagged_with_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    let out_dir = tmp.path().join("runs");
    let summary = json_of(&sample(&cfg, &out_dir, &["--json"]));
    let hash = summary["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);

    let run = only_run_dir(&out_dir);
    assert_eq!(
        run.file_name().unwrap().to_str().unwrap(),
        format!("mixture-{}", &hash[..12])
    );
    let mut files = vec![
        run.join("config.toml"),
        run.join("summary.txt"),
        run.join("summary.json"),
    ];
    for e in fs::read_dir(run.join("plots")).unwrap() {
        files.push(e.unwrap().path());
    }
    assert!(files.len() >= 6);
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        assert!(
            text.contains(&hash),
            "{} lacks the config hash",
            f.display()
        );
    }
    for method in ["hmc", "ohmc"] {
        let (_, meta) = import_chain(&run.join("chains").join(format!("{method}.chain"))).unwrap();
        assert_eq!(meta.config_hash, hash);
        assert_eq!(meta.label, method);
    }
}

#[test]
fn plot_rows_match_kept_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    assert!(sample(&cfg, tmp.path(), &[]).status.success());
    let run = only_run_dir(tmp.path());
    // (300 − 100) / 2
    for name in ["hmc.csv", "ohmc.csv", "oracle.csv"] {
        let csv = fs::read_to_string(run.join("plots").join(name)).unwrap();
        assert_eq!(data_rows(&csv), 100, "{name}");
    }
}

#[test]
fn same_seed_reproduces_results_and_out_dir_does_not_change_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(sample(&cfg, &a, &[]).status.success());
    assert!(sample(&cfg, &b, &[]).status.success());
    let (ra, rb) = (only_run_dir(&a), only_run_dir(&b));
    assert_eq!(ra.file_name(), rb.file_name());

    let masked = |run: &Path| {
        let out = bin()
            .arg("summarize")
            .arg(run)
            .arg("--mask-timing")
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(masked(&ra), masked(&rb));
    for f in ["plots/hmc.csv", "plots/ohmc.csv", "plots/oracle.csv"] {
        assert_eq!(
            fs::read(ra.join(f)).unwrap(),
            fs::read(rb.join(f)).unwrap(),
            "{f}"
        );
    }
    // config.toml records out_dir, which is excluded from the hash
    let without_out_dir = |run: &Path| {
        fs::read_to_string(run.join("config.toml"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("out_dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(without_out_dir(&ra), without_out_dir(&rb));
    let strip = |run: &Path| {
        let mut v: Value =
            serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
        for row in v["rows"].as_array_mut().unwrap() {
            row.as_object_mut().unwrap().remove("wall_time_s");
        }
        v
    };
    assert_eq!(strip(&ra), strip(&rb));

    let c = tmp.path().join("c");
    assert!(sample(&cfg, &c, &["--seed", "4"]).status.success());
    assert_ne!(only_run_dir(&c).file_name(), ra.file_name());
}

#[test]
fn summarize_reads_back_what_sample_wrote() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    let direct = json_of(&sample(&cfg, tmp.path(), &["--json"]));
    let run = only_run_dir(tmp.path());
    let out_file = tmp.path().join("again.json");
    let again = json_of(
        &bin()
            .arg("summarize")
            .arg(run.join("chains/hmc.chain"))
            .arg(run.join("chains/ohmc.chain"))
            .arg("--json")
            .arg("--out")
            .arg(&out_file)
            .output()
            .unwrap(),
    );
    assert_eq!(again["config_hash"], direct["config_hash"]);
    for (x, y) in direct["rows"]
        .as_array()
        .unwrap()
        .iter()
        .zip(again["rows"].as_array().unwrap())
    {
        for key in [
            "method",
            "samples",
            "ess_min",
            "ess_median",
            "acceptance",
            "max_abs_dh",
            "failures",
        ] {
            assert_eq!(x[key], y[key], "{key}");
        }
    }
    let written: Value = serde_json::from_str(&fs::read_to_string(out_file).unwrap()).unwrap();
    assert_eq!(written, again);
}

#[test]
fn diagnose_accepts_chains_or_a_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    let runs = tmp.path().join("runs");
    assert!(sample(&cfg, &runs, &[]).status.success());
    let chain = only_run_dir(&runs).join("chains/ohmc.chain");
    let from_chain = json_of(
        &bin()
            .arg("diagnose")
            .arg(&chain)
            .arg("--json")
            .output()
            .unwrap(),
    );
    assert_eq!(from_chain["rows"][0]["method"], "ohmc");

    let audit = json_of(
        &bin()
            .args(["diagnose", "--json", "-c"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(tmp.path().join("audit"))
            .output()
            .unwrap(),
    );
    assert_eq!(audit["experiment"], "integrator-audit");
    let rows = audit["audit"].as_array().unwrap();
    // hmc is not audited; ohmc is
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["method"], "ohmc");
    assert!(rows[0]["max_orthonormality_defect"].as_f64().unwrap() < 1e-12);
}

#[test]
fn damaged_chain_files_are_rejected_with_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    assert!(sample(&cfg, tmp.path(), &["--method", "ohmc"])
        .status
        .success());
    let chain = only_run_dir(tmp.path()).join("chains/ohmc.chain");
    let bytes = fs::read(&chain).unwrap();

    let check = |bytes: &[u8], code: &str, exit: i32| {
        let p = tmp.path().join("damaged.chain");
        fs::write(&p, bytes).unwrap();
        let out = bin().arg("summarize").arg(&p).output().unwrap();
        assert_eq!(out.status.code(), Some(exit), "{code}");
        assert_eq!(error_report(&out)["code"], code);
    };
    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 1;
    check(&flipped, "container-checksum", 13);
    check(&bytes[..bytes.len() - 5], "container-truncated", 12);
    let mut magic = bytes.clone();
    magic[0] = b'X';
    check(&magic, "container-magic", 10);
}

#[test]
fn summarize_without_chains_is_a_contract_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("chains")).unwrap();
    let out = bin().arg("summarize").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(error_report(&out)["code"], "contract");
}

#[test]
fn text_summary_lists_methods_in_fixed_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_MIXTURE);
    let out = sample(&cfg, tmp.path(), &["--method", "ohmc", "--method", "hmc"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let (h, o) = (text.find("\nhmc ").unwrap(), text.find("\nohmc ").unwrap());
    assert!(h < o);
    assert!(text.contains("mode occupancy"));
}
