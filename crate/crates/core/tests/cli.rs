use std::path::Path;
use std::process::{Command, Output};

fn forta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forta"))
        .args(args)
        .env_remove("FORTA_SEED")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_errors_are_one_line_and_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("[protocol]\nN = 30\nT = 9\nA = 10\nm = 8\nNusers = 3\n", "protocol.Nusers"),
        ("[protocol]\nN = 20\nT = 1\nA = 10\nm = 8\n", "2A + 2 < N"),
        ("[protocol]\nN = 30\nT = 9\nA = 10\n", "protocol.m"),
        ("[protocol\n", "config"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("c{i}.toml"), text);
        for sub in ["run", "bounds"] {
            let out = forta(&[sub, "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
            assert!(!out.status.success());
            let err = stderr(&out);
            assert_eq!(err.trim_end().lines().count(), 1, "{err}");
            assert!(err.contains(needle), "{err}");
        }
    }
    let out = forta(&["run", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("cannot read"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn failed_run_leaves_incomplete_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write(tmp.path(), "data.csv", "x,y,label\n1.0,2.0,0\n3.0,oops,1\n");
    let cfg = write(
        tmp.path(),
        "c.toml",
        &format!("[protocol]\nN = 6\nT = 1\nA = 1\nm = 2\nrounds = 1\n[task]\nkind = \"csv\"\npath = \"{data}\"\n"),
    );
    let out_dir = tmp.path().join("out");
    let out = forta(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert!(!out_dir.exists());
    assert!(tmp.path().join("out.incomplete/config.toml").exists());
}

#[test]
fn successful_run_writes_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "[protocol]\nN = 8\nT = 2\nA = 1\nm = 3\nrounds = 3\nseed = 2\n[task]\nsamples_per_user = 50\ntest_samples = 200\n",
    );
    let out_dir = tmp.path().join("out");
    let out = forta(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["runlog.csv", "scores.csv", "profile.csv", "accuracy.svg", "config.toml"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(!tmp.path().join("out.incomplete").exists());
    let runlog = std::fs::read_to_string(out_dir.join("runlog.csv")).unwrap();
    assert_eq!(runlog.lines().count(), 1 + 3 * 3);
    assert!(!runlog.contains('\r'));
    let svg = std::fs::read_to_string(out_dir.join("accuracy.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);

    // a rerun replaces its own output, but not a directory holding other files
    assert!(forta(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]).status.success());
    std::fs::write(out_dir.join("notes.txt"), "keep").unwrap();
    let out = forta(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(out_dir.join("notes.txt").exists());
}

#[test]
fn codec_fuzz_and_bounds_output() {
    let out = forta(&["codec-fuzz", "--trials", "50", "--errors", "2,10", "--seed", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "error_count,magnitude,success_rate,mean_residual");
    assert!(lines[1].starts_with("2,0.1,1,"));
    assert_eq!(lines.len(), 3);
    assert!(!forta(&["codec-fuzz", "--n", "10", "--k", "10"]).status.success());

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "[protocol]\nN = 30\nT = 9\nA = 10\nm = 8\n[theory]\nsigma_g = 0.01\nsigma_eps = 0.0\ng_norm = 50.0\n\
         mu_T = 1.2\nsigma_T = 0.1\nmu_Q = 0.3\nsigma_Q = 0.1\nC1 = 3.0\n",
    );
    let out = forta(&["bounds", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("eta = 16.733201"));
    assert!(report.contains("stats_source = config"));
    assert_eq!(std::fs::read_to_string(tmp.path().join("bounds.txt")).unwrap(), report);
}
