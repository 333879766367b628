use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
master_seed = 5
synth.duration_s = 8.0
env.oracle_trees = 5
ppo.episodes = 16
ppo.hidden = [8, 8]
baselines.n_trees = 10
eval.condition_tags = ["1kg", "2kg"]
eval.repetitions = 1
eval.eval_trees = 10
"#;

fn featsel(args: &[&str], out: &Path, config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featsel"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("FEATSEL_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

const CHAIN: [&str; 6] = ["synth", "extract", "train-ppo", "select", "evaluate", "report"];

#[test]
fn synth_writes_twelve_records_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("a");
    ok(&featsel(&["synth"], &out, &cfg));
    let files = tree(&out.join("records"));
    let csvs = files
        .keys()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .count();
    assert_eq!(csvs, 12);
    assert!(files.contains_key(Path::new("manifest.json")));
    let manifest = String::from_utf8(files[Path::new("manifest.json")].clone()).unwrap();
    assert!(manifest.contains("\"seed\"") && manifest.contains("5kg_pads4.csv"));

    let again = tmp.path().join("b");
    ok(&featsel(&["synth"], &again, &cfg));
    assert_eq!(tree(&again.join("records")), files);
}

#[test]
fn out_of_range_clip_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ppo.clip = 2.0\n");
    let o = featsel(&["synth"], &tmp.path().join("o"), &cfg);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ppo.clip") && err.contains("(0, 1)"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn unknown_key_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ppo.clipp = 0.1\n");
    let o = featsel(&["synth"], &tmp.path().join("o"), &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("clipp"));
}

#[test]
fn evaluate_before_select_exits_with_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    ok(&featsel(&["synth"], &out, &cfg));
    ok(&featsel(&["extract"], &out, &cfg));
    let o = featsel(&["evaluate"], &out, &cfg);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("selections/manifest.json"));
    let o = featsel(&["train-ppo"], &tmp.path().join("empty"), &cfg);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn corrupted_checkpoint_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let ckpt = tmp.path().join("policy.json");
    std::fs::write(&ckpt, "{\"format_version\": 1, \"shape\": ").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_featsel"))
        .args(["verify", "--checkpoint"])
        .arg(&ckpt)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema error"));
}

#[test]
fn seed_override_reaches_the_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_featsel"))
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env("FEATSEL_SEED", "77")
        .output()
        .unwrap();
    ok(&o);
    let eff = std::fs::read_to_string(out.join("records/effective_config.toml")).unwrap();
    assert!(eff.contains("master_seed = 77"), "{eff}");
}

#[test]
fn full_chain_is_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let run = |name: &str, jobs: &str| {
        let out = tmp.path().join(name);
        for stage in CHAIN {
            ok(&featsel(&[stage, "--jobs", jobs], &out, &cfg));
        }
        tree(&out)
    };
    let one = run("one", "1");
    let two = run("two", "2");
    assert_eq!(one.keys().collect::<Vec<_>>(), two.keys().collect::<Vec<_>>());
    for (k, v) in &one {
        assert!(two[k] == *v, "{} differs", k.display());
    }
    let report = String::from_utf8(one[Path::new("evaluation/selection_report.json")].clone()).unwrap();
    for key in ["cells", "per_label", "noise_curves", "stability_refs"] {
        assert!(report.contains(&format!("\"{key}\"")));
    }
    let summary = String::from_utf8(one[Path::new("report/summary.txt")].clone()).unwrap();
    assert!(summary.contains("PPO margin over the best baseline"), "{summary}");
    assert!(one.contains_key(Path::new("report/stability/combo1_rep0/feature_count_slices.csv")));

    // A rerun into the same directory leaves every byte unchanged.
    let out = tmp.path().join("one");
    ok(&featsel(&["select", "--jobs", "2"], &out, &cfg));
    assert_eq!(tree(&out), one);
}
