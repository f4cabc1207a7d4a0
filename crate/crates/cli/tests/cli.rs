mod common;

use std::path::Path;

use common::{files, lowedge, model, run_records, smoke_configs, write_config};
use lowedge_cli::records::{MsaSummary, Records};
use lowedge_cli::{parse_config, run_experiment, validate_config, ConfigError, ExperimentKind};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lifshitz_text(trials: u64) -> String {
    format!(
        "kind = \"lifshitz\"\ntrials = {trials}\nseed = 7\n\n{}\n[lifshitz]\nsizes = [8, 16]\nc = 1.1\n",
        model(1, 1, 1.0, 0)
    )
}

fn msa_text(extra: &str) -> String {
    format!(
        "kind = \"msa-initial\"\ntrials = 100\nseed = 3\n\n{}\n[msa]\nn_max = 1\nscales = [8]\n{extra}",
        model(1, 1, 1.0, 0)
    )
}

fn violations(text: &str) -> Vec<String> {
    match parse_config(text).map(|c| c.check()) {
        Ok(Err(ConfigError::Invalid(v))) => v,
        other => panic!("expected violations, got {other:?}"),
    }
}

#[test]
fn minimal_lifshitz_config_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "lifshitz", &lifshitz_text(100));
    let c = validate_config(&path).unwrap();
    assert_eq!(c.kind, ExperimentKind::Lifshitz);
    assert_eq!((c.trials, c.seed), (100, 7));
    assert_eq!(c.lifshitz.unwrap().sizes, vec![8, 16]);
}

#[test]
fn alpha_at_most_one_is_a_violation() {
    let v = violations(&msa_text("alpha = 0.9\n"));
    assert!(v.iter().any(|m| m.contains("alpha > 1 required")), "{v:?}");
}

#[test]
fn zero_trials_is_a_violation() {
    let v = violations(&lifshitz_text(0));
    assert!(v.iter().any(|m| m.contains("trials")), "{v:?}");
}

#[test]
fn all_violations_are_reported_together() {
    let text = msa_text("alpha = 0.9\n").replace("trials = 100", "trials = 0");
    assert!(violations(&text).len() >= 2);
}

#[test]
fn unknown_key_is_a_parse_error_with_position() {
    let text = msa_text("gamma_override = 2.0\n");
    match parse_config(&text) {
        Err(ConfigError::Parse { line, message, .. }) => {
            assert!(message.contains("gamma_override"), "{message}");
            let want = text.lines().position(|l| l.starts_with("gamma_override")).unwrap() + 1;
            assert_eq!(line, want);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(validate_config(Path::new("/nonexistent/x.toml")), Err(ConfigError::Io { .. })));
}

#[test]
fn validate_subcommand_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good", &lifshitz_text(100));
    let bad = write_config(dir.path(), "bad", &msa_text("alpha = 0.9\n"));
    assert!(lowedge(&["validate", "--config", good.to_str().unwrap()]).status.success());
    let o = lowedge(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha > 1 required"));
}

#[test]
fn subcommand_must_match_the_config_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lifshitz", &lifshitz_text(100));
    let o = lowedge(&["ct-check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overrides_can_repair_the_trial_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lifshitz", &lifshitz_text(0));
    let out = dir.path().join("out");
    let o =
        lowedge(&["lifshitz", "--config", cfg.to_str().unwrap(), "--trials", "100", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lifshitz", &lifshitz_text(100));
    let a = run_records(&cfg, &dir.path().join("a"), 2);
    let b = run_records(&cfg, &dir.path().join("b"), 2);
    assert_eq!(a, b);
    let head = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert_eq!(head, "n,L,trial,seed,threshold,e0,hit,error");
}

#[test]
fn worker_count_does_not_change_records() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, text) in smoke_configs() {
        let cfg = write_config(dir.path(), kind, &text);
        let one = run_records(&cfg, &dir.path().join(format!("{kind}-1")), 1);
        let four = run_records(&cfg, &dir.path().join(format!("{kind}-4")), 4);
        assert_eq!(one, four, "{kind}");
    }
}

#[test]
fn seed_column_depends_on_master_seed_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lifshitz", &lifshitz_text(100));
    let a = String::from_utf8(run_records(&cfg, &dir.path().join("a"), 1)).unwrap();
    let cfg2 = write_config(dir.path(), "lifshitz", &lifshitz_text(100).replace("seed = 7", "seed = 8"));
    let b = String::from_utf8(run_records(&cfg2, &dir.path().join("b"), 1)).unwrap();
    let seeds = |s: &str| s.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().to_string()).collect::<Vec<_>>();
    let (sa, sb) = (seeds(&a), seeds(&b));
    assert_ne!(sa, sb);
    // same trial index at both sizes shares its seed
    assert_eq!(sa[0], sa[100]);
    assert_ne!(sa[0], sa[1]);
}

#[test]
fn aggregates_are_recomputable_and_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (kind, text) in smoke_configs() {
        let mut config = parse_config(&text).unwrap();
        config.workers = Some(2);
        let report = run_experiment(&config).unwrap();
        let mut csv = Vec::new();
        report.records.write_csv(&mut csv).unwrap();
        let reread = Records::read_csv(config.kind, csv.as_slice()).unwrap();
        assert_eq!(reread, report.records, "{kind}");
        assert_eq!(reread.aggregate(), report.aggregates, "{kind}");

        let shuffled = |r: &Records, rng: &mut ChaCha8Rng| {
            let mut bytes = Vec::new();
            r.write_csv(&mut bytes).unwrap();
            let text = String::from_utf8(bytes).unwrap();
            let mut lines: Vec<&str> = text.lines().collect();
            let head = lines.remove(0);
            lines.shuffle(rng);
            let split = lines.len() / 3;
            let part = |ls: &[&str]| format!("{head}\n{}\n", ls.join("\n"));
            let a = Records::read_csv(config.kind, part(&lines[..split]).as_bytes()).unwrap();
            let b = Records::read_csv(config.kind, part(&lines[split..]).as_bytes()).unwrap();
            b.merge(a).unwrap()
        };
        let merged = shuffled(&report.records, &mut rng);
        assert_eq!(merged.aggregate(), report.aggregates, "{kind}");
    }
}

#[test]
fn outputs_are_written_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lifshitz", &lifshitz_text(100));
    let out = dir.path().join("out");
    let o = lowedge(&["lifshitz", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(files(&out, ".csv").len(), 1);
    let json = files(&out, ".json");
    assert_eq!(json.len(), 1);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json[0]).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kind"], "lifshitz");
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["stats"]["total_trials"], 200);
    assert_eq!(v["aggregates"].as_array().unwrap().len(), 2);
    // no temporaries left behind
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 2);

    // a second run never overwrites the first
    assert!(lowedge(&["lifshitz", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(files(&out, ".csv").len(), 2);
}

#[test]
fn msa_two_particle_smoke_run_emits_target() {
    let text = format!(
        "kind = \"msa-initial\"\ntrials = 100\nseed = 1\n\n{}\n[msa]\nn_max = 2\nscales = [16]\n",
        model(2, 1, 1.0, 0)
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "msa-initial", &text);
    let out = dir.path().join("out");
    let o = lowedge(&["msa-initial", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = files(&out, "-summary.csv");
    assert_eq!(table.len(), 1);
    let rows: Vec<MsaSummary> =
        csv::Reader::from_path(&table[0]).unwrap().deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!((r.n, r.l, r.trials), (2, 16, 100));
    // L0^{-2p·4^{N-n}} with p = 1, N = n = 2
    assert!((r.target - 16f64.powi(-2)).abs() < 1e-15);
    assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
    let header = std::fs::read_to_string(&table[0]).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "n,L,trials,singular_count,estimate,ci_low,ci_high,shortcut_rate,target");
}

#[test]
fn estar_override_is_msa_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lifshitz", &lifshitz_text(100));
    let o = lowedge(&["lifshitz", "--config", cfg.to_str().unwrap(), "--estar-override", "2.0"]);
    assert_eq!(o.status.code(), Some(2));
}
