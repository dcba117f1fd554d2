mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dsurv(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsurv"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("DSURV_DATA_DIR")
        .env_remove("DSURV_LISTEN")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn seeded(scenario: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::temp_config(dir.path(), "");
    let out = dsurv(&cfg, &["seed", "--scenario", scenario]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).starts_with(&format!("seeded {scenario}:")));
    (dir, cfg)
}

/// `(suspected, confirmed)` of one MOH area from an H399 CSV.
fn h399_counts(csv: &str, district: &str, moh: &str) -> Option<(u32, u32)> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find_map(|f| {
            (f[1] == district && f[2] == moh)
                .then(|| (f[4].parse().unwrap(), f[5].parse().unwrap()))
        })
}

#[test]
fn registration_seed_exports_one_suspected_case() {
    let (_dir, cfg) = seeded("figure5");
    let out = dsurv(&cfg, &["export", "h399", "--week", "2014-W01"]);
    assert!(out.status.success());
    let csv = stdout(&out);
    assert!(
        csv.starts_with("epi_week,district,moh_area,disease,suspected,confirmed,generated_at\n")
    );
    assert_eq!(h399_counts(&csv, "Jaffna", "Jaffna"), Some((1, 0)));
    assert_eq!(h399_counts(&csv, "Jaffna", "Nallur"), Some((0, 0)));
    assert_eq!(csv.lines().count() - 1, 12, "one row per MOH area");

    let text = stdout(&dsurv(
        &cfg,
        &["export", "h399", "--week", "2014-W01", "--format", "text"],
    ));
    assert!(
        text.starts_with("WEEKLY RETURN OF COMMUNICABLE DISEASES (H399)\n"),
        "{text}"
    );
}

#[test]
fn cycle_seed_exports_a_confirmed_case() {
    let (_dir, cfg) = seeded("cycle");
    let csv = stdout(&dsurv(&cfg, &["export", "h399", "--week", "2014-W01"]));
    assert_eq!(h399_counts(&csv, "Jaffna", "Jaffna"), Some((1, 1)));
}

#[test]
fn travel_seed_exports_five_risk_places() {
    let (_dir, cfg) = seeded("figure6");
    let out = dsurv(
        &cfg,
        &["export", "risk", "--district", "Jaffna", "--window", "10"],
    );
    assert!(out.status.success());
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("district,door_no,street,gn_division,identified_at,n_sources")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5, "{csv}");
    assert!(
        rows.contains(&"Jaffna,12,Main Street,Gurunagar East,30-12-2013 22:31:33,1"),
        "{csv}"
    );
    assert!(
        !csv.contains("Hospital Road"),
        "the residence is not a risk place"
    );

    let later = stdout(&dsurv(
        &cfg,
        &[
            "export",
            "risk",
            "--district",
            "Jaffna",
            "--now",
            "2014-01-05T00:00:00Z",
        ],
    ));
    assert_eq!(later.lines().count() - 1, 1, "{later}");
    let galle = stdout(&dsurv(&cfg, &["export", "risk", "--district", "Galle"]));
    assert_eq!(galle.lines().count(), 1);
}

#[test]
fn replay_check_reports_determinism() {
    let (_dir, cfg) = seeded("cycle");
    let out = dsurv(&cfg, &["replay-check"]);
    assert!(out.status.success());
    assert!(
        stdout(&out).contains("deterministic: true"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn outbox_tail_prints_json_lines() {
    let (_dir, cfg) = seeded("figure5");
    let out = dsurv(&cfg, &["outbox", "tail", "-n", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    for l in text.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["v"], 1);
    }
}

#[test]
fn seeding_twice_is_refused() {
    let (_dir, cfg) = seeded("figure5");
    let out = dsurv(&cfg, &["seed", "--scenario", "figure5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("already holds"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::temp_config(dir.path(), "");
    for args in [
        &["export", "h399"][..],
        &["frobnicate"],
        &["seed", "--scenario", "figure7"],
        &["export", "h399", "--week", "2014-W99"],
    ] {
        let out = dsurv(&cfg, args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bad_config_fails_with_a_message() {
    let out = dsurv(
        Path::new("/nonexistent/surveillance.toml"),
        &["replay-check"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/surveillance.toml"));
}
