//! The event log on disk: restart, replay check and tail repair.

use std::io::Write;
use std::sync::Arc;

use dengue_surveillance::alerting::FileTransport;
use dengue_surveillance::log::EventLog;
use dengue_surveillance::{fixtures, ManualClock, Surveillance};

fn open(dir: &std::path::Path, repair: bool) -> Result<Surveillance, String> {
    let (log, events) =
        EventLog::open(dir.join("events.jsonl"), repair).map_err(|e| e.to_string())?;
    let outbox = FileTransport::open(dir.join("outbox.jsonl")).map_err(|e| e.to_string())?;
    let clock = ManualClock::new(fixtures::live_update_at());
    Surveillance::new(
        fixtures::context(),
        log,
        &events,
        Box::new(outbox),
        Arc::new(clock),
        Some(dir.join("snapshot.json")),
    )
    .map_err(|e| e.to_string())
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    {
        let svc = open(dir.path(), false).unwrap();
        let case = svc.register_case(&fixtures::sample_intake()).unwrap();
        svc.submit_travel_history(
            &case.case_id,
            fixtures::PHI_GURUNAGAR,
            &fixtures::sample_travel(),
        )
        .unwrap();
    }
    let log = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        println!(
            "#{:<3} {:<26} commit={}",
            v["id"],
            v["kind"].as_str().unwrap(),
            v["commit"]
        );
    }

    let svc = open(dir.path(), false).unwrap();
    println!("\nafter restart: {:?}", svc.replay_check().unwrap());
    drop(svc);

    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(dir.path().join("events.jsonl"))
        .unwrap();
    f.write_all(b"{\"v\":1,\"id\":").unwrap();
    drop(f);
    match open(dir.path(), false) {
        Err(e) => println!("torn write: {e}"),
        Ok(_) => println!("unexpected"),
    }
    let svc = open(dir.path(), true).unwrap();
    println!(
        "repaired: {} events, {} risk places",
        svc.with_state(|s| s.last_event_id),
        svc.with_state(|s| s.risk_places.len())
    );
}
