//! Turning a 14-day travel history into deduplicated risk places.

use std::sync::Arc;

use dengue_surveillance::alerting::MemoryTransport;
use dengue_surveillance::fixtures::{self, PHI_GURUNAGAR};
use dengue_surveillance::{DisplayZone, ManualClock, Surveillance};

fn main() {
    let clock = ManualClock::new(fixtures::registered_at());
    let svc = Surveillance::in_memory(
        fixtures::context(),
        Box::new(MemoryTransport::new()),
        Arc::new(clock.clone()),
    );
    let case = svc.register_case(&fixtures::sample_intake()).unwrap();
    let zone = DisplayZone::colombo();

    let travel = fixtures::sample_travel();
    for e in &travel {
        let day = case.registered_at - chrono::Duration::days(e.day_index as i64);
        println!(
            "Day {:>2}: {}  {} {}, {}",
            e.day_index,
            zone.format(&day),
            e.door_no,
            e.street,
            e.gn_division
        );
    }

    clock.set(fixtures::live_update_at());
    let places = svc
        .submit_travel_history(&case.case_id, PHI_GURUNAGAR, &travel)
        .unwrap();
    println!(
        "\n{} risk places (the home address is excluded):",
        places.len()
    );
    for p in &places {
        println!(
            "  {} {}, {}  first seen {}  entries {}",
            p.door_no,
            p.street,
            p.gn_division,
            zone.format(&p.identified_at),
            p.source_entries.len()
        );
    }
    let window = svc.risk_places(Some("Jaffna"), 10, Some(fixtures::live_update_at()));
    println!("in the last 10 days: {}", window.len());
}
