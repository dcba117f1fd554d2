//! The public per-district live table before and after a travel history.

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
    let zone = DisplayZone::colombo();

    let case = svc.register_case(&fixtures::sample_intake()).unwrap();
    print!(
        "{}",
        svc.live_update(Some(fixtures::viewed_at())).render(zone)
    );

    clock.set(fixtures::live_update_at());
    svc.submit_travel_history(&case.case_id, PHI_GURUNAGAR, &fixtures::sample_travel())
        .unwrap();
    println!();
    print!(
        "{}",
        svc.live_update(Some(fixtures::live_update_at()))
            .render(zone)
    );

    println!("\nas JSON for the dashboard:");
    let live = svc.live_update(Some(fixtures::live_update_at()));
    println!(
        "{}",
        serde_json::to_string(live.row("Jaffna").unwrap()).unwrap()
    );
}
