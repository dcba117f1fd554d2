//! MOH assignment, the PHI worklist and field attendance.

use std::sync::Arc;

use chrono::Duration;
use dengue_surveillance::alerting::MemoryTransport;
use dengue_surveillance::config::Settings;
use dengue_surveillance::fixtures::{self, MOH_JAFFNA, PHI_GURUNAGAR};
use dengue_surveillance::workflow::Outcome;
use dengue_surveillance::{ManualClock, Surveillance};

fn main() {
    let clock = ManualClock::new(fixtures::registered_at());
    let ctx = fixtures::context_with(Settings {
        auto_assign: false,
        ..Settings::default()
    });
    let svc = Surveillance::in_memory(
        ctx,
        Box::new(MemoryTransport::new()),
        Arc::new(clock.clone()),
    );
    let case = svc.register_case(&fixtures::sample_intake()).unwrap();
    println!("registered {} as {}", case.case_id, case.attention);

    clock.advance(Duration::minutes(40));
    let order = svc
        .assign(&case.case_id, MOH_JAFFNA, PHI_GURUNAGAR)
        .unwrap();
    println!(
        "MOH {MOH_JAFFNA} issued {} to PHI {}",
        order.order_id, order.assigned_to
    );

    println!("\n{}", svc.phi_worklist(PHI_GURUNAGAR).unwrap().render());

    clock.advance(Duration::hours(18));
    let (done, entry) = svc
        .record_attendance(&order.order_id, PHI_GURUNAGAR, Outcome::Confirmed)
        .unwrap();
    println!(
        "attended at {:?}, outcome {:?}",
        done.attended_at, done.outcome
    );
    if let Some(e) = entry {
        println!(
            "ID Register: {} in MOH {} confirmed by {}",
            e.case_id, e.moh_area, e.entered_by
        );
    }
    match svc.record_attendance(&order.order_id, PHI_GURUNAGAR, Outcome::NotDengue) {
        Err(e) => println!("second attendance rejected: {e}"),
        Ok(_) => println!("unexpected"),
    }
}
