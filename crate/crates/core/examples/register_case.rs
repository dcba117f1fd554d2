//! Registering a hospital notification and reading it back.

use std::sync::Arc;

use dengue_surveillance::alerting::MemoryTransport;
use dengue_surveillance::{fixtures, ManualClock, Surveillance};

fn main() {
    let clock = ManualClock::new(fixtures::registered_at());
    let transport = MemoryTransport::new();
    let svc = Surveillance::in_memory(
        fixtures::context(),
        Box::new(transport.clone()),
        Arc::new(clock),
    );

    let case = svc
        .register_case(&fixtures::sample_intake())
        .expect("valid form");
    println!(
        "{} {} ({}, {})",
        case.case_id,
        case.full_name(),
        case.age,
        case.gender.label()
    );
    println!(
        "residence: {} {}, {} -> PHI area {}",
        case.residence.door_no, case.residence.street, case.path.gn, case.path.phi_area
    );
    println!("status: {}", case.attention);
    println!("{}", serde_json::to_string_pretty(&case).unwrap());

    let mut bad = fixtures::sample_intake();
    bad.gn_division = "Atlantis".into();
    bad.mobile = Some("12".into());
    match svc.register_case(&bad) {
        Err(e) => println!("rejected: {e}"),
        Ok(c) => println!("unexpectedly accepted {}", c.case_id),
    }
    println!(
        "alerts sent on registration: {}",
        transport.delivered().len()
    );
}
