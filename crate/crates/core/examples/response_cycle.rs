//! The postal baseline against a measured electronic response cycle.

use std::sync::Arc;

use dengue_surveillance::alerting::MemoryTransport;
use dengue_surveillance::case_registry::CaseId;
use dengue_surveillance::ops::{run_scenario, Scenario};
use dengue_surveillance::reporting::baseline;
use dengue_surveillance::{fixtures, DisplayZone, ManualClock, Surveillance};

fn main() {
    let model = baseline();
    println!("postal baseline:");
    for s in &model.stages {
        println!("  {:<42} {} days", s.label, s.days);
    }
    println!("  {:<42} {} days\n", "total", model.total_days);

    let clock = ManualClock::new(fixtures::registered_at());
    let svc = Surveillance::in_memory(
        fixtures::context(),
        Box::new(MemoryTransport::new()),
        Arc::new(clock.clone()),
    );
    run_scenario(&svc, &clock, Scenario::Cycle).unwrap();

    let zone = DisplayZone::colombo();
    let cycle = svc.response_cycle(&CaseId::from_seq(1)).unwrap();
    println!(
        "electronic cycle for {} registered {}:",
        cycle.case_id,
        zone.format(&cycle.registered_at)
    );
    for s in &cycle.stages {
        println!(
            "  {:<16} {}  +{:.2} h",
            format!("{:?}", s.milestone),
            zone.format(&s.at),
            s.elapsed_secs as f64 / 3600.0
        );
    }
    let total = cycle.total().unwrap();
    println!("  total {:.2} days", total.num_seconds() as f64 / 86_400.0);
}
