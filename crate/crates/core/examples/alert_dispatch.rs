//! Alerts on registration, with an unreliable transport and retries.

use std::sync::Arc;

use dengue_surveillance::alerting::{Fault, MemoryTransport, NotificationState};
use dengue_surveillance::{fixtures, Clock, ManualClock, Surveillance};

fn main() {
    // First call fails, second delivers but loses the acknowledgement.
    let transport =
        MemoryTransport::scripted([Fault::Fail, Fault::DeliverThenFail], Fault::Deliver);
    let clock = ManualClock::new(fixtures::registered_at());
    let svc = Surveillance::in_memory(
        fixtures::context(),
        Box::new(transport.clone()),
        Arc::new(clock.clone()),
    );
    svc.register_case(&fixtures::sample_intake()).unwrap();

    let show = |label: &str| {
        println!("{label}");
        for n in svc.notifications() {
            println!(
                "  {:<28} {:?} attempts={} next={:?}",
                n.key.to_string(),
                n.state,
                n.attempts,
                n.next_attempt_at
            );
        }
    };
    show("after registration:");

    while let Some(next) = svc
        .notifications()
        .iter()
        .filter(|n| n.state == NotificationState::Pending)
        .filter_map(|n| n.next_attempt_at)
        .min()
    {
        clock.set(next);
        let n = svc.retry_pending().unwrap();
        println!("retried {n} at {}", clock.now());
    }
    show("settled:");

    println!(
        "\ntransport calls: {}, distinct deliveries: {}",
        transport.calls(),
        transport.delivered().len()
    );
    for r in transport.delivered() {
        println!("{}", r.to_line());
    }
}
