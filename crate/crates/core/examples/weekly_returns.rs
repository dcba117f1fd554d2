//! H399 weekly returns and reporting timeliness for four MOH areas.

use std::sync::Arc;

use chrono::Duration;
use dengue_surveillance::alerting::MemoryTransport;
use dengue_surveillance::reporting::{h399_csv, h399_text, EpiWeek};
use dengue_surveillance::time::parse_instant;
use dengue_surveillance::{fixtures, DisplayZone, ManualClock, Surveillance};

fn main() {
    let monday = parse_instant("2013-12-30T08:00:00+05:30").unwrap();
    let clock = ManualClock::new(monday);
    let svc = Surveillance::in_memory(
        fixtures::four_moh_context(),
        Box::new(MemoryTransport::new()),
        Arc::new(clock.clone()),
    );

    for (i, (gn, district)) in [
        ("Chundikul North", "Jaffna"),
        ("Nallur North", "Jaffna"),
        ("Koggala", "Galle"),
        ("Chundikul North", "Jaffna"),
    ]
    .into_iter()
    .enumerate()
    {
        clock.advance(Duration::hours(20));
        let mut form = fixtures::sample_intake();
        form.gn_division = gn.into();
        form.district_hint = Some(district.into());
        form.opd_no = format!("{:03}", i + 1);
        svc.register_case(&form).unwrap();
    }

    let week: EpiWeek = "2014-W01".parse().unwrap();
    clock.set(parse_instant("2014-01-06T09:00:00+05:30").unwrap());
    let areas = svc.context().gazetteer.moh_areas();
    for m in &areas[..3] {
        svc.generate_weekly_return(&m.district, &m.moh_area, week)
            .unwrap();
    }
    println!(
        "timeliness with 3 of 4 returns: {:.2}",
        svc.timeliness(week)
    );
    let returns = svc.generate_all(week).unwrap();
    println!(
        "timeliness after generate_all: {:.2}\n",
        svc.timeliness(week)
    );

    let zone = DisplayZone::colombo();
    print!("{}", h399_csv(&returns, zone));
    println!();
    print!("{}", h399_text(&returns, zone));
}
