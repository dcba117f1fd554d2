//! Operations behind the `dsurv` subcommands. Each returns its output as
//! text so it can be tested without a process boundary.

use std::fmt;
use std::io::{BufRead, BufReader, Seek, SeekFrom};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::Duration;

use crate::config::ServiceConfig;
use crate::fixtures;
use crate::log::EventLog;
use crate::reporting::{self, EpiWeek};
use crate::service::{ServiceError, Surveillance};
use crate::time::{ManualClock, Timestamp};
use crate::workflow::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// The worked-example case registered at the hospital.
    Registration,
    /// Registration plus its 14-day travel history.
    Travel,
    /// A full response cycle: registration, attendance with confirmation,
    /// then travel history, with field delays of hours.
    Cycle,
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "figure5" | "registration" => Ok(Scenario::Registration),
            "figure6" | "travel" => Ok(Scenario::Travel),
            "cycle" => Ok(Scenario::Cycle),
            _ => Err(format!(
                "unknown scenario {s:?} (expected figure5, figure6 or cycle)"
            )),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Registration => "figure5",
            Scenario::Travel => "figure6",
            Scenario::Cycle => "cycle",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OpsError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("data directory already holds {0} events; seed needs an empty log")]
    NotEmpty(u64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Field-visit delay used by the cycle scenario.
pub fn cycle_visit_delay() -> Duration {
    Duration::hours(20)
}

/// Plays `scenario` against `svc`, driving `clock`. The service must be empty.
pub fn run_scenario(
    svc: &Surveillance,
    clock: &ManualClock,
    scenario: Scenario,
) -> Result<(), OpsError> {
    let events = svc.with_state(|s| s.last_event_id);
    if events > 0 {
        return Err(OpsError::NotEmpty(events));
    }
    clock.set(fixtures::registered_at());
    let case = svc.register_case(&fixtures::sample_intake())?;
    match scenario {
        Scenario::Registration => {}
        Scenario::Travel => {
            clock.set(fixtures::live_update_at() - Duration::minutes(3));
            svc.submit_travel_history(
                &case.case_id,
                fixtures::PHI_GURUNAGAR,
                &fixtures::sample_travel(),
            )?;
        }
        Scenario::Cycle => {
            let order =
                svc.with_state(|s| s.order_for_case(&case.case_id).map(|o| o.order_id.clone()));
            let order = match order {
                Some(o) => o,
                None => {
                    clock.advance(Duration::hours(2));
                    svc.assign(&case.case_id, fixtures::MOH_JAFFNA, fixtures::PHI_GURUNAGAR)?
                        .order_id
                }
            };
            clock.advance(cycle_visit_delay());
            svc.record_attendance(&order, fixtures::PHI_GURUNAGAR, Outcome::Confirmed)?;
            clock.advance(Duration::hours(1));
            svc.submit_travel_history(
                &case.case_id,
                fixtures::PHI_GURUNAGAR,
                &fixtures::sample_travel(),
            )?;
        }
    }
    Ok(())
}

/// `seed --scenario`: writes the scenario into the configured data dir.
pub fn seed(cfg: &ServiceConfig, scenario: Scenario) -> Result<String, OpsError> {
    let clock = ManualClock::new(fixtures::registered_at());
    let svc = Surveillance::open_with(cfg, false, Arc::new(clock.clone()))?;
    run_scenario(&svc, &clock, scenario)?;
    svc.snapshot()?;
    let m = svc.metrics();
    Ok(format!(
        "seeded {scenario}: {} events, {} cases, {} risk places, {} notifications\n",
        m.events,
        m.cases_total,
        m.risk_places_total,
        m.notifications_pending + m.notifications_sent + m.notifications_failed
    ))
}

/// `replay-check`: replays the log from empty and compares with the
/// snapshot-recovered state.
pub fn replay_check(cfg: &ServiceConfig) -> Result<(String, bool), OpsError> {
    let svc = Surveillance::open(cfg, false)?;
    let r = svc.replay_check()?;
    let ok = r.deterministic && r.matches_live_state;
    Ok((
        format!(
            "events: {}\ndeterministic: {}\nmatches_snapshot: {}\n",
            r.events, r.deterministic, r.matches_live_state
        ),
        ok,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H399Format {
    Csv,
    Text,
}

impl FromStr for H399Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(H399Format::Csv),
            "text" => Ok(H399Format::Text),
            _ => Err(format!("unknown format {s:?} (expected csv or text)")),
        }
    }
}

/// `export h399`: the week's returns for every MOH area. Recorded returns
/// are used where they exist; the rest are computed.
pub fn export_h399(
    cfg: &ServiceConfig,
    week: EpiWeek,
    format: H399Format,
) -> Result<String, OpsError> {
    let svc = Surveillance::open(cfg, false)?;
    let ctx = svc.context();
    let recorded = svc.recorded_returns(week);
    let mut returns = Vec::new();
    for m in ctx.gazetteer.moh_areas() {
        match recorded.iter().find(|r| r.moh_area == m) {
            Some(r) => returns.push(r.clone()),
            None => returns.push(svc.weekly_return(&m.district, &m.moh_area, week)?),
        }
    }
    let zone = ctx.settings.zone;
    Ok(match format {
        H399Format::Csv => reporting::h399_csv(&returns, zone),
        H399Format::Text => reporting::h399_text(&returns, zone),
    })
}

pub const RISK_COLUMNS: [&str; 6] = [
    "district",
    "door_no",
    "street",
    "gn_division",
    "identified_at",
    "n_sources",
];

/// `export risk`: risk places in `(now - window, now]`. `now` defaults to
/// the time of the last event, so exports of a seeded log are stable.
pub fn export_risk(
    cfg: &ServiceConfig,
    district: Option<&str>,
    window_days: i64,
    now: Option<Timestamp>,
) -> Result<String, OpsError> {
    let svc = Surveillance::open(cfg, false)?;
    let now = match now {
        Some(t) => t,
        None => svc
            .events()?
            .last()
            .map(|e| e.occurred_at)
            .unwrap_or_else(|| svc.clock().now()),
    };
    let zone = svc.context().settings.zone;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RISK_COLUMNS).expect("in-memory write");
    for p in svc.risk_places(district, window_days, Some(now)) {
        w.write_record([
            p.district.clone(),
            p.door_no.clone(),
            p.street.clone(),
            p.gn_division.clone(),
            zone.format(&p.identified_at),
            p.source_cases.len().to_string(),
        ])
        .expect("in-memory write");
    }
    Ok(String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"))
}

/// Last `n` lines of the outbox.
pub fn outbox_tail(path: &Path, n: usize) -> Result<Vec<String>, OpsError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    Ok(lines[lines.len().saturating_sub(n)..]
        .iter()
        .map(|s| s.to_string())
        .collect())
}

/// Prints new outbox lines as they are appended; never returns normally.
pub fn outbox_follow(path: &Path, mut out: impl std::io::Write) -> Result<(), OpsError> {
    let mut pos = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
    loop {
        if let Ok(mut f) = std::fs::File::open(path) {
            let len = f.metadata()?.len();
            if len < pos {
                pos = 0;
            }
            f.seek(SeekFrom::Start(pos))?;
            let mut reader = BufReader::new(f);
            let mut line = String::new();
            while reader.read_line(&mut line)? > 0 {
                if !line.ends_with('\n') {
                    break;
                }
                pos += line.len() as u64;
                out.write_all(line.as_bytes())?;
                line.clear();
            }
            out.flush()?;
        }
        std::thread::sleep(std::time::Duration::from_millis(500));
    }
}

/// Event count of a log file without loading the service.
pub fn log_len(path: &Path) -> Result<u64, OpsError> {
    if !path.exists() {
        return Ok(0);
    }
    let (log, _) = EventLog::open(path, false).map_err(ServiceError::from)?;
    Ok(log.last_id())
}
