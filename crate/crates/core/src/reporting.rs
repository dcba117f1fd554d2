//! Live district table, weekly returns (H399), timeliness and response
//! cycle metrics. Everything here is read-only over [`State`].

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::alerting::{NotificationState, TriggerKind};
use crate::case_registry::CaseId;
use crate::gazetteer::{Gazetteer, MohRef};
use crate::state::State;
use crate::time::{DisplayZone, Timestamp};
use crate::travel_risk::DEFAULT_WINDOW_DAYS;
use crate::workflow::AttentionStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveUpdateRow {
    pub district: String,
    pub cases_today: usize,
    pub last_case_at: Option<Timestamp>,
    pub risk_places_10d: usize,
    pub last_risk_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveUpdate {
    pub generated_at: Timestamp,
    pub rows: Vec<LiveUpdateRow>,
}

pub const LIVE_COLUMNS: [&str; 6] = [
    "S.No",
    "Health District Name",
    "# of Identified Case for Today",
    "Date & Time of Last Identified Case",
    "# of Risk Places Identified for Last 10 Days",
    "Date & Time of Last Identified Risk Place",
];

impl LiveUpdate {
    pub fn row(&self, district: &str) -> Option<&LiveUpdateRow> {
        self.rows.iter().find(|r| r.district == district)
    }

    /// Tab-separated table with the `Dengue Live Update:` header line.
    pub fn render(&self, zone: DisplayZone) -> String {
        let mut out = format!("Dengue Live Update: {}\n", zone.format(&self.generated_at));
        out.push_str(&LIVE_COLUMNS.join("\t"));
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                i + 1,
                r.district,
                r.cases_today,
                zone.format_opt(r.last_case_at.as_ref()),
                r.risk_places_10d,
                zone.format_opt(r.last_risk_at.as_ref()),
            ));
        }
        out
    }
}

/// One row per configured district, alphabetical. "Today" is the calendar
/// date of `now` in `zone`.
pub fn live_update(
    state: &State,
    gazetteer: &Gazetteer,
    now: Timestamp,
    zone: DisplayZone,
) -> LiveUpdate {
    let today = zone.local_date(&now);
    let rows = gazetteer
        .district_names()
        .into_iter()
        .map(|district| {
            let mut cases_today = 0;
            let mut last_case_at: Option<Timestamp> = None;
            for c in state.cases.values().filter(|c| c.path.district == district) {
                if zone.local_date(&c.registered_at) == today {
                    cases_today += 1;
                }
                last_case_at = last_case_at.max(Some(c.registered_at));
            }
            let (risk_places_10d, last_risk_at) =
                state
                    .risk_places
                    .window_stats(&district, now, DEFAULT_WINDOW_DAYS);
            LiveUpdateRow {
                district,
                cases_today,
                last_case_at,
                risk_places_10d,
                last_risk_at,
            }
        })
        .collect();
    LiveUpdate {
        generated_at: now,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpiWeekConvention {
    /// ISO-8601: Monday start, week 1 holds the first Thursday.
    #[default]
    Iso,
    /// Sunday start, week 1 holds the first Wednesday (MMWR-style).
    SundayStart,
}

impl FromStr for EpiWeekConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iso" => Ok(EpiWeekConvention::Iso),
            "sunday_start" | "mmwr" => Ok(EpiWeekConvention::SundayStart),
            other => Err(format!("unknown epi-week convention {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EpiWeek {
    pub year: i32,
    pub week: u32,
}

impl EpiWeek {
    pub fn of(date: NaiveDate, convention: EpiWeekConvention) -> Self {
        match convention {
            EpiWeekConvention::Iso => {
                let w = date.iso_week();
                EpiWeek {
                    year: w.year(),
                    week: w.week(),
                }
            }
            // The week belongs to the year holding its Wednesday.
            EpiWeekConvention::SundayStart => {
                let wed = date - Duration::days(date.weekday().num_days_from_sunday() as i64)
                    + Duration::days(3);
                EpiWeek {
                    year: wed.year(),
                    week: wed.ordinal0() / 7 + 1,
                }
            }
        }
    }

    /// First day of the week, or `None` when the year has no such week
    /// under `convention`.
    pub fn start(&self, convention: EpiWeekConvention) -> Option<NaiveDate> {
        let start = match convention {
            EpiWeekConvention::Iso => {
                NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon)?
            }
            EpiWeekConvention::SundayStart => {
                let jan4 = NaiveDate::from_ymd_opt(self.year, 1, 4)?;
                let week1 = jan4 - Duration::days(jan4.weekday().num_days_from_sunday() as i64);
                week1 + Duration::weeks(self.week as i64 - 1)
            }
        };
        (self.week >= 1 && EpiWeek::of(start, convention) == *self).then_some(start)
    }

    pub fn contains(&self, date: NaiveDate, convention: EpiWeekConvention) -> bool {
        EpiWeek::of(date, convention) == *self
    }
}

impl fmt::Display for EpiWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.year, self.week)
    }
}

impl FromStr for EpiWeek {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("{s:?} is not an epi week like 2014-W01");
        let (y, w) = s.trim().split_once("-W").ok_or_else(bad)?;
        let week = EpiWeek {
            year: y.parse().map_err(|_| bad())?,
            week: w.parse().map_err(|_| bad())?,
        };
        // Whether week 53 exists depends on the convention; see `start`.
        if !(1..=53).contains(&week.week) {
            return Err(bad());
        }
        Ok(week)
    }
}

impl TryFrom<String> for EpiWeek {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EpiWeek> for String {
    fn from(w: EpiWeek) -> Self {
        w.to_string()
    }
}

/// The weekly return of communicable diseases for one MOH area.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeeklyReturn {
    pub moh_area: MohRef,
    pub epi_week: EpiWeek,
    pub disease: String,
    /// Every case notified (suspected) in the week.
    pub suspected_count: usize,
    /// Of those, the ones entered in the ID Register.
    pub confirmed_count: usize,
    pub generated_at: Timestamp,
}

impl WeeklyReturn {
    pub fn store_key(moh: &MohRef, week: EpiWeek) -> String {
        format!("{week}|{}|{}", moh.district, moh.moh_area)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum ReportError {
    #[error("epi week {0} is in the future")]
    FutureWeek(EpiWeek),
    #[error("epi week {0} does not exist under the configured convention")]
    NoSuchWeek(EpiWeek),
    #[error("unknown MOH area {0}")]
    UnknownMohArea(String),
    #[error("case {0} not found")]
    NotFound(CaseId),
    #[error("case has not been closed yet")]
    IncompleteCase(Box<ResponseCycle>),
}

#[derive(Debug, Clone, Copy)]
pub struct ReportSettings {
    pub zone: DisplayZone,
    pub convention: EpiWeekConvention,
}

/// Counts for one MOH area and week; does not record anything.
pub fn weekly_return(
    state: &State,
    moh: &MohRef,
    week: EpiWeek,
    now: Timestamp,
    settings: ReportSettings,
) -> Result<WeeklyReturn, ReportError> {
    let start = week
        .start(settings.convention)
        .ok_or(ReportError::NoSuchWeek(week))?;
    if start > settings.zone.local_date(&now) {
        return Err(ReportError::FutureWeek(week));
    }
    let mut suspected_count = 0;
    let mut confirmed_count = 0;
    for c in state.cases.values() {
        if c.path.moh() == *moh
            && week.contains(
                settings.zone.local_date(&c.registered_at),
                settings.convention,
            )
        {
            suspected_count += 1;
            if state.id_register.contains_key(&c.case_id) {
                confirmed_count += 1;
            }
        }
    }
    Ok(WeeklyReturn {
        moh_area: moh.clone(),
        epi_week: week,
        disease: "dengue".into(),
        suspected_count,
        confirmed_count,
        generated_at: now,
    })
}

/// Fraction of MOH areas with a generated return for `week`.
pub fn timeliness(state: &State, gazetteer: &Gazetteer, week: EpiWeek) -> f64 {
    let areas = gazetteer.moh_areas();
    if areas.is_empty() {
        return 0.0;
    }
    let with_return = areas
        .iter()
        .filter(|m| {
            state
                .weekly_returns
                .contains_key(&WeeklyReturn::store_key(m, week))
        })
        .count();
    with_return as f64 / areas.len() as f64
}

pub const H399_COLUMNS: [&str; 7] = [
    "epi_week",
    "district",
    "moh_area",
    "disease",
    "suspected",
    "confirmed",
    "generated_at",
];

pub fn h399_csv(returns: &[WeeklyReturn], zone: DisplayZone) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(H399_COLUMNS).expect("in-memory write");
    for r in returns {
        w.write_record([
            r.epi_week.to_string(),
            r.moh_area.district.clone(),
            r.moh_area.moh_area.clone(),
            r.disease.clone(),
            r.suspected_count.to_string(),
            r.confirmed_count.to_string(),
            zone.format(&r.generated_at),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Fixed-width printable H399 table.
pub fn h399_text(returns: &[WeeklyReturn], zone: DisplayZone) -> String {
    let header = [
        "Week",
        "Health District",
        "MOH Area",
        "Disease",
        "Suspected",
        "Confirmed",
        "Generated (SL)",
    ];
    let rows: Vec<[String; 7]> = returns
        .iter()
        .map(|r| {
            [
                r.epi_week.to_string(),
                r.moh_area.district.clone(),
                r.moh_area.moh_area.clone(),
                r.disease.clone(),
                r.suspected_count.to_string(),
                r.confirmed_count.to_string(),
                zone.format(&r.generated_at),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut s = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = String::from("WEEKLY RETURN OF COMMUNICABLE DISEASES (H399)\n");
    out.push_str(&line(&header.map(String::from)));
    out.push_str(&line(&widths.map(|w| "-".repeat(w))));
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

/// One stage of a latency model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub label: String,
    pub days: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLatencyModel {
    pub stages: Vec<Stage>,
    pub total_days: u32,
}

impl StageLatencyModel {
    pub fn new(stages: Vec<Stage>) -> Self {
        let total_days = stages.iter().map(|s| s.days).sum();
        StageLatencyModel { stages, total_days }
    }
}

/// The postal notification cycle the service replaces.
pub fn baseline() -> StageLatencyModel {
    StageLatencyModel::new(vec![
        Stage {
            label: "Hospital to MOH office (postal service)".into(),
            days: 6,
        },
        Stage {
            label: "MOH office to PHI (official visit)".into(),
            days: 2,
        },
        Stage {
            label: "PHI visits the patient home".into(),
            days: 2,
        },
        Stage {
            label: "PHI reports back to MOH".into(),
            days: 2,
        },
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Milestone {
    AlertDispatched,
    Assigned,
    Attended,
    Confirmed,
    RuledOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStage {
    pub milestone: Milestone,
    pub at: Timestamp,
    /// Elapsed since registration.
    pub elapsed_secs: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseCycle {
    pub case_id: CaseId,
    pub registered_at: Timestamp,
    pub stages: Vec<CycleStage>,
    /// Registration to closure; absent while the case is open.
    pub total_secs: Option<i64>,
}

impl ResponseCycle {
    pub fn stage(&self, m: Milestone) -> Option<&CycleStage> {
        self.stages.iter().find(|s| s.milestone == m)
    }

    pub fn total(&self) -> Option<Duration> {
        self.total_secs.map(Duration::seconds)
    }
}

/// Measured milestones of one case, from the event-sourced state.
pub fn response_cycle(state: &State, case_id: &CaseId) -> Result<ResponseCycle, ReportError> {
    let case = state
        .cases
        .get(case_id)
        .ok_or_else(|| ReportError::NotFound(case_id.clone()))?;
    let start = case.registered_at;
    let mut stages = Vec::new();
    let mut push = |milestone, at: Timestamp| {
        stages.push(CycleStage {
            milestone,
            at,
            elapsed_secs: (at - start).num_seconds(),
        })
    };
    let alert = state
        .notifications
        .values()
        .filter(|n| {
            n.trigger == TriggerKind::CaseRegistered
                && n.case_id.as_ref() == Some(case_id)
                && n.state == NotificationState::Sent
        })
        .filter_map(|n| n.sent_at)
        .min();
    if let Some(at) = alert {
        push(Milestone::AlertDispatched, at);
    }
    let order = state.order_for_case(case_id);
    if let Some(o) = order {
        push(Milestone::Assigned, o.created_at);
        if let Some(at) = o.attended_at {
            push(Milestone::Attended, at);
        }
    }
    let closed = match case.attention {
        AttentionStatus::Confirmed => state
            .id_register
            .get(case_id)
            .map(|e| (Milestone::Confirmed, e.confirmed_at)),
        AttentionStatus::NotDengue => order
            .and_then(|o| o.attended_at)
            .map(|at| (Milestone::RuledOut, at)),
        _ => None,
    };
    if let Some((m, at)) = closed {
        push(m, at);
    }
    let total_secs = closed.map(|(_, at)| (at - start).num_seconds());
    let cycle = ResponseCycle {
        case_id: case_id.clone(),
        registered_at: start,
        stages,
        total_secs,
    };
    if cycle.total_secs.is_none() {
        return Err(ReportError::IncompleteCase(Box::new(cycle)));
    }
    Ok(cycle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_matches_postal_cycle() {
        let b = baseline();
        assert_eq!(
            b.stages.iter().map(|s| s.days).collect::<Vec<_>>(),
            [6, 2, 2, 2]
        );
        assert_eq!(b.total_days, 12);
    }

    #[test]
    fn iso_and_sunday_weeks() {
        let d = NaiveDate::from_ymd_opt(2013, 12, 31).unwrap();
        assert_eq!(
            EpiWeek::of(d, EpiWeekConvention::Iso).to_string(),
            "2014-W01"
        );
        assert_eq!(
            EpiWeek::of(d, EpiWeekConvention::SundayStart).to_string(),
            "2014-W01"
        );
        let w: EpiWeek = "2014-W01".parse().unwrap();
        assert_eq!(
            w.start(EpiWeekConvention::Iso),
            NaiveDate::from_ymd_opt(2013, 12, 30)
        );
        assert_eq!(
            w.start(EpiWeekConvention::SundayStart),
            NaiveDate::from_ymd_opt(2013, 12, 29)
        );
        // Sunday 2013-12-29 starts the Sunday week but closes the ISO one.
        let sun = NaiveDate::from_ymd_opt(2013, 12, 29).unwrap();
        assert_eq!(
            EpiWeek::of(sun, EpiWeekConvention::Iso).to_string(),
            "2013-W52"
        );
        assert_eq!(
            EpiWeek::of(sun, EpiWeekConvention::SundayStart).to_string(),
            "2014-W01"
        );
        assert!("2014-W54".parse::<EpiWeek>().is_err());
        assert!("2015-W53".parse::<EpiWeek>().is_ok());
    }

    #[test]
    fn sunday_weeks_match_day_counting() {
        // Oracle: a Sunday-start week is week 1 when it holds >= 4 days of
        // the new year; count weeks from that Sunday.
        fn oracle(d: NaiveDate) -> (i32, u32) {
            let week1_start = |y: i32| {
                let jan1 = NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
                let back = jan1.weekday().num_days_from_sunday() as i64;
                let sunday = jan1 - Duration::days(back);
                if back <= 3 {
                    sunday
                } else {
                    sunday + Duration::days(7)
                }
            };
            for y in [d.year() + 1, d.year(), d.year() - 1] {
                let s = week1_start(y);
                if d >= s {
                    return (y, ((d - s).num_days() / 7 + 1) as u32);
                }
            }
            unreachable!()
        }
        let mut d = NaiveDate::from_ymd_opt(2009, 12, 1).unwrap();
        while d < NaiveDate::from_ymd_opt(2021, 2, 1).unwrap() {
            let w = EpiWeek::of(d, EpiWeekConvention::SundayStart);
            assert_eq!((w.year, w.week), oracle(d), "{d}");
            d += Duration::days(1);
        }
    }

    #[test]
    fn h399_text_layout() {
        let r = WeeklyReturn {
            moh_area: MohRef {
                district: "Jaffna".into(),
                moh_area: "Jaffna".into(),
            },
            epi_week: "2014-W01".parse().unwrap(),
            disease: "dengue".into(),
            suspected_count: 1,
            confirmed_count: 1,
            generated_at: crate::time::parse_instant("2014-01-06T09:00:00+05:30").unwrap(),
        };
        let text = h399_text(std::slice::from_ref(&r), DisplayZone::colombo());
        assert!(text.contains("2014-W01  Jaffna           Jaffna    dengue   1          1          06-01-2014 09:00:00"), "{text}");
        assert_eq!(
            h399_csv(&[r], DisplayZone::colombo()),
            "epi_week,district,moh_area,disease,suspected,confirmed,generated_at\n2014-W01,Jaffna,Jaffna,dengue,1,1,06-01-2014 09:00:00\n"
        );
    }
}
