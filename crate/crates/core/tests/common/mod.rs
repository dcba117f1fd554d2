//! Shared builders and the randomized property checks. The property
//! functions are run by `properties.rs` and again by the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use dengue_surveillance::alerting::{Fault, MemoryTransport, NotificationState, RetryPolicy};
use dengue_surveillance::case_registry::{CaseId, CaseIntakeForm};
use dengue_surveillance::config::{Context, Settings};
use dengue_surveillance::event::Event;
use dengue_surveillance::fixtures;
use dengue_surveillance::reporting::{EpiWeek, EpiWeekConvention};
use dengue_surveillance::state::State;
use dengue_surveillance::travel_risk::{
    derive_risk_places, PlaceKey, RiskPlaceStore, TravelEntryInput, TravelHistoryEntry,
};
use dengue_surveillance::workflow::{AttentionStatus, OrderId, Outcome};
use dengue_surveillance::{ManualClock, Surveillance};

pub type Timestamp = DateTime<Utc>;

pub const COLOMBO_SECS: i64 = 5 * 3600 + 30 * 60;

pub fn ts(s: &str) -> Timestamp {
    DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
}

/// Calendar date in Sri Lanka, computed by hand.
pub fn sl_date(t: Timestamp) -> NaiveDate {
    (t + Duration::seconds(COLOMBO_SECS)).date_naive()
}

pub struct Harness {
    pub svc: Surveillance,
    pub clock: ManualClock,
    pub transport: MemoryTransport,
}

pub fn harness(ctx: Context, start: Timestamp) -> Harness {
    harness_with(ctx, start, MemoryTransport::new())
}

pub fn harness_with(ctx: Context, start: Timestamp, transport: MemoryTransport) -> Harness {
    let clock = ManualClock::new(start);
    let svc = Surveillance::in_memory(ctx, Box::new(transport.clone()), Arc::new(clock.clone()));
    Harness {
        svc,
        clock,
        transport,
    }
}

/// The worked-example form moved to another division.
pub fn intake(gn: &str, district: &str, seq: usize) -> CaseIntakeForm {
    let mut f = fixtures::sample_intake();
    f.gn_division = gn.to_string();
    f.district_hint = Some(district.to_string());
    f.opd_no = format!("{seq:03}");
    f.ward_ticket_no = format!("{seq:03}_1");
    f
}

fn fold(s: &str) -> String {
    s.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

type OracleKey = (String, String, String, String);

fn oracle_key(door: &str, street: &str, gn: &str, district: &str) -> OracleKey {
    (fold(door), fold(street), fold(gn), fold(district))
}

/// Spellings that differ only in case and spacing, for two doors, two
/// streets and three divisions.
const DOORS: [&str; 3] = ["12", "12 ", "7"];
const STREETS: [&str; 4] = ["Main Street", "main  street", "Temple Road", "TEMPLE ROAD"];
const GNS: [&str; 3] = ["Nallur North", "Kokuvil East", "Gurunagar East"];

fn place_strategy() -> impl Strategy<Value = (usize, usize, usize)> {
    (0..DOORS.len(), 0..STREETS.len(), 0..GNS.len())
}

fn entry(case: usize, day: u8, at: Timestamp, place: (usize, usize, usize)) -> TravelHistoryEntry {
    let g = fixtures::gazetteer();
    TravelHistoryEntry {
        case_id: CaseId::from_seq(case as u64 + 1),
        day_index: day,
        entry_at: at,
        door_no: DOORS[place.0].into(),
        street: STREETS[place.1].into(),
        path: g.resolve(GNS[place.2], Some("Jaffna")).unwrap(),
        contact_tp: "776544652".into(),
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

/// Derived risk places equal a nested-loop grouping of the raw entries.
pub fn risk_derivation_matches_oracle(cases: u32) -> Result<(), String> {
    let base = ts("2013-12-31T17:01:33Z");
    let strategy = (
        prop::collection::vec(
            (0usize..4, 1u8..=14, place_strategy(), 0i64..100_000),
            0..40,
        ),
        prop::collection::vec(place_strategy(), 4),
    );
    check(cases, strategy, |(raw, homes)| {
        let entries: Vec<TravelHistoryEntry> = raw
            .iter()
            .map(|&(c, d, p, secs)| entry(c, d, base - Duration::seconds(secs), p))
            .collect();
        let residences: HashMap<CaseId, PlaceKey> = homes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                (
                    CaseId::from_seq(i as u64 + 1),
                    PlaceKey::new(DOORS[p.0], STREETS[p.1], GNS[p.2], "Jaffna"),
                )
            })
            .collect();
        let home_of = |c: usize| {
            let p = homes[c];
            oracle_key(DOORS[p.0], STREETS[p.1], GNS[p.2], "Jaffna")
        };

        let mut expected: BTreeMap<OracleKey, (Timestamp, BTreeSet<CaseId>)> = BTreeMap::new();
        for i in 0..entries.len() {
            let (c, _, p, _) = raw[i];
            let k = oracle_key(DOORS[p.0], STREETS[p.1], GNS[p.2], "Jaffna");
            if k == home_of(c) {
                continue;
            }
            let mut first = entries[i].entry_at;
            let mut sources = BTreeSet::new();
            for j in 0..entries.len() {
                let (cj, _, pj, _) = raw[j];
                if oracle_key(DOORS[pj.0], STREETS[pj.1], GNS[pj.2], "Jaffna") == k
                    && k != home_of(cj)
                {
                    first = first.min(entries[j].entry_at);
                    sources.insert(entries[j].case_id.clone());
                }
            }
            expected.insert(k, (first, sources));
        }

        let derived = derive_risk_places(&entries, &residences);
        prop_assert_eq!(derived.len(), expected.len());
        for (k, (first, sources)) in &expected {
            let key = PlaceKey {
                door_no: k.0.clone(),
                street: k.1.clone(),
                gn_division: k.2.clone(),
                district: k.3.clone(),
            };
            let place = derived.get(&key);
            prop_assert!(place.is_some(), "missing {:?}", k);
            let place = place.unwrap();
            prop_assert_eq!(place.identified_at, *first);
            prop_assert_eq!(&place.source_cases, sources);
        }

        // Feeding entries one batch at a time into a store gives the same places.
        let mut store = RiskPlaceStore::default();
        for e in entries.iter().rev() {
            store.merge(derive_risk_places(std::slice::from_ref(e), &residences));
        }
        prop_assert_eq!(store.len(), derived.len());
        for p in derived.values() {
            let s = store.get(&p.place_key).unwrap();
            prop_assert_eq!(s.identified_at, p.identified_at);
            prop_assert_eq!(&s.source_cases, &p.source_cases);
        }
        Ok(())
    })
}

/// `in_window` holds exactly the places with `now - days < t <= now`.
pub fn window_is_half_open(cases: u32) -> Result<(), String> {
    let now = ts("2013-12-31T17:15:44Z");
    let offset = |days: i64| {
        let w = days * 86_400;
        prop_oneof![
            Just(0i64),
            Just(1),
            Just(w - 1),
            Just(w),
            Just(w + 1),
            Just(-1),
            -86_400i64..30 * 86_400
        ]
    };
    let strategy = (1i64..=14).prop_flat_map(move |days| {
        (
            Just(days),
            prop::collection::vec((place_strategy(), offset(days)), 0..12),
        )
    });
    check(cases, strategy, |(days, raw)| {
        let entries: Vec<TravelHistoryEntry> = raw
            .iter()
            .enumerate()
            .map(|(i, &(p, off))| entry(i % 3, 1, now - Duration::seconds(off), p))
            .collect();
        let mut store = RiskPlaceStore::default();
        store.merge(derive_risk_places(&entries, &HashMap::new()));

        let mut first: BTreeMap<OracleKey, Timestamp> = BTreeMap::new();
        for e in &entries {
            let k = oracle_key(&e.door_no, &e.street, &e.path.gn, &e.path.district);
            let t = first.entry(k).or_insert(e.entry_at);
            *t = (*t).min(e.entry_at);
        }
        let lo = now - Duration::days(days);
        let inside: Vec<Timestamp> = first
            .values()
            .copied()
            .filter(|t| *t > lo && *t <= now)
            .collect();
        let got = store.in_window(None, now, days);
        prop_assert_eq!(got.len(), inside.len());
        prop_assert!(got
            .iter()
            .all(|p| p.identified_at > lo && p.identified_at <= now));
        let (n, last) = store.window_stats("Jaffna", now, days);
        prop_assert_eq!(n, inside.len());
        prop_assert_eq!(last, inside.iter().max().copied());
        Ok(())
    })
}

/// Each live-update row counts exactly its district's cases registered on
/// the current Sri Lankan date, and the rows partition those cases.
pub fn cases_today_partition(cases: u32) -> Result<(), String> {
    let now = ts("2013-12-31T17:07:08Z");
    let paths: Vec<(String, String)> = fixtures::gazetteer()
        .paths()
        .into_iter()
        .filter(|p| p.gn != "Fort")
        .map(|p| (p.gn, p.district))
        .collect();
    let n = paths.len();
    let strategy = prop::collection::vec((0..n, 0i64..3 * 86_400), 0..15);
    check(cases, strategy, |mut raw| {
        raw.sort_by_key(|&(_, off)| std::cmp::Reverse(off));
        let h = harness(fixtures::context(), now - Duration::days(4));
        let mut registered: Vec<(String, Timestamp)> = Vec::new();
        for (i, &(p, off)) in raw.iter().enumerate() {
            let at = now - Duration::seconds(off);
            h.clock.set(at);
            let (gn, district) = &paths[p];
            let case = h.svc.register_case(&intake(gn, district, i + 1)).unwrap();
            prop_assert_eq!(case.registered_at, at);
            registered.push((district.clone(), at));
        }
        let live = h.svc.live_update(Some(now));
        let today = sl_date(now);
        let mut total = 0;
        for row in &live.rows {
            let mine: Vec<&(String, Timestamp)> = registered
                .iter()
                .filter(|(d, _)| *d == row.district)
                .collect();
            let expected = mine.iter().filter(|(_, t)| sl_date(*t) == today).count();
            prop_assert_eq!(row.cases_today, expected, "{}", row.district);
            prop_assert_eq!(row.last_case_at, mine.iter().map(|(_, t)| *t).max());
            total += row.cases_today;
        }
        prop_assert_eq!(
            total,
            registered
                .iter()
                .filter(|(_, t)| sl_date(*t) == today)
                .count()
        );
        Ok(())
    })
}

#[derive(Debug, Clone)]
pub enum Command {
    Assign {
        case: usize,
        assigner: usize,
        assignee: usize,
    },
    Attend {
        case: usize,
        officer: usize,
        confirmed: bool,
    },
    Travel {
        case: usize,
        officer: usize,
        day: u8,
    },
    Advance {
        minutes: i64,
    },
}

const JAFFNA_GNS: [&str; 4] = [
    "Chundikul North",
    "Gurunagar East",
    "Nallur North",
    "Kokuvil West",
];
const ASSIGNERS: [&str; 4] = [
    fixtures::MOH_JAFFNA,
    fixtures::MOH_NALLUR,
    fixtures::RE_JAFFNA,
    fixtures::PHI_NALLUR,
];
const FIELD: [&str; 3] = [fixtures::PHI_GURUNAGAR, fixtures::PHI_NALLUR, fixtures::ICN];

fn command_strategy() -> impl Strategy<Value = Command> {
    prop_oneof![
        (0usize..4, 0usize..4, 0usize..3).prop_map(|(case, assigner, assignee)| Command::Assign {
            case,
            assigner,
            assignee
        }),
        (0usize..4, 0usize..3, any::<bool>()).prop_map(|(case, officer, confirmed)| {
            Command::Attend {
                case,
                officer,
                confirmed,
            }
        }),
        (0usize..4, 0usize..3, 1u8..=14).prop_map(|(case, officer, day)| Command::Travel {
            case,
            officer,
            day
        }),
        (1i64..600).prop_map(|minutes| Command::Advance { minutes }),
    ]
}

/// A run: four Jaffna cases, then random commands. Returns the harness and
/// how many commands were accepted.
pub fn run_commands(auto_assign: bool, commands: &[Command]) -> (Harness, usize) {
    let ctx = fixtures::context_with(Settings {
        auto_assign,
        ..Settings::default()
    });
    let h = harness(ctx, fixtures::registered_at());
    let ids: Vec<CaseId> = JAFFNA_GNS
        .iter()
        .enumerate()
        .map(|(i, gn)| {
            h.svc
                .register_case(&intake(gn, "Jaffna", i + 1))
                .unwrap()
                .case_id
        })
        .collect();
    let mut accepted = 0;
    for cmd in commands {
        let ok = match *cmd {
            Command::Assign {
                case,
                assigner,
                assignee,
            } => h
                .svc
                .assign(&ids[case], ASSIGNERS[assigner], FIELD[assignee])
                .is_ok(),
            Command::Attend {
                case,
                officer,
                confirmed,
            } => {
                let order = h
                    .svc
                    .with_state(|s| s.order_for_case(&ids[case]).map(|o| o.order_id.clone()))
                    .unwrap_or_else(|| OrderId("W999999".into()));
                let outcome = if confirmed {
                    Outcome::Confirmed
                } else {
                    Outcome::NotDengue
                };
                h.svc
                    .record_attendance(&order, FIELD[officer], outcome)
                    .is_ok()
            }
            Command::Travel { case, officer, day } => {
                let e = TravelEntryInput {
                    day_index: day,
                    door_no: "12".into(),
                    street: "Main Street".into(),
                    gn_division: "Nallur North".into(),
                    district: Some("Jaffna".into()),
                    contact_tp: "776544652".into(),
                };
                h.svc
                    .submit_travel_history(&ids[case], FIELD[officer], &[e])
                    .is_ok()
            }
            Command::Advance { minutes } => {
                h.clock.advance(Duration::minutes(minutes));
                true
            }
        };
        accepted += ok as usize;
    }
    (h, accepted)
}

fn state_bytes(s: &State) -> Vec<u8> {
    serde_json::to_vec(s).unwrap()
}

/// Rejected commands leave no trace, and every recorded status sequence is
/// a path through the legal transitions.
pub fn state_machine_legality(cases: u32) -> Result<(), String> {
    let strategy = (
        any::<bool>(),
        prop::collection::vec(command_strategy(), 0..25),
    );
    check(cases, strategy, |(auto_assign, commands)| {
        let (h, _) = run_commands(auto_assign, &[]);
        let ids: Vec<CaseId> = (1..=4).map(CaseId::from_seq).collect();
        for cmd in &commands {
            let before = h.svc.state();
            let result: Result<(), String> = match *cmd {
                Command::Assign {
                    case,
                    assigner,
                    assignee,
                } => h
                    .svc
                    .assign(&ids[case], ASSIGNERS[assigner], FIELD[assignee])
                    .map(|_| ())
                    .map_err(|e| e.to_string()),
                Command::Attend {
                    case,
                    officer,
                    confirmed,
                } => {
                    let order = before
                        .order_for_case(&ids[case])
                        .map(|o| o.order_id.clone())
                        .unwrap_or_else(|| OrderId("W999999".into()));
                    let outcome = if confirmed {
                        Outcome::Confirmed
                    } else {
                        Outcome::NotDengue
                    };
                    h.svc
                        .record_attendance(&order, FIELD[officer], outcome)
                        .map(|_| ())
                        .map_err(|e| e.to_string())
                }
                Command::Travel { case, officer, day } => {
                    let e = TravelEntryInput {
                        day_index: day,
                        door_no: "12".into(),
                        street: "Main Street".into(),
                        gn_division: "Nallur North".into(),
                        district: Some("Jaffna".into()),
                        contact_tp: "776544652".into(),
                    };
                    h.svc
                        .submit_travel_history(&ids[case], FIELD[officer], &[e])
                        .map(|_| ())
                        .map_err(|e| e.to_string())
                }
                Command::Advance { minutes } => {
                    h.clock.advance(Duration::minutes(minutes));
                    Ok(())
                }
            };
            if result.is_err() {
                prop_assert!(
                    state_bytes(&before) == state_bytes(&h.svc.state()),
                    "rejected {:?} changed state",
                    cmd
                );
            }
        }
        let state = h.svc.state();
        for (id, case) in &state.cases {
            let history = &state.status_history[id];
            prop_assert_eq!(history[0], AttentionStatus::Reported);
            for w in history.windows(2) {
                prop_assert!(w[0].can_transition_to(w[1]), "{} -> {}", w[0], w[1]);
            }
            prop_assert_eq!(*history.last().unwrap(), case.attention);
            prop_assert_eq!(
                state.id_register.contains_key(id),
                case.attention == AttentionStatus::Confirmed
            );
            if case.attention != AttentionStatus::Reported {
                prop_assert!(state.order_for_case(id).is_some());
            }
        }
        Ok(())
    })
}

/// Replaying the log from empty, or from any prefix snapshot, rebuilds the
/// live state byte for byte.
pub fn replay_determinism(cases: u32) -> Result<(), String> {
    let strategy = (
        any::<bool>(),
        prop::collection::vec(command_strategy(), 0..25),
        any::<prop::sample::Index>(),
    );
    check(cases, strategy, |(auto_assign, commands, cut)| {
        let (h, _) = run_commands(auto_assign, &commands);
        let events: Vec<Event> = h.svc.events().unwrap();
        let live = state_bytes(&h.svc.state());
        prop_assert!(state_bytes(&State::replay(&events).unwrap()) == live);
        let report = h.svc.replay_check().unwrap();
        prop_assert!(report.deterministic && report.matches_live_state);
        prop_assert_eq!(report.events, events.len() as u64);
        for (i, e) in events.iter().enumerate() {
            prop_assert_eq!(e.id, i as u64 + 1);
        }
        let k = cut.index(events.len() + 1);
        let snapshot: State =
            serde_json::from_slice(&state_bytes(&State::replay(&events[..k]).unwrap())).unwrap();
        let mut resumed = snapshot;
        for e in &events[k..] {
            resumed.apply(e).unwrap();
        }
        prop_assert!(state_bytes(&resumed) == live);
        Ok(())
    })
}

fn fault_strategy() -> impl Strategy<Value = Fault> {
    prop_oneof![
        Just(Fault::Deliver),
        Just(Fault::Fail),
        Just(Fault::DeliverThenFail)
    ]
}

/// Under any fault script, retries drive every notification to Sent and
/// each is delivered exactly once.
pub fn alerts_exactly_once(cases: u32) -> Result<(), String> {
    let strategy = (1usize..4, prop::collection::vec(fault_strategy(), 0..12));
    check(cases, strategy, |(n_cases, script)| {
        let settings = Settings {
            retry: RetryPolicy {
                max_retries: 16,
                base_backoff: Duration::seconds(60),
            },
            ..Settings::default()
        };
        let transport = MemoryTransport::scripted(script.clone(), Fault::Deliver);
        let h = harness_with(
            fixtures::context_with(settings),
            fixtures::registered_at(),
            transport,
        );
        for i in 0..n_cases {
            h.svc
                .register_case(&intake(JAFFNA_GNS[i % 4], "Jaffna", i + 1))
                .unwrap();
        }
        for _ in 0..100 {
            let next = h
                .svc
                .notifications()
                .iter()
                .filter(|n| n.state == NotificationState::Pending)
                .filter_map(|n| n.next_attempt_at)
                .min();
            let Some(next) = next else { break };
            h.clock.set(next);
            h.svc.retry_pending().unwrap();
        }
        let notes = h.svc.notifications();
        prop_assert!(!notes.is_empty());
        prop_assert!(
            notes.iter().all(|n| n.state == NotificationState::Sent),
            "{:?}",
            notes
        );
        let delivered: Vec<String> = h.transport.delivered().into_iter().map(|r| r.key).collect();
        let unique: BTreeSet<&String> = delivered.iter().collect();
        prop_assert_eq!(unique.len(), delivered.len());
        let keys: BTreeSet<String> = notes.iter().map(|n| n.key.to_string()).collect();
        prop_assert_eq!(keys, delivered.iter().cloned().collect::<BTreeSet<_>>());
        // Every call is accounted for: one per attempt recorded in state.
        let attempts: u32 = notes.iter().map(|n| n.attempts).sum();
        prop_assert_eq!(attempts as usize, h.transport.calls());
        Ok(())
    })
}

/// Events, records, weeks and the gazetteer survive their text forms.
pub fn serialization_round_trips(cases: u32) -> Result<(), String> {
    let strategy = (
        any::<bool>(),
        prop::collection::vec(command_strategy(), 0..15),
        "[A-Za-zÀ-ÿ஀-௿ '.-]{1,24}",
        0i64..20_000,
    );
    check(cases, strategy, |(auto_assign, commands, name, day)| {
        let (h, _) = run_commands(auto_assign, &commands);
        let mut form = intake("Chundikul North", "Jaffna", 9);
        form.first_name = name.clone();
        if !name.trim().is_empty() {
            let case = h.svc.register_case(&form).unwrap();
            let back: dengue_surveillance::CaseRecord =
                serde_json::from_str(&serde_json::to_string(&case).unwrap()).unwrap();
            prop_assert_eq!(back, case);
        }
        for e in h.svc.events().unwrap() {
            let line = e.to_line();
            prop_assert!(!line.contains('\n'));
            let back: Event = serde_json::from_str(&line).unwrap();
            prop_assert_eq!(back, e);
        }
        for n in h.svc.notifications() {
            let back = serde_json::from_str(&serde_json::to_string(&n).unwrap()).unwrap();
            prop_assert_eq!(n, back);
        }
        let state = h.svc.state();
        let back: State = serde_json::from_slice(&state_bytes(&state)).unwrap();
        prop_assert!(back == state);
        let date = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + Duration::days(day);
        for conv in [EpiWeekConvention::Iso, EpiWeekConvention::SundayStart] {
            let w = EpiWeek::of(date, conv);
            prop_assert_eq!(w.to_string().parse::<EpiWeek>().unwrap(), w);
            let json = serde_json::to_string(&w).unwrap();
            prop_assert_eq!(serde_json::from_str::<EpiWeek>(&json).unwrap(), w);
            let start = w.start(conv).unwrap();
            prop_assert!(start <= date && date < start + Duration::days(7));
        }
        let g = fixtures::gazetteer();
        prop_assert_eq!(
            dengue_surveillance::Gazetteer::from_toml_str(&g.to_toml_string()).unwrap(),
            g
        );
        Ok(())
    })
}

pub type Property = fn(u32) -> Result<(), String>;

pub const PROPERTIES: [(&str, Property); 7] = [
    (
        "risk-place derivation equals brute-force oracle",
        risk_derivation_matches_oracle,
    ),
    ("window boundary is half-open", window_is_half_open),
    ("cases_today partitions by district", cases_today_partition),
    ("state-machine legality", state_machine_legality),
    ("event-log replay determinism", replay_determinism),
    (
        "alert exactly-once under fault scripts",
        alerts_exactly_once,
    ),
    ("serialization round-trips", serialization_round_trips),
];

/// A service config in `dir` using the shipped configuration files.
pub fn temp_config(dir: &std::path::Path, extra: &str) -> std::path::PathBuf {
    let shipped = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("config");
    let text = format!(
        "gazetteer = {:?}\nvocabularies = {:?}\nofficers = {:?}\nalert_rules = {:?}\ndata_dir = {:?}\n{extra}",
        shipped.join("gazetteer.toml"),
        shipped.join("vocab"),
        shipped.join("officers.toml"),
        shipped.join("alert_rules.toml"),
        dir.join("data"),
    );
    let path = dir.join("surveillance.toml");
    std::fs::write(&path, text).unwrap();
    path
}
