//! The surveillance service: commands validate against current state,
//! append events to the log, then fold them into state. A single writer
//! lock serializes commands; readers take consistent snapshots between
//! batches.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::Serialize;

use crate::alerting::{
    self, AlertEvent, FileTransport, Notification, NotificationState, Transport, TriggerKind,
};
use crate::case_registry::{self, CaseError, CaseFilter, CaseId, CaseIntakeForm, CaseRecord};
use crate::config::{ConfigError, Context, ServiceConfig};
use crate::event::{Event, EventPayload};
use crate::gazetteer::MohRef;
use crate::log::{self, EventLog, LogError};
use crate::reporting::{self, EpiWeek, LiveUpdate, ReportError, ResponseCycle, WeeklyReturn};
use crate::state::State;
use crate::time::{Clock, SystemClock, Timestamp};
use crate::travel_risk::{
    self, derive_risk_places, PlaceKey, RiskPlace, TravelEntryInput, TravelError,
};
use crate::workflow::{
    self, IdRegisterEntry, Officer, OrderId, Outcome, WorkOrder, WorkflowError, Worklist,
};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Travel(#[from] TravelError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown officer {0:?}")]
    UnknownOfficer(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

struct Writer {
    log: EventLog,
    transport: Box<dyn Transport>,
    snapshot_path: Option<PathBuf>,
    since_snapshot: u64,
    last_at: Option<Timestamp>,
}

pub struct Surveillance {
    ctx: RwLock<Arc<Context>>,
    state: RwLock<State>,
    writer: Mutex<Writer>,
    clock: Arc<dyn Clock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub events: u64,
    pub deterministic: bool,
    pub matches_live_state: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub events: u64,
    pub cases_total: usize,
    pub cases_by_status: BTreeMap<String, usize>,
    pub id_register_entries: usize,
    pub risk_places_total: usize,
    pub notifications_pending: usize,
    pub notifications_sent: usize,
    pub notifications_failed: usize,
    pub epi_week: EpiWeek,
    pub timeliness: f64,
    pub baseline_cycle_days: u32,
}

impl Surveillance {
    pub fn new(
        ctx: Context,
        log: EventLog,
        events: &[Event],
        transport: Box<dyn Transport>,
        clock: Arc<dyn Clock>,
        snapshot_path: Option<PathBuf>,
    ) -> Result<Self, ServiceError> {
        let mut state = snapshot_path
            .as_deref()
            .and_then(log::read_snapshot)
            .filter(|s| s.last_event_id <= log.last_id())
            .unwrap_or_default();
        let from = state.last_event_id;
        for e in events.iter().filter(|e| e.id > from) {
            state.apply(e).map_err(LogError::from)?;
        }
        let last_at = events.last().map(|e| e.occurred_at);
        Ok(Surveillance {
            ctx: RwLock::new(Arc::new(ctx)),
            state: RwLock::new(state),
            writer: Mutex::new(Writer {
                log,
                transport,
                snapshot_path,
                since_snapshot: 0,
                last_at,
            }),
            clock,
        })
    }

    pub fn in_memory(ctx: Context, transport: Box<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        Self::new(ctx, EventLog::in_memory(), &[], transport, clock, None)
            .expect("empty log always loads")
    }

    /// Opens the data directory named by `cfg`, recovering state from the
    /// snapshot and log. `repair` truncates a corrupt log tail.
    pub fn open(cfg: &ServiceConfig, repair: bool) -> Result<Self, ServiceError> {
        Self::open_with(cfg, repair, Arc::new(SystemClock))
    }

    pub fn open_with(
        cfg: &ServiceConfig,
        repair: bool,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServiceError> {
        let ctx = Context::load(cfg)?;
        std::fs::create_dir_all(&cfg.data_dir)?;
        let (log, events) = EventLog::open(cfg.events_path(), repair)?;
        let transport = FileTransport::open(cfg.outbox_path())?;
        Self::new(
            ctx,
            log,
            &events,
            Box::new(transport),
            clock,
            Some(cfg.snapshot_path()),
        )
    }

    pub fn context(&self) -> Arc<Context> {
        self.ctx.read().unwrap().clone()
    }

    /// Swaps configuration (e.g. a reloaded gazetteer). In-flight calls
    /// finish on the old snapshot.
    pub fn reload_context(&self, ctx: Context) {
        *self.ctx.write().unwrap() = Arc::new(ctx);
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Runs `f` on a consistent snapshot of the state.
    pub fn with_state<T>(&self, f: impl FnOnce(&State) -> T) -> T {
        f(&self.state.read().unwrap())
    }

    pub fn state(&self) -> State {
        self.state.read().unwrap().clone()
    }

    pub fn events(&self) -> Result<Vec<Event>, ServiceError> {
        Ok(self.writer.lock().unwrap().log.events()?)
    }

    fn officer(&self, ctx: &Context, id: &str) -> Result<Officer, ServiceError> {
        ctx.officers
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownOfficer(id.to_string()))
    }

    fn lock(&self) -> (MutexGuard<'_, Writer>, Timestamp) {
        let w = self.writer.lock().unwrap();
        let now = self.clock.now();
        let now = w.last_at.map_or(now, |last| now.max(last));
        (w, now)
    }

    /// Appends a batch and folds it into state.
    fn commit(
        &self,
        w: &mut Writer,
        payloads: Vec<EventPayload>,
        at: Timestamp,
    ) -> Result<Vec<Event>, ServiceError> {
        if payloads.is_empty() {
            return Ok(Vec::new());
        }
        let batch = w.log.stage(payloads, at);
        w.log.write(&batch)?;
        {
            let mut state = self.state.write().unwrap();
            for e in &batch {
                state.apply(e).map_err(LogError::from)?;
            }
        }
        w.last_at = Some(at);
        w.since_snapshot += batch.len() as u64;
        let every = self.context().settings.snapshot_every;
        if let Some(path) = &w.snapshot_path {
            if every > 0 && w.since_snapshot >= every {
                log::write_snapshot(path, &self.state.read().unwrap())?;
                w.since_snapshot = 0;
            }
        }
        Ok(batch)
    }

    /// Writes a snapshot now (no-op for in-memory services).
    pub fn snapshot(&self) -> Result<(), ServiceError> {
        let mut w = self.writer.lock().unwrap();
        if let Some(path) = &w.snapshot_path {
            log::write_snapshot(path, &self.state.read().unwrap())?;
            w.since_snapshot = 0;
        }
        Ok(())
    }

    fn attempt_and_record(
        &self,
        w: &mut Writer,
        ctx: &Context,
        n: &Notification,
        now: Timestamp,
    ) -> Result<(), ServiceError> {
        let next = alerting::attempt(n, w.transport.as_mut(), now, ctx.settings.retry);
        self.commit(
            w,
            vec![EventPayload::NotificationStateChanged { notification: next }],
            now,
        )?;
        Ok(())
    }

    fn dispatch_locked(
        &self,
        w: &mut Writer,
        ctx: &Context,
        event: &AlertEvent,
        now: Timestamp,
    ) -> Result<Vec<Notification>, ServiceError> {
        let planned = {
            let state = self.state.read().unwrap();
            alerting::plan(
                event,
                &ctx.rules,
                &ctx.officers,
                &state.notifications,
                ctx.settings.zone,
            )
        };
        self.commit(
            w,
            planned
                .iter()
                .map(|n| EventPayload::NotificationStateChanged {
                    notification: n.clone(),
                })
                .collect(),
            now,
        )?;
        for n in &planned {
            self.attempt_and_record(w, ctx, n, now)?;
        }
        let state = self.state.read().unwrap();
        Ok(planned
            .iter()
            .filter_map(|n| state.notifications.get(&n.key.to_string()).cloned())
            .collect())
    }

    /// Re-attempts every due pending notification once. Returns how many
    /// were attempted.
    pub fn retry_pending(&self) -> Result<usize, ServiceError> {
        let ctx = self.context();
        let (mut w, now) = self.lock();
        let due: Vec<Notification> = self.with_state(|s| {
            s.notifications
                .values()
                .filter(|n| n.is_due(now))
                .cloned()
                .collect()
        });
        for n in &due {
            self.attempt_and_record(&mut w, &ctx, n, now)?;
        }
        Ok(due.len())
    }

    /// Registers a hospital notification. Alerts are attempted after the
    /// case is committed; transport failures leave them pending.
    pub fn register_case(&self, form: &CaseIntakeForm) -> Result<CaseRecord, ServiceError> {
        let ctx = self.context();
        let (mut w, now) = self.lock();
        let valid = case_registry::validate_intake(form, &ctx.gazetteer, &ctx.vocabularies)?;
        let (record, auto_order) = self.with_state(|s| {
            let registered_at = s.last_registered_at().map_or(now, |last| now.max(last));
            let record =
                valid.into_record(CaseId::from_seq(s.cases.len() as u64 + 1), registered_at);
            let order = ctx
                .settings
                .auto_assign
                .then(|| ctx.officers.sole_phi_for(&record.path))
                .flatten()
                .map(|phi| workflow::auto_work_order(s, &record, phi));
            (record, order)
        });
        let mut payloads = vec![EventPayload::CaseRegistered {
            case: record.clone(),
        }];
        if let Some(order) = auto_order {
            payloads.push(EventPayload::CaseAssigned { order });
        }
        let batch = self.commit(&mut w, payloads, now)?;
        let alert = AlertEvent {
            event_id: batch[0].id,
            kind: TriggerKind::CaseRegistered,
            at: now,
            case: record.clone(),
            new_places: vec![],
        };
        self.dispatch_locked(&mut w, &ctx, &alert, now)?;
        drop(w);
        Ok(self.with_state(|s| s.cases[&record.case_id].clone()))
    }

    pub fn get_case(&self, case_id: &CaseId) -> Result<CaseRecord, ServiceError> {
        self.with_state(|s| s.cases.get(case_id).cloned())
            .ok_or_else(|| CaseError::NotFound(case_id.clone()).into())
    }

    pub fn list_cases(&self, filter: &CaseFilter) -> Vec<CaseRecord> {
        let zone = self.context().settings.zone;
        self.with_state(|s| {
            case_registry::list_cases(&s.cases, filter, zone)
                .into_iter()
                .cloned()
                .collect()
        })
    }

    pub fn suggest(
        &self,
        target: &str,
        prefix: &str,
        limit: usize,
    ) -> Result<Vec<String>, ServiceError> {
        let ctx = self.context();
        Ok(case_registry::suggest(
            target,
            prefix,
            limit,
            &ctx.gazetteer,
            &ctx.vocabularies,
        )?)
    }

    pub fn assign(
        &self,
        case_id: &CaseId,
        assigner_id: &str,
        assignee_id: &str,
    ) -> Result<WorkOrder, ServiceError> {
        let ctx = self.context();
        let assigner = self.officer(&ctx, assigner_id)?;
        let assignee = self.officer(&ctx, assignee_id)?;
        let (mut w, now) = self.lock();
        let order = self
            .with_state(|s| workflow::plan_assign(s, case_id, Some(&assigner), &assignee, now))?;
        self.commit(
            &mut w,
            vec![EventPayload::CaseAssigned {
                order: order.clone(),
            }],
            now,
        )?;
        Ok(order)
    }

    /// Records the PHI's visit and its outcome in one step.
    pub fn record_attendance(
        &self,
        order_id: &OrderId,
        officer_id: &str,
        outcome: Outcome,
    ) -> Result<(WorkOrder, Option<IdRegisterEntry>), ServiceError> {
        let ctx = self.context();
        let officer = self.officer(&ctx, officer_id)?;
        let (mut w, now) = self.lock();
        let (order, entry) =
            self.with_state(|s| workflow::plan_attendance(s, order_id, &officer, outcome, now))?;
        let at = order.attended_at.unwrap_or(now);
        let mut payloads = vec![EventPayload::CaseAttended {
            order_id: order.order_id.clone(),
            case_id: order.case_id.clone(),
            officer_id: officer.officer_id.clone(),
            outcome,
            attended_at: at,
        }];
        payloads.push(match &entry {
            Some(e) => EventPayload::CaseConfirmed { entry: e.clone() },
            None => EventPayload::CaseRuledOut {
                case_id: order.case_id.clone(),
                at,
            },
        });
        let batch = self.commit(&mut w, payloads, now)?;
        if entry.is_some() {
            let case = self.with_state(|s| s.cases[&order.case_id].clone());
            let alert = AlertEvent {
                event_id: batch[1].id,
                kind: TriggerKind::CaseConfirmed,
                at: now,
                case,
                new_places: vec![],
            };
            self.dispatch_locked(&mut w, &ctx, &alert, now)?;
        }
        Ok((order, entry))
    }

    /// Stores a travel history and returns the risk places it touched.
    pub fn submit_travel_history(
        &self,
        case_id: &CaseId,
        officer_id: &str,
        entries: &[TravelEntryInput],
    ) -> Result<Vec<RiskPlace>, ServiceError> {
        let ctx = self.context();
        let officer = self.officer(&ctx, officer_id)?;
        let (mut w, now) = self.lock();
        let (entries, keys, new_keys) = self.with_state(|s| {
            let entries = travel_risk::validate_submission(
                s.cases.get(case_id),
                case_id,
                &officer,
                entries,
                &ctx.gazetteer,
            )?;
            let residence = PlaceKey::of_residence(&s.cases[case_id]);
            let derived =
                derive_risk_places(&entries, &HashMap::from([(case_id.clone(), residence)]));
            let keys: Vec<PlaceKey> = derived.keys().cloned().collect();
            let new_keys: Vec<PlaceKey> = keys
                .iter()
                .filter(|k| !s.risk_places.contains(k))
                .cloned()
                .collect();
            Ok::<_, TravelError>((entries, keys, new_keys))
        })?;
        let batch = self.commit(
            &mut w,
            vec![EventPayload::TravelHistoryRecorded {
                case_id: case_id.clone(),
                officer_id: officer.officer_id.clone(),
                entries,
            }],
            now,
        )?;
        let (affected, case, new_places) = self.with_state(|s| {
            let affected: Vec<RiskPlace> = keys
                .iter()
                .filter_map(|k| s.risk_places.get(k).cloned())
                .collect();
            let new_places: Vec<RiskPlace> = new_keys
                .iter()
                .filter_map(|k| s.risk_places.get(k).cloned())
                .collect();
            (affected, s.cases[case_id].clone(), new_places)
        });
        if !new_places.is_empty() {
            let alert = AlertEvent {
                event_id: batch[0].id,
                kind: TriggerKind::RiskPlaceIdentified,
                at: now,
                case,
                new_places,
            };
            self.dispatch_locked(&mut w, &ctx, &alert, now)?;
        }
        Ok(affected)
    }

    pub fn phi_worklist(&self, officer_id: &str) -> Result<Worklist, ServiceError> {
        let ctx = self.context();
        let officer = self.officer(&ctx, officer_id)?;
        Ok(self.with_state(|s| workflow::phi_worklist(s, &officer, ctx.settings.zone))?)
    }

    pub fn live_update(&self, now: Option<Timestamp>) -> LiveUpdate {
        let ctx = self.context();
        let now = now.unwrap_or_else(|| self.clock.now());
        self.with_state(|s| reporting::live_update(s, &ctx.gazetteer, now, ctx.settings.zone))
    }

    /// Risk places identified in `(now - window_days, now]`.
    pub fn risk_places(
        &self,
        district: Option<&str>,
        window_days: i64,
        now: Option<Timestamp>,
    ) -> Vec<RiskPlace> {
        let now = now.unwrap_or_else(|| self.clock.now());
        self.with_state(|s| {
            s.risk_places
                .in_window(district, now, window_days)
                .into_iter()
                .cloned()
                .collect()
        })
    }

    fn moh(&self, ctx: &Context, district: &str, moh_area: &str) -> Result<MohRef, ServiceError> {
        ctx.gazetteer
            .find_moh(district, moh_area)
            .ok_or_else(|| ReportError::UnknownMohArea(format!("{district}/{moh_area}")).into())
    }

    /// Computes a weekly return without recording it.
    pub fn weekly_return(
        &self,
        district: &str,
        moh_area: &str,
        week: EpiWeek,
    ) -> Result<WeeklyReturn, ServiceError> {
        let ctx = self.context();
        let moh = self.moh(&ctx, district, moh_area)?;
        let now = self.clock.now();
        Ok(self
            .with_state(|s| reporting::weekly_return(s, &moh, week, now, ctx.settings.report()))?)
    }

    /// Generates and records the return of one MOH area.
    pub fn generate_weekly_return(
        &self,
        district: &str,
        moh_area: &str,
        week: EpiWeek,
    ) -> Result<WeeklyReturn, ServiceError> {
        let ctx = self.context();
        let moh = self.moh(&ctx, district, moh_area)?;
        self.generate(&ctx, &[moh], week).map(|mut v| v.remove(0))
    }

    /// Generates and records returns for every MOH area, zero counts included.
    pub fn generate_all(&self, week: EpiWeek) -> Result<Vec<WeeklyReturn>, ServiceError> {
        let ctx = self.context();
        self.generate(&ctx, &ctx.gazetteer.moh_areas(), week)
    }

    fn generate(
        &self,
        ctx: &Context,
        areas: &[MohRef],
        week: EpiWeek,
    ) -> Result<Vec<WeeklyReturn>, ServiceError> {
        let (mut w, now) = self.lock();
        let returns = self.with_state(|s| {
            areas
                .iter()
                .map(|m| reporting::weekly_return(s, m, week, now, ctx.settings.report()))
                .collect::<Result<Vec<_>, _>>()
        })?;
        self.commit(
            &mut w,
            returns
                .iter()
                .map(|r| EventPayload::WeeklyReturnGenerated {
                    weekly_return: r.clone(),
                })
                .collect(),
            now,
        )?;
        Ok(returns)
    }

    pub fn recorded_returns(&self, week: EpiWeek) -> Vec<WeeklyReturn> {
        self.with_state(|s| {
            s.weekly_returns
                .values()
                .filter(|r| r.epi_week == week)
                .cloned()
                .collect()
        })
    }

    pub fn timeliness(&self, week: EpiWeek) -> f64 {
        let ctx = self.context();
        self.with_state(|s| reporting::timeliness(s, &ctx.gazetteer, week))
    }

    pub fn response_cycle(&self, case_id: &CaseId) -> Result<ResponseCycle, ServiceError> {
        Ok(self.with_state(|s| reporting::response_cycle(s, case_id))?)
    }

    pub fn notifications(&self) -> Vec<Notification> {
        self.with_state(|s| s.notifications.values().cloned().collect())
    }

    pub fn metrics(&self) -> Metrics {
        let ctx = self.context();
        let now = self.clock.now();
        let week = EpiWeek::of(ctx.settings.zone.local_date(&now), ctx.settings.convention);
        self.with_state(|s| {
            let mut by_status = BTreeMap::new();
            for c in s.cases.values() {
                *by_status.entry(c.attention.to_string()).or_insert(0) += 1;
            }
            let count = |st| s.notifications.values().filter(|n| n.state == st).count();
            Metrics {
                events: s.last_event_id,
                cases_total: s.cases.len(),
                cases_by_status: by_status,
                id_register_entries: s.id_register.len(),
                risk_places_total: s.risk_places.len(),
                notifications_pending: count(NotificationState::Pending),
                notifications_sent: count(NotificationState::Sent),
                notifications_failed: count(NotificationState::Failed),
                epi_week: week,
                timeliness: reporting::timeliness(s, &ctx.gazetteer, week),
                baseline_cycle_days: reporting::baseline().total_days,
            }
        })
    }

    /// Replays the full log twice from empty and compares both results with
    /// each other and with the live state.
    pub fn replay_check(&self) -> Result<ReplayReport, ServiceError> {
        let _w = self.writer.lock().unwrap();
        let events = _w.log.events()?;
        let a = State::replay(&events).map_err(LogError::from)?;
        let b = State::replay(&events).map_err(LogError::from)?;
        let bytes = |s: &State| serde_json::to_vec(s).expect("state serializes");
        let live = self.state.read().unwrap();
        Ok(ReplayReport {
            events: events.len() as u64,
            deterministic: bytes(&a) == bytes(&b),
            matches_live_state: bytes(&a) == bytes(&live),
        })
    }
}
