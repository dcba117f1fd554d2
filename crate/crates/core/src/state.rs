//! Event-sourced state. [`State::apply`] is the only way state changes, so
//! replaying a log from empty reconstructs it exactly.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::alerting::Notification;
use crate::case_registry::{CaseId, CaseRecord};
use crate::event::{Event, EventPayload};
use crate::reporting::WeeklyReturn;
use crate::time::Timestamp;
use crate::travel_risk::{derive_risk_places, PlaceKey, RiskPlaceStore, TravelHistoryEntry};
use crate::workflow::{AttentionStatus, IdRegisterEntry, OrderId, WorkOrder};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event {event_id} ({kind}) cannot be applied: {reason}")]
pub struct ApplyError {
    pub event_id: u64,
    pub kind: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub last_event_id: u64,
    pub cases: BTreeMap<CaseId, CaseRecord>,
    pub work_orders: BTreeMap<OrderId, WorkOrder>,
    pub id_register: BTreeMap<CaseId, IdRegisterEntry>,
    pub travel: BTreeMap<CaseId, BTreeMap<u8, TravelHistoryEntry>>,
    pub risk_places: RiskPlaceStore,
    /// Keyed by idempotency key string.
    pub notifications: BTreeMap<String, Notification>,
    /// Keyed by [`WeeklyReturn::store_key`].
    pub weekly_returns: BTreeMap<String, WeeklyReturn>,
    /// Status history per case, for auditing the state machine.
    pub status_history: BTreeMap<CaseId, Vec<AttentionStatus>>,
}

impl State {
    pub fn last_registered_at(&self) -> Option<Timestamp> {
        self.cases.values().map(|c| c.registered_at).max()
    }

    pub fn order_for_case(&self, case_id: &CaseId) -> Option<&WorkOrder> {
        self.work_orders.values().find(|o| &o.case_id == case_id)
    }

    fn set_status(
        &mut self,
        event: &Event,
        case_id: &CaseId,
        to: AttentionStatus,
    ) -> Result<(), ApplyError> {
        let case = self
            .cases
            .get_mut(case_id)
            .ok_or_else(|| err(event, format!("unknown case {case_id}")))?;
        if !case.attention.can_transition_to(to) {
            return Err(err(
                event,
                format!("illegal transition {} -> {to}", case.attention),
            ));
        }
        case.attention = to;
        self.status_history
            .entry(case_id.clone())
            .or_default()
            .push(to);
        Ok(())
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ApplyError> {
        if event.id != self.last_event_id + 1 {
            return Err(err(
                event,
                format!("expected id {}", self.last_event_id + 1),
            ));
        }
        match &event.payload {
            EventPayload::CaseRegistered { case } => {
                if self.cases.contains_key(&case.case_id) {
                    return Err(err(
                        event,
                        format!("case {} already registered", case.case_id),
                    ));
                }
                self.status_history
                    .insert(case.case_id.clone(), vec![case.attention]);
                self.cases.insert(case.case_id.clone(), case.clone());
            }
            EventPayload::CaseAssigned { order } => {
                self.set_status(event, &order.case_id, AttentionStatus::Assigned)?;
                self.work_orders
                    .insert(order.order_id.clone(), order.clone());
            }
            EventPayload::CaseAttended {
                order_id,
                case_id,
                outcome,
                attended_at,
                ..
            } => {
                self.set_status(event, case_id, AttentionStatus::Attended)?;
                let order = self
                    .work_orders
                    .get_mut(order_id)
                    .ok_or_else(|| err(event, format!("unknown work order {order_id}")))?;
                order.attended_at = Some(*attended_at);
                order.outcome = Some(*outcome);
            }
            EventPayload::CaseConfirmed { entry } => {
                self.set_status(event, &entry.case_id, AttentionStatus::Confirmed)?;
                self.id_register
                    .insert(entry.case_id.clone(), entry.clone());
            }
            EventPayload::CaseRuledOut { case_id, .. } => {
                self.set_status(event, case_id, AttentionStatus::NotDengue)?;
            }
            EventPayload::TravelHistoryRecorded {
                case_id, entries, ..
            } => {
                let case = self
                    .cases
                    .get(case_id)
                    .ok_or_else(|| err(event, format!("unknown case {case_id}")))?;
                let residences = HashMap::from([(case_id.clone(), PlaceKey::of_residence(case))]);
                self.risk_places
                    .merge(derive_risk_places(entries, &residences));
                let days = self.travel.entry(case_id.clone()).or_default();
                for e in entries {
                    days.insert(e.day_index, e.clone());
                }
            }
            EventPayload::NotificationStateChanged { notification } => {
                self.notifications
                    .insert(notification.key.to_string(), notification.clone());
            }
            EventPayload::WeeklyReturnGenerated { weekly_return } => {
                self.weekly_returns.insert(
                    WeeklyReturn::store_key(&weekly_return.moh_area, weekly_return.epi_week),
                    weekly_return.clone(),
                );
            }
        }
        self.last_event_id = event.id;
        Ok(())
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<State, ApplyError> {
        let mut s = State::default();
        for e in events {
            s.apply(e)?;
        }
        Ok(s)
    }
}

fn err(event: &Event, reason: String) -> ApplyError {
    ApplyError {
        event_id: event.id,
        kind: event.payload.kind(),
        reason,
    }
}
