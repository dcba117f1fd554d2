//! Event records of the append-only log.

use serde::{Deserialize, Serialize};

use crate::alerting::Notification;
use crate::case_registry::{CaseId, CaseRecord};
use crate::reporting::WeeklyReturn;
use crate::time::Timestamp;
use crate::travel_risk::TravelHistoryEntry;
use crate::workflow::{IdRegisterEntry, OfficerId, OrderId, Outcome, WorkOrder};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub v: u32,
    /// Gapless, starting at 1.
    pub id: u64,
    pub occurred_at: Timestamp,
    /// Set on the last event of each atomically appended batch.
    pub commit: bool,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventPayload {
    CaseRegistered {
        case: CaseRecord,
    },
    CaseAssigned {
        order: WorkOrder,
    },
    CaseAttended {
        order_id: OrderId,
        case_id: CaseId,
        officer_id: OfficerId,
        outcome: Outcome,
        attended_at: Timestamp,
    },
    CaseConfirmed {
        entry: IdRegisterEntry,
    },
    CaseRuledOut {
        case_id: CaseId,
        at: Timestamp,
    },
    TravelHistoryRecorded {
        case_id: CaseId,
        officer_id: OfficerId,
        entries: Vec<TravelHistoryEntry>,
    },
    NotificationStateChanged {
        notification: Notification,
    },
    WeeklyReturnGenerated {
        weekly_return: WeeklyReturn,
    },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::CaseRegistered { .. } => "CaseRegistered",
            EventPayload::CaseAssigned { .. } => "CaseAssigned",
            EventPayload::CaseAttended { .. } => "CaseAttended",
            EventPayload::CaseConfirmed { .. } => "CaseConfirmed",
            EventPayload::CaseRuledOut { .. } => "CaseRuledOut",
            EventPayload::TravelHistoryRecorded { .. } => "TravelHistoryRecorded",
            EventPayload::NotificationStateChanged { .. } => "NotificationStateChanged",
            EventPayload::WeeklyReturnGenerated { .. } => "WeeklyReturnGenerated",
        }
    }
}

impl Event {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}
