//! Email/SMS alerts for surveillance events.
//!
//! Each `(event_id, recipient, channel)` produces at most one
//! [`Notification`]. Transports receive the idempotency key with every
//! message and must treat a repeated key as already delivered, which makes
//! delivery exactly-once as observed in the transport log even when an
//! acknowledgement is lost and the service retries.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{Duration, SecondsFormat};
use serde::{Deserialize, Serialize};

use crate::case_registry::{CaseId, CaseRecord};
use crate::time::{DisplayZone, Timestamp};
use crate::travel_risk::RiskPlace;
use crate::workflow::{OfficerId, OfficerRegistry, Role};

pub const SMS_MAX_CHARS: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Email,
    Sms,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Email => "email",
            Channel::Sms => "sms",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotificationState {
    Pending,
    Sent,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriggerKind {
    CaseRegistered,
    CaseConfirmed,
    RiskPlaceIdentified,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdempotencyKey {
    pub event_id: u64,
    pub recipient: OfficerId,
    pub channel: Channel,
}

impl fmt::Display for IdempotencyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.event_id, self.recipient, self.channel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub notification_id: String,
    pub key: IdempotencyKey,
    pub trigger: TriggerKind,
    pub case_id: Option<CaseId>,
    pub channel: Channel,
    pub recipient: OfficerId,
    /// Email address or mobile digits.
    pub address: String,
    pub subject: String,
    pub body: String,
    pub state: NotificationState,
    pub attempts: u32,
    pub last_error: Option<String>,
    pub created_at: Timestamp,
    pub sent_at: Option<Timestamp>,
    pub next_attempt_at: Option<Timestamp>,
}

impl Notification {
    pub fn is_due(&self, now: Timestamp) -> bool {
        self.state == NotificationState::Pending && self.next_attempt_at.is_none_or(|t| t <= now)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeSelector {
    /// Officers whose scope covers the case's residence.
    #[default]
    Covering,
    /// Every officer with the role.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audience {
    pub role: Role,
    #[serde(default)]
    pub scope: ScopeSelector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertRule {
    pub trigger: TriggerKind,
    pub audience: Audience,
    pub channels: Vec<Channel>,
    pub template: String,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RuleError {
    #[error("alert rules parse error: {0}")]
    Parse(String),
    #[error("rule {index}: unknown template {template:?}")]
    UnknownTemplate { index: usize, template: String },
    #[error("rule {index}: no {role} officer on file")]
    UnresolvableAudience { index: usize, role: Role },
    #[error("rule {0}: no channels")]
    NoChannels(usize),
}

pub const TEMPLATES: [&str; 3] = ["case_registered", "case_confirmed", "risk_places"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlertRules(Vec<AlertRule>);

#[derive(Deserialize)]
struct RulesDoc {
    #[serde(default)]
    rule: Vec<AlertRule>,
}

impl AlertRules {
    pub fn new(rules: Vec<AlertRule>, officers: &OfficerRegistry) -> Result<Self, RuleError> {
        for (index, r) in rules.iter().enumerate() {
            if !TEMPLATES.contains(&r.template.as_str()) {
                return Err(RuleError::UnknownTemplate {
                    index,
                    template: r.template.clone(),
                });
            }
            if r.channels.is_empty() {
                return Err(RuleError::NoChannels(index));
            }
            if r.audience.role == Role::Public
                || !officers.iter().any(|o| o.role == r.audience.role)
            {
                return Err(RuleError::UnresolvableAudience {
                    index,
                    role: r.audience.role,
                });
            }
        }
        Ok(AlertRules(rules))
    }

    pub fn from_toml_str(doc: &str, officers: &OfficerRegistry) -> Result<Self, RuleError> {
        let doc: RulesDoc = toml::from_str(doc).map_err(|e| RuleError::Parse(e.to_string()))?;
        Self::new(doc.rule, officers)
    }

    pub fn load(path: impl AsRef<Path>, officers: &OfficerRegistry) -> Result<Self, RuleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RuleError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, officers)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AlertRule> {
        self.0.iter()
    }
}

/// What happened, with enough context to address and render alerts.
#[derive(Debug, Clone)]
pub struct AlertEvent {
    pub event_id: u64,
    pub kind: TriggerKind,
    pub at: Timestamp,
    pub case: CaseRecord,
    pub new_places: Vec<RiskPlace>,
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_backoff: Duration::seconds(60),
        }
    }
}

fn truncate_chars(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        return s.to_string();
    }
    let mut out: String = s.chars().take(max - 3).collect();
    out.push_str("...");
    out
}

/// Renders `(subject, body)`. Total over every template and event kind; SMS
/// bodies never exceed [`SMS_MAX_CHARS`].
pub fn render(
    template: &str,
    event: &AlertEvent,
    channel: Channel,
    zone: DisplayZone,
) -> (String, String) {
    let c = &event.case;
    let p = &c.path;
    let when = zone.format(&event.at);
    let (subject, sms, email) = match template {
        "case_confirmed" => (
            format!("Dengue case {} confirmed - {} MOH, {}", c.case_id, p.moh_area, p.district),
            format!(
                "DENGUE CONFIRMED {} MOH {} ({}) PHI {} GN {}. ID Register {}",
                c.case_id, p.moh_area, p.district, p.phi_area, p.gn, when
            ),
            format!(
                "Case {} has been confirmed as dengue and entered in the ID Register of MOH {} at {} (SL).\n\
                 Residence: {}, {}, {}, PHI area {}, {} district.\nRegistered: {} (SL)\n",
                c.case_id,
                p.moh_area,
                when,
                c.residence.door_no,
                c.residence.street,
                p.gn,
                p.phi_area,
                p.district,
                zone.format(&c.registered_at)
            ),
        ),
        "risk_places" => {
            let places: Vec<String> =
                event.new_places.iter().map(|r| format!("{} {}, {}", r.door_no, r.street, r.gn_division)).collect();
            (
                format!("{} new dengue risk place(s) in {}", places.len(), p.district),
                format!("DENGUE RISK {}: {} new place(s) from case {}: {}", p.district, places.len(), c.case_id, places.join("; ")),
                format!(
                    "Travel history of case {} identified {} new risk place(s) at {} (SL):\n{}\n",
                    c.case_id,
                    places.len(),
                    when,
                    places.iter().map(|l| format!("  - {l}\n")).collect::<String>()
                ),
            )
        }
        // "case_registered" and anything unrecognised.
        _ => (
            format!("New dengue notification {} - {} MOH, {}", c.case_id, p.moh_area, p.district),
            format!(
                "DENGUE NOTIFIED {} {} {}, {}. {} {}, GN {}, PHI {}, MOH {}. Reg {}",
                c.case_id,
                c.full_name(),
                c.age,
                c.gender.label(),
                c.residence.door_no,
                c.residence.street,
                p.gn,
                p.phi_area,
                p.moh_area,
                zone.format(&c.registered_at)
            ),
            format!(
                "A suspected dengue case was notified at {} (SL).\n\nCase: {}\nPatient: {} ({}, {})\n\
                 Address: {}, {}, {}\nPHI area: {}\nMOH area: {}\nHealth district: {}\nOPD/Ward: {}/{} ticket {}\n",
                zone.format(&c.registered_at),
                c.case_id,
                c.full_name(),
                c.age,
                c.gender.label(),
                c.residence.door_no,
                c.residence.street,
                p.gn,
                p.phi_area,
                p.moh_area,
                p.district,
                c.opd_no,
                c.ward_no,
                c.ward_ticket_no
            ),
        ),
    };
    match channel {
        Channel::Sms => (String::new(), truncate_chars(&sms, SMS_MAX_CHARS)),
        Channel::Email => (subject, email),
    }
}

/// Notifications an event calls for that do not exist yet, in
/// deterministic order. `existing` is keyed by [`IdempotencyKey`] string.
pub fn plan(
    event: &AlertEvent,
    rules: &AlertRules,
    officers: &OfficerRegistry,
    existing: &BTreeMap<String, Notification>,
    zone: DisplayZone,
) -> Vec<Notification> {
    let mut out: Vec<Notification> = Vec::new();
    let mut planned = HashSet::new();
    for rule in rules.iter().filter(|r| r.trigger == event.kind) {
        let recipients: Vec<_> = match rule.audience.scope {
            ScopeSelector::Covering => officers.covering(rule.audience.role, &event.case.path),
            ScopeSelector::All => officers
                .iter()
                .filter(|o| o.role == rule.audience.role)
                .collect(),
        };
        for officer in recipients {
            for &channel in &rule.channels {
                let address = match channel {
                    Channel::Email => officer.email.clone(),
                    Channel::Sms => officer.mobile.clone(),
                };
                // Officers without an address for the channel are skipped.
                let Some(address) = address else { continue };
                let key = IdempotencyKey {
                    event_id: event.event_id,
                    recipient: officer.officer_id.clone(),
                    channel,
                };
                let k = key.to_string();
                if existing.contains_key(&k) || !planned.insert(k) {
                    continue;
                }
                let (subject, body) = render(&rule.template, event, channel, zone);
                out.push(Notification {
                    notification_id: String::new(),
                    trigger: event.kind,
                    case_id: Some(event.case.case_id.clone()),
                    channel,
                    recipient: officer.officer_id.clone(),
                    address,
                    subject,
                    body,
                    state: NotificationState::Pending,
                    attempts: 0,
                    last_error: None,
                    created_at: event.at,
                    sent_at: None,
                    next_attempt_at: None,
                    key,
                });
            }
        }
    }
    let base = existing.len();
    for (i, n) in out.iter_mut().enumerate() {
        n.notification_id = format!("N{:06}", base + i + 1);
    }
    out
}

/// One outbox line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxRecord {
    pub v: u32,
    pub timestamp: String,
    pub key: String,
    pub channel: Channel,
    pub recipient: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub body: String,
}

impl OutboxRecord {
    pub fn of(n: &Notification, at: Timestamp) -> Self {
        OutboxRecord {
            v: 1,
            timestamp: at.to_rfc3339_opts(SecondsFormat::Secs, true),
            key: n.key.to_string(),
            channel: n.channel,
            recipient: n.address.clone(),
            subject: (n.channel == Channel::Email).then(|| n.subject.clone()),
            body: n.body.clone(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("outbox record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

/// Delivery channel for rendered alerts. A repeated `key` must not be
/// delivered twice.
pub trait Transport: Send {
    fn deliver(&mut self, record: &OutboxRecord) -> Result<(), TransportError>;
}

/// Appends records to a line-delimited outbox file.
#[derive(Debug)]
pub struct FileTransport {
    path: PathBuf,
    file: File,
    delivered: HashSet<String>,
}

impl FileTransport {
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let mut delivered = HashSet::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                if let Ok(rec) = serde_json::from_str::<OutboxRecord>(&line?) {
                    delivered.insert(rec.key);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(FileTransport {
            path,
            file,
            delivered,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Transport for FileTransport {
    fn deliver(&mut self, record: &OutboxRecord) -> Result<(), TransportError> {
        if self.delivered.contains(&record.key) {
            return Ok(());
        }
        let mut line = record.to_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| TransportError(e.to_string()))?;
        self.delivered.insert(record.key.clone());
        Ok(())
    }
}

/// What a [`ScriptedTransport`] does on one delivery call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Deliver,
    /// Nothing delivered, error returned.
    Fail,
    /// Delivered, but the acknowledgement is lost.
    DeliverThenFail,
}

#[derive(Debug, Default)]
struct MemoryInner {
    log: Vec<OutboxRecord>,
    seen: HashSet<String>,
    script: VecDeque<Fault>,
    exhausted: Option<Fault>,
    calls: usize,
}

/// In-memory transport with an optional fault script. Clones share state,
/// so a test can keep a handle after moving one into the service.
#[derive(Debug, Clone, Default)]
pub struct MemoryTransport(Arc<Mutex<MemoryInner>>);

pub type ScriptedTransport = MemoryTransport;

impl MemoryTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Follows `script`, then `after` once it runs out.
    pub fn scripted(script: impl IntoIterator<Item = Fault>, after: Fault) -> Self {
        let t = Self::default();
        {
            let mut inner = t.0.lock().unwrap();
            inner.script = script.into_iter().collect();
            inner.exhausted = Some(after);
        }
        t
    }

    /// Every call fails.
    pub fn down() -> Self {
        Self::scripted([], Fault::Fail)
    }

    pub fn delivered(&self) -> Vec<OutboxRecord> {
        self.0.lock().unwrap().log.clone()
    }

    pub fn calls(&self) -> usize {
        self.0.lock().unwrap().calls
    }

    pub fn set_fallback(&self, fault: Fault) {
        self.0.lock().unwrap().exhausted = Some(fault);
    }
}

impl Transport for MemoryTransport {
    fn deliver(&mut self, record: &OutboxRecord) -> Result<(), TransportError> {
        let mut inner = self.0.lock().unwrap();
        inner.calls += 1;
        let fault = inner
            .script
            .pop_front()
            .or(inner.exhausted)
            .unwrap_or(Fault::Deliver);
        let deliver = |inner: &mut MemoryInner| {
            if inner.seen.insert(record.key.clone()) {
                inner.log.push(record.clone());
            }
        };
        match fault {
            Fault::Deliver => {
                deliver(&mut inner);
                Ok(())
            }
            Fault::Fail => Err(TransportError("scripted failure".into())),
            Fault::DeliverThenFail => {
                deliver(&mut inner);
                Err(TransportError("acknowledgement lost".into()))
            }
        }
    }
}

/// Makes one delivery attempt and returns the notification's next state.
pub fn attempt(
    n: &Notification,
    transport: &mut dyn Transport,
    now: Timestamp,
    policy: RetryPolicy,
) -> Notification {
    let mut next = n.clone();
    next.attempts += 1;
    match transport.deliver(&OutboxRecord::of(n, now)) {
        Ok(()) => {
            next.state = NotificationState::Sent;
            next.sent_at = Some(now);
            next.next_attempt_at = None;
            next.last_error = None;
        }
        Err(e) => {
            next.last_error = Some(e.0);
            if next.attempts > policy.max_retries {
                next.state = NotificationState::Failed;
                next.next_attempt_at = None;
            } else {
                let factor = 1i32.checked_shl(next.attempts - 1).unwrap_or(i32::MAX);
                next.next_attempt_at = Some(now + policy.base_backoff * factor);
            }
        }
    }
    next
}
