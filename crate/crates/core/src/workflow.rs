//! The surveillance state machine: MOH routing, PHI work orders, field
//! attendance and confirmation into the Infectious Disease (ID) Register.
//!
//! ```text
//! Reported ─assign─▶ Assigned ─attend─▶ Attended ─▶ Confirmed
//!                                               └─▶ NotDengue
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::case_registry::{is_phone_number, CaseId, CaseRecord};
use crate::gazetteer::{Gazetteer, MohRef, PhiRef, ResidencePath};
use crate::state::State;
use crate::time::{DisplayZone, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttentionStatus {
    Reported,
    Assigned,
    Attended,
    Confirmed,
    NotDengue,
}

impl AttentionStatus {
    pub fn can_transition_to(self, next: AttentionStatus) -> bool {
        use AttentionStatus::*;
        matches!(
            (self, next),
            (Reported, Assigned)
                | (Assigned, Attended)
                | (Attended, Confirmed)
                | (Attended, NotDengue)
        )
    }

    pub fn is_closed(self) -> bool {
        matches!(
            self,
            AttentionStatus::Confirmed | AttentionStatus::NotDengue
        )
    }

    /// Label shown in the PHI worklist "Case Attention" column.
    pub fn attention_label(self) -> &'static str {
        match self {
            AttentionStatus::Reported | AttentionStatus::Assigned => "Attend",
            AttentionStatus::Attended => "Attended",
            AttentionStatus::Confirmed => "Confirmed",
            AttentionStatus::NotDengue => "Not dengue",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(
            match crate::normalize::normalize(s)
                .replace(['_', ' '], "")
                .as_str()
            {
                "reported" => AttentionStatus::Reported,
                "assigned" => AttentionStatus::Assigned,
                "attended" => AttentionStatus::Attended,
                "confirmed" => AttentionStatus::Confirmed,
                "notdengue" => AttentionStatus::NotDengue,
                _ => return None,
            },
        )
    }
}

impl fmt::Display for AttentionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// National Identity Card number: 9 digits + `V`/`X`, or 12 digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct OfficerId(String);

impl OfficerId {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_uppercase();
        let b = s.as_bytes();
        let old =
            b.len() == 10 && b[..9].iter().all(u8::is_ascii_digit) && matches!(b[9], b'V' | b'X');
        let new = b.len() == 12 && b.iter().all(u8::is_ascii_digit);
        (old || new).then_some(OfficerId(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for OfficerId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        OfficerId::parse(&s).ok_or_else(|| format!("{s:?} is not a NIC number"))
    }
}

impl From<OfficerId> for String {
    fn from(id: OfficerId) -> Self {
        id.0
    }
}

impl fmt::Display for OfficerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Icn,
    Phi,
    Moh,
    Re,
    Epid,
    Public,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Icn => "ICN",
            Role::Phi => "PHI",
            Role::Moh => "MOH",
            Role::Re => "RE",
            Role::Epid => "EPID",
            Role::Public => "PUBLIC",
        })
    }
}

/// The part of the hierarchy an officer is responsible for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    National,
    District(String),
    Moh(MohRef),
    PhiAreas(Vec<PhiRef>),
}

impl Scope {
    pub fn covers(&self, path: &ResidencePath) -> bool {
        match self {
            Scope::National => true,
            Scope::District(d) => *d == path.district,
            Scope::Moh(m) => *m == path.moh(),
            Scope::PhiAreas(areas) => areas.contains(&path.phi()),
        }
    }

    pub fn covers_moh(&self, moh: &MohRef) -> bool {
        match self {
            Scope::National => true,
            Scope::District(d) => *d == moh.district,
            Scope::Moh(m) => m == moh,
            Scope::PhiAreas(areas) => areas.iter().any(|a| a.moh() == *moh),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Officer {
    pub officer_id: OfficerId,
    pub name: String,
    pub role: Role,
    pub scope: Scope,
    pub email: Option<String>,
    pub mobile: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OfficerDoc {
    id: String,
    #[serde(default)]
    name: String,
    role: Role,
    email: Option<String>,
    mobile: Option<String>,
    district: Option<String>,
    moh_area: Option<String>,
    #[serde(default)]
    phi_areas: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RegistryDoc {
    #[serde(default)]
    officer: Vec<OfficerDoc>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RegistryError {
    #[error("officer registry parse error: {0}")]
    Parse(String),
    #[error("officer {id:?}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("duplicate officer id {0}")]
    Duplicate(String),
}

/// NIC → role and scope. Loaded at start from TOML.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OfficerRegistry {
    officers: BTreeMap<OfficerId, Officer>,
}

impl OfficerRegistry {
    pub fn from_toml_str(doc: &str, gazetteer: &Gazetteer) -> Result<Self, RegistryError> {
        let doc: RegistryDoc =
            toml::from_str(doc).map_err(|e| RegistryError::Parse(e.to_string()))?;
        let mut officers = BTreeMap::new();
        for o in doc.officer {
            let bad = |reason: String| RegistryError::Invalid {
                id: o.id.clone(),
                reason,
            };
            let officer_id =
                OfficerId::parse(&o.id).ok_or_else(|| bad("not a NIC number".into()))?;
            if let Some(m) = &o.mobile {
                if !is_phone_number(m) {
                    return Err(bad("mobile must be 9 or 10 digits".into()));
                }
            }
            let district = || -> Result<String, RegistryError> {
                let d = o
                    .district
                    .as_deref()
                    .ok_or_else(|| bad(format!("{} needs a district", o.role)))?;
                gazetteer
                    .find_district(d)
                    .map(String::from)
                    .ok_or_else(|| bad(format!("unknown district {d:?}")))
            };
            let moh = || -> Result<MohRef, RegistryError> {
                let d = district()?;
                let m = o
                    .moh_area
                    .as_deref()
                    .ok_or_else(|| bad(format!("{} needs an moh_area", o.role)))?;
                gazetteer
                    .find_moh(&d, m)
                    .ok_or_else(|| bad(format!("unknown MOH area {m:?}")))
            };
            let scope = match o.role {
                Role::Phi => {
                    let m = moh()?;
                    if o.phi_areas.is_empty() {
                        return Err(bad("PHI needs at least one phi_area".into()));
                    }
                    let mut areas = o
                        .phi_areas
                        .iter()
                        .map(|p| {
                            gazetteer
                                .find_phi(&m.district, &m.moh_area, p)
                                .ok_or_else(|| bad(format!("unknown PHI area {p:?}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    areas.sort();
                    areas.dedup();
                    Scope::PhiAreas(areas)
                }
                Role::Moh => Scope::Moh(moh()?),
                Role::Re => Scope::District(district()?),
                Role::Icn if o.district.is_some() => Scope::District(district()?),
                Role::Icn | Role::Epid | Role::Public => Scope::National,
            };
            let officer = Officer {
                officer_id: officer_id.clone(),
                name: o.name,
                role: o.role,
                scope,
                email: o.email,
                mobile: o.mobile,
            };
            if officers.insert(officer_id.clone(), officer).is_some() {
                return Err(RegistryError::Duplicate(officer_id.to_string()));
            }
        }
        Ok(OfficerRegistry { officers })
    }

    pub fn load(path: impl AsRef<Path>, gazetteer: &Gazetteer) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RegistryError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, gazetteer)
    }

    pub fn get(&self, id: &str) -> Option<&Officer> {
        OfficerId::parse(id).and_then(|id| self.officers.get(&id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Officer> {
        self.officers.values()
    }

    /// Officers of `role` whose scope covers `path`, in id order.
    pub fn covering(&self, role: Role, path: &ResidencePath) -> Vec<&Officer> {
        self.iter()
            .filter(|o| o.role == role && o.scope.covers(path))
            .collect()
    }

    /// The single PHI on file for a residence, if there is exactly one.
    pub fn sole_phi_for(&self, path: &ResidencePath) -> Option<&Officer> {
        match self.covering(Role::Phi, path).as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderId(pub String);

impl OrderId {
    pub fn from_seq(seq: u64) -> Self {
        OrderId(format!("W{seq:06}"))
    }
}

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Confirmed,
    NotDengue,
}

impl Outcome {
    pub fn status(self) -> AttentionStatus {
        match self {
            Outcome::Confirmed => AttentionStatus::Confirmed,
            Outcome::NotDengue => AttentionStatus::NotDengue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkOrder {
    pub order_id: OrderId,
    pub case_id: CaseId,
    pub phi_area: PhiRef,
    pub assigned_to: OfficerId,
    /// `None` when the order was created by auto-assignment.
    pub assigned_by: Option<OfficerId>,
    pub created_at: Timestamp,
    pub attended_at: Option<Timestamp>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdRegisterEntry {
    pub case_id: CaseId,
    pub moh_area: MohRef,
    pub confirmed_at: Timestamp,
    pub entered_by: OfficerId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum WorkflowError {
    #[error("case {case_id}: illegal transition {from} -> {to}")]
    IllegalTransition {
        case_id: CaseId,
        from: AttentionStatus,
        to: AttentionStatus,
    },
    #[error("scope violation: {0}")]
    ScopeViolation(String),
    #[error("work order belongs to {expected}, not {actual}")]
    WrongOfficer {
        expected: OfficerId,
        actual: OfficerId,
    },
    #[error("{0} not found")]
    NotFound(String),
}

fn case_or_not_found<'a>(
    state: &'a State,
    case_id: &CaseId,
) -> Result<&'a CaseRecord, WorkflowError> {
    state
        .cases
        .get(case_id)
        .ok_or_else(|| WorkflowError::NotFound(format!("case {case_id}")))
}

fn check_transition(case: &CaseRecord, to: AttentionStatus) -> Result<(), WorkflowError> {
    if case.attention.can_transition_to(to) {
        Ok(())
    } else {
        Err(WorkflowError::IllegalTransition {
            case_id: case.case_id.clone(),
            from: case.attention,
            to,
        })
    }
}

/// Checks an assignment and builds the work order. `assigner` is `None`
/// for auto-assignment at registration.
pub fn plan_assign(
    state: &State,
    case_id: &CaseId,
    assigner: Option<&Officer>,
    assignee: &Officer,
    now: Timestamp,
) -> Result<WorkOrder, WorkflowError> {
    let case = case_or_not_found(state, case_id)?;
    check_transition(case, AttentionStatus::Assigned)?;
    if let Some(a) = assigner {
        if a.role != Role::Moh || !matches!(&a.scope, Scope::Moh(m) if *m == case.path.moh()) {
            return Err(WorkflowError::ScopeViolation(format!(
                "{} ({}) cannot assign cases of MOH area {}",
                a.officer_id,
                a.role,
                case.path.moh()
            )));
        }
    }
    if assignee.role != Role::Phi || !assignee.scope.covers(&case.path) {
        return Err(WorkflowError::ScopeViolation(format!(
            "{} ({}) does not cover PHI area {}",
            assignee.officer_id,
            assignee.role,
            case.path.phi()
        )));
    }
    Ok(WorkOrder {
        order_id: OrderId::from_seq(state.work_orders.len() as u64 + 1),
        case_id: case.case_id.clone(),
        phi_area: case.path.phi(),
        assigned_to: assignee.officer_id.clone(),
        assigned_by: assigner.map(|a| a.officer_id.clone()),
        created_at: now.max(case.registered_at),
        attended_at: None,
        outcome: None,
    })
}

/// Work order for auto-assignment of a case that is being registered in
/// the same batch (so it is not yet in `state`).
pub fn auto_work_order(state: &State, case: &CaseRecord, phi: &Officer) -> WorkOrder {
    WorkOrder {
        order_id: OrderId::from_seq(state.work_orders.len() as u64 + 1),
        case_id: case.case_id.clone(),
        phi_area: case.path.phi(),
        assigned_to: phi.officer_id.clone(),
        assigned_by: None,
        created_at: case.registered_at,
        attended_at: None,
        outcome: None,
    }
}

/// Checks a field attendance and returns the completed order plus the ID
/// Register entry when the case is confirmed.
pub fn plan_attendance(
    state: &State,
    order_id: &OrderId,
    officer: &Officer,
    outcome: Outcome,
    now: Timestamp,
) -> Result<(WorkOrder, Option<IdRegisterEntry>), WorkflowError> {
    let order = state
        .work_orders
        .get(order_id)
        .ok_or_else(|| WorkflowError::NotFound(format!("work order {order_id}")))?;
    let case = case_or_not_found(state, &order.case_id)?;
    check_transition(case, AttentionStatus::Attended)?;
    if officer.officer_id != order.assigned_to {
        return Err(WorkflowError::WrongOfficer {
            expected: order.assigned_to.clone(),
            actual: officer.officer_id.clone(),
        });
    }
    let at = now.max(order.created_at);
    let mut done = order.clone();
    done.attended_at = Some(at);
    done.outcome = Some(outcome);
    let entry = (outcome == Outcome::Confirmed).then(|| IdRegisterEntry {
        case_id: case.case_id.clone(),
        moh_area: case.path.moh(),
        confirmed_at: at,
        entered_by: officer.officer_id.clone(),
    });
    Ok((done, entry))
}

/// One row of the PHI detail table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorklistRow {
    pub s_no: usize,
    pub case_id: CaseId,
    pub order_id: Option<OrderId>,
    pub opd_no: String,
    pub ward_no: String,
    pub ward_ticket_no: String,
    pub title: String,
    pub first_name: String,
    pub last_name: String,
    pub age: String,
    pub gender: String,
    pub door_no: String,
    pub street_name: String,
    pub land_type: String,
    pub gn_division_name: String,
    pub mobile: String,
    pub employment: String,
    pub case_register_date: String,
    pub case_attention: String,
}

pub const WORKLIST_COLUMNS: [&str; 17] = [
    "S.No",
    "OPD No",
    "Ward No",
    "Ward Ticket No",
    "Title",
    "First Name",
    "Last Name",
    "Age",
    "Gender",
    "Door No",
    "Street Name",
    "Land Type",
    "GN Division Name",
    "Mobile",
    "Employment",
    "Case Register Date",
    "Case Attention",
];

impl WorklistRow {
    pub fn cells(&self) -> [String; 17] {
        [
            self.s_no.to_string(),
            self.opd_no.clone(),
            self.ward_no.clone(),
            self.ward_ticket_no.clone(),
            self.title.clone(),
            self.first_name.clone(),
            self.last_name.clone(),
            self.age.clone(),
            self.gender.clone(),
            self.door_no.clone(),
            self.street_name.clone(),
            self.land_type.clone(),
            self.gn_division_name.clone(),
            self.mobile.clone(),
            self.employment.clone(),
            self.case_register_date.clone(),
            self.case_attention.clone(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorklistArea {
    pub phi_area: String,
    pub moh_area: String,
    pub district: String,
    /// Cases not yet Confirmed or NotDengue.
    pub open_cases: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Worklist {
    pub officer_id: OfficerId,
    pub areas: Vec<WorklistArea>,
    pub rows: Vec<WorklistRow>,
}

impl Worklist {
    /// Tab-separated text in the layout of the PHI screen.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for a in &self.areas {
            out.push_str(&format!(
                "PHI Area: {}\nMOH Area: {}\nHealth District: {}\nNumber of Patients Identified: {}\n",
                a.phi_area, a.moh_area, a.district, a.open_cases
            ));
        }
        out.push_str(&WORKLIST_COLUMNS.join("\t"));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.cells().join("\t"));
            out.push('\n');
        }
        out
    }
}

pub fn phi_worklist(
    state: &State,
    officer: &Officer,
    zone: DisplayZone,
) -> Result<Worklist, WorkflowError> {
    let Scope::PhiAreas(areas) = (match officer.role {
        Role::Phi => &officer.scope,
        other => {
            return Err(WorkflowError::ScopeViolation(format!(
                "worklist is for PHIs, not {other}"
            )))
        }
    }) else {
        return Err(WorkflowError::ScopeViolation(
            "PHI without PHI-area scope".into(),
        ));
    };
    let mut summary = Vec::new();
    let mut open: Vec<&CaseRecord> = Vec::new();
    for area in areas {
        let cases: Vec<&CaseRecord> = state
            .cases
            .values()
            .filter(|c| c.path.phi() == *area && !c.attention.is_closed())
            .collect();
        summary.push(WorklistArea {
            phi_area: area.phi_area.clone(),
            moh_area: area.moh_area.clone(),
            district: area.district.clone(),
            open_cases: cases.len(),
        });
        open.extend(cases);
    }
    open.sort_by(|a, b| {
        a.registered_at
            .cmp(&b.registered_at)
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
    let rows = open
        .into_iter()
        .enumerate()
        .map(|(i, c)| WorklistRow {
            s_no: i + 1,
            case_id: c.case_id.clone(),
            order_id: state.order_for_case(&c.case_id).map(|o| o.order_id.clone()),
            opd_no: c.opd_no.clone(),
            ward_no: c.ward_no.clone(),
            ward_ticket_no: c.ward_ticket_no.clone(),
            title: c.title.as_str().to_string(),
            first_name: c.first_name.clone(),
            last_name: c.last_name.clone(),
            age: c.age.to_string(),
            gender: c.gender.label().to_string(),
            door_no: c.residence.door_no.clone(),
            street_name: c.residence.street.clone(),
            land_type: c.residence.land_type.label().to_string(),
            gn_division_name: c.path.gn.clone(),
            mobile: c.mobile.clone().unwrap_or_default(),
            employment: c.employment.clone().unwrap_or_default(),
            case_register_date: zone.format(&c.registered_at),
            case_attention: c.attention.attention_label().to_string(),
        })
        .collect();
    Ok(Worklist {
        officer_id: officer.officer_id.clone(),
        areas: summary,
        rows,
    })
}
