//! 14-day travel histories and the risk places derived from them.
//!
//! A risk place is a distinct normalized location `(door_no, street,
//! gn_division, district)` from any patient's travel history, excluding
//! that patient's own residence. Its `identified_at` is the earliest
//! date-time at which any patient was there. Merging is by key with
//! earliest-wins timestamps and set-union sources, so the result does not
//! depend on submission order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::case_registry::{is_phone_number, CaseId, CaseRecord};
use crate::gazetteer::{Gazetteer, ResidencePath};
use crate::normalize::normalize;
use crate::time::Timestamp;
use crate::workflow::{AttentionStatus, Officer, Role};

pub const MAX_DAYS: usize = 14;
pub const DEFAULT_WINDOW_DAYS: i64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum TravelError {
    #[error("at most {MAX_DAYS} days of travel history, got {0}")]
    TooManyDays(usize),
    #[error("travel history is empty")]
    Empty,
    #[error("day index {0} is out of range 1..=14")]
    DayIndexOutOfRange(u8),
    #[error("day index {0} given twice")]
    DuplicateDayIndex(u8),
    #[error("day {day}: unknown GN division {gn:?}")]
    UnknownDivision { day: u8, gn: String },
    #[error("day {day}: invalid {field}")]
    Validation { day: u8, field: String },
    #[error("case {0} not found")]
    NotFound(CaseId),
    #[error("case {0} has not been assigned to a PHI yet")]
    NotAssigned(CaseId),
    #[error("scope violation: {0}")]
    ScopeViolation(String),
}

/// One filled day of the travel-history form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TravelEntryInput {
    pub day_index: u8,
    pub door_no: String,
    pub street: String,
    pub gn_division: String,
    /// The form's "Health District" field; disambiguates the GN name.
    pub district: Option<String>,
    pub contact_tp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TravelHistoryEntry {
    pub case_id: CaseId,
    pub day_index: u8,
    /// Registration instant minus `day_index` days: the date shifts, the
    /// time of day is inherited.
    pub entry_at: Timestamp,
    pub door_no: String,
    pub street: String,
    pub path: ResidencePath,
    pub contact_tp: String,
}

/// Normalized identity of a location.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlaceKey {
    pub door_no: String,
    pub street: String,
    pub gn_division: String,
    pub district: String,
}

impl PlaceKey {
    pub fn new(door_no: &str, street: &str, gn_division: &str, district: &str) -> Self {
        PlaceKey {
            door_no: normalize(door_no),
            street: normalize(street),
            gn_division: normalize(gn_division),
            district: normalize(district),
        }
    }

    pub fn of_entry(e: &TravelHistoryEntry) -> Self {
        Self::new(&e.door_no, &e.street, &e.path.gn, &e.path.district)
    }

    pub fn of_residence(c: &CaseRecord) -> Self {
        Self::new(
            &c.residence.door_no,
            &c.residence.street,
            &c.path.gn,
            &c.path.district,
        )
    }

    /// Flat string form used as a map key in snapshots.
    pub fn encode(&self) -> String {
        [
            self.district.as_str(),
            &self.gn_division,
            &self.street,
            &self.door_no,
        ]
        .join("\u{1f}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskPlace {
    pub place_key: PlaceKey,
    pub district: String,
    pub gn_division: String,
    pub door_no: String,
    pub street: String,
    pub identified_at: Timestamp,
    pub source_cases: BTreeSet<CaseId>,
    pub source_entries: BTreeSet<(CaseId, u8)>,
    /// Entry whose spelling is displayed: the earliest by
    /// `(entry_at, case_id, day_index)`.
    display_source: (CaseId, u8),
}

impl RiskPlace {
    fn from_entry(e: &TravelHistoryEntry) -> Self {
        let src = (e.case_id.clone(), e.day_index);
        RiskPlace {
            place_key: PlaceKey::of_entry(e),
            district: e.path.district.clone(),
            gn_division: e.path.gn.clone(),
            door_no: e.door_no.clone(),
            street: e.street.clone(),
            identified_at: e.entry_at,
            source_cases: BTreeSet::from([e.case_id.clone()]),
            source_entries: BTreeSet::from([src.clone()]),
            display_source: src,
        }
    }

    /// Folds another observation of the same place into this one.
    pub fn merge(&mut self, other: &RiskPlace) {
        debug_assert_eq!(self.place_key, other.place_key);
        if (other.identified_at, &other.display_source) < (self.identified_at, &self.display_source)
        {
            self.identified_at = other.identified_at;
            self.display_source = other.display_source.clone();
            self.door_no = other.door_no.clone();
            self.street = other.street.clone();
            self.gn_division = other.gn_division.clone();
            self.district = other.district.clone();
        }
        self.source_cases.extend(other.source_cases.iter().cloned());
        self.source_entries
            .extend(other.source_entries.iter().cloned());
    }
}

/// Pure derivation over a set of entries. `residences` maps each
/// contributing case to its residence key; entries at that key are skipped.
pub fn derive_risk_places(
    entries: &[TravelHistoryEntry],
    residences: &HashMap<CaseId, PlaceKey>,
) -> BTreeMap<PlaceKey, RiskPlace> {
    let mut out: BTreeMap<PlaceKey, RiskPlace> = BTreeMap::new();
    for e in entries {
        let key = PlaceKey::of_entry(e);
        if residences.get(&e.case_id) == Some(&key) {
            continue;
        }
        let place = RiskPlace::from_entry(e);
        match out.get_mut(&key) {
            Some(existing) => existing.merge(&place),
            None => {
                out.insert(key, place);
            }
        }
    }
    out
}

/// Store-wide risk places. Places are never deleted; they age out of
/// query windows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskPlaceStore {
    places: BTreeMap<String, RiskPlace>,
}

impl RiskPlaceStore {
    /// Merges derived places; returns the keys that were not present before.
    pub fn merge(&mut self, derived: BTreeMap<PlaceKey, RiskPlace>) -> Vec<PlaceKey> {
        let mut new = Vec::new();
        for (key, place) in derived {
            match self.places.get_mut(&key.encode()) {
                Some(existing) => existing.merge(&place),
                None => {
                    self.places.insert(key.encode(), place);
                    new.push(key);
                }
            }
        }
        new
    }

    pub fn get(&self, key: &PlaceKey) -> Option<&RiskPlace> {
        self.places.get(&key.encode())
    }

    pub fn contains(&self, key: &PlaceKey) -> bool {
        self.places.contains_key(&key.encode())
    }

    pub fn iter(&self) -> impl Iterator<Item = &RiskPlace> {
        self.places.values()
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    /// Places in `district` identified in the half-open window
    /// `(now - window_days, now]`, sorted by identification time.
    pub fn in_window(
        &self,
        district: Option<&str>,
        now: Timestamp,
        window_days: i64,
    ) -> Vec<&RiskPlace> {
        let start = now - Duration::days(window_days);
        let d = district.map(normalize);
        let mut out: Vec<&RiskPlace> = self
            .places
            .values()
            .filter(|p| d.as_ref().is_none_or(|d| normalize(&p.district) == *d))
            .filter(|p| p.identified_at > start && p.identified_at <= now)
            .collect();
        out.sort_by(|a, b| {
            a.identified_at
                .cmp(&b.identified_at)
                .then_with(|| a.place_key.cmp(&b.place_key))
        });
        out
    }

    /// `(count, latest identified_at)` for the live table column.
    pub fn window_stats(
        &self,
        district: &str,
        now: Timestamp,
        window_days: i64,
    ) -> (usize, Option<Timestamp>) {
        let places = self.in_window(Some(district), now, window_days);
        (places.len(), places.iter().map(|p| p.identified_at).max())
    }
}

/// Checks a submission and turns the form rows into entries.
pub fn validate_submission(
    case: Option<&CaseRecord>,
    case_id: &CaseId,
    officer: &Officer,
    inputs: &[TravelEntryInput],
    gazetteer: &Gazetteer,
) -> Result<Vec<TravelHistoryEntry>, TravelError> {
    let case = case.ok_or_else(|| TravelError::NotFound(case_id.clone()))?;
    if case.attention == AttentionStatus::Reported {
        return Err(TravelError::NotAssigned(case_id.clone()));
    }
    if officer.role != Role::Phi || !officer.scope.covers(&case.path) {
        return Err(TravelError::ScopeViolation(format!(
            "{} ({}) does not cover PHI area {}",
            officer.officer_id,
            officer.role,
            case.path.phi()
        )));
    }
    if inputs.is_empty() {
        return Err(TravelError::Empty);
    }
    if inputs.len() > MAX_DAYS {
        return Err(TravelError::TooManyDays(inputs.len()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(inputs.len());
    for input in inputs {
        let day = input.day_index;
        if day == 0 || day as usize > MAX_DAYS {
            return Err(TravelError::DayIndexOutOfRange(day));
        }
        if !seen.insert(day) {
            return Err(TravelError::DuplicateDayIndex(day));
        }
        let field = |name: &str, v: &str| -> Result<String, TravelError> {
            let v = v.split_whitespace().collect::<Vec<_>>().join(" ");
            if v.is_empty() {
                Err(TravelError::Validation {
                    day,
                    field: name.to_string(),
                })
            } else {
                Ok(v)
            }
        };
        let door_no = field("door_no", &input.door_no)?;
        let street = field("street", &input.street)?;
        let contact_tp = field("contact_tp", &input.contact_tp)?;
        if !is_phone_number(&contact_tp) {
            return Err(TravelError::Validation {
                day,
                field: "contact_tp".into(),
            });
        }
        let path = gazetteer
            .resolve(&input.gn_division, input.district.as_deref())
            .map_err(|_| TravelError::UnknownDivision {
                day,
                gn: input.gn_division.clone(),
            })?;
        out.push(TravelHistoryEntry {
            case_id: case.case_id.clone(),
            day_index: day,
            entry_at: case.registered_at - Duration::days(day as i64),
            door_no,
            street,
            path,
            contact_tp,
        });
    }
    out.sort_by_key(|e| e.day_index);
    Ok(out)
}
