//! Electronic H544 intake: validation of the hospital notification form,
//! the case record it produces, field suggestions and case queries.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::gazetteer::{Gazetteer, GazetteerError, Level, ResidencePath};
use crate::normalize::normalize;
use crate::time::{DisplayZone, Timestamp};
use crate::vocab::{Vocabularies, EMPLOYMENT, LAND_TYPES, TITLES};
use crate::workflow::AttentionStatus;

/// Service-assigned case identifier. Zero-padded so lexical order is
/// registration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseId(pub String);

impl CaseId {
    pub fn from_seq(seq: u64) -> Self {
        CaseId(format!("C{seq:06}"))
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Title {
    Baby,
    Mr,
    Mrs,
    Miss,
    Rev,
    Other,
}

impl Title {
    fn parse(s: &str) -> Option<Self> {
        Some(match normalize(s).as_str() {
            "baby" => Title::Baby,
            "mr" => Title::Mr,
            "mrs" => Title::Mrs,
            "miss" => Title::Miss,
            "rev" => Title::Rev,
            "other" => Title::Other,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Title::Baby => "baby",
            Title::Mr => "mr",
            Title::Mrs => "mrs",
            Title::Miss => "miss",
            Title::Rev => "rev",
            Title::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeUnit {
    Years,
    Months,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Age {
    pub value: u32,
    pub unit: AgeUnit,
}

impl fmt::Display for Age {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = match (self.unit, self.value) {
            (AgeUnit::Years, 1) => "year",
            (AgeUnit::Years, _) => "years",
            (AgeUnit::Months, 1) => "month",
            (AgeUnit::Months, _) => "months",
        };
        write!(f, "{} {unit}", self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn label(&self) -> &'static str {
        match self {
            Gender::Female => "Female",
            Gender::Male => "Male",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandType {
    Private,
    Government,
    Other,
}

impl LandType {
    fn parse(s: &str) -> Option<Self> {
        Some(match normalize(s).as_str() {
            "private" => LandType::Private,
            "government" => LandType::Government,
            "other" => LandType::Other,
            _ => return None,
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            LandType::Private => "Private",
            LandType::Government => "Government",
            LandType::Other => "Other",
        }
    }
}

/// DF/DHF. Not on the intake form; optional and defaults to unspecified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ClinicalClass {
    #[serde(rename = "DF")]
    Df,
    #[serde(rename = "DHF")]
    Dhf,
    #[default]
    #[serde(rename = "unspecified")]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Address {
    pub door_no: String,
    pub street: String,
    pub land_type: LandType,
    pub gn_division: String,
    pub district_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: CaseId,
    pub opd_no: String,
    pub ward_no: String,
    pub ward_ticket_no: String,
    pub title: Title,
    pub first_name: String,
    pub last_name: String,
    pub age: Age,
    pub gender: Gender,
    pub residence: Address,
    /// Gazetteer path of the residence at registration time.
    pub path: ResidencePath,
    pub mobile: Option<String>,
    pub employment: Option<String>,
    pub clinical_class: ClinicalClass,
    pub registered_at: Timestamp,
    pub attention: AttentionStatus,
}

impl CaseRecord {
    pub fn full_name(&self) -> String {
        format!(
            "{} {} {}",
            self.title.as_str(),
            self.first_name,
            self.last_name
        )
    }
}

/// The hospital notification form as submitted. Everything is text so that
/// each problem can be reported against its field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseIntakeForm {
    pub opd_no: String,
    pub ward_no: String,
    pub ward_ticket_no: String,
    pub title: String,
    pub first_name: String,
    pub last_name: String,
    pub age_value: i64,
    pub age_unit: String,
    pub gender: String,
    pub door_no: String,
    pub street: String,
    pub land_type: String,
    pub gn_division: String,
    pub district_hint: Option<String>,
    pub mobile: Option<String>,
    pub employment: Option<String>,
    pub clinical_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum CaseError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("case {0} not found")]
    NotFound(CaseId),
    #[error("unknown vocabulary {0:?}")]
    UnknownVocabulary(String),
    #[error("limit must be positive")]
    InvalidLimit,
}

fn invalid(field: &str, reason: impl Into<String>) -> CaseError {
    CaseError::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// A form that passed validation, ready to become a record.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidIntake {
    pub opd_no: String,
    pub ward_no: String,
    pub ward_ticket_no: String,
    pub title: Title,
    pub first_name: String,
    pub last_name: String,
    pub age: Age,
    pub gender: Gender,
    pub residence: Address,
    pub path: ResidencePath,
    pub mobile: Option<String>,
    pub employment: Option<String>,
    pub clinical_class: ClinicalClass,
}

impl ValidIntake {
    pub fn into_record(self, case_id: CaseId, registered_at: Timestamp) -> CaseRecord {
        CaseRecord {
            case_id,
            opd_no: self.opd_no,
            ward_no: self.ward_no,
            ward_ticket_no: self.ward_ticket_no,
            title: self.title,
            first_name: self.first_name,
            last_name: self.last_name,
            age: self.age,
            gender: self.gender,
            residence: self.residence,
            path: self.path,
            mobile: self.mobile,
            employment: self.employment,
            clinical_class: self.clinical_class,
            registered_at,
            attention: AttentionStatus::Reported,
        }
    }
}

fn required(field: &str, value: &str) -> Result<String, CaseError> {
    let v = value.split_whitespace().collect::<Vec<_>>().join(" ");
    if v.is_empty() {
        Err(invalid(field, "required"))
    } else {
        Ok(v)
    }
}

fn optional(value: &Option<String>) -> Option<String> {
    value
        .as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
}

pub fn is_phone_number(s: &str) -> bool {
    (9..=10).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit())
}

/// Checks every field; the first problem rejects the whole form.
pub fn validate_intake(
    form: &CaseIntakeForm,
    gazetteer: &Gazetteer,
    vocabularies: &Vocabularies,
) -> Result<ValidIntake, CaseError> {
    let opd_no = required("opd_no", &form.opd_no)?;
    let ward_no = required("ward_no", &form.ward_no)?;
    let ward_ticket_no = required("ward_ticket_no", &form.ward_ticket_no)?;

    let title_token = required("title", &form.title)?;
    if let Some(v) = vocabularies.get(TITLES) {
        v.lookup(&title_token)
            .ok_or_else(|| invalid("title", format!("{title_token:?} not in vocabulary")))?;
    }
    let title = Title::parse(&title_token)
        .ok_or_else(|| invalid("title", format!("unsupported title {title_token:?}")))?;

    let first_name = required("first_name", &form.first_name)?;
    let last_name = required("last_name", &form.last_name)?;

    let unit = match normalize(&form.age_unit).as_str() {
        "years" | "year" => AgeUnit::Years,
        "months" | "month" => AgeUnit::Months,
        _ => return Err(invalid("age_unit", "expected years or months")),
    };
    let max = match unit {
        AgeUnit::Years => 130,
        AgeUnit::Months => 36,
    };
    if form.age_value < 0 || form.age_value > max {
        return Err(invalid("age_value", format!("must be between 0 and {max}")));
    }
    let age = Age {
        value: form.age_value as u32,
        unit,
    };

    let gender = match normalize(&form.gender).as_str() {
        "female" => Gender::Female,
        "male" => Gender::Male,
        _ => return Err(invalid("gender", "expected female or male")),
    };

    let door_no = required("door_no", &form.door_no)?;
    let street = required("street", &form.street)?;
    let land_token = required("land_type", &form.land_type)?;
    if let Some(v) = vocabularies.get(LAND_TYPES) {
        v.lookup(&land_token)
            .ok_or_else(|| invalid("land_type", format!("{land_token:?} not in vocabulary")))?;
    }
    let land_type = LandType::parse(&land_token)
        .ok_or_else(|| invalid("land_type", format!("unsupported land type {land_token:?}")))?;

    let gn_division = required("gn_division", &form.gn_division)?;
    let district_hint = optional(&form.district_hint);
    let path = gazetteer
        .resolve(&gn_division, district_hint.as_deref())
        .map_err(|e| match e {
            GazetteerError::AmbiguousDivision { .. } => invalid("gn_division", format!("{e}")),
            _ => invalid(
                "gn_division",
                format!("unknown GN division {gn_division:?}"),
            ),
        })?;

    let mobile = optional(&form.mobile);
    if let Some(m) = &mobile {
        if !is_phone_number(m) {
            return Err(invalid("mobile", "must be 9 or 10 digits"));
        }
    }

    let employment = match optional(&form.employment) {
        None => None,
        Some(token) => match vocabularies.get(EMPLOYMENT) {
            Some(v) => Some(
                v.lookup(&token)
                    .ok_or_else(|| invalid("employment", format!("{token:?} not in vocabulary")))?
                    .to_string(),
            ),
            None => Some(token),
        },
    };

    let clinical_class = match optional(&form.clinical_class)
        .as_deref()
        .map(normalize)
        .as_deref()
    {
        None | Some("unspecified") => ClinicalClass::Unspecified,
        Some("df") => ClinicalClass::Df,
        Some("dhf") => ClinicalClass::Dhf,
        Some(_) => return Err(invalid("clinical_class", "expected DF, DHF or unspecified")),
    };

    Ok(ValidIntake {
        opd_no,
        ward_no,
        ward_ticket_no,
        title,
        first_name,
        last_name,
        age,
        gender,
        residence: Address {
            door_no,
            street,
            land_type,
            gn_division: path.gn.clone(),
            district_hint,
        },
        path,
        mobile,
        employment,
        clinical_class,
    })
}

/// Autocompletion over a gazetteer level (`districts`, `moh_areas`,
/// `phi_areas`, `gn_divisions`) or a named vocabulary.
pub fn suggest(
    target: &str,
    prefix: &str,
    limit: usize,
    gazetteer: &Gazetteer,
    vocabularies: &Vocabularies,
) -> Result<Vec<String>, CaseError> {
    if limit == 0 {
        return Err(CaseError::InvalidLimit);
    }
    let mut pool = match target {
        "districts" => gazetteer.names(Level::District),
        "moh_areas" => gazetteer.names(Level::Moh),
        "phi_areas" => gazetteer.names(Level::Phi),
        "gn_divisions" => gazetteer.names(Level::Gn),
        other => vocabularies
            .get(other)
            .ok_or_else(|| CaseError::UnknownVocabulary(other.to_string()))?
            .entries()
            .to_vec(),
    };
    let p = normalize(prefix);
    pool.retain(|t| normalize(t).starts_with(&p));
    pool.sort_by(|a, b| normalize(a).cmp(&normalize(b)).then_with(|| a.cmp(b)));
    pool.truncate(limit);
    Ok(pool)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseFilter {
    pub district: Option<String>,
    pub moh_area: Option<String>,
    pub phi_area: Option<String>,
    /// Calendar date of registration in the display zone.
    pub day: Option<NaiveDate>,
    pub status: Option<AttentionStatus>,
}

impl CaseFilter {
    pub fn matches(&self, case: &CaseRecord, zone: DisplayZone) -> bool {
        let eq = |want: &Option<String>, have: &str| {
            want.as_ref()
                .is_none_or(|w| normalize(w) == normalize(have))
        };
        eq(&self.district, &case.path.district)
            && eq(&self.moh_area, &case.path.moh_area)
            && eq(&self.phi_area, &case.path.phi_area)
            && self
                .day
                .is_none_or(|d| zone.local_date(&case.registered_at) == d)
            && self.status.is_none_or(|s| case.attention == s)
    }
}

/// Matching cases ordered by registration time, then case id.
pub fn list_cases<'a>(
    cases: &'a BTreeMap<CaseId, CaseRecord>,
    filter: &CaseFilter,
    zone: DisplayZone,
) -> Vec<&'a CaseRecord> {
    let mut out: Vec<&CaseRecord> = cases.values().filter(|c| filter.matches(c, zone)).collect();
    out.sort_by(|a, b| {
        a.registered_at
            .cmp(&b.registered_at)
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
    out
}
