//! Shipped configuration and canned data for examples and tests.
//!
//! The worked example follows one paediatric case from the Jaffna teaching
//! hospital through registration, PHI attendance and travel history.

use chrono::{DateTime, Utc};

use crate::alerting::AlertRules;
use crate::case_registry::{validate_intake, CaseId, CaseIntakeForm, CaseRecord};
use crate::config::{Context, Settings};
use crate::gazetteer::Gazetteer;
use crate::time::Timestamp;
use crate::travel_risk::TravelEntryInput;
use crate::vocab::{Vocabularies, Vocabulary};
use crate::workflow::OfficerRegistry;

pub const GAZETTEER_TOML: &str = include_str!("../config/gazetteer.toml");
pub const OFFICERS_TOML: &str = include_str!("../config/officers.toml");
pub const ALERT_RULES_TOML: &str = include_str!("../config/alert_rules.toml");
pub const TITLES_TXT: &str = include_str!("../config/vocab/titles.txt");
pub const LAND_TYPES_TXT: &str = include_str!("../config/vocab/land_types.txt");
pub const EMPLOYMENT_TXT: &str = include_str!("../config/vocab/employment.txt");
pub const FOUR_MOH_GAZETTEER_TOML: &str =
    include_str!("../config/fixtures/four_moh_gazetteer.toml");
pub const FOUR_MOH_OFFICERS_TOML: &str = include_str!("../config/fixtures/four_moh_officers.toml");

pub const ICN: &str = "856789012V";
pub const PHI_GURUNAGAR: &str = "771023762V";
pub const PHI_NALLUR: &str = "812345678V";
pub const MOH_JAFFNA: &str = "680512345V";
pub const MOH_NALLUR: &str = "690623456V";
pub const RE_JAFFNA: &str = "701234567V";
pub const EPID: &str = "197512345678";
pub const PUBLIC: &str = "199012345678";

fn at(rfc3339: &str) -> Timestamp {
    DateTime::parse_from_rfc3339(rfc3339)
        .expect("valid fixture instant")
        .with_timezone(&Utc)
}

/// When the worked-example case is registered (22:31:33 Colombo time).
pub fn registered_at() -> Timestamp {
    at("2013-12-31T22:31:33+05:30")
}

/// When the registered case is first looked at on screen.
pub fn viewed_at() -> Timestamp {
    at("2013-12-31T22:37:08+05:30")
}

/// The instant of the worked-example live-update table.
pub fn live_update_at() -> Timestamp {
    at("2013-12-31T22:45:44+05:30")
}

pub fn gazetteer() -> Gazetteer {
    Gazetteer::from_toml_str(GAZETTEER_TOML).expect("shipped gazetteer is valid")
}

pub fn vocabularies() -> Vocabularies {
    let mut v = Vocabularies::default();
    for (name, text) in [
        ("titles", TITLES_TXT),
        ("land_types", LAND_TYPES_TXT),
        ("employment", EMPLOYMENT_TXT),
    ] {
        v.insert(Vocabulary::parse(name, text).expect("shipped vocabulary is valid"));
    }
    v
}

pub fn officers(gazetteer: &Gazetteer) -> OfficerRegistry {
    OfficerRegistry::from_toml_str(OFFICERS_TOML, gazetteer).expect("shipped officers are valid")
}

pub fn alert_rules(officers: &OfficerRegistry) -> AlertRules {
    AlertRules::from_toml_str(ALERT_RULES_TOML, officers).expect("shipped rules are valid")
}

/// The shipped configuration with default settings.
pub fn context() -> Context {
    context_with(Settings::default())
}

pub fn context_with(settings: Settings) -> Context {
    let g = gazetteer();
    let officers = officers(&g);
    let rules = alert_rules(&officers);
    Context {
        gazetteer: g.into(),
        vocabularies: vocabularies(),
        officers,
        rules,
        settings,
    }
}

/// Two districts with two MOH areas each and one PHI per area; no alert rules.
pub fn four_moh_context() -> Context {
    let g = Gazetteer::from_toml_str(FOUR_MOH_GAZETTEER_TOML).expect("fixture gazetteer is valid");
    let officers = OfficerRegistry::from_toml_str(FOUR_MOH_OFFICERS_TOML, &g)
        .expect("fixture officers are valid");
    Context {
        gazetteer: g.into(),
        vocabularies: vocabularies(),
        officers,
        rules: AlertRules::default(),
        settings: Settings::default(),
    }
}

/// The hospital notification of the worked example.
pub fn sample_intake() -> CaseIntakeForm {
    CaseIntakeForm {
        opd_no: "001".into(),
        ward_no: "1".into(),
        ward_ticket_no: "001_1".into(),
        title: "baby".into(),
        first_name: "Sorjaniya".into(),
        last_name: "Rukshan".into(),
        age_value: 2,
        age_unit: "years".into(),
        gender: "female".into(),
        door_no: "878".into(),
        street: "Hospital Road".into(),
        land_type: "private".into(),
        gn_division: "Chundikul North".into(),
        district_hint: None,
        mobile: Some("776544652".into()),
        employment: Some("government_employment".into()),
        clinical_class: None,
    }
}

/// The worked-example case as stored, id `C000001`.
pub fn sample_record() -> CaseRecord {
    validate_intake(&sample_intake(), &gazetteer(), &vocabularies())
        .expect("fixture intake is valid")
        .into_record(CaseId::from_seq(1), registered_at())
}

fn day(day_index: u8, door_no: &str, street: &str, gn_division: &str) -> TravelEntryInput {
    TravelEntryInput {
        day_index,
        door_no: door_no.into(),
        street: street.into(),
        gn_division: gn_division.into(),
        district: Some("Jaffna".into()),
        contact_tp: "776544652".into(),
    }
}

/// A full 14-day travel history for the worked-example case. Five distinct
/// places outside the home fall in days 1 to 9; days 10 to 14 are at home.
pub fn sample_travel() -> Vec<TravelEntryInput> {
    let places = [
        ("12", "Main Street", "Gurunagar East"),
        ("45", "Stanley Road", "Nallur North"),
        ("7", "Point Pedro Road", "Kokuvil East"),
        ("3", "Beach Road", "Navanthurai North"),
        ("21", "Temple Road", "Passaiyoor East"),
    ];
    let mut days = Vec::new();
    for d in 1..=14u8 {
        let (door, street, gn) = match d {
            1..=5 => places[(d - 1) as usize],
            6..=9 => places[(d - 5) as usize],
            _ => ("878", "Hospital Road", "Chundikul North"),
        };
        days.push(day(d, door, street, gn));
    }
    days
}
