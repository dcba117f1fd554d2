//! Administrative geography: health district → MOH area → PHI area → GN
//! division.
//!
//! The on-disk document is TOML (see `docs/FORMATS.md`):
//!
//! ```toml
//! [[district]]
//! name = "Jaffna"
//! centroid = [9.6615, 80.0255]      # optional, [lat, lon]
//!
//! [[district.moh]]
//! name = "Jaffna"
//!
//! [[district.moh.phi]]
//! name = "Gurunagar II"
//! gn = ["Chundikul North", { name = "Chundikul South", centroid = [9.66, 80.02] }]
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::normalize::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    District,
    Moh,
    Phi,
    Gn,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::District => "health district",
            Level::Moh => "MOH area",
            Level::Phi => "PHI area",
            Level::Gn => "GN division",
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GazetteerError {
    #[error("gazetteer parse error: {0}")]
    Parse(String),
    #[error("duplicate {level} name {name:?}")]
    DuplicateName { name: String, level: Level },
    #[error("empty {level} list under {parent:?}")]
    EmptyLevel { level: Level, parent: String },
    #[error("empty {level} name under {parent:?}")]
    EmptyName { level: Level, parent: String },
    #[error("centroid of {name:?} out of range")]
    InvalidCentroid { name: String },
    #[error("unknown GN division {0:?}")]
    UnknownDivision(String),
    #[error("GN division {name:?} exists in several places ({candidates:?}); a district hint is required")]
    AmbiguousDivision {
        name: String,
        candidates: Vec<String>,
    },
}

/// `[lat, lon]` in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Centroid {
    pub lat: f64,
    pub lon: f64,
}

impl From<[f64; 2]> for Centroid {
    fn from([lat, lon]: [f64; 2]) -> Self {
        Centroid { lat, lon }
    }
}

impl From<Centroid> for [f64; 2] {
    fn from(c: Centroid) -> Self {
        [c.lat, c.lon]
    }
}

impl Centroid {
    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnDivision {
    pub name: String,
    pub centroid: Option<Centroid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiArea {
    pub name: String,
    pub centroid: Option<Centroid>,
    pub gn_divisions: Vec<GnDivision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MohArea {
    pub name: String,
    pub centroid: Option<Centroid>,
    pub phi_areas: Vec<PhiArea>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthDistrict {
    pub name: String,
    pub centroid: Option<Centroid>,
    pub moh_areas: Vec<MohArea>,
}

/// Identifies an MOH area by its canonical (gazetteer) names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MohRef {
    pub district: String,
    pub moh_area: String,
}

impl fmt::Display for MohRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.district, self.moh_area)
    }
}

/// Identifies a PHI area by its canonical names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhiRef {
    pub district: String,
    pub moh_area: String,
    pub phi_area: String,
}

impl PhiRef {
    pub fn moh(&self) -> MohRef {
        MohRef {
            district: self.district.clone(),
            moh_area: self.moh_area.clone(),
        }
    }
}

impl fmt::Display for PhiRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.district, self.moh_area, self.phi_area)
    }
}

/// Root-to-leaf path for a resolved GN division. Names are canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidencePath {
    pub gn: String,
    pub phi_area: String,
    pub moh_area: String,
    pub district: String,
}

impl ResidencePath {
    pub fn moh(&self) -> MohRef {
        MohRef {
            district: self.district.clone(),
            moh_area: self.moh_area.clone(),
        }
    }

    pub fn phi(&self) -> PhiRef {
        PhiRef {
            district: self.district.clone(),
            moh_area: self.moh_area.clone(),
            phi_area: self.phi_area.clone(),
        }
    }
}

type NodePath = (usize, usize, usize, usize);

#[derive(Debug, Clone)]
pub struct Gazetteer {
    districts: Vec<HealthDistrict>,
    index: HashMap<String, Vec<NodePath>>,
}

impl PartialEq for Gazetteer {
    fn eq(&self, other: &Self) -> bool {
        self.districts == other.districts
    }
}

// On-disk shape.
#[derive(Serialize, Deserialize)]
struct Document {
    #[serde(default)]
    district: Vec<DistrictDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistrictDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centroid: Option<Centroid>,
    #[serde(default)]
    moh: Vec<MohDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MohDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centroid: Option<Centroid>,
    #[serde(default)]
    phi: Vec<PhiDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhiDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centroid: Option<Centroid>,
    #[serde(default)]
    gn: Vec<GnDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GnDoc {
    Name(String),
    Detailed {
        name: String,
        centroid: Option<Centroid>,
    },
}

impl Gazetteer {
    pub fn from_toml_str(doc: &str) -> Result<Self, GazetteerError> {
        let doc: Document =
            toml::from_str(doc).map_err(|e| GazetteerError::Parse(e.to_string()))?;
        let districts = doc
            .district
            .into_iter()
            .map(|d| HealthDistrict {
                name: d.name,
                centroid: d.centroid,
                moh_areas: d
                    .moh
                    .into_iter()
                    .map(|m| MohArea {
                        name: m.name,
                        centroid: m.centroid,
                        phi_areas: m
                            .phi
                            .into_iter()
                            .map(|p| PhiArea {
                                name: p.name,
                                centroid: p.centroid,
                                gn_divisions: p
                                    .gn
                                    .into_iter()
                                    .map(|g| match g {
                                        GnDoc::Name(name) => GnDivision {
                                            name,
                                            centroid: None,
                                        },
                                        GnDoc::Detailed { name, centroid } => {
                                            GnDivision { name, centroid }
                                        }
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        Self::new(districts)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GazetteerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GazetteerError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Validates the tree and builds the lookup index.
    pub fn new(districts: Vec<HealthDistrict>) -> Result<Self, GazetteerError> {
        if districts.is_empty() {
            return Err(GazetteerError::EmptyLevel {
                level: Level::District,
                parent: "<root>".into(),
            });
        }
        check_names(
            districts.iter().map(|d| (&d.name, d.centroid)),
            Level::District,
            "<root>",
        )?;
        let mut index: HashMap<String, Vec<NodePath>> = HashMap::new();
        for (di, d) in districts.iter().enumerate() {
            if d.moh_areas.is_empty() {
                return Err(GazetteerError::EmptyLevel {
                    level: Level::Moh,
                    parent: d.name.clone(),
                });
            }
            check_names(
                d.moh_areas.iter().map(|m| (&m.name, m.centroid)),
                Level::Moh,
                &d.name,
            )?;
            for (mi, m) in d.moh_areas.iter().enumerate() {
                if m.phi_areas.is_empty() {
                    return Err(GazetteerError::EmptyLevel {
                        level: Level::Phi,
                        parent: m.name.clone(),
                    });
                }
                check_names(
                    m.phi_areas.iter().map(|p| (&p.name, p.centroid)),
                    Level::Phi,
                    &m.name,
                )?;
                // GN names are unique across the whole MOH area, not just the PHI area.
                let mut seen_gn = HashSet::new();
                for (pi, p) in m.phi_areas.iter().enumerate() {
                    if p.gn_divisions.is_empty() {
                        return Err(GazetteerError::EmptyLevel {
                            level: Level::Gn,
                            parent: p.name.clone(),
                        });
                    }
                    check_names(
                        p.gn_divisions.iter().map(|g| (&g.name, g.centroid)),
                        Level::Gn,
                        &p.name,
                    )?;
                    for (gi, g) in p.gn_divisions.iter().enumerate() {
                        let key = normalize(&g.name);
                        if !seen_gn.insert(key.clone()) {
                            return Err(GazetteerError::DuplicateName {
                                name: g.name.clone(),
                                level: Level::Gn,
                            });
                        }
                        index.entry(key).or_default().push((di, mi, pi, gi));
                    }
                }
            }
        }
        Ok(Gazetteer { districts, index })
    }

    pub fn to_toml_string(&self) -> String {
        let doc = Document {
            district: self
                .districts
                .iter()
                .map(|d| DistrictDoc {
                    name: d.name.clone(),
                    centroid: d.centroid,
                    moh: d
                        .moh_areas
                        .iter()
                        .map(|m| MohDoc {
                            name: m.name.clone(),
                            centroid: m.centroid,
                            phi: m
                                .phi_areas
                                .iter()
                                .map(|p| PhiDoc {
                                    name: p.name.clone(),
                                    centroid: p.centroid,
                                    gn: p
                                        .gn_divisions
                                        .iter()
                                        .map(|g| match g.centroid {
                                            None => GnDoc::Name(g.name.clone()),
                                            Some(c) => GnDoc::Detailed {
                                                name: g.name.clone(),
                                                centroid: Some(c),
                                            },
                                        })
                                        .collect(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("gazetteer document always serializes")
    }

    pub fn districts(&self) -> &[HealthDistrict] {
        &self.districts
    }

    /// District names in alphabetical (normalized) order.
    pub fn district_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.districts.iter().map(|d| d.name.clone()).collect();
        names.sort_by_key(|n| normalize(n));
        names
    }

    pub fn moh_areas(&self) -> Vec<MohRef> {
        let mut out: Vec<MohRef> = self
            .districts
            .iter()
            .flat_map(|d| {
                d.moh_areas.iter().map(move |m| MohRef {
                    district: d.name.clone(),
                    moh_area: m.name.clone(),
                })
            })
            .collect();
        out.sort();
        out
    }

    pub fn phi_areas(&self) -> Vec<PhiRef> {
        let mut out = Vec::new();
        for d in &self.districts {
            for m in &d.moh_areas {
                for p in &m.phi_areas {
                    out.push(PhiRef {
                        district: d.name.clone(),
                        moh_area: m.name.clone(),
                        phi_area: p.name.clone(),
                    });
                }
            }
        }
        out.sort();
        out
    }

    /// Every root-to-leaf path, in document order.
    pub fn paths(&self) -> Vec<ResidencePath> {
        let mut out = Vec::new();
        for d in &self.districts {
            for m in &d.moh_areas {
                for p in &m.phi_areas {
                    for g in &p.gn_divisions {
                        out.push(ResidencePath {
                            gn: g.name.clone(),
                            phi_area: p.name.clone(),
                            moh_area: m.name.clone(),
                            district: d.name.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Distinct canonical names at one level, sorted by normalized form.
    pub fn names(&self, level: Level) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |name: &String| {
            if seen.insert(normalize(name)) {
                out.push(name.clone());
            }
        };
        for d in &self.districts {
            if level == Level::District {
                push(&d.name);
                continue;
            }
            for m in &d.moh_areas {
                if level == Level::Moh {
                    push(&m.name);
                    continue;
                }
                for p in &m.phi_areas {
                    if level == Level::Phi {
                        push(&p.name);
                        continue;
                    }
                    for g in &p.gn_divisions {
                        push(&g.name);
                    }
                }
            }
        }
        out.sort_by(|a, b| normalize(a).cmp(&normalize(b)).then_with(|| a.cmp(b)));
        out
    }

    /// Canonical district name for a user-supplied one.
    pub fn find_district(&self, name: &str) -> Option<&str> {
        let key = normalize(name);
        self.districts
            .iter()
            .find(|d| normalize(&d.name) == key)
            .map(|d| d.name.as_str())
    }

    pub fn find_moh(&self, district: &str, moh_area: &str) -> Option<MohRef> {
        let (dk, mk) = (normalize(district), normalize(moh_area));
        self.districts
            .iter()
            .filter(|d| normalize(&d.name) == dk)
            .find_map(|d| {
                d.moh_areas
                    .iter()
                    .find(|m| normalize(&m.name) == mk)
                    .map(|m| MohRef {
                        district: d.name.clone(),
                        moh_area: m.name.clone(),
                    })
            })
    }

    pub fn find_phi(&self, district: &str, moh_area: &str, phi_area: &str) -> Option<PhiRef> {
        let moh = self.find_moh(district, moh_area)?;
        let pk = normalize(phi_area);
        self.districts
            .iter()
            .find(|d| d.name == moh.district)?
            .moh_areas
            .iter()
            .find(|m| m.name == moh.moh_area)?
            .phi_areas
            .iter()
            .find(|p| normalize(&p.name) == pk)
            .map(|p| PhiRef {
                district: moh.district.clone(),
                moh_area: moh.moh_area.clone(),
                phi_area: p.name.clone(),
            })
    }

    /// Resolves a GN division to its unique path. When the name occurs in
    /// several places the district hint narrows the candidates.
    pub fn resolve(
        &self,
        gn_division: &str,
        district_hint: Option<&str>,
    ) -> Result<ResidencePath, GazetteerError> {
        let key = normalize(gn_division);
        let candidates = self
            .index
            .get(&key)
            .ok_or_else(|| GazetteerError::UnknownDivision(gn_division.to_string()))?;
        let hint = district_hint.map(normalize).filter(|h| !h.is_empty());
        let matching: Vec<&NodePath> = candidates
            .iter()
            .filter(|(di, ..)| {
                hint.as_ref()
                    .is_none_or(|h| normalize(&self.districts[*di].name) == *h)
            })
            .collect();
        match matching.as_slice() {
            [] => Err(GazetteerError::UnknownDivision(gn_division.to_string())),
            [only] => Ok(self.path_at(**only)),
            many => Err(GazetteerError::AmbiguousDivision {
                name: gn_division.to_string(),
                candidates: many
                    .iter()
                    .map(|p| {
                        let path = self.path_at(**p);
                        format!("{}/{}", path.district, path.moh_area)
                    })
                    .collect(),
            }),
        }
    }

    fn path_at(&self, (di, mi, pi, gi): NodePath) -> ResidencePath {
        let d = &self.districts[di];
        let m = &d.moh_areas[mi];
        let p = &m.phi_areas[pi];
        ResidencePath {
            gn: p.gn_divisions[gi].name.clone(),
            phi_area: p.name.clone(),
            moh_area: m.name.clone(),
            district: d.name.clone(),
        }
    }
}

fn check_names<'a>(
    items: impl Iterator<Item = (&'a String, Option<Centroid>)>,
    level: Level,
    parent: &str,
) -> Result<(), GazetteerError> {
    let mut seen = HashSet::new();
    for (name, centroid) in items {
        let key = normalize(name);
        if key.is_empty() {
            return Err(GazetteerError::EmptyName {
                level,
                parent: parent.to_string(),
            });
        }
        if !seen.insert(key) {
            return Err(GazetteerError::DuplicateName {
                name: name.clone(),
                level,
            });
        }
        if centroid.is_some_and(|c| !c.is_valid()) {
            return Err(GazetteerError::InvalidCentroid { name: name.clone() });
        }
    }
    Ok(())
}
