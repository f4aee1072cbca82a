//! Species catalog: JSON records describing one transition each.
//!
//! A catalog file is either a bare array of records or an object
//! `{"version": ..., "species": [...]}`. Record keys are `name`, `lambda_m`,
//! `gamma_rad_s`, `T2_s` (seconds or `"radiative"`), `N`, `finesse`,
//! `mode_area_m2` and `beta`; `length_m`, `quantum_efficiency` and
//! `transition` are optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coherence, PhysicalSystem, DEFAULT_BETA, DEFAULT_CAVITY_LENGTH, DEFAULT_MODE_AREA};

const BUILTIN_JSON: &str = include_str!("../data/table1.json");

fn default_length() -> f64 {
    DEFAULT_CAVITY_LENGTH
}
fn default_area() -> f64 {
    DEFAULT_MODE_AREA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_qe() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<String>,
    pub lambda_m: f64,
    pub gamma_rad_s: f64,
    #[serde(rename = "T2_s")]
    pub t2_s: Coherence,
    #[serde(rename = "N")]
    pub n: u64,
    pub finesse: f64,
    #[serde(default = "default_area")]
    pub mode_area_m2: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_length")]
    pub length_m: f64,
    #[serde(default = "default_qe")]
    pub quantum_efficiency: f64,
}

impl SpeciesRecord {
    pub fn system(&self) -> Result<PhysicalSystem> {
        let sys = PhysicalSystem {
            wavelength: self.lambda_m,
            gamma: self.gamma_rad_s,
            coherence: self.t2_s,
            atom_number: self.n,
            finesse: self.finesse,
            length: self.length_m,
            mode_area: self.mode_area_m2,
            quantum_efficiency: self.quantum_efficiency,
            beta: self.beta,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn from_system(name: impl Into<String>, sys: &PhysicalSystem) -> Self {
        SpeciesRecord {
            name: name.into(),
            transition: None,
            lambda_m: sys.wavelength,
            gamma_rad_s: sys.gamma,
            t2_s: sys.coherence,
            n: sys.atom_number,
            finesse: sys.finesse,
            mode_area_m2: sys.mode_area,
            beta: sys.beta,
            length_m: sys.length,
            quantum_efficiency: sys.quantum_efficiency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default = "unversioned")]
    pub version: String,
    pub species: Vec<SpeciesRecord>,
}

fn unversioned() -> String {
    "unversioned".to_string()
}

impl Catalog {
    /// The five lattice-clock systems shipped with the crate.
    pub fn builtin() -> Catalog {
        Catalog::from_json(BUILTIN_JSON).expect("built-in catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Catalog> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            Full(Catalog),
            Records(Vec<SpeciesRecord>),
            Single(SpeciesRecord),
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Catalog(e.to_string()))?;
        let catalog = match doc {
            Doc::Full(c) => c,
            Doc::Records(species) => Catalog { version: unversioned(), species },
            Doc::Single(record) => Catalog { version: unversioned(), species: vec![record] },
        };
        if catalog.species.is_empty() {
            return Err(Error::Catalog("catalog contains no species".into()));
        }
        for record in &catalog.species {
            record.system().map_err(|e| Error::Catalog(format!("species `{}`: {e}", record.name)))?;
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path)?;
        Catalog::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    /// Case-insensitive lookup by name.
    pub fn get(&self, name: &str) -> Result<&SpeciesRecord> {
        self.species
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownSpecies(name.to_string()))
    }
}
