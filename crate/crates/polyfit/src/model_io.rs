//! Versioned JSON documents for trained models.

use std::fs;
use std::path::Path;

use polyfit_core::kinematics::NormalizationConstants;
use polyfit_core::potential::{Ansatz, ConvexTermBank, Family};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "polyfit-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingWeight {
    pub target: String,
    pub alpha: f64,
}

/// On-disk model. `family`, `ansatz`, `constants` and `alphas` repeat what
/// the bank holds so the file is readable without knowing the bank layout;
/// the bank (raw parameters included) is authoritative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub family: Family,
    pub ansatz: Ansatz,
    pub constants: NormalizationConstants,
    pub alphas: Vec<MixingWeight>,
    pub bank: ConvexTermBank,
}

impl ModelDocument {
    pub fn new(bank: &ConvexTermBank) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            family: bank.family(),
            ansatz: bank.ansatz(),
            constants: *bank.constants(),
            alphas: bank
                .terms()
                .iter()
                .filter_map(|t| t.alpha().map(|alpha| MixingWeight { target: t.target.label(), alpha }))
                .collect(),
            bank: bank.clone(),
        }
    }

    /// Checks the header and the bank's structure.
    pub fn into_bank(self) -> Result<ConvexTermBank> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Data(format!("not a model file (format {:?})", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Data(format!("unsupported model version {} (expected {MODEL_VERSION})", self.version)));
        }
        self.bank.validate().map_err(|e| Error::Data(e.to_string()))?;
        if self.bank.family() != self.family || self.bank.ansatz() != self.ansatz || *self.bank.constants() != self.constants {
            return Err(Error::Data("model header disagrees with the stored bank".into()));
        }
        Ok(self.bank)
    }
}

pub fn to_json(bank: &ConvexTermBank) -> Result<String> {
    serde_json::to_string_pretty(&ModelDocument::new(bank)).map_err(|e| Error::Numerical(format!("cannot encode model: {e}")))
}

pub fn from_json(text: &str) -> Result<ConvexTermBank> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid model file: {e}")))?;
    doc.into_bank()
}

pub fn save_model(bank: &ConvexTermBank, path: &Path) -> Result<()> {
    crate::write_json(path, &ModelDocument::new(bank))
}

pub fn load_model(path: &Path) -> Result<ConvexTermBank> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}
