use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Normalized,
    Raw,
}

/// One SMART attribute column: attribute id plus value variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub id: u16,
    pub variant: Variant,
}

impl FeatureKey {
    pub const fn normalized(id: u16) -> Self {
        FeatureKey {
            id,
            variant: Variant::Normalized,
        }
    }

    pub const fn raw(id: u16) -> Self {
        FeatureKey {
            id,
            variant: Variant::Raw,
        }
    }

    /// Backblaze column name, e.g. `smart_5_raw`.
    pub fn column_name(&self) -> String {
        self.to_string()
    }

    pub fn parse(name: &str) -> Option<Self> {
        let rest = name.strip_prefix("smart_")?;
        let (id, variant) = rest.split_once('_')?;
        let variant = match variant {
            "normalized" => Variant::Normalized,
            "raw" => Variant::Raw,
            _ => return None,
        };
        Some(FeatureKey {
            id: id.parse().ok()?,
            variant,
        })
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let variant = match self.variant {
            Variant::Normalized => "normalized",
            Variant::Raw => "raw",
        };
        write!(f, "smart_{}_{}", self.id, variant)
    }
}

/// Ordered feature list shared by training data, test data and pools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSchema {
    features: Vec<FeatureKey>,
}

/// The eleven SMART attributes used for failure prediction.
const DEFAULT_FEATURES: [FeatureKey; 11] = [
    FeatureKey::normalized(1),
    FeatureKey::normalized(3),
    FeatureKey::normalized(5),
    FeatureKey::raw(5),
    FeatureKey::normalized(7),
    FeatureKey::normalized(9),
    FeatureKey::normalized(187),
    FeatureKey::normalized(189),
    FeatureKey::normalized(194),
    FeatureKey::normalized(197),
    FeatureKey::raw(197),
];

impl FeatureSchema {
    pub fn new(features: Vec<FeatureKey>) -> Self {
        FeatureSchema { features }
    }

    pub fn features(&self) -> &[FeatureKey] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.features.iter().map(FeatureKey::column_name).collect()
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema {
            features: DEFAULT_FEATURES.to_vec(),
        }
    }
}
