use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
        }
    }
}

/// Column layout of a tabular dataset: which columns are features, which one
/// is the binary sensitive attribute and which one carries the label.
///
/// `columns` lists every CSV column, the label column included. The label
/// column is never encoded as a feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub sensitive: String,
    pub label: String,
    /// Raw label value that maps to outcome 1.
    #[serde(deserialize_with = "scalar_as_string")]
    pub positive_label: String,
    /// Raw label value that maps to outcome 0. When absent, any single other
    /// value is accepted as the negative class.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "opt_scalar_as_string"
    )]
    pub negative_label: Option<String>,
}

impl FeatureSchema {
    pub fn new(
        columns: Vec<ColumnSpec>,
        sensitive: impl Into<String>,
        label: impl Into<String>,
        positive_label: impl Into<String>,
    ) -> Result<Self> {
        let schema = Self {
            columns,
            sensitive: sensitive.into(),
            label: label.into(),
            positive_label: positive_label.into(),
            negative_label: None,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column `{}`",
                    col.name
                )));
            }
        }
        match self.column(&self.sensitive) {
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "sensitive column `{}` is not declared",
                    self.sensitive
                )))
            }
            Some(c) if c.kind != FeatureKind::Categorical => {
                return Err(Error::SchemaMismatch(format!(
                    "sensitive column `{}` must be categorical",
                    self.sensitive
                )))
            }
            Some(_) => {}
        }
        if self.column(&self.label).is_none() {
            return Err(Error::SchemaMismatch(format!(
                "label column `{}` is not declared",
                self.label
            )));
        }
        if self.label == self.sensitive {
            return Err(Error::SchemaMismatch(
                "label and sensitive column must differ".into(),
            ));
        }
        if self.negative_label.as_deref() == Some(self.positive_label.as_str()) {
            return Err(Error::SchemaMismatch(
                "positive and negative label must differ".into(),
            ));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn label_index(&self) -> usize {
        self.column_index(&self.label)
            .expect("validated schema has a label column")
    }

    /// Feature columns (everything but the label) with their index in `columns`.
    pub fn feature_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.columns
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.name != self.label)
    }
}

fn scalar_to_string(value: serde_json::Value) -> std::result::Result<String, String> {
    match value {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        other => Err(format!("expected a scalar label value, found {other}")),
    }
}

fn scalar_as_string<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<String, D::Error> {
    let value = serde_json::Value::deserialize(de)?;
    scalar_to_string(value).map_err(serde::de::Error::custom)
}

fn opt_scalar_as_string<'de, D: Deserializer<'de>>(
    de: D,
) -> std::result::Result<Option<String>, D::Error> {
    match Option::<serde_json::Value>::deserialize(de)? {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => scalar_to_string(v)
            .map(Some)
            .map_err(serde::de::Error::custom),
    }
}
