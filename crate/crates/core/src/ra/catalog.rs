use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColumnRef, Type};

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("failed to read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed catalog: {0}")]
    Parse(String),
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type", with = "type_name")]
    pub ty: Type,
    pub width_bytes: u32,
    /// Distinct-value count.
    pub ndv: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub row_count: u64,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn width_bytes(&self) -> u64 {
        self.columns.iter().map(|c| c.width_bytes as u64).sum()
    }
}

/// Schema plus statistics. Doubles as the parser's schema.
///
/// On disk this is a TOML document:
///
/// ```toml
/// [[tables]]
/// name = "orders"
/// row_count = 1000
/// columns = [ { name = "o_orderkey", type = "int", width_bytes = 8, ndv = 1000 } ]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub tables: Vec<TableDef>,
}

mod type_name {
    use super::Type;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ty: &Type, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(ty.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Type, D::Error> {
        let s = String::deserialize(d)?;
        Type::from_name(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown type `{s}`")))
    }
}

impl Catalog {
    pub fn new(tables: Vec<TableDef>) -> Result<Self, CatalogError> {
        let cat = Catalog { tables };
        cat.validate()?;
        Ok(cat)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, CatalogError> {
        let cat: Catalog = toml::from_str(s).map_err(|e| CatalogError::Parse(e.to_string()))?;
        cat.validate()?;
        Ok(cat)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("catalog serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CatalogError> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tables {
            if !seen.insert(t.name.as_str()) {
                return Err(CatalogError::Invalid(format!("duplicate table `{}`", t.name)));
            }
            let mut cols = std::collections::BTreeSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.as_str()) {
                    return Err(CatalogError::Invalid(format!(
                        "duplicate column `{}.{}`",
                        t.name, c.name
                    )));
                }
                if t.row_count > 0 && (c.ndv == 0 || c.ndv > t.row_count) {
                    return Err(CatalogError::Invalid(format!(
                        "ndv of `{}.{}` must lie in [1, {}], got {}",
                        t.name, c.name, t.row_count, c.ndv
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn column(&self, c: &ColumnRef) -> Option<&ColumnDef> {
        self.table(&c.table)?.column(&c.column)
    }
}
