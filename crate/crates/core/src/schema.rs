//! Schema catalog describing the entities of a repository snapshot.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::value::DataType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    pub name: String,
    pub datatype: DataType,
    #[serde(default)]
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<Vec<String>>,
}

impl EntitySchema {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Indexes of the key columns, empty when the entity declares no key.
    pub fn key_indexes(&self) -> Vec<usize> {
        self.key
            .iter()
            .flatten()
            .filter_map(|k| self.column_index(k))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("duplicate entity `{0}`")]
    DuplicateEntity(String),
    #[error("entity `{entity}`: duplicate column `{column}`")]
    DuplicateColumn { entity: String, column: String },
    #[error("entity `{entity}`: key column `{column}` does not exist")]
    MissingKeyColumn { entity: String, column: String },
    #[error("entity `{0}`: key must list at least one column")]
    EmptyKey(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SchemaCatalog {
    entities: Vec<EntitySchema>,
}

impl SchemaCatalog {
    pub fn new(entities: Vec<EntitySchema>) -> Result<Self, CatalogError> {
        for (i, e) in entities.iter().enumerate() {
            if entities[..i].iter().any(|o| o.name == e.name) {
                return Err(CatalogError::DuplicateEntity(e.name.clone()));
            }
            for (j, c) in e.columns.iter().enumerate() {
                if e.columns[..j].iter().any(|o| o.name == c.name) {
                    return Err(CatalogError::DuplicateColumn {
                        entity: e.name.clone(),
                        column: c.name.clone(),
                    });
                }
            }
            if let Some(key) = &e.key {
                if key.is_empty() {
                    return Err(CatalogError::EmptyKey(e.name.clone()));
                }
                if let Some(k) = key.iter().find(|k| e.column_index(k).is_none()) {
                    return Err(CatalogError::MissingKeyColumn {
                        entity: e.name.clone(),
                        column: k.clone(),
                    });
                }
            }
        }
        Ok(SchemaCatalog { entities })
    }

    pub fn entities(&self) -> &[EntitySchema] {
        &self.entities
    }

    pub fn entity(&self, name: &str) -> Option<&EntitySchema> {
        self.entities.iter().find(|e| e.name == name)
    }
}
