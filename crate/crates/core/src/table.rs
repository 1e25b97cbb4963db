//! Immutable in-memory entities, stored column-major.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::schema::{EntitySchema, SchemaCatalog};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("entity `{entity}` row {row}, column `{column}`: null in non-nullable column")]
    NullInNonNullable {
        entity: String,
        row: usize,
        column: String,
    },
    #[error("entity `{entity}` row {row}, column `{column}`: expected {expected}")]
    TypeMismatch {
        entity: String,
        row: usize,
        column: String,
        expected: crate::value::DataType,
    },
    #[error("entity `{entity}`: expected {expected} columns, got {got}")]
    ColumnCount {
        entity: String,
        expected: usize,
        got: usize,
    },
    #[error("entity `{entity}`: columns have different lengths")]
    RaggedColumns { entity: String },
    #[error("entity `{0}` is not in the catalog")]
    UnknownEntity(String),
    #[error("entity `{0}` has no data")]
    MissingEntity(String),
    #[error("entity `{entity}` has no column `{column}`")]
    UnknownColumn { entity: String, column: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    schema: EntitySchema,
    columns: Vec<Vec<Value>>,
    len: usize,
}

impl Entity {
    /// Builds an entity from column vectors laid out in schema order.
    pub fn new(schema: EntitySchema, columns: Vec<Vec<Value>>) -> Result<Self, TableError> {
        if columns.len() != schema.columns.len() {
            return Err(TableError::ColumnCount {
                entity: schema.name.clone(),
                expected: schema.columns.len(),
                got: columns.len(),
            });
        }
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != len) {
            return Err(TableError::RaggedColumns {
                entity: schema.name.clone(),
            });
        }
        for (col, values) in schema.columns.iter().zip(&columns) {
            for (row, v) in values.iter().enumerate() {
                match v.datatype() {
                    None if !col.nullable => {
                        return Err(TableError::NullInNonNullable {
                            entity: schema.name.clone(),
                            row,
                            column: col.name.clone(),
                        })
                    }
                    Some(t) if t != col.datatype => {
                        return Err(TableError::TypeMismatch {
                            entity: schema.name.clone(),
                            row,
                            column: col.name.clone(),
                            expected: col.datatype,
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Entity {
            schema,
            columns,
            len,
        })
    }

    /// Row-major convenience constructor.
    pub fn from_rows(schema: EntitySchema, rows: Vec<Vec<Value>>) -> Result<Self, TableError> {
        let width = schema.columns.len();
        let mut columns: Vec<Vec<Value>> =
            (0..width).map(|_| Vec::with_capacity(rows.len())).collect();
        for row in rows {
            if row.len() != width {
                return Err(TableError::ColumnCount {
                    entity: schema.name.clone(),
                    expected: width,
                    got: row.len(),
                });
            }
            for (c, v) in columns.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Entity::new(schema, columns)
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn schema(&self) -> &EntitySchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn column(&self, index: usize) -> &[Value] {
        &self.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[Value]> {
        self.schema.column_index(name).map(|i| self.column(i))
    }

    pub fn cell(&self, row: usize, column: usize) -> &Value {
        &self.columns[column][row]
    }

    pub fn row(&self, ordinal: usize) -> RowRef<'_> {
        RowRef {
            entity: self,
            ordinal,
        }
    }

    /// Canonical text of the key columns for a row (empty without a key).
    pub fn key_values(&self, ordinal: usize, key: &[usize]) -> Vec<String> {
        key.iter()
            .map(|&c| alloc::string::ToString::to_string(self.cell(ordinal, c)))
            .collect()
    }
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct RowRef<'a> {
    entity: &'a Entity,
    ordinal: usize,
}

impl<'a> RowRef<'a> {
    pub fn ordinal(&self) -> usize {
        self.ordinal
    }

    pub fn get(&self, column: usize) -> &'a Value {
        self.entity.cell(self.ordinal, column)
    }
}

/// Value → row ordinals multimap over the non-null cells of one column.
#[derive(Debug, Clone, Default)]
pub struct ColumnIndex {
    map: HashMap<Value, Vec<usize>>,
}

impl ColumnIndex {
    pub fn contains(&self, v: &Value) -> bool {
        self.map.contains_key(v)
    }

    pub fn rows(&self, v: &Value) -> &[usize] {
        self.map.get(v).map_or(&[], Vec::as_slice)
    }

    /// Number of distinct values.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.map.keys()
    }
}

pub fn index_column(entity: &Entity, column: &str) -> Result<ColumnIndex, TableError> {
    let values = entity
        .column_by_name(column)
        .ok_or_else(|| TableError::UnknownColumn {
            entity: entity.name().into(),
            column: column.into(),
        })?;
    let mut map: HashMap<Value, Vec<usize>> = HashMap::new();
    for (row, v) in values.iter().enumerate() {
        if !v.is_null() {
            map.entry(v.clone()).or_default().push(row);
        }
    }
    Ok(ColumnIndex { map })
}

/// A loaded snapshot: every catalog entity with its rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repository {
    catalog: SchemaCatalog,
    entities: BTreeMap<String, Entity>,
}

impl Repository {
    pub fn new(catalog: SchemaCatalog, entities: Vec<Entity>) -> Result<Self, TableError> {
        let mut map = BTreeMap::new();
        for e in entities {
            if catalog.entity(e.name()).is_none() {
                return Err(TableError::UnknownEntity(e.name().into()));
            }
            map.insert(e.name().into(), e);
        }
        if let Some(missing) = catalog
            .entities()
            .iter()
            .find(|s| !map.contains_key(&s.name))
        {
            return Err(TableError::MissingEntity(missing.name.clone()));
        }
        Ok(Repository {
            catalog,
            entities: map,
        })
    }

    pub fn catalog(&self) -> &SchemaCatalog {
        &self.catalog
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.get(name)
    }

    /// Entities in name order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }
}
