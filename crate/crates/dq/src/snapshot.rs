//! Snapshot directories: one `<entity>.csv` per catalog entity.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use dq_core::schema::SchemaCatalog;
use dq_core::table::{Entity, Repository, TableError};

use crate::csv::{read_entity, write_entity, CsvError};

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: CsvError },
    #[error("snapshot {} has no file for entity `{entity}`", dir.display())]
    Missing { dir: PathBuf, entity: String },
    #[error(transparent)]
    Table(#[from] TableError),
}

pub fn entity_path(dir: &Path, entity: &str) -> PathBuf {
    dir.join(format!("{entity}.csv"))
}

/// Loads every catalog entity, reading files in parallel.
pub fn load_snapshot(dir: &Path, catalog: &SchemaCatalog) -> Result<Repository, SnapshotError> {
    if !dir.is_dir() {
        return Err(SnapshotError::Io {
            path: dir.into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let entities: Vec<Entity> = catalog
        .entities()
        .par_iter()
        .map(|schema| {
            let path = entity_path(dir, &schema.name);
            if !path.is_file() {
                return Err(SnapshotError::Missing {
                    dir: dir.into(),
                    entity: schema.name.clone(),
                });
            }
            let text = fs::read_to_string(&path).map_err(|source| SnapshotError::Io {
                path: path.clone(),
                source,
            })?;
            read_entity(schema, &text).map_err(|source| SnapshotError::Csv { path, source })
        })
        .collect::<Result<_, _>>()?;
    Ok(Repository::new(catalog.clone(), entities)?)
}

/// Writes each entity as canonical CSV.
pub fn write_snapshot<'a>(
    dir: &Path,
    entities: impl IntoIterator<Item = &'a Entity>,
) -> Result<(), SnapshotError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SnapshotError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for e in entities {
        let path = entity_path(dir, e.name());
        fs::write(&path, write_entity(e)).map_err(io(&path))?;
    }
    Ok(())
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    let mut out = String::with_capacity(7 + 64);
    out.push_str("sha256:");
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Digest of the canonical CSV of every entity, in catalog order, so
/// formatting differences in the files do not change it.
pub fn snapshot_fingerprint(repo: &Repository) -> String {
    let texts: Vec<(String, String)> = repo
        .catalog()
        .entities()
        .par_iter()
        .map(|s| {
            let text = repo.entity(&s.name).map(write_entity).unwrap_or_default();
            (s.name.clone(), text)
        })
        .collect();
    let parts: Vec<&[u8]> = texts
        .iter()
        .flat_map(|(n, t)| [n.as_bytes(), t.as_bytes()])
        .collect();
    sha256_hex(&parts)
}
