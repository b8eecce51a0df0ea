//! In-memory study registry with optional flat-directory persistence:
//! `{store_dir}/{id}/original.{dcm,pgm}`, `mask.pgm`, `meta.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use dashmap::DashMap;
use iwin_core::ingest::SourceKind;
use iwin_core::pgm::PgmImage;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::study::{MaskProvenance, Study};

pub type StudyHandle = Arc<RwLock<Study>>;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    id: String,
    source_kind: SourceKind,
    mask_provenance: Option<MaskProvenance>,
    warnings: Vec<String>,
}

fn original_name(kind: SourceKind) -> &'static str {
    match kind {
        SourceKind::Dicom => "original.dcm",
        SourceKind::Pgm => "original.pgm",
    }
}

/// Each study sits behind its own lock; the map itself is sharded, so
/// there is no lock spanning studies.
#[derive(Debug, Default)]
pub struct StudyStore {
    studies: DashMap<String, StudyHandle>,
    dir: Option<PathBuf>,
}

impl StudyStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a persistent store and loads every study in it.
    pub fn open(dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let store = Self {
            studies: DashMap::new(),
            dir: Some(dir.clone()),
        };
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            match load_study(&entry.path()) {
                Ok(study) => {
                    store
                        .studies
                        .insert(study.id.clone(), Arc::new(RwLock::new(study)));
                }
                Err(e) => tracing::warn!("skipping {}: {e:#}", entry.path().display()),
            }
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<StudyHandle> {
        self.studies.get(id).map(|s| Arc::clone(&s))
    }

    pub fn insert(&self, study: Study) -> anyhow::Result<StudyHandle> {
        self.persist(&study)?;
        let id = study.id.clone();
        let handle = Arc::new(RwLock::new(study));
        self.studies.insert(id, Arc::clone(&handle));
        Ok(handle)
    }

    /// Writes original bytes, mask and metadata for `study`, if persistent.
    pub fn persist(&self, study: &Study) -> anyhow::Result<()> {
        let Some(root) = &self.dir else {
            return Ok(());
        };
        let dir = root.join(&study.id);
        fs::create_dir_all(&dir)?;
        let kind = study.image.source_kind;
        let original = dir.join(original_name(kind));
        if !original.exists() {
            fs::write(&original, &study.original)?;
        }
        match study.mask() {
            Some(m) => fs::write(dir.join("mask.pgm"), PgmImage::from_mask(m).encode())?,
            None => {
                let _ = fs::remove_file(dir.join("mask.pgm"));
            }
        }
        let meta = Meta {
            id: study.id.clone(),
            source_kind: kind,
            mask_provenance: study.provenance(),
            warnings: study.warnings().to_vec(),
        };
        fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }
}

fn load_study(dir: &Path) -> anyhow::Result<Study> {
    let meta: Meta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
    let bytes = fs::read(dir.join(original_name(meta.source_kind)))?;
    let mask = match meta.mask_provenance {
        Some(p) => {
            let pgm = PgmImage::decode(&fs::read(dir.join("mask.pgm"))?)?;
            Some((pgm.to_mask(), p))
        }
        None => None,
    };
    Ok(Study::restore(meta.id, bytes, meta.source_kind, mask, meta.warnings)?)
}
