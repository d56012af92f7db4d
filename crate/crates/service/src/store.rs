use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use tea_core::canonical::{from_canonical_json, to_canonical_json};
use tea_core::metrics::{ingest_table, is_valid_dataset_ref, TableError};
use tea_core::AssuranceCase;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("case {0} not found")]
    NotFound(String),
    #[error("revision mismatch: expected {expected}, stored {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Table(#[from] TableError),
    #[error("stored case {id} is unreadable: {message}")]
    Corrupt { id: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct StoredCase {
    pub case_id: String,
    pub case: AssuranceCase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseSummary {
    pub case_id: String,
    pub title: String,
    pub revision: u64,
}

/// Case ids are URL-safe tokens.
pub fn is_valid_case_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn slug(title: &str) -> String {
    let mut out = String::new();
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
        if out.len() >= 40 {
            break;
        }
    }
    let trimmed = out.trim_end_matches('-');
    if trimmed.is_empty() {
        "case".to_owned()
    } else {
        trimmed.to_owned()
    }
}

/// File-backed store rooted at a directory holding `cases/`, `datasets/`,
/// `evidence/` and `maps/`. Writes go through a temp file and a rename, and
/// are serialized per case id.
#[derive(Debug)]
pub struct CaseStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    create_lock: Mutex<()>,
}

impl CaseStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["cases", "datasets", "evidence", "maps"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(CaseStore {
            root,
            locks: Mutex::new(HashMap::new()),
            create_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cases_dir(&self) -> PathBuf {
        self.root.join("cases")
    }

    pub fn datasets_dir(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn evidence_dir(&self) -> PathBuf {
        self.root.join("evidence")
    }

    pub fn maps_dir(&self) -> PathBuf {
        self.root.join("maps")
    }

    fn case_path(&self, id: &str) -> PathBuf {
        self.cases_dir().join(format!("{id}.json"))
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_owned()).or_default().clone()
    }

    pub fn list(&self) -> Result<Vec<CaseSummary>, StoreError> {
        let dir = self.cases_dir();
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let id = name.strip_suffix(".json")?;
                is_valid_case_id(id).then(|| id.to_owned())
            })
            .collect();
        ids.sort();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let stored = self.get(&id)?;
            out.push(CaseSummary {
                case_id: id,
                title: stored.case.title,
                revision: stored.case.revision,
            });
        }
        Ok(out)
    }

    pub fn get(&self, id: &str) -> Result<StoredCase, StoreError> {
        if !is_valid_case_id(id) {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        let path = self.case_path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_owned())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let case = from_canonical_json(&bytes).map_err(|e| StoreError::Corrupt {
            id: id.to_owned(),
            message: e.to_string(),
        })?;
        Ok(StoredCase {
            case_id: id.to_owned(),
            case,
        })
    }

    /// Stores a new case at revision 0 under an id derived from its title.
    pub fn create(&self, body: &[u8]) -> Result<StoredCase, StoreError> {
        let mut case = from_canonical_json(body).map_err(|e| StoreError::BadRequest(e.to_string()))?;
        case.revision = 0;
        let _guard = self.create_lock.lock().unwrap_or_else(|e| e.into_inner());
        let base = slug(&case.title);
        let mut id = base.clone();
        let mut n = 1;
        while self.case_path(&id).exists() {
            n += 1;
            id = format!("{base}-{n}");
        }
        self.write_atomic(&self.case_path(&id), &to_canonical_json(&case))?;
        Ok(StoredCase { case_id: id, case })
    }

    /// Replaces a case if `expected` matches the stored revision. The stored
    /// revision becomes `expected + 1` whatever the body says.
    pub fn save(&self, id: &str, body: &[u8], expected: u64) -> Result<StoredCase, StoreError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.get(id)?;
        if current.case.revision != expected {
            return Err(StoreError::Conflict {
                expected,
                current: current.case.revision,
            });
        }
        let mut case = from_canonical_json(body).map_err(|e| StoreError::BadRequest(e.to_string()))?;
        case.revision = expected + 1;
        self.write_atomic(&self.case_path(id), &to_canonical_json(&case))?;
        Ok(StoredCase {
            case_id: id.to_owned(),
            case,
        })
    }

    /// Validates CSV bytes as a prediction table before storing them as
    /// `datasets/{name}.csv`. Returns the row count.
    pub fn put_dataset(&self, name: &str, csv: &[u8]) -> Result<usize, StoreError> {
        if !is_valid_dataset_ref(name) {
            return Err(StoreError::BadRequest(format!("invalid dataset name {name:?}")));
        }
        let table = ingest_table(csv)?;
        let path = self.datasets_dir().join(format!("{name}.csv"));
        let lock = self.lock_for(&format!("dataset:{name}"));
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        self.write_atomic(&path, csv)?;
        Ok(table.len())
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = path.parent().unwrap_or(&self.root);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
        tmp.write_all(bytes).map_err(io_err(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io_err(path))?;
        tmp.persist(path).map_err(|e| StoreError::Io {
            path: path.to_owned(),
            source: e.error,
        })?;
        Ok(())
    }
}
