//! Single-file transactional store for models, uploaded datasets, staff
//! accounts, sessions and singular-evaluation history.
//!
//! Records are JSON values in redb tables. redb runs one write transaction
//! at a time, which is what makes email uniqueness and history appends
//! atomic under concurrent requests.

use std::path::Path;

use redb::{Database, ReadableTable, ReadableTableMetadata, TableDefinition};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gradegauge_core::{Algorithm, TrainedModel, TreeStats};

use crate::model_doc::{self, DocumentError};

const MODELS: TableDefinition<&str, &str> = TableDefinition::new("models");
const MODEL_INFO: TableDefinition<&str, &str> = TableDefinition::new("model_info");
const DATASETS: TableDefinition<&str, &str> = TableDefinition::new("datasets");
const ACCOUNTS: TableDefinition<&str, &str> = TableDefinition::new("accounts");
const EMAILS: TableDefinition<&str, &str> = TableDefinition::new("account_emails");
const SESSIONS: TableDefinition<&str, &str> = TableDefinition::new("sessions");
const HISTORY: TableDefinition<(&str, u64), &str> = TableDefinition::new("history");
const HISTORY_INDEX: TableDefinition<&str, &str> = TableDefinition::new("history_index");
const COUNTERS: TableDefinition<&str, u64> = TableDefinition::new("counters");

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0} belongs to another account")]
    Forbidden(String),
    #[error("an account with this email already exists")]
    DuplicateEmail,
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("storage failure: {0}")]
    Backend(String),
}

impl StoreError {
    pub fn name(&self) -> &'static str {
        match self {
            StoreError::NotFound(_) => "NotFound",
            StoreError::Forbidden(_) => "Forbidden",
            StoreError::DuplicateEmail => "DuplicateEmail",
            StoreError::Document(DocumentError::CorruptDocument(_)) => "CorruptDocument",
            StoreError::Document(DocumentError::UnsupportedVersion(_)) => "UnsupportedVersion",
            StoreError::Backend(_) => "StorageFailure",
        }
    }
}

fn backend<E: Into<redb::Error>>(e: E) -> StoreError {
    StoreError::Backend(e.into().to_string())
}

fn encode<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("store records serialize to JSON")
}

fn decode<T: DeserializeOwned>(s: &str) -> Result<T, StoreError> {
    serde_json::from_str(s).map_err(|e| StoreError::Backend(format!("unreadable record: {e}")))
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn rfc3339(ms: u64) -> String {
    let t = time::OffsetDateTime::from_unix_timestamp_nanos(ms as i128 * 1_000_000)
        .unwrap_or(time::OffsetDateTime::UNIX_EPOCH);
    t.format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub algorithm: Algorithm,
    pub stats: TreeStats,
    pub created_at: String,
    /// Insertion order, used to find the latest model of an algorithm.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub dataset_id: String,
    pub owner: String,
    pub name: String,
    pub layout: String,
    pub rows: usize,
    pub labeled: bool,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetRecord {
    info: DatasetInfo,
    csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaffAccount {
    pub account_id: String,
    pub name: String,
    pub gender: String,
    pub branch: String,
    pub email: String,
    pub password_digest: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub account_id: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewHistoryEntry {
    pub app_id: String,
    pub name: String,
    pub gender: String,
    pub percent_raw: f64,
    pub merit_raw: f64,
    pub admission_type_raw: String,
    pub algorithm: Algorithm,
    pub model_id: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub entry_id: String,
    pub account_id: String,
    #[serde(flatten)]
    pub entry: NewHistoryEntry,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HistoryKey {
    account_id: String,
    seq: u64,
}

pub struct Store {
    db: Database,
}

fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn next_counter(
    txn: &redb::WriteTransaction,
    name: &str,
) -> Result<u64, StoreError> {
    let mut counters = txn.open_table(COUNTERS).map_err(backend)?;
    let next = counters
        .get(name)
        .map_err(backend)?
        .map_or(0, |v| v.value())
        + 1;
    counters.insert(name, next).map_err(backend)?;
    Ok(next)
}

impl Store {
    /// Opens (or creates) the store file and makes sure every table exists.
    pub fn open(path: &Path) -> Result<Store, StoreError> {
        let db = Database::create(path).map_err(backend)?;
        let txn = db.begin_write().map_err(backend)?;
        {
            txn.open_table(MODELS).map_err(backend)?;
            txn.open_table(MODEL_INFO).map_err(backend)?;
            txn.open_table(DATASETS).map_err(backend)?;
            txn.open_table(ACCOUNTS).map_err(backend)?;
            txn.open_table(EMAILS).map_err(backend)?;
            txn.open_table(SESSIONS).map_err(backend)?;
            txn.open_table(HISTORY).map_err(backend)?;
            txn.open_table(HISTORY_INDEX).map_err(backend)?;
            txn.open_table(COUNTERS).map_err(backend)?;
        }
        txn.commit().map_err(backend)?;
        Ok(Store { db })
    }

    fn get<T: DeserializeOwned>(
        &self,
        table: TableDefinition<&str, &str>,
        key: &str,
    ) -> Result<Option<T>, StoreError> {
        let txn = self.db.begin_read().map_err(backend)?;
        let t = txn.open_table(table).map_err(backend)?;
        let v = t.get(key).map_err(backend)?;
        v.map(|g| decode(g.value())).transpose()
    }

    fn all<T: DeserializeOwned>(&self, table: TableDefinition<&str, &str>) -> Result<Vec<T>, StoreError> {
        let txn = self.db.begin_read().map_err(backend)?;
        let t = txn.open_table(table).map_err(backend)?;
        let mut out = Vec::with_capacity(t.len().map_err(backend)? as usize);
        for item in t.iter().map_err(backend)? {
            let (_, v) = item.map_err(backend)?;
            out.push(decode(v.value())?);
        }
        Ok(out)
    }

    /// Stores `model` under a fresh id.
    pub fn save_model(&self, model: &TrainedModel) -> Result<ModelInfo, StoreError> {
        self.save_model_as(&new_id(), model)
    }

    /// Stores `model` under `model_id`, replacing any model with that id.
    pub fn save_model_as(&self, model_id: &str, model: &TrainedModel) -> Result<ModelInfo, StoreError> {
        let doc = model_doc::to_document(model);
        let txn = self.db.begin_write().map_err(backend)?;
        let info = {
            let info = ModelInfo {
                model_id: model_id.to_string(),
                algorithm: model.algorithm,
                stats: model.stats,
                created_at: rfc3339(now_ms()),
                seq: next_counter(&txn, "models")?,
            };
            txn.open_table(MODELS)
                .map_err(backend)?
                .insert(model_id, doc.as_str())
                .map_err(backend)?;
            txn.open_table(MODEL_INFO)
                .map_err(backend)?
                .insert(model_id, encode(&info).as_str())
                .map_err(backend)?;
            info
        };
        txn.commit().map_err(backend)?;
        Ok(info)
    }

    pub fn model_document(&self, model_id: &str) -> Result<String, StoreError> {
        let txn = self.db.begin_read().map_err(backend)?;
        let t = txn.open_table(MODELS).map_err(backend)?;
        let doc = t.get(model_id).map_err(backend)?;
        doc.map(|g| g.value().to_string())
            .ok_or_else(|| StoreError::NotFound(format!("model `{model_id}`")))
    }

    pub fn load_model(&self, model_id: &str) -> Result<TrainedModel, StoreError> {
        Ok(model_doc::from_document(&self.model_document(model_id)?)?)
    }

    pub fn model_info(&self, model_id: &str) -> Result<ModelInfo, StoreError> {
        self.get(MODEL_INFO, model_id)?
            .ok_or_else(|| StoreError::NotFound(format!("model `{model_id}`")))
    }

    /// All models, oldest first.
    pub fn list_models(&self) -> Result<Vec<ModelInfo>, StoreError> {
        let mut all: Vec<ModelInfo> = self.all(MODEL_INFO)?;
        all.sort_by_key(|m| m.seq);
        Ok(all)
    }

    pub fn latest_model(&self, algorithm: Algorithm) -> Result<ModelInfo, StoreError> {
        self.list_models()?
            .into_iter()
            .filter(|m| m.algorithm == algorithm)
            .max_by_key(|m| m.seq)
            .ok_or_else(|| StoreError::NotFound(format!("{algorithm} model")))
    }

    pub fn save_dataset(
        &self,
        owner: &str,
        name: &str,
        layout: &str,
        rows: usize,
        labeled: bool,
        csv: &str,
    ) -> Result<DatasetInfo, StoreError> {
        let info = DatasetInfo {
            dataset_id: new_id(),
            owner: owner.to_string(),
            name: name.to_string(),
            layout: layout.to_string(),
            rows,
            labeled,
            created_at: rfc3339(now_ms()),
        };
        let record = DatasetRecord {
            info: info.clone(),
            csv: csv.to_string(),
        };
        let txn = self.db.begin_write().map_err(backend)?;
        txn.open_table(DATASETS)
            .map_err(backend)?
            .insert(info.dataset_id.as_str(), encode(&record).as_str())
            .map_err(backend)?;
        txn.commit().map_err(backend)?;
        Ok(info)
    }

    /// A dataset and its CSV text, if `owner` uploaded it.
    pub fn dataset(&self, owner: &str, dataset_id: &str) -> Result<(DatasetInfo, String), StoreError> {
        let record: DatasetRecord = self
            .get(DATASETS, dataset_id)?
            .ok_or_else(|| StoreError::NotFound(format!("dataset `{dataset_id}`")))?;
        if record.info.owner != owner {
            return Err(StoreError::Forbidden(format!("dataset `{dataset_id}`")));
        }
        Ok((record.info, record.csv))
    }

    pub fn list_datasets(&self, owner: &str) -> Result<Vec<DatasetInfo>, StoreError> {
        let mut out: Vec<DatasetInfo> = self
            .all::<DatasetRecord>(DATASETS)?
            .into_iter()
            .map(|r| r.info)
            .filter(|i| i.owner == owner)
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at));
        Ok(out)
    }

    /// Inserts an account unless its email (compared case-insensitively) is
    /// already registered.
    pub fn create_account(&self, account: &StaffAccount) -> Result<(), StoreError> {
        let email_key = account.email.to_ascii_lowercase();
        let txn = self.db.begin_write().map_err(backend)?;
        {
            let mut emails = txn.open_table(EMAILS).map_err(backend)?;
            if emails.get(email_key.as_str()).map_err(backend)?.is_some() {
                return Err(StoreError::DuplicateEmail);
            }
            emails
                .insert(email_key.as_str(), account.account_id.as_str())
                .map_err(backend)?;
            txn.open_table(ACCOUNTS)
                .map_err(backend)?
                .insert(account.account_id.as_str(), encode(account).as_str())
                .map_err(backend)?;
        }
        txn.commit().map_err(backend)?;
        Ok(())
    }

    pub fn account(&self, account_id: &str) -> Result<Option<StaffAccount>, StoreError> {
        self.get(ACCOUNTS, account_id)
    }

    pub fn account_by_email(&self, email: &str) -> Result<Option<StaffAccount>, StoreError> {
        let txn = self.db.begin_read().map_err(backend)?;
        let emails = txn.open_table(EMAILS).map_err(backend)?;
        let id = emails
            .get(email.to_ascii_lowercase().as_str())
            .map_err(backend)?
            .map(|g| g.value().to_string());
        match id {
            Some(id) => self.account(&id),
            None => Ok(None),
        }
    }

    /// Records a session. Only a digest of the token is stored.
    pub fn create_session(&self, token: &str, session: &Session) -> Result<(), StoreError> {
        let txn = self.db.begin_write().map_err(backend)?;
        txn.open_table(SESSIONS)
            .map_err(backend)?
            .insert(hash_token(token).as_str(), encode(session).as_str())
            .map_err(backend)?;
        txn.commit().map_err(backend)?;
        Ok(())
    }

    pub fn session(&self, token: &str) -> Result<Option<Session>, StoreError> {
        self.get(SESSIONS, &hash_token(token))
    }

    pub fn revoke_session(&self, token: &str) -> Result<(), StoreError> {
        let txn = self.db.begin_write().map_err(backend)?;
        txn.open_table(SESSIONS)
            .map_err(backend)?
            .remove(hash_token(token).as_str())
            .map_err(backend)?;
        txn.commit().map_err(backend)?;
        Ok(())
    }

    /// Appends a history entry in one transaction; once this returns the
    /// entry is durable.
    pub fn history_append(&self, account_id: &str, entry: NewHistoryEntry) -> Result<HistoryEntry, StoreError> {
        let entry = HistoryEntry {
            entry_id: new_id(),
            account_id: account_id.to_string(),
            entry,
            created_at: rfc3339(now_ms()),
        };
        let txn = self.db.begin_write().map_err(backend)?;
        {
            let seq = next_counter(&txn, "history")?;
            txn.open_table(HISTORY)
                .map_err(backend)?
                .insert((account_id, seq), encode(&entry).as_str())
                .map_err(backend)?;
            let key = HistoryKey {
                account_id: account_id.to_string(),
                seq,
            };
            txn.open_table(HISTORY_INDEX)
                .map_err(backend)?
                .insert(entry.entry_id.as_str(), encode(&key).as_str())
                .map_err(backend)?;
        }
        txn.commit().map_err(backend)?;
        Ok(entry)
    }

    /// The account's entries, newest first.
    pub fn history_list(&self, account_id: &str) -> Result<Vec<HistoryEntry>, StoreError> {
        let txn = self.db.begin_read().map_err(backend)?;
        let t = txn.open_table(HISTORY).map_err(backend)?;
        let mut out = Vec::new();
        for item in t
            .range((account_id, 0)..=(account_id, u64::MAX))
            .map_err(backend)?
            .rev()
        {
            let (_, v) = item.map_err(backend)?;
            out.push(decode(v.value())?);
        }
        Ok(out)
    }

    pub fn history_delete(&self, account_id: &str, entry_id: &str) -> Result<(), StoreError> {
        let txn = self.db.begin_write().map_err(backend)?;
        {
            let mut index = txn.open_table(HISTORY_INDEX).map_err(backend)?;
            let key: HistoryKey = match index.get(entry_id).map_err(backend)? {
                Some(g) => decode(g.value())?,
                None => return Err(StoreError::NotFound(format!("history entry `{entry_id}`"))),
            };
            if key.account_id != account_id {
                return Err(StoreError::Forbidden(format!("history entry `{entry_id}`")));
            }
            index.remove(entry_id).map_err(backend)?;
            txn.open_table(HISTORY)
                .map_err(backend)?
                .remove((key.account_id.as_str(), key.seq))
                .map_err(backend)?;
        }
        txn.commit().map_err(backend)?;
        Ok(())
    }
}
