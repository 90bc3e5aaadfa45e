//! Staff registration, password digests and bearer-token sessions.

use std::sync::OnceLock;

use rand::RngCore;
use sha2::Sha256;
use subtle::ConstantTimeEq;

use crate::store::{new_id, rfc3339, Session, StaffAccount, Store, StoreError};

pub const MIN_PASSWORD_LEN: usize = 8;
const DIGEST_SCHEME: &str = "pbkdf2-sha256";
const SALT_LEN: usize = 16;
const HASH_LEN: usize = 32;
const TOKEN_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("`{0}` is not a valid email address")]
    InvalidEmail(String),
    #[error("password must be at least {MIN_PASSWORD_LEN} characters")]
    WeakPassword,
    #[error("gender must be Male or Female")]
    InvalidGender,
    #[error("name and branch are required")]
    MissingField,
    #[error("an account with this email already exists")]
    DuplicateEmail,
    #[error("email or password is incorrect")]
    BadCredentials,
    #[error("a valid session token is required")]
    AuthRequired,
    #[error(transparent)]
    Store(StoreError),
}

impl AuthError {
    pub fn name(&self) -> &'static str {
        match self {
            AuthError::InvalidEmail(_) => "InvalidEmail",
            AuthError::WeakPassword => "WeakPassword",
            AuthError::InvalidGender => "InvalidGender",
            AuthError::MissingField => "MissingField",
            AuthError::DuplicateEmail => "DuplicateEmail",
            AuthError::BadCredentials => "BadCredentials",
            AuthError::AuthRequired => "AuthRequired",
            AuthError::Store(e) => e.name(),
        }
    }
}

impl From<StoreError> for AuthError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicateEmail => AuthError::DuplicateEmail,
            e => AuthError::Store(e),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Registration {
    pub name: String,
    pub gender: String,
    pub branch: String,
    pub email: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedToken {
    pub token: String,
    pub account_id: String,
    pub expires_at_ms: u64,
}

/// Accepts `local@domain.tld` with no whitespace and non-empty labels.
pub fn valid_email(email: &str) -> bool {
    if email.len() > 254 || email.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return false;
    }
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && domain.split('.').all(|label| {
            !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        })
}

/// `pbkdf2-sha256$<iterations>$<salt hex>$<hash hex>`.
pub fn hash_password(password: &str, iterations: u32) -> String {
    let mut salt = [0u8; SALT_LEN];
    rand::thread_rng().fill_bytes(&mut salt);
    digest_with(password, iterations, &salt)
}

fn digest_with(password: &str, iterations: u32, salt: &[u8]) -> String {
    let mut out = [0u8; HASH_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, iterations, &mut out);
    format!(
        "{DIGEST_SCHEME}${iterations}${}${}",
        hex::encode(salt),
        hex::encode(out)
    )
}

/// Recomputes the digest with the parameters stored in `digest`.
pub fn verify_password(password: &str, digest: &str) -> bool {
    let mut parts = digest.split('$');
    let (Some(DIGEST_SCHEME), Some(iterations), Some(salt), Some(expected), None) = (
        parts.next(),
        parts.next(),
        parts.next(),
        parts.next(),
        parts.next(),
    ) else {
        return false;
    };
    let (Ok(iterations), Ok(salt), Ok(expected)) =
        (iterations.parse::<u32>(), hex::decode(salt), hex::decode(expected))
    else {
        return false;
    };
    if iterations == 0 || expected.len() != HASH_LEN {
        return false;
    }
    let mut out = [0u8; HASH_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), &salt, iterations, &mut out);
    out.ct_eq(&expected).into()
}

fn dummy_digest(iterations: u32) -> &'static str {
    static DUMMY: OnceLock<String> = OnceLock::new();
    DUMMY.get_or_init(|| digest_with("not-a-password", iterations, &[0u8; SALT_LEN]))
}

pub fn register(store: &Store, reg: &Registration, iterations: u32, now_ms: u64) -> Result<String, AuthError> {
    let email = reg.email.trim();
    if !valid_email(email) {
        return Err(AuthError::InvalidEmail(reg.email.clone()));
    }
    if reg.password.chars().count() < MIN_PASSWORD_LEN {
        return Err(AuthError::WeakPassword);
    }
    if !matches!(reg.gender.as_str(), "Male" | "Female") {
        return Err(AuthError::InvalidGender);
    }
    if reg.name.trim().is_empty() || reg.branch.trim().is_empty() {
        return Err(AuthError::MissingField);
    }
    let account = StaffAccount {
        account_id: new_id(),
        name: reg.name.trim().to_string(),
        gender: reg.gender.clone(),
        branch: reg.branch.trim().to_string(),
        email: email.to_string(),
        password_digest: hash_password(&reg.password, iterations),
        created_at: rfc3339(now_ms),
    };
    store.create_account(&account)?;
    Ok(account.account_id)
}

/// Issues a session token. Unknown emails cost the same key derivation as
/// wrong passwords and produce the same error.
pub fn login(
    store: &Store,
    email: &str,
    password: &str,
    iterations: u32,
    ttl_secs: u64,
    now_ms: u64,
) -> Result<IssuedToken, AuthError> {
    let account = store.account_by_email(email.trim())?;
    let digest = account
        .as_ref()
        .map_or_else(|| dummy_digest(iterations), |a| a.password_digest.as_str());
    let ok = verify_password(password, digest);
    let Some(account) = account.filter(|_| ok) else {
        return Err(AuthError::BadCredentials);
    };
    let mut bytes = [0u8; TOKEN_LEN];
    rand::thread_rng().fill_bytes(&mut bytes);
    let issued = IssuedToken {
        token: hex::encode(bytes),
        account_id: account.account_id,
        expires_at_ms: now_ms.saturating_add(ttl_secs.saturating_mul(1000)),
    };
    store.create_session(
        &issued.token,
        &Session {
            account_id: issued.account_id.clone(),
            expires_at_ms: issued.expires_at_ms,
        },
    )?;
    Ok(issued)
}

/// The account behind a live token. Expired sessions are removed.
pub fn authorize(store: &Store, token: &str, now_ms: u64) -> Result<String, AuthError> {
    match store.session(token)? {
        Some(s) if now_ms < s.expires_at_ms => Ok(s.account_id),
        Some(_) => {
            store.revoke_session(token)?;
            Err(AuthError::AuthRequired)
        }
        None => Err(AuthError::AuthRequired),
    }
}

pub fn logout(store: &Store, token: &str) -> Result<(), AuthError> {
    store.revoke_session(token)?;
    Ok(())
}
