use serde::Serialize;
use sha2::{Digest, Sha256};

/// `sha256:<hex>` over the compact JSON serialization of `value`.
///
/// Hashing the parsed structure rather than file bytes makes the digest
/// independent of formatting.
pub fn canonical_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("in-memory values serialize");
    format!("sha256:{}", hex::encode(Sha256::digest(&bytes)))
}
