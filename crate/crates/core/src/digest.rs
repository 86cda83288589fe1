use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Digest of a value's JSON encoding. `serde_json` maps are key-sorted, so
/// equal values always hash equally.
pub fn json_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let encoded = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(encoded)
}
