//! Artifact writing: atomic file replacement and the scalar flattening
//! used for sweep tables.

use std::fs;
use std::io;
use std::path::Path;

/// Writes via a temporary sibling then renames, so partial files never
/// appear under the final name.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)
}

/// Collects scalar leaves (numbers, strings, booleans) from a JSON value
/// into dotted keys, up to the given depth. Arrays are skipped.
pub fn flatten_scalars(
    value: &serde_json::Value,
    prefix: &str,
    depth: usize,
    out: &mut Vec<(String, String)>,
) {
    match value {
        serde_json::Value::Object(map) => {
            if depth == 0 {
                return;
            }
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_scalars(v, &key, depth - 1, out);
            }
        }
        serde_json::Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        serde_json::Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        _ => {}
    }
}
