//! Shared helpers for the JSON-based file formats.
//!
//! Floats are written as decimal with 17 significant digits, which
//! round-trips every finite f64 exactly; files are written to a temporary
//! sibling and renamed into place so readers never see partial output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{CoreError, Result};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// 17-significant-digit decimal rendering of a finite f64.
pub(crate) fn fmt_f64(x: f64) -> String {
    debug_assert!(x.is_finite());
    format!("{x:.16e}")
}

pub(crate) fn push_f64(out: &mut String, x: f64) {
    out.push_str(&fmt_f64(x));
}

pub(crate) fn push_f64_slice(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_f64(out, *v);
    }
    out.push(']');
}

/// Write `contents` atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CoreError::invalid(format!("invalid output path {}", path.display())))?;
    let nonce = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp_name = format!(
        "{}.tmp.{}.{}",
        file_name.to_string_lossy(),
        std::process::id(),
        nonce
    );
    let tmp_path = path.with_file_name(tmp_name);
    {
        let file = File::create(&tmp_path)?;
        let mut writer = BufWriter::new(file);
        writer.write_all(contents)?;
        writer.flush()?;
    }
    fs::rename(&tmp_path, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatted_floats_round_trip_exactly() {
        for &x in &[0.0, 0.15, -1.0 / 3.0, 1e-300, 123456.789e100, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s}");
        }
    }

    #[test]
    fn formatted_floats_are_valid_json() {
        let s = fmt_f64(0.15);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v.as_f64().unwrap(), 0.15);
    }
}
