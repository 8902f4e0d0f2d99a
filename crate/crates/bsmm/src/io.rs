//! Reading and writing matrices and reports.

use std::fs;
use std::path::Path;

use bsmm_core::{bsm, BlockCsr};
use serde::Serialize;

use crate::error::{Error, Result};

pub fn read_bsm(path: &Path) -> Result<BlockCsr> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bsm::decode(&bytes)?)
}

pub fn write_bsm(path: &Path, m: &BlockCsr) -> Result<()> {
    let bytes = bsm::encode(m)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `rows` under a header taken from the first row's field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bsmm_core::gen;

    #[test]
    fn bsm_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bsm");
        let m = gen::random_uniform(5, 6, &[2, 3], 0.5, 8).unwrap();
        write_bsm(&path, &m).unwrap();
        assert_eq!(read_bsm(&path).unwrap(), m);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_bsm(Path::new("/nonexistent/x.bsm")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.bsm"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn corrupt_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bsm");
        fs::write(&path, b"BSM1garbage").unwrap();
        assert!(matches!(read_bsm(&path), Err(Error::Core(bsmm_core::Error::Format { .. }))));
    }
}
