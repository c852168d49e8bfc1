use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use corrseek::boolmat::{read_pmat, write_pmat_binary, write_pmat_text};
use corrseek::{BooleanMatrix, Error, Result};
use serde::Serialize;

/// `prefix` with `suffix` appended to the file name.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| context(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| context(path, e))
}

pub fn read_matrix(path: &Path) -> Result<BooleanMatrix> {
    read_pmat(open(path)?)
}

pub fn write_matrix(path: &Path, m: &BooleanMatrix, binary: bool) -> Result<()> {
    let mut w = create(path)?;
    if binary {
        write_pmat_binary(m, &mut w)?;
    } else {
        write_pmat_text(m, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("result types serialize")
}
