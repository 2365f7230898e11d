use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

pub struct Sink {
    pub dir: PathBuf,
    pub hash: String,
}

impl Sink {
    pub fn new(dir: &Path, hash: String) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink { dir: dir.to_path_buf(), hash })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Writes `<name>.json` and returns the text for stdout.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
        text.push('\n');
        self.write(&format!("{name}.json"), &text)?;
        Ok(text)
    }

    /// CSV with a leading `# config_hash=` comment line.
    pub fn csv(&self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<PathBuf, Failure> {
        let mut text = format!("# config_hash={}\n{header}\n", self.hash);
        for r in rows {
            text.push_str(&r);
            text.push('\n');
        }
        self.write(name, &text)
    }
}

/// Shortest round-trip representation, so CSV values parse back exactly.
pub fn num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:?}").unwrap();
    s
}

pub fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<String> {
    let mut rows = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            rows.push(format!("{i},{j},{}", num(m[(i, j)])));
        }
    }
    rows
}
