use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Writes artifacts into one directory, each through a temporary file and a
/// rename so readers never see partial output.
pub struct Writer<'a> {
    dir: &'a Path,
}

impl<'a> Writer<'a> {
    pub fn new(dir: &'a Path) -> Self {
        Self { dir }
    }

    pub fn bytes(&self, name: &str, data: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, data)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn text(&self, name: &str, data: &str) -> io::Result<PathBuf> {
        self.bytes(name, data.as_bytes())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> io::Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaves_no_temporary_files() {
        let dir = tempfile::tempdir().unwrap();
        let w = Writer::new(dir.path());
        w.text("a.txt", "one").unwrap();
        w.json("b.json", &serde_json::json!({ "x": 1 })).unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names, ["a.txt", "b.json"]);
        assert_eq!(fs::read_to_string(dir.path().join("a.txt")).unwrap(), "one");
    }
}
