//! File-per-session persistence. Each session lives in `<id>.json`, the
//! session document as written by the engine.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use prefelicit::SessionState;

/// Sessions that replayed, and the files that did not with their errors.
pub type Loaded = (Vec<SessionState>, Vec<(PathBuf, String)>);

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes the document and syncs it to disk before returning. The
    /// previous version stays in place until the new one is complete.
    pub fn put(&self, id: &str, document: &[u8]) -> io::Result<()> {
        let tmp = self.dir.join(format!(".{id}.json.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(document)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path(id))?;
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> io::Result<Vec<u8>> {
        fs::read(self.path(id))
    }

    pub fn load_all(&self) -> io::Result<Loaded> {
        let mut loaded = Vec::new();
        let mut failed = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'))
            })
            .collect();
        paths.sort();
        for p in paths {
            match fs::read(&p)
                .map_err(|e| e.to_string())
                .and_then(|b| SessionState::load(&b).map_err(|e| e.to_string()))
            {
                Ok(s) => loaded.push(s),
                Err(e) => failed.push((p, e)),
            }
        }
        Ok((loaded, failed))
    }
}
