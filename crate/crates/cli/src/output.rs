use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use wlan_assoc::report::{render_csv, write_manifest, write_table, Manifest, ManifestRecord, Row};

/// Collects the tables of one command and writes them with a shared
/// manifest.
pub struct Output {
    manifest: Manifest,
    hash: String,
    dir: Option<PathBuf>,
    written: Vec<String>,
    started: Instant,
}

impl Output {
    pub fn new(manifest: Manifest, dir: Option<PathBuf>) -> Result<Self> {
        let hash = manifest.hash()?;
        Ok(Output { manifest, hash, dir, written: Vec::new(), started: Instant::now() })
    }

    /// Writes `<stem>.csv` and `<stem>.json` when an output directory is set.
    pub fn table<T: Row>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        if let Some(dir) = &self.dir {
            for path in write_table(dir, stem, &self.hash, rows)? {
                log::info!("wrote {}", path.display());
                self.written.push(path.file_name().unwrap_or_default().to_string_lossy().into_owned());
            }
        }
        Ok(())
    }

    /// Prints a table as CSV on stdout and writes it like [`Output::table`].
    pub fn print<T: Row>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        let text = render_csv(&self.hash, rows)?;
        std::io::stdout().lock().write_all(text.as_bytes())?;
        self.table(stem, rows)
    }

    pub fn finish(self) -> Result<()> {
        if let Some(dir) = &self.dir {
            let record = ManifestRecord {
                manifest: self.manifest,
                manifest_sha256: self.hash,
                outputs: self.written,
                wall_clock_s: self.started.elapsed().as_secs_f64(),
            };
            let path = write_manifest(dir, &record)?;
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }
}
