use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::event::EventRecord;
use super::BrokerError;

/// Append-only JSON-lines event journal.
///
/// A final line cut short by a crash is dropped (and trimmed from the file)
/// on open; damage anywhere else is reported as corruption.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
    durable: bool,
}

fn io_err(path: &Path, source: std::io::Error) -> BrokerError {
    BrokerError::JournalIo {
        path: path.display().to_string(),
        source,
    }
}

impl Journal {
    /// Opens (creating if needed) and returns the records already present.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<EventRecord>), BrokerError> {
        let path = path.as_ref().to_path_buf();
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&path, e)),
        };
        let mut records: Vec<EventRecord> = Vec::new();
        let mut offset = 0usize;
        let mut keep = 0usize;
        let mut needs_newline = false;
        let mut line_no = 0usize;
        while offset < bytes.len() {
            line_no += 1;
            let (line, next, complete) = match bytes[offset..].iter().position(|&b| b == b'\n') {
                Some(i) => (&bytes[offset..offset + i], offset + i + 1, true),
                None => (&bytes[offset..], bytes.len(), false),
            };
            let corrupt = |message: String| BrokerError::JournalCorrupt {
                path: path.display().to_string(),
                line: line_no,
                message,
            };
            if line.iter().all(u8::is_ascii_whitespace) {
                if complete {
                    offset = next;
                    keep = next;
                    continue;
                }
                break;
            }
            match serde_json::from_slice::<EventRecord>(line) {
                Ok(rec) => {
                    let expected = records.last().map_or(1, |r| r.seq + 1);
                    if rec.seq != expected {
                        return Err(corrupt(format!("sequence {} where {expected} was expected", rec.seq)));
                    }
                    records.push(rec);
                    keep = next;
                    needs_newline = !complete;
                }
                Err(_) if !complete => break,
                Err(e) => return Err(corrupt(e.to_string())),
            }
            offset = next;
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| io_err(&path, e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        if keep < bytes.len() {
            log::warn!("journal {}: dropping truncated tail ({} bytes)", path.display(), bytes.len() - keep);
            file.set_len(keep as u64).map_err(|e| io_err(&path, e))?;
        }
        if needs_newline {
            file.write_all(b"\n").map_err(|e| io_err(&path, e))?;
        }
        Ok((
            Self {
                path,
                file,
                durable: false,
            },
            records,
        ))
    }

    /// fsync after every append.
    pub fn set_durable(&mut self, durable: bool) {
        self.durable = durable;
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &EventRecord) -> Result<(), BrokerError> {
        let mut line = serde_json::to_vec(record).expect("event records serialize");
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| io_err(&self.path, e))?;
        self.file.flush().map_err(|e| io_err(&self.path, e))?;
        if self.durable {
            self.file.sync_data().map_err(|e| io_err(&self.path, e))?;
        }
        Ok(())
    }
}
