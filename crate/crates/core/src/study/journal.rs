//! One JSONL file per study. The first line holds the plan; session and
//! trial lines follow in acknowledgment order. Every append is flushed to
//! disk before the caller sees success.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{StudyError, StudyPlan, TrialRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Plan {
        study_id: String,
        created_at_ms: u64,
        plan: StudyPlan,
    },
    Session {
        session_id: String,
        volunteer_id: String,
        group: String,
        opened_at_ms: u64,
    },
    Trial(TrialRecord),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    v: u32,
    #[serde(flatten)]
    line: LogLine,
}

#[derive(Debug)]
pub struct StudyLog {
    path: PathBuf,
    file: File,
}

impl StudyLog {
    /// Creates a new log whose first line is `first`. Fails if the file exists.
    pub fn create(path: impl AsRef<Path>, first: &LogLine) -> Result<Self, StudyError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        let mut log = StudyLog { path, file };
        log.append(first)?;
        if let Some(dir) = log.path.parent() {
            // Make the new directory entry durable as well.
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        Ok(log)
    }

    /// Opens an existing log and returns every complete line. A torn final
    /// line (no trailing newline) is the remnant of an unacknowledged write
    /// and is truncated away.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<LogLine>), StudyError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).write(true).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < bytes.len() {
            log::warn!(
                "{}: dropping {} byte(s) of a torn final line",
                path.display(),
                bytes.len() - complete
            );
            file.set_len(complete as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;

        let lines = parse_lines(&path, &bytes[..complete])?;
        Ok((StudyLog { path, file }, lines))
    }

    /// Reads the complete lines of a log without modifying it; a torn final
    /// line is ignored. Safe on a log that a running service is appending to.
    pub fn read(path: impl AsRef<Path>) -> Result<Vec<LogLine>, StudyError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        parse_lines(path, &bytes[..complete])
    }

    /// Writes one line and syncs it to disk.
    pub fn append(&mut self, line: &LogLine) -> Result<(), StudyError> {
        let mut buf = serde_json::to_vec(&Envelope {
            v: SCHEMA_VERSION,
            line: line.clone(),
        })?;
        buf.push(b'\n');
        self.file.write_all(&buf)?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn parse_lines(path: &Path, bytes: &[u8]) -> Result<Vec<LogLine>, StudyError> {
    let corrupt = |line: usize, reason: String| StudyError::CorruptLog {
        path: path.display().to_string(),
        line,
        reason,
    };
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        if raw.is_empty() {
            continue;
        }
        let env: Envelope = serde_json::from_slice(raw).map_err(|e| corrupt(i + 1, e.to_string()))?;
        if env.v != SCHEMA_VERSION {
            return Err(corrupt(i + 1, format!("unsupported schema version {}", env.v)));
        }
        lines.push(env.line);
    }
    match lines.first() {
        Some(LogLine::Plan { .. }) => Ok(lines),
        _ => Err(corrupt(1, "log does not start with a plan line".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::plan::tests::two_by_two;
    use crate::study::{Click, Condition};

    fn plan_line() -> LogLine {
        LogLine::Plan {
            study_id: "s1".into(),
            created_at_ms: 5,
            plan: two_by_two(),
        }
    }

    fn trial(pair: &str) -> LogLine {
        LogLine::Trial(
            TrialRecord::new("v1", pair, "Data_1", Condition::Original, 10, 250, Click { x: 1.0, y: 2.0 }, true)
                .unwrap(),
        )
    }

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.jsonl");
        let mut log = StudyLog::create(&path, &plan_line()).unwrap();
        log.append(&trial("Data_1-0")).unwrap();
        drop(log);
        let (_, lines) = StudyLog::open(&path).unwrap();
        assert_eq!(lines, vec![plan_line(), trial("Data_1-0")]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().all(|l| l.starts_with("{\"v\":1,")));
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.jsonl");
        let mut log = StudyLog::create(&path, &plan_line()).unwrap();
        log.append(&trial("Data_1-0")).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"v\":1,\"kind\":\"tri").unwrap();
        drop(f);

        assert_eq!(StudyLog::read(&path).unwrap().len(), 2);
        let (mut log, lines) = StudyLog::open(&path).unwrap();
        assert_eq!(lines.len(), 2);
        log.append(&trial("Data_1-1")).unwrap();
        drop(log);
        let (_, lines) = StudyLog::open(&path).unwrap();
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.jsonl");
        drop(StudyLog::create(&path, &plan_line()).unwrap());
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"garbage\n").unwrap();
        drop(f);
        assert!(matches!(StudyLog::open(&path), Err(StudyError::CorruptLog { line: 2, .. })));
    }

    #[test]
    fn create_refuses_existing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.jsonl");
        drop(StudyLog::create(&path, &plan_line()).unwrap());
        assert!(StudyLog::create(&path, &plan_line()).is_err());
    }
}
