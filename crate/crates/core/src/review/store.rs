//! Append-only verdict log.
//!
//! One verdict per line: `timestamp\tannotator\ta\tb\tvalue`. A line is only
//! acknowledged after it has been written and synced. On open, a trailing
//! line without a newline (an interrupted write) is discarded and the file is
//! truncated back to the last complete record.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use log::warn;

use super::{Verdict, VerdictValue};
use crate::embeddings::PairKey;
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct VerdictLog {
    path: PathBuf,
    file: File,
    verdicts: Vec<Verdict>,
    seen: HashSet<(PairKey, String)>,
}

fn parse_line(line: &str, row: usize, name: &str) -> Result<Verdict> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(Error::parse(name, row, format!("expected 5 tab-separated fields, found {}", fields.len())));
    }
    let timestamp = fields[0]
        .parse()
        .map_err(|_| Error::parse(name, row, format!("bad timestamp {:?}", fields[0])))?;
    let value: VerdictValue = fields[4].parse().map_err(|m: String| Error::parse(name, row, m))?;
    if fields[2] == fields[3] {
        return Err(Error::parse(name, row, "pair of an image with itself"));
    }
    Ok(Verdict {
        pair: PairKey::new(fields[2], fields[3]),
        annotator: fields[1].to_string(),
        value,
        timestamp,
    })
}

fn format_line(v: &Verdict) -> String {
    format!("{}\t{}\t{}\t{}\t{}\n", v.timestamp, v.annotator, v.pair.a, v.pair.b, v.value)
}

/// Reads the verdicts of a log without opening it for writing.
///
/// An incomplete final line is ignored rather than truncated.
pub fn read_verdicts(path: impl AsRef<Path>) -> Result<Vec<Verdict>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    let name = path.display().to_string();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text[..complete].lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let v = parse_line(line, i + 1, &name)?;
        if !seen.insert((v.pair.clone(), v.annotator.clone())) {
            return Err(Error::parse(&name, i + 1, format!("second verdict by {}", v.annotator)));
        }
        out.push(v);
    }
    Ok(out)
}

impl VerdictLog {
    /// Opens (creating if needed) and replays the log at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| Error::io(&path, e))?;

        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            warn!(
                "discarding {} bytes of incomplete record at end of {}",
                text.len() - complete,
                path.display()
            );
            file.set_len(complete as u64).map_err(|e| Error::io(&path, e))?;
            file.seek(SeekFrom::End(0)).map_err(|e| Error::io(&path, e))?;
        }

        let name = path.display().to_string();
        let mut log = VerdictLog {
            path,
            file,
            verdicts: Vec::new(),
            seen: HashSet::new(),
        };
        for (i, line) in text[..complete].lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let v = parse_line(line, i + 1, &name)?;
            if !log.seen.insert((v.pair.clone(), v.annotator.clone())) {
                return Err(Error::parse(
                    &name,
                    i + 1,
                    format!("second verdict by {} for {} {}", v.annotator, v.pair.a, v.pair.b),
                ));
            }
            log.verdicts.push(v);
        }
        Ok(log)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }

    pub fn contains(&self, pair: &PairKey, annotator: &str) -> bool {
        self.seen.contains(&(pair.clone(), annotator.to_string()))
    }

    /// Durably appends `v`, refusing a second verdict by the same annotator on the same pair.
    pub fn append(&mut self, v: Verdict) -> Result<()> {
        if v.annotator.is_empty() || v.annotator.contains(['\t', '\n', '\r']) {
            return Err(Error::Argument(format!("invalid annotator id {:?}", v.annotator)));
        }
        if [&v.pair.a, &v.pair.b].iter().any(|id| id.contains(['\t', '\n', '\r'])) {
            return Err(Error::Argument("image ids may not contain tabs or newlines".into()));
        }
        let key = (v.pair.clone(), v.annotator.clone());
        if self.seen.contains(&key) {
            return Err(Error::Conflict(format!(
                "{} already judged {} {}",
                v.annotator, v.pair.a, v.pair.b
            )));
        }
        self.file
            .write_all(format_line(&v).as_bytes())
            .and_then(|_| self.file.flush())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.seen.insert(key);
        self.verdicts.push(v);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(a: &str, b: &str, who: &str, value: VerdictValue) -> Verdict {
        Verdict {
            pair: PairKey::new(a, b),
            annotator: who.into(),
            value,
            timestamp: 1_700_000_000_000,
        }
    }

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verdicts.log");
        {
            let mut log = VerdictLog::open(&path).unwrap();
            log.append(verdict("x", "y", "r1", VerdictValue::Duplicate)).unwrap();
            log.append(verdict("x", "z", "r1", VerdictValue::Different)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "1700000000000\tr1\tx\ty\tduplicate");
        let log = VerdictLog::open(&path).unwrap();
        assert_eq!(log.len(), 2);
        assert!(log.contains(&PairKey::new("y", "x"), "r1"));
    }

    #[test]
    fn second_verdict_conflicts() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = VerdictLog::open(dir.path().join("v.log")).unwrap();
        log.append(verdict("a", "b", "r1", VerdictValue::Duplicate)).unwrap();
        let err = log.append(verdict("b", "a", "r1", VerdictValue::Different)).unwrap_err();
        assert!(matches!(err, Error::Conflict(_)));
        assert_eq!(log.len(), 1);
        log.append(verdict("a", "b", "r2", VerdictValue::Different)).unwrap();
    }

    #[test]
    fn torn_tail_is_discarded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.log");
        std::fs::write(&path, "1\tr1\ta\tb\tduplicate\n2\tr1\ta\tc\tdiff").unwrap();
        let mut log = VerdictLog::open(&path).unwrap();
        assert_eq!(log.len(), 1);
        log.append(verdict("a", "c", "r1", VerdictValue::Different)).unwrap();
        drop(log);
        let log = VerdictLog::open(&path).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.verdicts()[1].value, VerdictValue::Different);
    }

    #[test]
    fn read_only_load_leaves_file_alone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.log");
        let body = "1\tr1\ta\tb\tduplicate\n2\tr1\ta\tc";
        std::fs::write(&path, body).unwrap();
        assert_eq!(read_verdicts(&path).unwrap().len(), 1);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), body);
    }

    #[test]
    fn malformed_line_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.log");
        std::fs::write(&path, "1\tr1\ta\tb\tmaybe\n").unwrap();
        assert!(matches!(VerdictLog::open(&path), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn annotator_with_tab_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = VerdictLog::open(dir.path().join("v.log")).unwrap();
        let err = log.append(verdict("a", "b", "r\t1", VerdictValue::Unclear)).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }
}
