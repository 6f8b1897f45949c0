//! Tab-separated corpus manifests (tabs shown as spaces below).
//!
//! ```text
//! # comment
//! sample_rate  8000
//! spk00  spk00-train-00  audio/spk00-train-00.wav  train
//! spk00  spk00-test-00  audio/spk00-test-00.wav  test
//! ```
//!
//! Relative audio paths resolve against the manifest's directory. The
//! `sample_rate` line is optional (default 8000) and may appear once.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub speaker: String,
    pub utterance: String,
    pub path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub sample_rate: u32,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

/// Ids end up in file names and tab-separated records.
pub(crate) fn check_id(kind: &str, id: &str) -> std::result::Result<(), String> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(format!("{kind} id {id:?} must be non-empty [A-Za-z0-9._-]"))
    }
}

impl CorpusManifest {
    pub fn new(
        sample_rate: u32,
        entries: Vec<ManifestEntry>,
        base_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        let m = Self {
            sample_rate,
            entries,
            base_dir: base_dir.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut sample_rate = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Manifest {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["sample_rate", rate] => {
                    if sample_rate.is_some() {
                        return Err(err("duplicate sample_rate".into()));
                    }
                    let r: u32 = rate
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("bad sample rate {rate:?}")))?;
                    if r == 0 {
                        return Err(err("sample rate must be positive".into()));
                    }
                    sample_rate = Some(r);
                }
                [speaker, utterance, path, split] => {
                    check_id("speaker", speaker).map_err(err)?;
                    check_id("utterance", utterance).map_err(err)?;
                    if path.is_empty() {
                        return Err(err("empty audio path".into()));
                    }
                    entries.push(ManifestEntry {
                        speaker: (*speaker).to_owned(),
                        utterance: (*utterance).to_owned(),
                        path: PathBuf::from(path),
                        split: split.parse().map_err(err)?,
                    });
                }
                _ => {
                    return Err(err(format!(
                        "expected 4 tab-separated fields, found {}",
                        fields.len()
                    )))
                }
            }
        }
        Self::new(sample_rate.unwrap_or(8000), entries, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# speaker\tutterance\tpath\tsplit\nsample_rate\t{}\n",
            self.sample_rate
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.speaker,
                e.utterance,
                e.path.display(),
                e.split
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Unique utterance ids; every test speaker also has training data.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if !seen.insert(e.utterance.as_str()) {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: format!("duplicate utterance id {}", e.utterance),
                });
            }
        }
        let train = self.speakers(Split::Train);
        if let Some(missing) = self.speakers(Split::Test).difference(&train).next() {
            return Err(Error::Manifest {
                line: 0,
                message: format!("test speaker {missing} has no training utterances"),
            });
        }
        Ok(())
    }

    pub fn speakers(&self, split: Split) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.speaker.as_str())
            .collect()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }
}
