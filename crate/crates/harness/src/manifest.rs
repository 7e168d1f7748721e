//! JSON-lines dataset manifest: one header object, then one record per line.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use fpforge_core::fpsynth::{DistortionParams, PatternClass};
use fpforge_core::rng::hash_str;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    /// `round(0.7n)` train, `round(0.1n)` val, the rest test.
    pub fn for_total(n: usize) -> Self {
        let train = (0.7 * n as f64).round() as usize;
        let val = ((0.1 * n as f64).round() as usize).min(n - train);
        Self {
            train,
            val,
            test: n - train - val,
        }
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    alpha: f64,
    counts: SplitCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub split: Split,
    /// Relative to the dataset directory.
    pub clean_path: String,
    pub noisy_path: String,
    pub master_seed: u64,
    pub pattern_class: PatternClass,
    pub texture_id: String,
    pub alpha: f64,
    pub distortion: DistortionParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub version: u32,
    pub alpha: f64,
    pub records: Vec<ManifestRecord>,
}

/// Orders ids by their hash and cuts the sequence at 7:1:2.
pub fn assign_splits<S: AsRef<str>>(ids: &[S]) -> Vec<Split> {
    let counts = SplitCounts::for_total(ids.len());
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by_key(|&i| (hash_str(ids[i].as_ref()), ids[i].as_ref().to_owned()));
    let mut splits = vec![Split::Test; ids.len()];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < counts.train {
            Split::Train
        } else if rank < counts.train + counts.val {
            Split::Val
        } else {
            Split::Test
        };
    }
    splits
}

impl DatasetManifest {
    pub fn new(alpha: f64, records: Vec<ManifestRecord>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            alpha,
            records,
        }
    }

    pub fn counts(&self) -> SplitCounts {
        let mut c = SplitCounts::default();
        for r in &self.records {
            match r.split {
                Split::Train => c.train += 1,
                Split::Val => c.val += 1,
                Split::Test => c.test += 1,
            }
        }
        c
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            version: self.version,
            alpha: self.alpha,
            counts: self.counts(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| HarnessError::Manifest { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;
        let header: Header = serde_json::from_str(first).map_err(|e| err(1, format!("header: {e}")))?;
        if header.version == 0 || header.version > MANIFEST_VERSION {
            return Err(err(
                1,
                format!("unsupported version {} (max {MANIFEST_VERSION})", header.version),
            ));
        }
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                return Err(err(n, "blank line".into()));
            }
            let r: ManifestRecord = serde_json::from_str(line).map_err(|e| err(n, e.to_string()))?;
            if !seen.insert(r.id.clone()) {
                return Err(err(n, format!("duplicate id {:?}", r.id)));
            }
            r.distortion.validate().map_err(|e| err(n, format!("record {:?}: {e}", r.id)))?;
            records.push(r);
        }
        let m = Self {
            version: header.version,
            alpha: header.alpha,
            records,
        };
        if m.counts() != header.counts {
            return Err(err(
                1,
                format!("header counts {:?} disagree with records {:?}", header.counts, m.counts()),
            ));
        }
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(HarnessError::io(&path))?;
        Self::from_jsonl(&text)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_jsonl()).map_err(HarnessError::io(&path))
    }

    /// Every record's files exist and every file in `dir` other than the
    /// manifest belongs to exactly one record.
    pub fn check_files(&self, dir: &Path) -> Result<()> {
        let mut owners: BTreeMap<&str, &str> = BTreeMap::new();
        for r in &self.records {
            for p in [&r.clean_path, &r.noisy_path] {
                if let Some(other) = owners.insert(p, &r.id) {
                    return Err(HarnessError::config(format!(
                        "{p} is referenced by both {other:?} and {:?}",
                        r.id
                    )));
                }
                let full = dir.join(p);
                if !full.is_file() {
                    return Err(HarnessError::config(format!("{} is missing", full.display())));
                }
            }
        }
        for entry in std::fs::read_dir(dir).map_err(HarnessError::io(dir))? {
            let entry = entry.map_err(HarnessError::io(dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name != MANIFEST_FILE && !owners.contains_key(name.as_str()) {
                return Err(HarnessError::config(format!("{name} is not referenced by the manifest")));
            }
        }
        Ok(())
    }
}
