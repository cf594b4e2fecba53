use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;

const BUNDLED: &str = include_str!("../../data/seeds.txt");

/// Ordered run seeds; run `r` of every algorithm uses `seeds[r]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedBank {
    pub seeds: Vec<u64>,
    pub source: Option<PathBuf>,
}

impl SeedBank {
    /// One decimal seed per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut seen = HashSet::new();
        let mut seeds = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let l = line.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let s: u64 = l.parse().map_err(|_| BenchError::Parse {
                line: Some(i + 1),
                msg: format!("'{l}' is not a 64-bit seed"),
            })?;
            if !seen.insert(s) {
                return Err(BenchError::Parse {
                    line: Some(i + 1),
                    msg: format!("duplicate seed {s}"),
                });
            }
            seeds.push(s);
        }
        if seeds.is_empty() {
            return Err(BenchError::Parse {
                line: None,
                msg: "seed bank is empty".into(),
            });
        }
        Ok(Self { seeds, source: None })
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self {
            source: Some(path.to_path_buf()),
            ..Self::parse(&text)?
        })
    }

    /// The 100-seed bank shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled seed bank is well-formed")
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn take(&self, runs: usize) -> Result<&[u64], BenchError> {
        self.seeds.get(..runs).ok_or(BenchError::NotEnoughSeeds {
            runs,
            available: self.seeds.len(),
        })
    }
}
