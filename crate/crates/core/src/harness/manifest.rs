//! Run manifests and CSV reports stamped with the manifest hash.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::lattice::LatticeSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub lattice: Option<LatticeSpec>,
    pub eps: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
    /// Fitted or frozen constants the run depends on.
    pub constants: BTreeMap<String, f64>,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub crate_version: String,
}

impl RunManifest {
    pub fn new(experiment: &str, config_hash: &str) -> Self {
        RunManifest {
            experiment: experiment.to_string(),
            config_hash: config_hash.to_string(),
            lattice: None,
            eps: None,
            tolerances: BTreeMap::new(),
            constants: BTreeMap::new(),
            seed: 0,
            outputs: Vec::new(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// SHA-256 of every input field; the output list is excluded.
    pub fn hash(&self) -> String {
        let inputs = RunManifest { outputs: Vec::new(), ..self.clone() };
        let bytes = serde_json::to_vec(&inputs).expect("manifest serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Stamped<'a> {
            hash: String,
            #[serde(flatten)]
            manifest: &'a RunManifest,
        }
        let text = serde_json::to_string_pretty(&Stamped { hash: self.hash(), manifest: self })?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// A tidy table written as CSV behind a `# manifest <hash>` line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|s| s.to_string()).collect();
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self, manifest_hash: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8");
        Ok(format!("# manifest {manifest_hash}\n{body}"))
    }

    pub fn write(&self, path: &Path, manifest_hash: &str) -> Result<()> {
        std::fs::write(path, self.to_csv(manifest_hash)?)?;
        Ok(())
    }
}
