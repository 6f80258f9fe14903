//! Tabular experiment output with input digests.

use std::fmt::Write as _;

/// A finished experiment: parameters, a digest of the inputs, and a table.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: Vec<(String, String)>,
    pub input_digest: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            parameters: Vec::new(),
            input_digest: String::new(),
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    /// CSV with `#`-prefixed header lines for metadata.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# experiment {}", self.experiment);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "# {k} {v}");
        }
        let _ = writeln!(out, "# input_digest {}", self.input_digest);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// 64-bit FNV-1a over an arbitrary byte stream; enough to fingerprint
/// experiment inputs for reproducibility audits.
#[derive(Debug, Clone)]
pub struct Digest {
    state: u64,
}

impl Default for Digest {
    fn default() -> Self {
        Digest { state: 0xcbf29ce484222325 }
    }
}

impl Digest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, data: &[u8]) -> &mut Self {
        for &b in data {
            self.state ^= b as u64;
            self.state = self.state.wrapping_mul(0x100000001b3);
        }
        self
    }

    pub fn floats(&mut self, data: &[f64]) -> &mut Self {
        for x in data {
            self.bytes(&x.to_bits().to_le_bytes());
        }
        self
    }

    pub fn ints(&mut self, data: &[usize]) -> &mut Self {
        for x in data {
            self.bytes(&(*x as u64).to_le_bytes());
        }
        self
    }

    pub fn hex(&self) -> String {
        format!("{:016x}", self.state)
    }
}
