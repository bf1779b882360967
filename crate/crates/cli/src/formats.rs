//! Input and output file formats.
//!
//! Constraints files are JSON objects carrying either an explicit matrix
//!
//! ```json
//! {"labels": ["a", "b", "c"], "rows": [[1, 0, 0], [1, 1, 1]], "moments": [0.2, 1]}
//! ```
//!
//! or a spin model given by its hyperedges (1-based spin indices)
//!
//! ```json
//! {"spins": 5, "hyperedges": [[1, 2, 3], [1, 2, 4], [3, 5], [4, 5]]}
//! ```
//!
//! `labels` and `moments` are optional; without labels microstates are named
//! `0..|A|-1`, and without moments the moments come from the counts. Spin
//! microstates are bitstrings with spin 1 first. An optional `name` labels the
//! model in selection output.
//!
//! Counts files are CSV with the header `microstate,count`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use maxent_core::constraints::CoefficientMatrix;
use maxent_core::ising::{self, Hypergraph, InteractionClosure};
use maxent_core::linalg::Matrix;
use maxent_core::{CountVector, Distribution, MicrostateSpace};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub moments: Option<Vec<f64>>,
    #[serde(default)]
    pub spins: Option<usize>,
    #[serde(default)]
    pub hyperedges: Option<Vec<Vec<usize>>>,
}

/// A constraint system over a labelled microstate space. Moments are optional
/// until data is bound.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub space: MicrostateSpace,
    pub rows: Matrix,
    pub moments: Option<Vec<f64>>,
    /// Set for spin models.
    pub closure: Option<InteractionClosure>,
}

impl Model {
    /// Coefficients bound to the file's moments, or to those of `f` when given.
    pub fn coefficients(&self, f: Option<&Distribution>) -> CliResult<CoefficientMatrix> {
        match (f, &self.moments) {
            (Some(f), _) => Ok(CoefficientMatrix::from_distribution(self.rows.clone(), f)?),
            (None, Some(m)) => Ok(CoefficientMatrix::new(self.rows.clone(), m.clone())?),
            (None, None) => Err(CliError::Input(format!(
                "model '{}' has no moments; supply counts",
                self.name
            ))),
        }
    }

    pub fn from_closure(c: &InteractionClosure) -> CliResult<Self> {
        let coeffs = ising::to_coefficients(c);
        Ok(Model {
            name: c.to_string(),
            space: MicrostateSpace::spins(c.spins())?,
            rows: coeffs.rows().clone(),
            moments: None,
            closure: Some(*c),
        })
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::read(path, e))
}

impl ConstraintsFile {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("{origin}: invalid constraints file: {e}")))
    }

    pub fn into_model(self, default_name: &str) -> CliResult<Model> {
        let name = self.name.unwrap_or_else(|| default_name.to_string());
        let bad = |m: &str| CliError::Input(format!("{name}: {m}"));
        let explicit = self.rows.is_some() || self.labels.is_some() || self.moments.is_some();
        let spin_model = self.spins.is_some() || self.hyperedges.is_some();
        match (explicit, spin_model) {
            (true, true) => Err(bad(
                "give either rows/labels/moments or spins/hyperedges, not both",
            )),
            (false, false) => Err(bad("expected 'rows' or 'spins' and 'hyperedges'")),
            (false, true) => {
                let l = self
                    .spins
                    .ok_or_else(|| bad("'hyperedges' requires 'spins'"))?;
                let g = Hypergraph::new(l, &self.hyperedges.unwrap_or_default())?;
                let mut m = Model::from_closure(&ising::closure(&g)?)?;
                m.name = name;
                Ok(m)
            }
            (true, false) => {
                let mut rows = self.rows.ok_or_else(|| bad("missing 'rows'"))?;
                let width = match (&self.labels, rows.first()) {
                    (Some(l), _) => l.len(),
                    (None, Some(r)) => r.len(),
                    (None, None) => return Err(bad("'rows' is empty")),
                };
                if let Some(i) = rows.iter().position(|r| r.len() != width) {
                    return Err(bad(&format!(
                        "row {i} has {} entries, expected {width}",
                        rows[i].len()
                    )));
                }
                let labels = self
                    .labels
                    .unwrap_or_else(|| (0..width).map(|i| i.to_string()).collect());
                let space = MicrostateSpace::new(labels)?;
                let mut moments = self.moments;
                if let Some(m) = &moments {
                    if m.len() != rows.len() {
                        return Err(bad(&format!("{} moments for {} rows", m.len(), rows.len())));
                    }
                }
                if !rows.iter().any(|r| r.iter().all(|&x| x == 1.0)) {
                    log::warn!("{name}: no all-ones row; appending the normalization constraint");
                    rows.push(vec![1.0; width]);
                    if let Some(m) = moments.as_mut() {
                        m.push(1.0);
                    }
                }
                Ok(Model {
                    name,
                    space,
                    rows: Matrix::from_rows(&rows),
                    moments,
                    closure: None,
                })
            }
        }
    }
}

pub fn read_model(path: &Path) -> CliResult<Model> {
    let origin = path.display().to_string();
    let stem = path
        .file_stem()
        .map_or_else(|| origin.clone(), |s| s.to_string_lossy().into_owned());
    ConstraintsFile::parse(&read_text(path)?, &origin)?.into_model(&stem)
}

/// Reads a counts file against `space`. Labels absent from the file count as 0.
pub fn read_counts(path: &Path, space: &MicrostateSpace) -> CliResult<CountVector> {
    let text = read_text(path)?;
    parse_counts(&text, space, &path.display().to_string())
}

pub fn parse_counts(text: &str, space: &MicrostateSpace, origin: &str) -> CliResult<CountVector> {
    let bad = |m: String| CliError::Input(format!("{origin}: {m}"));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| bad(format!("unreadable header: {e}")))?
        .clone();
    if header.len() != 2 || &header[0] != "microstate" || &header[1] != "count" {
        return Err(bad(format!(
            "expected header 'microstate,count', found '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut counts = vec![0u64; space.size()];
    let mut seen = vec![false; space.size()];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("line {}: {e}", line + 2)))?;
        if rec.len() != 2 {
            return Err(bad(format!("line {}: expected 2 fields", line + 2)));
        }
        let i = space.index_of(&rec[0]).ok_or_else(|| {
            bad(format!(
                "line {}: unknown microstate '{}'",
                line + 2,
                &rec[0]
            ))
        })?;
        if seen[i] {
            return Err(bad(format!(
                "line {}: duplicate microstate '{}'",
                line + 2,
                &rec[0]
            )));
        }
        seen[i] = true;
        counts[i] = rec[1].parse().map_err(|_| {
            bad(format!(
                "line {}: count '{}' is not a non-negative integer",
                line + 2,
                &rec[1]
            ))
        })?;
    }
    let missing = seen.iter().filter(|s| !**s).count();
    if missing > 0 {
        log::warn!("{origin}: {missing} microstate(s) absent from the counts, taken as 0");
    }
    let c = CountVector::new(counts)?;
    if c.total() == 0 {
        return Err(bad("all counts are zero".into()));
    }
    Ok(c)
}

pub fn counts_csv(space: &MicrostateSpace, counts: &CountVector) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>, a: &str, b: &str| {
        w.write_record([a, b]).expect("in-memory write");
    };
    write(&mut w, "microstate", "count");
    for (label, c) in space.labels().iter().zip(counts.counts()) {
        write(&mut w, label, &c.to_string());
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

/// Writes to `out`, or to standard output when no path is given.
pub fn emit(out: Option<&Path>, contents: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, contents).map_err(|e| CliError::write(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|e| CliError::write("<stdout>", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_payload_gets_normalization_row() {
        let f = ConstraintsFile::parse(r#"{"rows": [[1, 0, 0]], "moments": [0.2]}"#, "t").unwrap();
        let m = f.into_model("t").unwrap();
        assert_eq!(m.rows.nrows(), 2);
        assert_eq!(m.moments.unwrap(), vec![0.2, 1.0]);
        assert_eq!(m.space.labels(), ["0", "1", "2"]);
    }

    #[test]
    fn payloads_are_exclusive() {
        let f = ConstraintsFile::parse(r#"{"rows": [[1, 1]], "spins": 1}"#, "t").unwrap();
        assert!(f.into_model("t").is_err());
        assert!(ConstraintsFile::parse(r#"{"matrix": [[1, 1]]}"#, "t").is_err());
    }

    #[test]
    fn spin_payload_uses_bitstring_labels() {
        let f = ConstraintsFile::parse(r#"{"spins": 2, "hyperedges": [[1, 2]]}"#, "t").unwrap();
        let m = f.into_model("t").unwrap();
        assert_eq!(m.space.labels(), ["00", "01", "10", "11"]);
        assert_eq!(m.rows.nrows(), 4);
    }

    #[test]
    fn counts_validation() {
        let space = MicrostateSpace::new(vec!["a".into(), "b".into()]).unwrap();
        let c = parse_counts("microstate,count\na,3\n", &space, "t").unwrap();
        assert_eq!(c.counts(), &[3, 0]);
        assert!(parse_counts("state,n\na,3\n", &space, "t").is_err());
        assert!(parse_counts("microstate,count\nc,3\n", &space, "t").is_err());
        assert!(parse_counts("microstate,count\na,3\na,1\n", &space, "t").is_err());
        assert!(parse_counts("microstate,count\na,-1\n", &space, "t").is_err());
        assert!(parse_counts("microstate,count\na,0\n", &space, "t").is_err());
        let text = counts_csv(&space, &CountVector::new(vec![1, 2]).unwrap());
        assert_eq!(text, "microstate,count\na,1\nb,2\n");
    }
}
