//! Categorical datasets: ingestion, integer encoding and the Hamming distance.
//!
//! Every variable is encoded independently. Codes are assigned in order of
//! first appearance while reading the file, so the alphabet of a column is the
//! list of its distinct labels in the order they were met.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of the distinct labels one variable can take.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct Alphabet {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.labels
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        Alphabet::from_labels(labels)
    }
}

impl Alphabet {
    pub fn new() -> Self {
        Self {
            labels: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds an alphabet from distinct labels, keeping their order.
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut a = Self::new();
        for l in labels {
            let l = l.into();
            if a.index.contains_key(&l) {
                return Err(Error::invalid(format!("duplicate label '{l}' in alphabet")));
            }
            a.intern(&l);
        }
        Ok(a)
    }

    /// Alphabet with labels "0", "1", ..., "m-1".
    pub fn numeric(m: usize) -> Self {
        Self::from_labels((0..m).map(|h| h.to_string())).expect("distinct labels")
    }

    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&c) = self.index.get(label) {
            return c;
        }
        let c = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), c);
        c
    }

    /// Modality count.
    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn code(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, code: u32) -> Option<&str> {
        self.labels.get(code as usize).map(String::as_str)
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::new()
    }
}

/// Integer-coded n x p categorical data matrix (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDataset {
    n: usize,
    p: usize,
    codes: Vec<u32>,
    alphabets: Vec<Alphabet>,
    variable_names: Vec<String>,
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
        }
    }
}

/// Structured description of a dataset, suitable for printing as JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetSummary {
    pub n: usize,
    pub p: usize,
    pub variables: Vec<VariableSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VariableSummary {
    pub name: String,
    pub m: usize,
    pub labels: Vec<String>,
}

impl CategoricalDataset {
    /// Builds a dataset from a row-major code matrix and its alphabets.
    pub fn from_codes(
        n: usize,
        p: usize,
        codes: Vec<u32>,
        alphabets: Vec<Alphabet>,
        variable_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid("dataset must have n >= 1 and p >= 1"));
        }
        if codes.len() != n * p {
            return Err(Error::invalid(format!(
                "code matrix has {} entries, expected {}",
                codes.len(),
                n * p
            )));
        }
        if alphabets.len() != p {
            return Err(Error::invalid("one alphabet per variable is required"));
        }
        for (i, row) in codes.chunks(p).enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c as usize >= alphabets[j].m() {
                    return Err(Error::invalid(format!(
                        "code {c} at row {i}, variable {j} exceeds modality count {}",
                        alphabets[j].m()
                    )));
                }
            }
        }
        let variable_names =
            variable_names.unwrap_or_else(|| (1..=p).map(|j| format!("V{j}")).collect());
        if variable_names.len() != p {
            return Err(Error::invalid("one name per variable is required"));
        }
        let ds = Self {
            n,
            p,
            codes,
            alphabets,
            variable_names,
        };
        ds.warn_constant_columns();
        Ok(ds)
    }

    /// Dataset with numeric alphabets of the given modality counts.
    pub fn from_numeric_codes(n: usize, modality_counts: &[usize], codes: Vec<u32>) -> Result<Self> {
        let alphabets = modality_counts.iter().map(|&m| Alphabet::numeric(m)).collect();
        Self::from_codes(n, modality_counts.len(), codes, alphabets, None)
    }

    fn warn_constant_columns(&self) {
        for (j, a) in self.alphabets.iter().enumerate() {
            if a.m() < 2 {
                log::warn!(
                    "variable '{}' has a single modality and carries no information",
                    self.variable_names[j]
                );
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.codes[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.codes.chunks(self.p)
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn modality_counts(&self) -> Vec<usize> {
        self.alphabets.iter().map(Alphabet::m).collect()
    }

    /// Original label matrix.
    pub fn decode(&self) -> Vec<Vec<String>> {
        self.rows()
            .map(|r| {
                r.iter()
                    .zip(&self.alphabets)
                    .map(|(&c, a)| a.labels[c as usize].clone())
                    .collect()
            })
            .collect()
    }

    /// Decodes one code vector with this dataset's alphabets.
    pub fn decode_vector(&self, codes: &[u32]) -> Vec<String> {
        codes
            .iter()
            .zip(&self.alphabets)
            .map(|(&c, a)| a.label(c).unwrap_or("?").to_string())
            .collect()
    }

    /// Subset of rows, in the given order; alphabets are kept as they are.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut codes = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            if i >= self.n {
                return Err(Error::invalid(format!("row {i} out of range")));
            }
            codes.extend_from_slice(self.row(i));
        }
        Self::from_codes(
            rows.len(),
            self.p,
            codes,
            self.alphabets.clone(),
            Some(self.variable_names.clone()),
        )
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            n: self.n,
            p: self.p,
            variables: self
                .variable_names
                .iter()
                .zip(&self.alphabets)
                .map(|(name, a)| VariableSummary {
                    name: name.clone(),
                    m: a.m(),
                    labels: a.labels.clone(),
                })
                .collect(),
        }
    }

    /// Pairwise Hamming distances, row-major n x n.
    pub fn dissimilarity_matrix(&self) -> Vec<u32> {
        let n = self.n;
        let mut d = vec![0u32; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v = hamming_unchecked(self.row(i), self.row(k));
                d[i * n + k] = v;
                d[k * n + i] = v;
            }
        }
        d
    }

    /// Writes the label matrix as delimited text with a header row.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.variable_names)?;
        for row in self.decode() {
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Reads a delimited text stream into an encoded dataset.
pub fn load_dataset<R: Read>(source: R, options: &LoadOptions) -> Result<CategoricalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut names: Option<Vec<String>> = None;
    let mut alphabets: Vec<Alphabet> = Vec::new();
    let mut codes = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0usize;

    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("row has {} fields, expected {w}", rec.len()),
                })
            }
            _ => {}
        }
        if options.has_header && names.is_none() {
            names = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        if alphabets.is_empty() {
            alphabets = vec![Alphabet::new(); rec.len()];
        }
        for (j, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("empty field in column {} (missing data is not supported)", j + 1),
                });
            }
            codes.push(alphabets[j].intern(field));
        }
        n += 1;
    }

    if n == 0 {
        return Err(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }
    let p = width.unwrap_or(0);
    CategoricalDataset::from_codes(n, p, codes, alphabets, names)
}

/// Loads a dataset from a file path.
pub fn load_path(path: &Path, options: &LoadOptions) -> Result<CategoricalDataset> {
    let f = std::fs::File::open(path)?;
    load_dataset(std::io::BufReader::new(f), options)
}

/// Reads one column of labels (for instance a reference classification).
///
/// `column` selects a header name; without it the last column is used.
pub fn load_label_column<R: Read>(
    source: R,
    options: &LoadOptions,
    column: Option<&str>,
) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(source);
    let col = match column {
        Some(name) => {
            if !options.has_header {
                return Err(Error::invalid("a column name requires a header row"));
            }
            let headers = rdr.headers()?.clone();
            Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::invalid(format!("column '{name}' not found")))?,
            )
        }
        None => None,
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let j = col.unwrap_or(rec.len().saturating_sub(1));
        let v = rec.get(j).unwrap_or("");
        if v.is_empty() {
            return Err(Error::Parse {
                line: rec.position().map(|p| p.line() as usize).unwrap_or(0),
                message: "empty label".into(),
            });
        }
        out.push(v.to_string());
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no labels".into(),
        });
    }
    Ok(out)
}

fn hamming_unchecked(x: &[u32], y: &[u32]) -> u32 {
    x.iter().zip(y).filter(|(a, b)| a != b).count() as u32
}

/// Number of coordinates at which `x` and `y` differ.
pub fn hamming_distance(x: &[u32], y: &[u32]) -> Result<u32> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "vectors have different lengths ({} and {})",
            x.len(),
            y.len()
        )));
    }
    Ok(hamming_unchecked(x, y))
}
