//! Observed data: either `p` independent samples of possibly different sizes,
//! or an `n × p` matrix of observation vectors with an optional response.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One sample per item, drawn independently, sizes may differ.
    IndependentSamples,
    /// Rows are observation vectors; column `j` is the sample for item `j`.
    Matrix,
}

/// The observed data.
///
/// Matrix data is stored column-major: `columns[j]` holds `X_1j, ..., X_nj`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationData {
    layout: Layout,
    columns: Vec<Vec<f64>>,
    response: Option<Vec<f64>>,
    labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSizeSummary {
    pub n_bar: f64,
    pub n_min: usize,
    pub n_max: usize,
}

impl PopulationData {
    pub fn independent(samples: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(Layout::IndependentSamples, samples, None, None)
    }

    pub fn matrix(columns: Vec<Vec<f64>>, response: Option<Vec<f64>>) -> Result<Self> {
        Self::build(Layout::Matrix, columns, response, None)
    }

    /// Matrix data from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], response: Option<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::validation(format!(
                "row {} has {} values, expected {p}",
                i + 1,
                rows[i].len()
            )));
        }
        let columns = (0..p)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::matrix(columns, response)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.columns.len() {
            return Err(Error::validation(format!(
                "{} labels for {} items",
                labels.len(),
                self.columns.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    fn build(
        layout: Layout,
        columns: Vec<Vec<f64>>,
        response: Option<Vec<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if columns.len() < 2 {
            return Err(Error::validation(format!(
                "need at least 2 items to rank, got {}",
                columns.len()
            )));
        }
        let name = |j: usize| match &labels {
            Some(l) => l[j].clone(),
            None => format!("{}", j + 1),
        };
        for (j, col) in columns.iter().enumerate() {
            if col.len() < 2 {
                return Err(Error::validation(format!(
                    "item {} has fewer than 2 observations",
                    name(j)
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "item {} has a non-finite value at observation {}",
                    name(j),
                    i + 1
                )));
            }
        }
        if layout == Layout::Matrix {
            let n = columns[0].len();
            if columns.iter().any(|c| c.len() != n) {
                return Err(Error::validation("matrix columns have unequal lengths"));
            }
            if let Some(y) = &response {
                if y.len() != n {
                    return Err(Error::validation(format!(
                        "response has {} values, expected {n}",
                        y.len()
                    )));
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation("response has a non-finite value"));
                }
            }
        } else if response.is_some() {
            return Err(Error::validation(
                "a response is only allowed with the matrix layout",
            ));
        }
        Ok(PopulationData {
            layout,
            columns,
            response,
            labels,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Number of items.
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    /// Sample for item `j`.
    pub fn sample(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn response(&self) -> Option<&[f64]> {
        self.response.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label for item `j`, falling back to its 1-based index.
    pub fn label(&self, j: usize) -> String {
        match &self.labels {
            Some(l) => l[j].clone(),
            None => format!("{}", j + 1),
        }
    }

    /// `n_j` for every item.
    pub fn sizes(&self) -> Vec<usize> {
        self.columns.iter().map(Vec::len).collect()
    }

    /// Row count of matrix data.
    pub fn n_rows(&self) -> Option<usize> {
        match self.layout {
            Layout::Matrix => Some(self.columns[0].len()),
            Layout::IndependentSamples => None,
        }
    }

    pub fn summarize_sizes(&self) -> SampleSizeSummary {
        summarize_sizes(self)
    }
}

pub fn summarize_sizes(data: &PopulationData) -> SampleSizeSummary {
    let sizes = data.sizes();
    let total: usize = sizes.iter().sum();
    SampleSizeSummary {
        n_bar: total as f64 / sizes.len() as f64,
        n_min: sizes.iter().copied().min().unwrap_or(0),
        n_max: sizes.iter().copied().max().unwrap_or(0),
    }
}

fn csv_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_value(path: &Path, line: u64, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| csv_err(path, format!("line {line}: non-numeric value {raw:?}")))?;
    if !v.is_finite() {
        return Err(csv_err(
            path,
            format!("line {line}: non-finite value {raw:?}"),
        ));
    }
    Ok(v)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Reads `item,value` rows. Items keep their first-appearance order.
pub fn load_long_csv(path: impl AsRef<Path>) -> Result<PopulationData> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| csv_err(path, e.to_string()))?
        .clone();
    let item_col = headers.iter().position(|h| h == "item");
    let value_col = headers.iter().position(|h| h == "value");
    let (item_col, value_col) = match (item_col, value_col) {
        (Some(i), Some(v)) => (i, v),
        _ => return Err(csv_err(path, "missing header `item,value`")),
    };

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(item), Some(raw)) = (rec.get(item_col), rec.get(value_col)) else {
            return Err(csv_err(
                path,
                format!("line {line}: expected item and value"),
            ));
        };
        let v = parse_value(path, line, raw)?;
        let j = *index.entry(item.to_string()).or_insert_with(|| {
            order.push(item.to_string());
            samples.push(Vec::new());
            order.len() - 1
        });
        samples[j].push(v);
    }
    if let Some(j) = samples.iter().position(|s| s.len() < 2) {
        return Err(Error::validation(format!(
            "item {} has fewer than 2 observations",
            order[j]
        )));
    }
    PopulationData::build(Layout::IndependentSamples, samples, None, Some(order))
}

/// Reads a header row of item names followed by one row per observation
/// vector. `response_column`, if given, is split off as the response.
pub fn load_matrix_csv(
    path: impl AsRef<Path>,
    response_column: Option<&str>,
) -> Result<PopulationData> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let response_idx = match response_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| csv_err(path, format!("no response column named {name:?}")))?,
        ),
        None => None,
    };
    let labels: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    let mut response = response_idx.map(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, format!("ragged or malformed row: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(csv_err(
                path,
                format!(
                    "line {line}: {} cells, expected {}",
                    rec.len(),
                    headers.len()
                ),
            ));
        }
        let mut c = 0;
        for (i, raw) in rec.iter().enumerate() {
            let v = parse_value(path, line, raw)?;
            if Some(i) == response_idx {
                if let Some(y) = response.as_mut() {
                    y.push(v);
                }
            } else {
                columns[c].push(v);
                c += 1;
            }
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(Error::validation(format!(
            "matrix needs at least 2 rows, got {n}"
        )));
    }
    PopulationData::build(Layout::Matrix, columns, response, Some(labels))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes data in the format read by [`load_long_csv`] or
/// [`load_matrix_csv`] (with the response, if any, in a column named
/// `response`). Values use the shortest exact decimal representation.
pub fn write_csv(data: &PopulationData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err(path))?);
    let labels: Vec<String> = (0..data.p()).map(|j| data.label(j)).collect();
    match data.layout {
        Layout::IndependentSamples => {
            writeln!(out, "item,value").map_err(io_err(path))?;
            for (label, col) in labels.iter().zip(&data.columns) {
                for v in col {
                    writeln!(out, "{label},{v}").map_err(io_err(path))?;
                }
            }
        }
        Layout::Matrix => {
            let mut header = labels.join(",");
            if data.response.is_some() {
                header.push_str(",response");
            }
            writeln!(out, "{header}").map_err(io_err(path))?;
            let n = data.columns[0].len();
            for i in 0..n {
                let mut row: Vec<String> = data.columns.iter().map(|c| c[i].to_string()).collect();
                if let Some(y) = &data.response {
                    row.push(y[i].to_string());
                }
                writeln!(out, "{}", row.join(",")).map_err(io_err(path))?;
            }
        }
    }
    out.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn long_csv_basic() {
        let f = write_tmp("item,value\nA,1\nA,2\nB,3\nB,4\n");
        let d = load_long_csv(f.path()).unwrap();
        assert_eq!(d.layout(), Layout::IndependentSamples);
        assert_eq!(d.p(), 2);
        assert_eq!(d.sample(0), &[1.0, 2.0]);
        assert_eq!(d.sample(1), &[3.0, 4.0]);
        assert_eq!(d.labels().unwrap(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn long_csv_first_appearance_order() {
        let f = write_tmp("item,value\nZ,1\nA,2\nZ,3\nA,4\n");
        let d = load_long_csv(f.path()).unwrap();
        assert_eq!(d.label(0), "Z");
        assert_eq!(d.sample(0), &[1.0, 3.0]);
    }

    #[test]
    fn long_csv_too_few_observations() {
        let f = write_tmp("item,value\nA,1\nB,2\nB,3\n");
        let err = load_long_csv(f.path()).unwrap_err();
        assert!(err
            .to_string()
            .contains("item A has fewer than 2 observations"));
        assert!(err.is_input_error());
    }

    #[test]
    fn long_csv_missing_header_and_bad_number() {
        let f = write_tmp("A,1\nA,2\n");
        assert!(load_long_csv(f.path())
            .unwrap_err()
            .to_string()
            .contains("missing header"));
        let f = write_tmp("item,value\nA,1\nA,x\n");
        assert!(load_long_csv(f.path())
            .unwrap_err()
            .to_string()
            .contains("non-numeric"));
        let f = write_tmp("item,value\nA,1\nA,NaN\n");
        assert!(load_long_csv(f.path()).is_err());
    }

    #[test]
    fn unequal_group_sizes_average() {
        // 75 items with sizes 10 + (j mod 7) * 3.
        let mut s = String::from("item,value\n");
        let mut total = 0usize;
        for j in 0..75 {
            let nj = 10 + (j % 7) * 3;
            total += nj;
            for i in 0..nj {
                s.push_str(&format!("s{j},{}\n", (i % 2) as f64));
            }
        }
        let d = load_long_csv(write_tmp(&s).path()).unwrap();
        let summary = d.summarize_sizes();
        assert_eq!(d.p(), 75);
        assert_eq!(summary.n_bar, total as f64 / 75.0);
        assert_eq!(summary.n_min, 10);
        assert_eq!(summary.n_max, 28);
    }

    #[test]
    fn matrix_csv_with_response() {
        let f = write_tmp("g1,y,g2\n1,10,2\n3,11,4\n5,12,6\n");
        let d = load_matrix_csv(f.path(), Some("y")).unwrap();
        assert_eq!(d.p(), 2);
        assert_eq!(d.n_rows(), Some(3));
        assert_eq!(d.sample(1), &[2.0, 4.0, 6.0]);
        assert_eq!(d.response().unwrap(), &[10.0, 11.0, 12.0]);
        assert_eq!(d.label(1), "g2");
    }

    #[test]
    fn matrix_csv_small_and_errors() {
        let d = load_matrix_csv(write_tmp("a,b\n1,2\n3,4\n").path(), None).unwrap();
        assert_eq!((d.n_rows(), d.p()), (Some(2), 2));
        assert!(load_matrix_csv(write_tmp("a,b\n1,2\n3\n").path(), None).is_err());
        assert!(load_matrix_csv(write_tmp("a,b\n1,2\n").path(), None).is_err());
        assert!(load_matrix_csv(write_tmp("a,b\n1,2\n3,q\n").path(), None).is_err());
        assert!(load_matrix_csv(write_tmp("a,b\n1,2\n3,4\n").path(), Some("y")).is_err());
    }

    #[test]
    fn summarize_examples() {
        let d =
            PopulationData::independent(vec![vec![0.0; 10], vec![0.0; 20], vec![0.0; 30]]).unwrap();
        assert_eq!(d.summarize_sizes().n_bar, 20.0);
        let d = PopulationData::independent(vec![
            vec![0.0; 4],
            vec![0.0; 4],
            vec![0.0; 4],
            vec![0.0; 100],
        ])
        .unwrap();
        assert_eq!(d.summarize_sizes().n_bar, 28.0);
        let d = PopulationData::matrix(vec![vec![0.0; 50], vec![1.0; 50]], None).unwrap();
        assert_eq!(d.summarize_sizes().n_bar, 50.0);
    }

    #[test]
    fn invariants_rejected() {
        assert!(PopulationData::independent(vec![vec![1.0, 2.0]]).is_err());
        assert!(PopulationData::independent(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(
            PopulationData::independent(vec![vec![1.0, f64::INFINITY], vec![1.0, 2.0]]).is_err()
        );
        assert!(PopulationData::matrix(vec![vec![1.0, 2.0], vec![1.0]], None).is_err());
        assert!(
            PopulationData::matrix(vec![vec![1.0, 2.0], vec![1.0, 3.0]], Some(vec![1.0])).is_err()
        );
    }
}
