//! CSV reading and writing for matrices, datasets and versioned outputs.
//!
//! Output files start with one `#` metadata line carrying the schema
//! version and a timestamp; everything after it is deterministic.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;

use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::smear::TransitionMatrix;

pub const SCHEMA_VERSION: u32 = 1;

/// `# labelsmear schema_version=1 generated_at=<unix seconds> key=value ...`
pub fn metadata_line(extra: &[(&str, String)]) -> String {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut line = format!("# labelsmear schema_version={SCHEMA_VERSION} generated_at={now}");
    for (k, v) in extra {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(v);
    }
    line.push('\n');
    line
}

/// Creates `path` and writes the metadata line; the caller writes the body.
pub fn create_output(path: &Path, extra: &[(&str, String)]) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(metadata_line(extra).as_bytes())?;
    Ok(w)
}

/// Everything after the leading `#` lines.
pub fn body(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    }
    rest
}

fn reader<R: Read>(r: R, has_headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(r)
}

fn parse_f64(s: &str, line: u64) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Csv(format!("line {line}: `{s}` is not a number")))
}

/// One matrix row per line, no header, shortest round-trip decimals.
pub fn write_matrix<W: Write>(out: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader(r, false).records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(rec.iter().map(|s| parse_f64(s, line)).collect::<Result<_>>()?);
    }
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::EmptyInput("matrix csv"));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

pub fn read_transition_file(path: &Path) -> Result<TransitionMatrix> {
    TransitionMatrix::new(read_matrix(File::open(path)?)?)
}

pub fn write_transition_file(path: &Path, t: &TransitionMatrix) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), t.entries())
}

/// Header `x0..x{D-1},label[,clean_label]`, then one row per example.
pub fn write_dataset<W: Write>(out: W, data: &LabeledDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    if data.clean_labels().is_some() {
        header.push("clean_label".into());
    }
    w.write_record(&header)?;
    for (i, x) in data.features().iter_rows().enumerate() {
        let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
        rec.push(data.observed_labels()[i].to_string());
        if let Some(c) = data.clean_labels() {
            rec.push(c[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]. A header row is detected
/// by a non-numeric first cell; without one, the last column is the label.
/// With one, a trailing `clean_label` column is read as clean labels.
/// `num_classes` defaults to one more than the largest label.
pub fn read_dataset<R: Read>(r: R, num_classes: Option<usize>) -> Result<LabeledDataset> {
    let mut rd = reader(r, false);
    let mut records = rd.records();
    let mut rows = Vec::new();
    let mut has_clean = false;
    if let Some(first) = records.next() {
        let first = first?;
        if first.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            has_clean = first.iter().next_back() == Some("clean_label");
        } else {
            rows.push(first);
        }
    }
    for rec in records {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("dataset csv"));
    }
    let label_cols = if has_clean { 2 } else { 1 };
    let cols = rows[0].len();
    if cols <= label_cols {
        return Err(Error::Csv("dataset needs at least one feature column".into()));
    }
    let d = cols - label_cols;
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut observed = Vec::with_capacity(rows.len());
    let mut clean = Vec::new();
    for rec in &rows {
        let line = rec.position().map_or(0, |p| p.line());
        for s in rec.iter().take(d) {
            data.push(parse_f64(s, line)?);
        }
        let label = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Csv(format!("line {line}: `{s}` is not a class index")))
        };
        observed.push(label(&rec[d])?);
        if has_clean {
            clean.push(label(&rec[d + 1])?);
        }
    }
    let max_label = observed.iter().chain(&clean).copied().max().unwrap_or(0);
    let l = num_classes.unwrap_or(max_label + 1).max(2);
    let features = Features::new(rows.len(), d, data)?;
    if has_clean {
        LabeledDataset::with_clean(features, observed, clean, l)
    } else {
        LabeledDataset::new(features, observed, l)
    }
}

pub fn read_dataset_file(path: &Path, num_classes: Option<usize>) -> Result<LabeledDataset> {
    read_dataset(File::open(path)?, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2e-300, 1e17, std::f64::consts::PI, 0.0]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn matrix_ignores_comments_and_rejects_ragged_rows() {
        let m = read_matrix("# note\n1,0\n0.25,0.75\n".as_bytes()).unwrap();
        assert_eq!(m[(1, 1)], 0.75);
        assert!(read_matrix("1,0\n1\n".as_bytes()).is_err());
        assert!(read_matrix("a,b\n".as_bytes()).is_err());
        assert!(read_matrix("".as_bytes()).is_err());
    }

    #[test]
    fn dataset_round_trip_with_clean_labels() {
        let f = Features::from_rows(&[vec![0.5, -1.0], vec![2.0, 3.5], vec![0.1, 0.2]]).unwrap();
        let d = LabeledDataset::with_clean(f, vec![1, 0, 2], vec![1, 1, 2], 3).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let back = read_dataset(buf.as_slice(), Some(3)).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.noise_mask().unwrap(), &[false, true, false]);
    }

    #[test]
    fn headerless_dataset() {
        let d = read_dataset("1.0,2.0,0\n3.0,4.0,1\n".as_bytes(), None).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.num_classes(), 2);
        assert!(d.clean_labels().is_none());
        assert!(read_dataset("1.0,2.0,x\n".as_bytes(), None).is_err());
    }

    #[test]
    fn body_strips_metadata() {
        let text = format!("{}a,b\n1,2\n", metadata_line(&[("k", "v".into())]));
        assert_eq!(body(&text), "a,b\n1,2\n");
        assert!(text.starts_with("# labelsmear schema_version=1 generated_at="));
    }
}
