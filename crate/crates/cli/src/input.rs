//! CSV datasets: one point per row, optional header row.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pv_core::PointSet;

fn parse_cell(cell: &str) -> Option<f64> {
    let v: f64 = cell.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))
}

/// Reads a point set. The first row is treated as a header when any of its
/// cells is not a number.
pub fn read_points(path: &Path) -> Result<PointSet> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader(path)?.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Option<Vec<f64>> = record.iter().map(parse_cell).collect();
        let row = match parsed {
            Some(row) => row,
            None if line == 0 => continue,
            None => {
                let col = record.iter().position(|c| parse_cell(c).is_none()).unwrap_or(0);
                bail!(
                    "{}: row {}, column {}: {:?} is not a finite decimal number",
                    path.display(),
                    line + 1,
                    col + 1,
                    record.get(col).unwrap_or("")
                );
            }
        };
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    line + 1,
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    PointSet::new(rows).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Every `*.csv` file of `dir` as `(file stem, points)`, sorted by name.
pub fn read_dir_sets(dir: &Path) -> Result<Vec<(String, PointSet)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("{}: no .csv files", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((id, read_points(p)?))
        })
        .collect()
}

/// `query_id,candidate_id` pairs; a first row naming unknown ids is taken as
/// a header.
pub fn read_relevance(path: &Path, queries: &HashSet<&str>, candidates: &HashSet<&str>) -> Result<HashSet<(String, String)>> {
    let mut pairs = HashSet::new();
    for (line, record) in reader(path)?.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if record.len() != 2 {
            bail!("{}: row {} must hold query_id,candidate_id", path.display(), line + 1);
        }
        let (q, c) = (&record[0], &record[1]);
        let known = queries.contains(q) && candidates.contains(c);
        if !known {
            if line == 0 {
                continue;
            }
            bail!("{}: row {}: unknown pair ({q}, {c})", path.display(), line + 1);
        }
        pairs.insert((q.to_string(), c.to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_is_detected() {
        let f = file("x,y\n1,2\n3.5,-4e-1\n");
        let s = read_points(f.path()).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0, 2.0], vec![3.5, -0.4]]);
        let f = file("1,2\n3,4\n");
        assert_eq!(read_points(f.path()).unwrap().len(), 2);
    }

    #[test]
    fn bad_input_is_rejected() {
        assert!(read_points(file("1,2\n3\n").path()).is_err());
        assert!(read_points(file("1,2\n3,abc\n").path()).is_err());
        assert!(read_points(file("1,2\nNaN,3\n").path()).is_err());
        assert!(read_points(file("a,b\n").path()).is_err());
        assert!(read_points(Path::new("/nonexistent/file.csv")).is_err());
    }
}
