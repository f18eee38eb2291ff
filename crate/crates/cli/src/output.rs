//! CSV emission and the per-run output directory.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use lie_dichotomy::experiments::{Table, Value};

fn cell(v: &Value) -> String {
    let s = v.to_string();
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// Writes `table` as CSV: one `#` comment line, a header row, then data
/// rows. Floats carry 17 significant digits; lines end in LF.
pub fn emit_csv(table: &Table, path: &Path, comment: &str) -> io::Result<()> {
    let mut out = String::new();
    out.push_str("# ");
    out.push_str(&comment.replace(['\n', '\r'], " "));
    out.push('\n');
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(cell).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())
}

#[cfg(test)]
/// Raw cells of column `name` in a CSV written by [`emit_csv`].
pub fn read_csv_column(path: &Path, name: &str) -> io::Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty CSV"))?;
    let idx =
        header.split(',').position(|c| c == name).ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, format!("no column `{name}`")))?;
    Ok(lines.map(|l| l.split(',').nth(idx).unwrap_or_default().to_owned()).collect())
}

/// `<out>/<experiment>/<tag>/`, created if needed.
pub fn run_dir(out: &Path, experiment: &str, tag: &str) -> io::Result<PathBuf> {
    let dir = out.join(experiment).join(tag);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}
