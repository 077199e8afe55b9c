use std::fmt::Write as _;

use super::LdpcCode;
use crate::{Error, Result};

/// Parses MacKay's alist format. Zero entries used as padding are ignored.
pub fn parse_alist(text: &str) -> Result<LdpcCode> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut next_nums = |what: &str| -> Result<Vec<usize>> {
        let line = lines.next().ok_or_else(|| Error::Code(format!("alist truncated before {what}")))?;
        line.split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Code(format!("alist: bad integer {t:?} in {what}"))))
            .collect()
    };
    let dims = next_nums("dimensions")?;
    let [n, m] = dims[..] else {
        return Err(Error::Code("alist: first line must be `N M`".into()));
    };
    let maxes = next_nums("maximum degrees")?;
    if maxes.len() != 2 {
        return Err(Error::Code("alist: second line must hold two maximum degrees".into()));
    }
    let col_deg = next_nums("column degrees")?;
    let row_deg = next_nums("row degrees")?;
    if col_deg.len() != n || row_deg.len() != m {
        return Err(Error::Code(format!(
            "alist: expected {n} column and {m} row degrees, found {} and {}",
            col_deg.len(),
            row_deg.len()
        )));
    }
    let mut cols = Vec::with_capacity(n);
    for (i, &d) in col_deg.iter().enumerate() {
        let entries: Vec<usize> = next_nums("column lists")?.into_iter().filter(|&v| v != 0).collect();
        if entries.len() != d || entries.iter().any(|&r| r > m) {
            return Err(Error::Code(format!("alist: column {} inconsistent with its degree {d}", i + 1)));
        }
        cols.push(entries);
    }
    let mut rows = Vec::with_capacity(m);
    for (j, &d) in row_deg.iter().enumerate() {
        let entries: Vec<usize> = next_nums("row lists")?.into_iter().filter(|&v| v != 0).collect();
        if entries.len() != d || entries.iter().any(|&c| c > n) {
            return Err(Error::Code(format!("alist: row {} inconsistent with its degree {d}", j + 1)));
        }
        rows.push(entries.into_iter().map(|c| c - 1).collect::<Vec<_>>());
    }
    for (i, col) in cols.iter().enumerate() {
        for &r in col {
            if !rows[r - 1].contains(&i) {
                return Err(Error::Code(format!("alist: column {} lists row {r} but not vice versa", i + 1)));
            }
        }
    }
    let edges_from_cols: usize = col_deg.iter().sum();
    let edges_from_rows: usize = row_deg.iter().sum();
    if edges_from_cols != edges_from_rows {
        return Err(Error::Code("alist: row and column lists disagree".into()));
    }
    LdpcCode::from_checks(n, rows)
}

/// Writes `code` in alist format, padding short lists with zeros.
pub fn write_alist(code: &LdpcCode) -> String {
    let cols = code.var_to_checks();
    let rows = code.check_to_vars();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = rows.iter().map(Vec::len).max().unwrap_or(0);
    let join = |v: Vec<usize>| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let mut s = String::new();
    writeln!(s, "{} {}", code.length(), code.num_checks()).unwrap();
    writeln!(s, "{max_col} {max_row}").unwrap();
    writeln!(s, "{}", join(cols.iter().map(Vec::len).collect())).unwrap();
    writeln!(s, "{}", join(rows.iter().map(Vec::len).collect())).unwrap();
    for col in cols {
        let mut v: Vec<usize> = col.iter().map(|r| r + 1).collect();
        v.sort_unstable();
        v.resize(max_col, 0);
        writeln!(s, "{}", join(v)).unwrap();
    }
    for row in rows {
        let mut v: Vec<usize> = row.iter().map(|c| c + 1).collect();
        v.sort_unstable();
        v.resize(max_row, 0);
        writeln!(s, "{}", join(v)).unwrap();
    }
    s
}
