//! MacKay's alist format for sparse binary matrices.
//!
//! ```text
//! N M
//! max_col_weight max_row_weight
//! <N column weights>
//! <M row weights>
//! <N lines: 1-based row indices of each column>
//! <M lines: 1-based column indices of each row>
//! ```
//!
//! Index lists may be zero-padded to the maximum weight; both the padded
//! and unpadded variants are read. Output is always padded.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::LinearCode;
use crate::{Error, Result};

pub fn format_alist(code: &LinearCode) -> String {
    let (n, m) = (code.n(), code.m());
    let cw = code.column_weights();
    let rw = code.row_weights();
    let max_c = cw.iter().copied().max().unwrap_or(0);
    let max_r = rw.iter().copied().max().unwrap_or(0);
    let mut out = String::new();
    let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "{n} {m}");
    let _ = writeln!(out, "{max_c} {max_r}");
    let _ = writeln!(out, "{}", join(&mut cw.iter().copied()));
    let _ = writeln!(out, "{}", join(&mut rw.iter().copied()));
    for col in code.vars() {
        let mut it = col.iter().map(|r| r + 1).chain(std::iter::repeat(0)).take(max_c);
        let _ = writeln!(out, "{}", join(&mut it));
    }
    for row in code.checks() {
        let mut it = row.iter().map(|c| c + 1).chain(std::iter::repeat(0)).take(max_r);
        let _ = writeln!(out, "{}", join(&mut it));
    }
    out
}

pub fn parse_alist(text: &str) -> Result<LinearCode> {
    let bad = |msg: String| Error::Alist(msg);
    let mut tokens = text.split_whitespace().map(|t| {
        t.parse::<usize>().map_err(|_| bad(format!("'{t}' is not a non-negative integer")))
    });
    let mut next = |what: &str| -> Result<usize> {
        tokens.next().ok_or_else(|| bad(format!("unexpected end of input reading {what}")))?
    };
    let n = next("N")?;
    let m = next("M")?;
    let max_c = next("max column weight")?;
    let max_r = next("max row weight")?;
    let cw: Vec<usize> = (0..n).map(|_| next("column weights")).collect::<Result<_>>()?;
    let rw: Vec<usize> = (0..m).map(|_| next("row weights")).collect::<Result<_>>()?;
    if cw.iter().any(|&w| w > max_c) || rw.iter().any(|&w| w > max_r) {
        return Err(bad("weight exceeds declared maximum".to_string()));
    }
    let rest: Vec<usize> = std::iter::from_fn(|| next("index").ok()).collect();
    let padded_len = n * max_c + m * max_r;
    let compact_len: usize = cw.iter().sum::<usize>() + rw.iter().sum::<usize>();
    let padded = if rest.len() == padded_len {
        true
    } else if rest.len() == compact_len {
        false
    } else {
        return Err(bad(format!(
            "found {} index entries, expected {padded_len} (padded) or {compact_len} (compact)",
            rest.len()
        )));
    };

    let mut pos = 0;
    let mut read_lists = |weights: &[usize], width: usize, bound: usize| -> Result<Vec<Vec<usize>>> {
        let mut lists = Vec::with_capacity(weights.len());
        for &w in weights {
            let span = if padded { width } else { w };
            let raw = &rest[pos..pos + span];
            pos += span;
            let entries: Vec<usize> = raw.iter().copied().filter(|&x| x != 0).collect();
            if entries.len() != w || raw[..w].contains(&0) {
                return Err(bad("index list does not match its declared weight".to_string()));
            }
            if entries.iter().any(|&x| x > bound) {
                return Err(bad(format!("index out of range 1..={bound}")));
            }
            lists.push(entries.into_iter().map(|x| x - 1).collect());
        }
        Ok(lists)
    };
    let cols = read_lists(&cw, max_c, m)?;
    let rows = read_lists(&rw, max_r, n)?;

    let mut from_cols = vec![Vec::new(); m];
    for (c, list) in cols.iter().enumerate() {
        for &r in list {
            from_cols[r].push(c);
        }
    }
    for (r, list) in rows.iter().enumerate() {
        let mut a = list.clone();
        a.sort_unstable();
        if a != from_cols[r] {
            return Err(bad(format!("row {} disagrees with the column lists", r + 1)));
        }
    }
    LinearCode::from_checks(n, rows)
}

pub fn read_alist(path: &Path) -> Result<LinearCode> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_alist(&text)
}

pub fn write_alist(code: &LinearCode, path: &Path) -> Result<()> {
    fs::write(path, format_alist(code)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
