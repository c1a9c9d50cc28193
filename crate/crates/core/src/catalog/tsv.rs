//! Tab-separated catalog and count files.
//!
//! Catalog rows are `id<TAB>name[<TAB>external_id]`; count rows are
//! `relation_name<TAB>count`. Both are UTF-8 with LF line endings.

use super::CatalogError;
use std::io::BufRead;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogRow {
    pub id: u32,
    pub name: String,
    pub external_id: Option<String>,
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), CatalogError>> {
    // split on LF only so that a stray CR stays visible to the caller
    reader
        .split(b'\n')
        .enumerate()
        .map(|(i, line)| {
            let line = line?;
            String::from_utf8(line)
                .map(|l| (i + 1, l))
                .map_err(|_| malformed(i + 1, "invalid UTF-8"))
        })
        .filter(|r| !matches!(r, Ok((_, l)) if l.is_empty()))
}

fn malformed(line: usize, message: impl Into<String>) -> CatalogError {
    CatalogError::Malformed {
        line,
        message: message.into(),
    }
}

/// Reads catalog rows and returns them ordered by id.
///
/// Ids must cover `0..n` exactly once. Blank lines are ignored.
pub fn read_catalog_tsv<R: BufRead>(reader: R) -> Result<Vec<CatalogRow>, CatalogError> {
    let mut rows = Vec::new();
    for line in lines(reader) {
        let (no, line) = line?;
        if line.contains('\r') {
            return Err(malformed(
                no,
                "carriage return in row (expected LF line endings)",
            ));
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        let id: u32 = id
            .parse()
            .map_err(|_| malformed(no, format!("invalid id {id:?}")))?;
        let name = fields
            .next()
            .ok_or_else(|| malformed(no, "missing name column"))?;
        let external_id = fields.next().filter(|s| !s.is_empty()).map(str::to_owned);
        if fields.next().is_some() {
            return Err(malformed(no, "too many columns"));
        }
        rows.push((
            no,
            CatalogRow {
                id,
                name: name.to_owned(),
                external_id,
            },
        ));
    }
    rows.sort_by_key(|(_, r)| r.id);
    for (expected, (no, row)) in rows.iter().enumerate() {
        if row.id as usize != expected {
            return Err(malformed(
                *no,
                format!(
                    "ids must be dense from 0; expected {expected}, found {}",
                    row.id
                ),
            ));
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Reads `relation_name<TAB>count` rows in file order.
pub fn read_counts_tsv<R: BufRead>(reader: R) -> Result<Vec<(String, u64)>, CatalogError> {
    let mut out = Vec::new();
    for line in lines(reader) {
        let (no, line) = line?;
        let (name, count) = line
            .rsplit_once('\t')
            .ok_or_else(|| malformed(no, "expected relation_name<TAB>count"))?;
        let count = count
            .trim_end_matches('\r')
            .parse()
            .map_err(|_| malformed(no, format!("invalid count {count:?}")))?;
        out.push((name.to_owned(), count));
    }
    Ok(out)
}
