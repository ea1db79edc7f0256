//! Session CSV format:
//! `query_id,item_id,label,price,cost,base_utility,f0,f1,...,f{d-1}`.
//!
//! A header row is required and the rows of one query must be contiguous.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::{format_significant, Scalar};
use crate::session::{validate_session, Item, QuerySession, ViolationScope};

const FIXED_COLUMNS: [&str; 6] = ["query_id", "item_id", "label", "price", "cost", "base_utility"];

/// Significant digits used when writing floats.
pub const CSV_DIGITS: usize = 9;

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let bad = |reason: String| Err(Error::Parse { line: 1, reason });
    if header.len() < FIXED_COLUMNS.len() {
        return bad(format!("header needs at least {} columns", FIXED_COLUMNS.len()));
    }
    for (k, want) in FIXED_COLUMNS.iter().enumerate() {
        if header[k].trim() != *want {
            return bad(format!("column {} must be {want:?}, found {:?}", k + 1, &header[k]));
        }
    }
    for (k, name) in header.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        if name.trim() != format!("f{k}") {
            return bad(format!("feature column {k} must be \"f{k}\", found {name:?}"));
        }
    }
    Ok(header.len() - FIXED_COLUMNS.len())
}

fn field<T: Scalar>(record: &csv::StringRecord, k: usize, line: u64) -> Result<T> {
    let raw = record[k].trim();
    raw.parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            reason: format!(
                "{}: {raw:?} is not a finite number",
                FIXED_COLUMNS.get(k).copied().unwrap_or("feature")
            ),
        })
}

struct Pending<T> {
    query_id: String,
    first_line: u64,
    lines: Vec<u64>,
    items: Vec<Item<T>>,
    feature_dim: usize,
}

/// Reads sessions grouped by `query_id`, preserving row order, and validates
/// every one of them. All validation failures are reported together.
pub fn load_sessions<T: Scalar, R: Read>(source: R) -> Result<Vec<QuerySession<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header = match reader.headers() {
        Ok(h) if h.is_empty() => return Ok(Vec::new()),
        Ok(h) => h.clone(),
        Err(e) => return Err(e.into()),
    };
    let header_dim = check_header(&header)?;

    let mut groups: Vec<Pending<T>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() < FIXED_COLUMNS.len() {
            return Err(Error::Parse {
                line,
                reason: format!("expected at least {} fields, found {}", FIXED_COLUMNS.len(), record.len()),
            });
        }
        let query_id = record[0].trim().to_string();
        let dim = record.len() - FIXED_COLUMNS.len();

        let continues = groups.last().is_some_and(|g| g.query_id == query_id);
        if !continues {
            if !seen.insert(query_id.clone()) {
                return Err(Error::Parse {
                    line,
                    reason: format!("rows of query {query_id:?} are not contiguous"),
                });
            }
            if dim != header_dim {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected {header_dim} features, found {dim}"),
                });
            }
        } else if let Some(g) = groups.last() {
            if dim != g.feature_dim {
                return Err(Error::FeatureDim {
                    line,
                    query_id,
                    expected: g.feature_dim,
                    got: dim,
                });
            }
        }

        let label_raw = record[2].trim();
        let label: u8 = label_raw.parse().map_err(|_| Error::Parse {
            line,
            reason: format!("label: {label_raw:?} is not a grade in 0..=2"),
        })?;
        let features = (FIXED_COLUMNS.len()..record.len())
            .map(|k| field::<T>(&record, k, line))
            .collect::<Result<Vec<_>>>()?;
        let item = Item {
            item_id: record[1].trim().to_string(),
            features,
            label,
            price: field(&record, 3, line)?,
            cost: field(&record, 4, line)?,
            base_utility: field(&record, 5, line)?,
        };

        if !continues {
            groups.push(Pending {
                query_id,
                first_line: line,
                lines: Vec::new(),
                items: Vec::new(),
                feature_dim: dim,
            });
        }
        let g = groups.last_mut().expect("group just ensured");
        g.lines.push(line);
        g.items.push(item);
    }

    let mut problems = Vec::new();
    let sessions: Vec<QuerySession<T>> = groups
        .into_iter()
        .map(|g| {
            let session = QuerySession::new(g.query_id, g.feature_dim, g.items);
            for v in validate_session(&session) {
                let line = match v.scope {
                    ViolationScope::Session => g.first_line,
                    ViolationScope::Item(i) => g.lines[i],
                };
                problems.push(format!("line {line}: query {}: {v}", session.query_id()));
            }
            session
        })
        .collect();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(sessions)
}

/// Writes sessions in the canonical CSV layout, floats at nine significant digits.
pub fn emit_sessions<T: Scalar, W: Write>(sessions: &[QuerySession<T>], sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(sink);
    let dim = sessions.first().map_or(0, QuerySession::feature_dim);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|k| format!("f{k}")));
    writer.write_record(&header)?;
    let num = |x: T| format_significant(x.as_f64(), CSV_DIGITS);
    for s in sessions {
        for it in s.items() {
            let mut row = vec![
                s.query_id().to_string(),
                it.item_id.clone(),
                it.label.to_string(),
                num(it.price),
                num(it.cost),
                num(it.base_utility),
            ];
            row.extend(it.features.iter().map(|&x| num(x)));
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn sessions_to_csv_string<T: Scalar>(sessions: &[QuerySession<T>]) -> String {
    let mut buf = Vec::new();
    emit_sessions(sessions, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}
