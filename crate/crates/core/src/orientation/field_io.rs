//! Plain-text orientation field format.
//!
//! ```text
//! rows cols
//! a00 a01 ... (cols values, radians, "nan" for invalid cells)
//! ...         (rows lines)
//! ```

use std::fmt::Write;

use thiserror::Error;

use super::OrientationField;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldParseError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
}

/// Renders a field; angles use the shortest representation that round-trips.
pub fn write_field(field: &OrientationField) -> String {
    let mut out = String::with_capacity(field.len() * 20);
    writeln!(out, "{} {}", field.rows(), field.cols()).unwrap();
    for r in 0..field.rows() {
        for c in 0..field.cols() {
            if c > 0 {
                out.push(' ');
            }
            if field.is_valid(r, c) {
                write!(out, "{}", field.angle(r, c)).unwrap();
            } else {
                out.push_str("nan");
            }
        }
        out.push('\n');
    }
    out
}

/// Parses the text format. Angles outside `[0, π)` are reduced modulo π.
pub fn parse_field(text: &str) -> Result<OrientationField, FieldParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(FieldParseError::Syntax {
        line: 1,
        reason: "missing \"rows cols\" header".into(),
    })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| FieldParseError::Syntax {
                line: hline,
                reason: format!("invalid dimension {s:?}"),
            })
    };
    if dims.len() != 2 {
        return Err(FieldParseError::Syntax {
            line: hline,
            reason: format!("header must be \"rows cols\", got {header:?}"),
        });
    }
    let rows = parse_dim(dims[0])?;
    let cols = parse_dim(dims[1])?;

    let mut angles = Vec::with_capacity(rows * cols);
    let mut valid = Vec::with_capacity(rows * cols);
    let mut found = 0;
    for (line, text) in lines {
        found += 1;
        if found > rows {
            continue;
        }
        let before = angles.len();
        for tok in text.split_whitespace() {
            if tok.eq_ignore_ascii_case("nan") {
                angles.push(0.0);
                valid.push(false);
                continue;
            }
            let a: f64 = tok.parse().map_err(|_| FieldParseError::Syntax {
                line,
                reason: format!("invalid angle {tok:?}"),
            })?;
            if !a.is_finite() {
                return Err(FieldParseError::Syntax {
                    line,
                    reason: format!("angle {tok:?} is not finite"),
                });
            }
            angles.push(a);
            valid.push(true);
        }
        if angles.len() - before != cols {
            return Err(FieldParseError::Syntax {
                line,
                reason: format!("expected {cols} values, found {}", angles.len() - before),
            });
        }
    }
    if found != rows {
        return Err(FieldParseError::RowCount {
            expected: rows,
            found,
        });
    }
    Ok(OrientationField::new(rows, cols, angles, valid).expect("shape checked while parsing"))
}
