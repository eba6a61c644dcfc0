//! Reading instance files. Every error names the file and, where the parser
//! reports one, the line and column.

use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::Complex;
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: malformed JSON at line {line}, column {column}: {message}")]
    Json {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: malformed CSV at {position}: {message}")]
    Csv {
        path: String,
        position: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

pub fn read_text(path: &Path) -> Result<String, InputError> {
    let shown = path.display().to_string();
    if shown == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| InputError::Read {
            path: shown,
            message: e.to_string(),
        })?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| InputError::Read {
        path: shown,
        message: e.to_string(),
    })
}

fn json_error(path: &Path, e: serde_json::Error) -> InputError {
    InputError::Json {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn invalid(path: &Path, message: impl std::fmt::Display) -> InputError {
    InputError::Invalid {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| json_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    parse_json(path, &read_text(path)?)
}

fn looks_like_json(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with(['[', '{'])
}

fn read_csv_rows(path: &Path, text: &str) -> Result<Vec<Vec<f64>>, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| InputError::Csv {
            path: path.display().to_string(),
            position: e
                .position()
                .map(|p| format!("line {}", p.line()))
                .unwrap_or_else(|| "unknown position".into()),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| InputError::Csv {
                    path: path.display().to_string(),
                    position: format!("line {line}, field {}", col + 1),
                    message: format!("'{field}' is not a number"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Rows(Vec<Vec<f64>>),
    Wrapped {
        matrix: Vec<Vec<f64>>,
    },
}

/// Matrix rows from CSV (one row per line) or JSON (an array of rows or
/// `{"matrix": rows}`).
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, InputError> {
    let text = read_text(path)?;
    let rows = if looks_like_json(path, &text) {
        match parse_json::<MatrixJson>(path, &text)? {
            MatrixJson::Rows(r) | MatrixJson::Wrapped { matrix: r } => r,
        }
    } else {
        read_csv_rows(path, &text)?
    };
    if let Some(bad) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return Err(invalid(
            path,
            format!("row {} has {} entries, row 1 has {}", bad + 1, rows[bad].len(), rows[0].len()),
        ));
    }
    Ok(rows)
}

/// Complex vector from CSV lines `re,im` or JSON `[[re, im], ...]`.
pub fn read_complex_vector(path: &Path) -> Result<Vec<Complex<f64>>, InputError> {
    let text = read_text(path)?;
    let rows: Vec<Vec<f64>> = if looks_like_json(path, &text) {
        parse_json(path, &text)?
    } else {
        read_csv_rows(path, &text)?
    };
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [re, im] => Ok(Complex::new(*re, *im)),
            [re] => Ok(Complex::new(*re, 0.0)),
            _ => Err(invalid(path, format!("entry {} must be a (re, im) pair", i + 1))),
        })
        .collect()
}
