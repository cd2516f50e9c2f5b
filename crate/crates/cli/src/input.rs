//! Reading and writing response matrices.
//!
//! CSV: header `question_id[,dataset],<model ids...>`, one question per row,
//! values decimal in `[0, 1]`. JSONL: one `{question_id, dataset?,
//! responses: {model_id: value}}` object per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use clap::ValueEnum;
use diffrank::ResponseMatrix;
use serde::Deserialize;

use crate::error::{CliError, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    /// `.jsonl` and `.ndjson` files are JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        }
    }
}

pub fn read_matrix(path: &Path, format: Option<InputFormat>) -> Result<ResponseMatrix, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let source = path.display().to_string();
    match format.unwrap_or_else(|| InputFormat::from_path(path)) {
        InputFormat::Csv => parse_csv(file, &source),
        InputFormat::Jsonl => parse_jsonl(BufReader::new(file), &source),
    }
}

fn parse_value(text: &str) -> Result<f64, String> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a decimal number"))?;
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("value {text} lies outside [0, 1]"))
    }
}

struct Columns {
    question_ids: Vec<String>,
    tags: Vec<Option<String>>,
    values: Vec<f64>,
}

pub fn parse_csv<R: Read>(reader: R, source: &str) -> Result<ResponseMatrix, CliError> {
    let err = |line: u64, column: usize, message: String| ParseError {
        source: source.to_string(),
        line,
        column,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(source, e))?,
        None => return Err(err(1, 1, "empty file".into()).into()),
    };
    if header.get(0) != Some("question_id") {
        return Err(err(1, 1, "first header field must be `question_id`".into()).into());
    }
    let has_dataset = header.get(1) == Some("dataset");
    let first_model = if has_dataset { 2 } else { 1 };
    let model_ids: Vec<String> = header.iter().skip(first_model).map(str::to_string).collect();
    if model_ids.is_empty() {
        return Err(err(1, header.len() + 1, "header names no model columns".into()).into());
    }
    let mut seen = HashMap::new();
    for (i, id) in model_ids.iter().enumerate() {
        let column = first_model + i + 1;
        if id.is_empty() {
            return Err(err(1, column, "empty model id".into()).into());
        }
        if let Some(prev) = seen.insert(id.as_str(), column) {
            return Err(err(1, column, format!("model `{id}` repeats column {prev}")).into());
        }
    }

    let width = header.len();
    let mut cols = Columns {
        question_ids: Vec::new(),
        tags: Vec::new(),
        values: Vec::new(),
    };
    for record in records {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            return Err(err(
                line,
                record.len().min(width) + 1,
                format!("expected {width} fields, found {}", record.len()),
            )
            .into());
        }
        let qid = &record[0];
        if qid.is_empty() {
            return Err(err(line, 1, "empty question id".into()).into());
        }
        cols.question_ids.push(qid.to_string());
        cols.tags.push(if has_dataset && !record[1].is_empty() {
            Some(record[1].to_string())
        } else {
            None
        });
        for (i, field) in record.iter().enumerate().skip(first_model) {
            cols.values
                .push(parse_value(field).map_err(|msg| err(line, i + 1, msg))?);
        }
    }
    if cols.question_ids.is_empty() {
        return Err(err(2, 1, "no question rows".into()).into());
    }
    Ok(ResponseMatrix::new(cols.question_ids, model_ids, cols.tags, cols.values)?)
}

fn csv_error(source: &str, e: csv::Error) -> ParseError {
    let (line, column) = match e.kind() {
        csv::ErrorKind::Utf8 { pos, err } => (pos.as_ref().map_or(0, |p| p.line()), err.field() + 1),
        _ => (e.position().map_or(0, |p| p.line()), 1),
    };
    ParseError {
        source: source.to_string(),
        line,
        column,
        message: e.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    question_id: String,
    #[serde(default)]
    dataset: Option<String>,
    responses: serde_json::Map<String, serde_json::Value>,
}

/// Column of `"key"` in `line`, 1-based, or 1 when it cannot be found.
fn key_column(line: &str, key: &str) -> usize {
    let quoted = serde_json::to_string(key).unwrap_or_default();
    line.find(&quoted).map_or(1, |i| line[..i].chars().count() + 1)
}

pub fn parse_jsonl<R: BufRead>(reader: R, source: &str) -> Result<ResponseMatrix, CliError> {
    let err = |line: u64, column: usize, message: String| ParseError {
        source: source.to_string(),
        line,
        column,
        message,
    };
    let mut model_ids: Vec<String> = Vec::new();
    let mut model_pos: HashMap<String, usize> = HashMap::new();
    let mut seen_questions: HashMap<String, u64> = HashMap::new();
    let mut cols = Columns {
        question_ids: Vec::new(),
        tags: Vec::new(),
        values: Vec::new(),
    };
    for (i, text) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let text = text.map_err(|e| err(line_no, 1, e.to_string()))?;
        let text = text.strip_suffix('\r').unwrap_or(&text);
        if text.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(text)
            .map_err(|e| err(line_no, e.column().max(1), e.to_string()))?;
        if let Some(prev) = seen_questions.insert(rec.question_id.clone(), line_no) {
            return Err(err(
                line_no,
                key_column(text, "question_id"),
                format!("question `{}` already appeared on line {prev}", rec.question_id),
            )
            .into());
        }
        if model_ids.is_empty() {
            for id in rec.responses.keys() {
                model_pos.insert(id.clone(), model_ids.len());
                model_ids.push(id.clone());
            }
            if model_ids.is_empty() {
                return Err(err(line_no, key_column(text, "responses"), "no responses".into()).into());
            }
        }
        let mut row = vec![f64::NAN; model_ids.len()];
        for (model, value) in &rec.responses {
            let column = key_column(text, model);
            let j = *model_pos
                .get(model)
                .ok_or_else(|| err(line_no, column, format!("unknown model `{model}`")))?;
            let v = match value {
                serde_json::Value::Number(n) => n.as_f64().map(|v| v.to_string()),
                serde_json::Value::String(s) => Some(s.clone()),
                _ => None,
            }
            .ok_or_else(|| err(line_no, column, format!("`{value}` is not a number")))?;
            row[j] = parse_value(&v).map_err(|msg| err(line_no, column, msg))?;
        }
        if let Some(j) = row.iter().position(|v| v.is_nan()) {
            return Err(err(
                line_no,
                key_column(text, "responses"),
                format!("missing response for model `{}`", model_ids[j]),
            )
            .into());
        }
        cols.question_ids.push(rec.question_id);
        cols.tags.push(rec.dataset);
        cols.values.extend(row);
    }
    if cols.question_ids.is_empty() {
        return Err(err(1, 1, "no records".into()).into());
    }
    Ok(ResponseMatrix::new(cols.question_ids, model_ids, cols.tags, cols.values)?)
}

/// Writes the canonical CSV form: dataset column only when some question is
/// tagged, LF line endings, and values in shortest round-trip notation.
pub fn write_csv<W: Write>(m: &ResponseMatrix, out: W) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let has_dataset = m.dataset_tags().iter().any(Option::is_some);
    let mut header = vec!["question_id"];
    if has_dataset {
        header.push("dataset");
    }
    header.extend(m.model_ids().iter().map(String::as_str));
    w.write_record(&header).map_err(csv_write_error)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for q in 0..m.n_questions() {
        row.clear();
        row.push(m.question_ids()[q].clone());
        if has_dataset {
            row.push(m.dataset_tags()[q].clone().unwrap_or_default());
        }
        row.extend((0..m.n_models()).map(|j| m.value(q, j).to_string()));
        w.write_record(&row).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_write_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Output(io),
        other => CliError::Usage(format!("csv: {other:?}")),
    }
}
