//! CSV corpus ingestion.
//!
//! Parses an RFC-4180 CSV file (UTF-8, header row mandatory) into
//! [`Record`]s and composes each record's searchable document text from
//! the schema's text columns. Parsing is strict: no dialect sniffing,
//! fixed `"` quoting, uniform row lengths. Cell whitespace is preserved
//! verbatim; normalization belongs to the embedder.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

/// One corpus row: a stable id, the row's columns in CSV order, and the
/// composed document text that gets embedded and shown to the reranker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    /// `(column_name, value)` pairs in CSV column order.
    pub fields: Vec<(String, String)>,
    /// Cached output of [`compose_document`] over the schema's text columns.
    pub document: String,
}

/// Which columns feed the document text, and where ids come from.
///
/// When `id_column` is `None`, ids are row ordinals `r0001`, `r0002`, ...
#[derive(Debug, Clone, Default)]
pub struct CorpusSchema {
    pub id_column: Option<String>,
    pub text_columns: Vec<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema names column {column:?} which is not in the CSV header")]
    MissingColumn { column: String },
    #[error("duplicate record id {id:?} (rows {first_row} and {second_row})")]
    DuplicateId {
        id: String,
        first_row: usize,
        second_row: usize,
    },
    #[error("empty id in row {row}")]
    EmptyId { row: usize },
    #[error("CSV has a header but no data rows")]
    EmptyCorpus,
    #[error("schema must name at least one text column")]
    EmptySchema,
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("io error reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// Parse a CSV corpus into records, one per data row, in file order.
pub fn load_csv(path: impl AsRef<Path>, schema: &CorpusSchema) -> Result<Vec<Record>, IngestError> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_reader(file, schema)
}

/// Same as [`load_csv`] but over any reader. Used directly by tests.
pub fn load_csv_reader(reader: impl Read, schema: &CorpusSchema) -> Result<Vec<Record>, IngestError> {
    if schema.text_columns.is_empty() {
        return Err(IngestError::EmptySchema);
    }

    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers: Vec<String> = csv_reader
        .headers()
        .map_err(csv_to_ingest_error)?
        .iter()
        .map(str::to_owned)
        .collect();

    for column in &schema.text_columns {
        if !headers.iter().any(|h| h == column) {
            return Err(IngestError::MissingColumn {
                column: column.clone(),
            });
        }
    }
    let id_index = match &schema.id_column {
        Some(column) => Some(
            headers
                .iter()
                .position(|h| h == column)
                .ok_or_else(|| IngestError::MissingColumn {
                    column: column.clone(),
                })?,
        ),
        None => None,
    };

    let mut records = Vec::new();
    let mut seen_ids: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (row_index, row) in csv_reader.records().enumerate() {
        let row = row.map_err(csv_to_ingest_error)?;
        let row_number = row_index + 1;

        let fields: Vec<(String, String)> = headers
            .iter()
            .cloned()
            .zip(row.iter().map(str::to_owned))
            .collect();

        let id = match id_index {
            Some(index) => row[index].to_owned(),
            None => format!("r{row_number:04}"),
        };
        if id.is_empty() {
            return Err(IngestError::EmptyId { row: row_number });
        }
        if let Some(&first_row) = seen_ids.get(&id) {
            return Err(IngestError::DuplicateId {
                id,
                first_row,
                second_row: row_number,
            });
        }
        seen_ids.insert(id.clone(), row_number);

        let document = compose_document(&fields, &schema.text_columns);
        records.push(Record {
            id,
            fields,
            document,
        });
    }

    if records.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    Ok(records)
}

/// Render the included fields as `"name: value"` joined by `", "`,
/// in field order. Empty values are kept.
pub fn compose_document(fields: &[(String, String)], included: &[String]) -> String {
    fields
        .iter()
        .filter(|(name, _)| included.iter().any(|c| c == name))
        .map(|(name, value)| format!("{name}: {value}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn csv_to_ingest_error(err: csv::Error) -> IngestError {
    match err.kind() {
        csv::ErrorKind::Io(_) => IngestError::MalformedCsv(err.to_string()),
        _ => IngestError::MalformedCsv(err.to_string()),
    }
}
