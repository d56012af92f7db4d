use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub group: String,
    pub y_true: bool,
    pub y_pred: bool,
    pub score: Option<f64>,
    pub condition: Option<String>,
}

/// Ingested outcome data: at least one row, binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    rows: Vec<PredictionRow>,
}

impl PredictionTable {
    pub fn new(rows: Vec<PredictionRow>) -> Result<Self, TableError> {
        if rows.is_empty() {
            return Err(TableError::Empty);
        }
        Ok(PredictionTable { rows })
    }

    pub fn rows(&self) -> &[PredictionRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("missing required column {0:?}")]
    Schema(String),
    /// `row` is the 1-based data row (the header is not counted).
    #[error("row {row}: invalid {column} value {value:?}")]
    Value { row: usize, column: String, value: String },
    #[error("table has no data rows")]
    Empty,
    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl TableError {
    /// Stable error code used in API responses.
    pub fn code(&self) -> &'static str {
        match self {
            TableError::Schema(_) => "SchemaError",
            TableError::Value { .. } => "ValueError",
            TableError::Empty => "EmptyError",
            TableError::Csv(_) => "CsvError",
        }
    }
}

/// Which header names carry the group and (optionally) condition labels.
/// `y_true`, `y_pred` and `score` are fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Columns {
    pub group: String,
    pub condition: Option<String>,
}

impl Default for Columns {
    fn default() -> Self {
        Columns {
            group: "group".into(),
            condition: None,
        }
    }
}

/// Reads a table with the default column names; a `condition` column is
/// picked up when present.
pub fn ingest_table(csv_bytes: &[u8]) -> Result<PredictionTable, TableError> {
    ingest_table_with(csv_bytes, &Columns::default())
}

pub fn ingest_table_with(csv_bytes: &[u8], columns: &Columns) -> Result<PredictionTable, TableError> {
    let bytes = csv_bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(csv_bytes);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader.headers().map_err(|e| TableError::Csv(e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| find(name).ok_or_else(|| TableError::Schema(name.to_owned()));

    let group_ix = require(&columns.group)?;
    let true_ix = require("y_true")?;
    let pred_ix = require("y_pred")?;
    let score_ix = find("score");
    let condition_ix = match &columns.condition {
        Some(name) => Some(require(name)?),
        None => find("condition"),
    };
    let condition_name = columns.condition.as_deref().unwrap_or("condition");

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| TableError::Csv(format!("row {row}: {e}")))?;
        let field = |ix: usize| record.get(ix).unwrap_or("");
        let value_err = |column: &str, value: &str| TableError::Value {
            row,
            column: column.to_owned(),
            value: value.to_owned(),
        };
        let label = |column: &str, ix: usize| match field(ix) {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(value_err(column, other)),
        };

        let group = field(group_ix);
        if group.is_empty() {
            return Err(value_err(&columns.group, group));
        }
        let y_true = label("y_true", true_ix)?;
        let y_pred = label("y_pred", pred_ix)?;
        let score = match score_ix.map(field) {
            None | Some("") => None,
            Some(raw) => match raw.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Some(v),
                _ => return Err(value_err("score", raw)),
            },
        };
        let condition = condition_ix.map(field).filter(|c| !c.is_empty()).map(str::to_owned);
        if columns.condition.is_some() && condition.is_none() {
            return Err(value_err(condition_name, ""));
        }
        rows.push(PredictionRow {
            group: group.to_owned(),
            y_true,
            y_pred,
            score,
            condition,
        });
    }
    PredictionTable::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_valid_rows() {
        let t = ingest_table(b"group,y_true,y_pred\nA,1,0\nB,0,0\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows()[0].group, "A");
        assert!(t.rows()[0].y_true && !t.rows()[0].y_pred);
    }

    #[test]
    fn non_binary_label_reports_row() {
        let err = ingest_table(b"group,y_true,y_pred\nA,1,0\nA,0,1\nB,1,2\n").unwrap_err();
        assert_eq!(
            err,
            TableError::Value {
                row: 3,
                column: "y_pred".into(),
                value: "2".into()
            }
        );
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(ingest_table(b"group,y_true,y_pred\n").unwrap_err(), TableError::Empty);
    }

    #[test]
    fn missing_column_is_schema_error() {
        assert_eq!(
            ingest_table(b"group,y_true\nA,1\n").unwrap_err(),
            TableError::Schema("y_pred".into())
        );
    }

    #[test]
    fn remapped_group_and_condition() {
        let cols = Columns {
            group: "sex".into(),
            condition: Some("age_band".into()),
        };
        let t = ingest_table_with(b"\xEF\xBB\xBFsex,age_band,y_true,y_pred,score\nF,old,1,1,0.9\nM,young,0,1,\n", &cols)
            .unwrap();
        assert_eq!(t.rows()[1].group, "M");
        assert_eq!(t.rows()[1].condition.as_deref(), Some("young"));
        assert_eq!(t.rows()[0].score, Some(0.9));
        assert_eq!(t.rows()[1].score, None);

        let err = ingest_table_with(b"sex,age_band,y_true,y_pred\nF,,1,1\n", &cols).unwrap_err();
        assert!(matches!(err, TableError::Value { row: 1, .. }));
    }

    #[test]
    fn score_out_of_range_rejected() {
        assert!(matches!(
            ingest_table(b"group,y_true,y_pred,score\nA,1,1,1.5\n"),
            Err(TableError::Value { .. })
        ));
    }
}
