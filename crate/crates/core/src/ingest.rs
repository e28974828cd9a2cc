//! Record-at-a-time reading of comma-delimited tables with a header row.

use std::io::Read;

use crate::error::{Error, Result};
use crate::family::ResponseFamily;

/// One observation: response and predictor values in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamRecord {
    pub y: f64,
    pub x: Vec<f64>,
    /// 1-based line number in the source.
    pub line: usize,
}

/// Column mapping for a table source.
#[derive(Clone, Debug)]
pub struct Schema {
    pub family: ResponseFamily,
    pub response: String,
    pub predictors: Vec<String>,
}

/// Iterator over records; stops at the first error.
pub struct RecordReader<R: Read> {
    reader: csv::Reader<R>,
    schema: Schema,
    y_col: usize,
    x_cols: Vec<usize>,
    record: csv::StringRecord,
    failed: bool,
}

fn ingest_err(line: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        line,
        message: message.into(),
    }
}

impl<R: Read> RecordReader<R> {
    /// Reads the header. An empty source yields no records.
    pub fn new(source: R, schema: Schema) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader
            .headers()
            .map_err(|e| ingest_err(1, e.to_string()))?
            .clone();
        let empty = header.is_empty() || (header.len() == 1 && header[0].is_empty());
        let find = |name: &str| -> Result<usize> {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| ingest_err(1, format!("missing column `{name}`")))
        };
        let (y_col, x_cols) = if empty {
            (0, Vec::new())
        } else {
            let y = find(&schema.response)?;
            let x = schema.predictors.iter().map(|p| find(p)).collect::<Result<_>>()?;
            (y, x)
        };
        Ok(RecordReader {
            reader,
            schema,
            y_col,
            x_cols,
            record: csv::StringRecord::new(),
            failed: empty,
        })
    }

    fn parse(&self, line: usize) -> Result<StreamRecord> {
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = self
                .record
                .get(col)
                .ok_or_else(|| ingest_err(line, format!("missing value for `{name}`")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| ingest_err(line, format!("malformed number `{raw}` in `{name}`")))?;
            if !v.is_finite() {
                return Err(ingest_err(line, format!("non-finite value in `{name}`")));
            }
            Ok(v)
        };
        let y = field(self.y_col, &self.schema.response)?;
        self.schema
            .family
            .check_support(y)
            .map_err(|e| ingest_err(line, e.to_string()))?;
        let x = self
            .x_cols
            .iter()
            .zip(&self.schema.predictors)
            .map(|(&c, n)| field(c, n))
            .collect::<Result<_>>()?;
        Ok(StreamRecord { y, x, line })
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<StreamRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let mut rec = std::mem::take(&mut self.record);
        let out = match self.reader.read_record(&mut rec) {
            Ok(false) => None,
            Ok(true) => {
                let line = rec.position().map_or(0, |p| p.line() as usize);
                self.record = rec;
                Some(self.parse(line))
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Some(Err(ingest_err(line, e.to_string())))
            }
        };
        if matches!(out, Some(Err(_))) {
            self.failed = true;
        }
        out
    }
}

/// Reads a whole source into memory.
pub fn read_all<R: Read>(source: R, schema: Schema) -> Result<Vec<StreamRecord>> {
    RecordReader::new(source, schema)?.collect()
}
