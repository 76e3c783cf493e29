//! Column-oriented episode log with CSV and compact binary encodings.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! "SLOG" | version u32 | columns u32 | { name_len u32 | utf-8 name }* | rows u64 | f64 * rows * columns
//! ```

use std::io::Write;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SLOG";
const VERSION: u32 = 1;
const MAX_NAME_LEN: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SimLog {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension {
                what: "log row",
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Header line plus one line per row; floats use the shortest
    /// representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|v| format!("{v}")))?;
            }
            w.flush()?;
            Ok(())
        };
        write(&mut writer).expect("writing to memory cannot fail");
        let bytes = writer.into_inner().expect("flushed above");
        String::from_utf8(bytes).expect("fields are utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| Error::LogFormat(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if columns.is_empty() || columns.iter().any(String::is_empty) {
            return Err(Error::LogFormat("empty column name".into()));
        }
        let mut log = Self::new(columns);
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::LogFormat(e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::LogFormat(format!("not a number: {f:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            log.push(row).map_err(|e| Error::LogFormat(e.to_string()))?;
        }
        Ok(log)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.rows.len() * self.columns.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.columns.len() as u32).to_le_bytes());
        for c in &self.columns {
            out.extend_from_slice(&(c.len() as u32).to_le_bytes());
            out.extend_from_slice(c.as_bytes());
        }
        out.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for row in &self.rows {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::LogFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::LogFormat(format!("unsupported version {version}")));
        }
        let ncols = r.u32()? as usize;
        if ncols == 0 || ncols > r.remaining() / 4 {
            return Err(Error::LogFormat(format!("implausible column count {ncols}")));
        }
        let mut columns = Vec::with_capacity(ncols);
        for _ in 0..ncols {
            let len = r.u32()? as usize;
            if len == 0 || len > MAX_NAME_LEN {
                return Err(Error::LogFormat(format!("bad column name length {len}")));
            }
            let name =
                std::str::from_utf8(r.take(len)?).map_err(|_| Error::LogFormat("column name is not utf-8".into()))?;
            columns.push(name.to_owned());
        }
        let nrows = r.u64()?;
        let expected = (nrows as u128) * (ncols as u128) * 8;
        if expected != r.remaining() as u128 {
            return Err(Error::LogFormat(format!(
                "payload holds {} bytes, header promises {expected}",
                r.remaining()
            )));
        }
        let mut log = Self::new(columns);
        log.rows.reserve(nrows as usize);
        for _ in 0..nrows {
            let mut row = Vec::with_capacity(ncols);
            for _ in 0..ncols {
                row.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            log.rows.push(row);
        }
        Ok(log)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::LogFormat("truncated log".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
