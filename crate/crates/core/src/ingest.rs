//! Reading and writing the CSV / JSONL file schemas.
//!
//! Every schema is a flat list of named columns. CSV files must start with
//! the exact header row; JSONL files carry one object per line with the same
//! field names. Lines starting with `#` are comments in both formats.
//!
//! Row-level problems are collected as [`RowError`]s and ingestion carries
//! on; with `strict` the first one aborts.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use crate::decimal::Dec;
use crate::model::{
    Direction, GasTerms, Interface, Pool, Quote, SettlementPath, TokenAmount, TradeRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl` / `.json` select JSONL, everything else CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowErrorKind {
    Malformed(String),
    DuplicateQuote {
        trade_id: String,
        offset: i64,
        provider_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {}", match kind {
    RowErrorKind::Malformed(reason) => format!("malformed row: {reason}"),
    RowErrorKind::DuplicateQuote { trade_id, offset, provider_id } =>
        format!("duplicate quote ({trade_id}, {offset}, {provider_id})"),
})]
pub struct RowError {
    pub line: u64,
    pub kind: RowErrorKind,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("strict mode: {0}")]
    Strict(RowError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Accepted records in input order, plus the rejected rows.
#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    /// Source line of each accepted record.
    pub lines: Vec<u64>,
    pub rejects: Vec<RowError>,
}

/// One decoded row, field name to textual value.
pub struct Row {
    line: u64,
    values: BTreeMap<String, String>,
}

impl Row {
    pub fn line(&self) -> u64 {
        self.line
    }

    fn get(&self, name: &str) -> Result<&str, String> {
        self.values
            .get(name)
            .map(|s| s.as_str())
            .ok_or_else(|| format!("missing field `{name}`"))
    }

    fn uint<T: std::str::FromStr>(&self, name: &str) -> Result<T, String> {
        let s = self.get(name)?.trim();
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("`{name}` is not a base-10 unsigned integer: {s:?}"));
        }
        s.parse()
            .map_err(|_| format!("`{name}` out of range: {s:?}"))
    }

    fn int(&self, name: &str) -> Result<i64, String> {
        let s = self.get(name)?.trim();
        s.parse()
            .map_err(|_| format!("`{name}` is not an integer: {s:?}"))
    }

    fn dec(&self, name: &str) -> Result<Dec, String> {
        let s = self.get(name)?;
        s.parse().map_err(|_| format!("`{name}` is not a decimal: {s:?}"))
    }

    fn opt_dec(&self, name: &str) -> Result<Option<Dec>, String> {
        match self.get(name)?.trim() {
            "" => Ok(None),
            _ => self.dec(name).map(Some),
        }
    }

    fn nonempty(&self, name: &str) -> Result<String, String> {
        let s = self.get(name)?;
        if s.is_empty() {
            Err(format!("`{name}` is empty"))
        } else {
            Ok(s.to_string())
        }
    }
}

/// A flat file schema.
pub trait Record: Sized {
    const COLUMNS: &'static [&'static str];

    fn from_row(row: &Row) -> Result<Self, String>;

    /// Canonical textual values in column order.
    fn to_fields(&self) -> Vec<String>;
}

impl Record for TradeRecord {
    const COLUMNS: &'static [&'static str] = &[
        "trade_id",
        "interface",
        "path",
        "block_number",
        "direction",
        "gas_internalized",
        "amount_in_raw",
        "amount_in_decimals",
        "amount_out_raw",
        "amount_out_decimals",
        "gas_used",
        "base_fee_wei",
        "priority_fee_wei",
        "usd_value",
        "timestamp",
    ];

    fn from_row(row: &Row) -> Result<Self, String> {
        let direction = row.get("direction")?;
        let direction = Direction::parse(direction)
            .ok_or_else(|| format!("`direction` must be WETH_IN or WETH_OUT: {direction:?}"))?;
        let gas_internalized = match row.get("gas_internalized")? {
            "true" => true,
            "false" => false,
            other => return Err(format!("`gas_internalized` must be true or false: {other:?}")),
        };
        let amount_in = TokenAmount::new(row.uint("amount_in_raw")?, row.uint("amount_in_decimals")?)
            .map_err(|e| e.to_string())?;
        let amount_out =
            TokenAmount::new(row.uint("amount_out_raw")?, row.uint("amount_out_decimals")?)
                .map_err(|e| e.to_string())?;
        let gas = GasTerms::new(
            row.uint("gas_used")?,
            row.uint("base_fee_wei")?,
            row.uint("priority_fee_wei")?,
        )
        .map_err(|e| e.to_string())?;
        let trade = TradeRecord {
            trade_id: row.nonempty("trade_id")?,
            interface: Interface::parse(row.get("interface")?),
            path: SettlementPath::parse(row.get("path")?),
            block_number: row.uint("block_number")?,
            direction,
            gas_internalized,
            amount_in,
            amount_out,
            gas,
            usd_value: row.opt_dec("usd_value")?,
            timestamp: row.uint("timestamp")?,
        };
        trade.validate().map_err(|e| e.to_string())?;
        Ok(trade)
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.trade_id.clone(),
            self.interface.to_string(),
            self.path.to_string(),
            self.block_number.to_string(),
            self.direction.to_string(),
            self.gas_internalized.to_string(),
            self.amount_in.raw.to_string(),
            self.amount_in.decimals.to_string(),
            self.amount_out.raw.to_string(),
            self.amount_out.decimals.to_string(),
            self.gas.gas_used.to_string(),
            self.gas.base_fee.to_string(),
            self.gas.priority_fee.to_string(),
            self.usd_value.as_ref().map(|d| d.to_string()).unwrap_or_default(),
            self.timestamp.to_string(),
        ]
    }
}

impl Record for Quote {
    const COLUMNS: &'static [&'static str] = &[
        "trade_id",
        "offset",
        "out_estimate_raw",
        "out_estimate_decimals",
        "gas_estimate",
        "provider_id",
    ];

    fn from_row(row: &Row) -> Result<Self, String> {
        let quote = Quote {
            trade_id: row.nonempty("trade_id")?,
            offset: row.int("offset")?,
            out_estimate: TokenAmount::new(
                row.uint("out_estimate_raw")?,
                row.uint("out_estimate_decimals")?,
            )
            .map_err(|e| e.to_string())?,
            gas_estimate: row.dec("gas_estimate")?,
            provider_id: row.nonempty("provider_id")?,
            corrected: false,
        };
        quote.validate().map_err(|e| e.to_string())?;
        Ok(quote)
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.trade_id.clone(),
            self.offset.to_string(),
            self.out_estimate.raw.to_string(),
            self.out_estimate.decimals.to_string(),
            self.gas_estimate.to_string(),
            self.provider_id.clone(),
        ]
    }
}

impl Record for Pool {
    const COLUMNS: &'static [&'static str] = &[
        "pool_id",
        "reserve_weth_raw",
        "reserve_token_raw",
        "token_decimals",
        "fee_bps",
        "gas_per_hop",
    ];

    fn from_row(row: &Row) -> Result<Self, String> {
        let pool = Pool {
            pool_id: row.nonempty("pool_id")?,
            reserve_weth: TokenAmount::wei(row.uint("reserve_weth_raw")?),
            reserve_token: TokenAmount::new(row.uint("reserve_token_raw")?, row.uint("token_decimals")?)
                .map_err(|e| e.to_string())?,
            fee_bps: row.uint("fee_bps")?,
            gas_per_hop: row.uint("gas_per_hop")?,
        };
        pool.validate().map_err(|e| e.to_string())?;
        Ok(pool)
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.pool_id.clone(),
            self.reserve_weth.raw.to_string(),
            self.reserve_token.raw.to_string(),
            self.reserve_token.decimals.to_string(),
            self.fee_bps.to_string(),
            self.gas_per_hop.to_string(),
        ]
    }
}

/// A pool as of one block offset; the snapshot file schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotPool {
    pub offset: i64,
    pub pool: Pool,
}

impl Record for SnapshotPool {
    const COLUMNS: &'static [&'static str] = &[
        "offset",
        "pool_id",
        "reserve_weth_raw",
        "reserve_token_raw",
        "token_decimals",
        "fee_bps",
        "gas_per_hop",
    ];

    fn from_row(row: &Row) -> Result<Self, String> {
        Ok(SnapshotPool {
            offset: row.int("offset")?,
            pool: Pool::from_row(row)?,
        })
    }

    fn to_fields(&self) -> Vec<String> {
        let mut fields = vec![self.offset.to_string()];
        fields.extend(self.pool.to_fields());
        fields
    }
}

fn check_strict(strict: bool, rejects: &[RowError]) -> Result<(), IngestError> {
    match (strict, rejects.first()) {
        (true, Some(err)) => Err(IngestError::Strict(err.clone())),
        _ => Ok(()),
    }
}

fn decode_csv<R: Read>(source: R) -> Result<Vec<Result<Row, RowError>>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match &header {
            None => header = Some(record.iter().map(|s| s.trim().to_string()).collect()),
            Some(names) => {
                if record.len() != names.len() {
                    rows.push(Err(RowError {
                        line,
                        kind: RowErrorKind::Malformed(format!(
                            "expected {} fields, found {}",
                            names.len(),
                            record.len()
                        )),
                    }));
                    continue;
                }
                let values = names
                    .iter()
                    .cloned()
                    .zip(record.iter().map(|s| s.to_string()))
                    .collect();
                rows.push(Ok(Row { line, values }));
            }
        }
    }
    match header {
        None => Err(IngestError::EmptyInput),
        Some(names) => {
            rows.insert(0, Ok(Row { line: 0, values: header_marker(names) }));
            Ok(rows)
        }
    }
}

// The header travels as a pseudo-row so `read_records` can validate it.
fn header_marker(names: Vec<String>) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("\0header".to_string(), names.join(","));
    m
}

fn decode_jsonl<R: Read>(source: R) -> Result<Vec<Result<Row, RowError>>, IngestError> {
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let lineno = idx as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed: Result<serde_json::Map<String, serde_json::Value>, _> =
            serde_json::from_str(trimmed);
        match parsed {
            Ok(obj) => {
                let values = obj
                    .into_iter()
                    .map(|(k, v)| {
                        let text = match v {
                            serde_json::Value::String(s) => s,
                            serde_json::Value::Null => String::new(),
                            other => other.to_string(),
                        };
                        (k, text)
                    })
                    .collect();
                rows.push(Ok(Row {
                    line: lineno,
                    values,
                }));
            }
            Err(e) => rows.push(Err(RowError {
                line: lineno,
                kind: RowErrorKind::Malformed(format!("invalid JSON object: {e}")),
            })),
        }
    }
    Ok(rows)
}

/// Decodes `source` as schema `T`.
pub fn read_records<T: Record, R: Read>(
    source: R,
    format: Format,
    strict: bool,
) -> Result<Ingested<T>, IngestError> {
    let mut rows = match format {
        Format::Csv => decode_csv(source)?,
        Format::Jsonl => decode_jsonl(source)?,
    };
    if format == Format::Csv {
        let header = rows.remove(0).expect("header pseudo-row");
        let found = header.values.values().next().cloned().unwrap_or_default();
        let expected = T::COLUMNS.join(",");
        if found != expected {
            return Err(IngestError::Header { expected, found });
        }
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut records = Vec::with_capacity(rows.len());
    let mut lines = Vec::with_capacity(rows.len());
    let mut rejects = Vec::new();
    for row in rows {
        match row.and_then(|row| {
            T::from_row(&row)
                .map(|rec| (row.line, rec))
                .map_err(|reason| RowError {
                    line: row.line,
                    kind: RowErrorKind::Malformed(reason),
                })
        }) {
            Ok((line, rec)) => {
                lines.push(line);
                records.push(rec);
            }
            Err(err) => rejects.push(err),
        }
    }
    check_strict(strict, &rejects)?;
    Ok(Ingested {
        records,
        lines,
        rejects,
    })
}

pub fn write_csv<T: Record, W: Write>(records: &[T], sink: W) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new().from_writer(sink);
    writer.write_record(T::COLUMNS)?;
    for rec in records {
        writer.write_record(rec.to_fields())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Record, W: Write>(records: &[T], mut sink: W) -> Result<(), IngestError> {
    for rec in records {
        let obj: serde_json::Map<String, serde_json::Value> = T::COLUMNS
            .iter()
            .zip(rec.to_fields())
            .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
            .collect();
        serde_json::to_writer(&mut sink, &obj).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads trades; duplicate `trade_id`s are rejected like malformed rows.
pub fn ingest_trades<R: Read>(
    source: R,
    format: Format,
    strict: bool,
) -> Result<Ingested<TradeRecord>, IngestError> {
    let Ingested {
        records,
        lines,
        mut rejects,
    } = read_records::<TradeRecord, _>(source, format, false)?;
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(records.len());
    let mut kept_lines = Vec::with_capacity(records.len());
    for (rec, line) in records.into_iter().zip(lines) {
        if seen.insert(rec.trade_id.clone()) {
            kept.push(rec);
            kept_lines.push(line);
        } else {
            rejects.push(RowError {
                line,
                kind: RowErrorKind::Malformed(format!("duplicate trade_id {}", rec.trade_id)),
            });
        }
    }
    rejects.sort_by_key(|r| r.line);
    check_strict(strict, &rejects)?;
    Ok(Ingested {
        records: kept,
        lines: kept_lines,
        rejects,
    })
}

/// Key of a quote within a [`QuoteSet`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuoteKey {
    pub trade_id: String,
    pub offset: i64,
    pub provider_id: String,
}

/// Quotes keyed by `(trade_id, offset, provider_id)`.
#[derive(Debug, Clone, Default)]
pub struct QuoteSet {
    quotes: BTreeMap<QuoteKey, Quote>,
    corrected: bool,
}

impl QuoteSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts, refusing duplicates.
    pub fn insert(&mut self, quote: Quote) -> Result<(), Quote> {
        let key = QuoteKey {
            trade_id: quote.trade_id.clone(),
            offset: quote.offset,
            provider_id: quote.provider_id.clone(),
        };
        if self.quotes.contains_key(&key) {
            return Err(quote);
        }
        self.quotes.insert(key, quote);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn get(&self, trade_id: &str, offset: i64, provider_id: &str) -> Option<&Quote> {
        self.quotes.get(&QuoteKey {
            trade_id: trade_id.to_string(),
            offset,
            provider_id: provider_id.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Quote> {
        self.quotes.values()
    }

    pub fn providers(&self) -> BTreeSet<&str> {
        self.quotes.keys().map(|k| k.provider_id.as_str()).collect()
    }

    pub fn offsets(&self) -> BTreeSet<i64> {
        self.quotes.keys().map(|k| k.offset).collect()
    }

    /// Quotes whose trade id is absent from `trades`.
    pub fn orphans(&self, trades: &[TradeRecord]) -> Vec<&QuoteKey> {
        let ids: HashSet<&str> = trades.iter().map(|t| t.trade_id.as_str()).collect();
        self.quotes
            .keys()
            .filter(|k| !ids.contains(k.trade_id.as_str()))
            .collect()
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    /// Replaces every quote through `f`, marking the set as corrected.
    pub fn map_corrected<E>(
        &self,
        mut f: impl FnMut(&Quote) -> Result<Quote, E>,
    ) -> Result<QuoteSet, E> {
        let mut out = BTreeMap::new();
        for (k, q) in &self.quotes {
            out.insert(k.clone(), f(q)?);
        }
        Ok(QuoteSet {
            quotes: out,
            corrected: true,
        })
    }

    pub fn to_vec(&self) -> Vec<Quote> {
        self.quotes.values().cloned().collect()
    }
}

/// Reads a quote file into a [`QuoteSet`], plus the rejected rows.
pub fn ingest_quotes<R: Read>(
    source: R,
    format: Format,
    strict: bool,
) -> Result<(QuoteSet, Vec<RowError>), IngestError> {
    let Ingested {
        records,
        lines,
        mut rejects,
    } = read_records::<Quote, _>(source, format, false)?;
    let mut set = QuoteSet::new();
    for (quote, line) in records.into_iter().zip(lines) {
        if let Err(dup) = set.insert(quote) {
            rejects.push(RowError {
                line,
                kind: RowErrorKind::DuplicateQuote {
                    trade_id: dup.trade_id,
                    offset: dup.offset,
                    provider_id: dup.provider_id,
                },
            });
        }
    }
    rejects.sort_by_key(|r| r.line);
    check_strict(strict, &rejects)?;
    Ok((set, rejects))
}

pub fn ingest_pools<R: Read>(
    source: R,
    format: Format,
    strict: bool,
) -> Result<Ingested<Pool>, IngestError> {
    read_records(source, format, strict)
}

/// Reads a snapshot file into `offset -> pools` (pools in file order).
pub fn ingest_pool_snapshots<R: Read>(
    source: R,
    format: Format,
    strict: bool,
) -> Result<(BTreeMap<i64, Vec<Pool>>, Vec<RowError>), IngestError> {
    let Ingested {
        records, rejects, ..
    } = read_records::<SnapshotPool, _>(source, format, strict)?;
    let mut map: BTreeMap<i64, Vec<Pool>> = BTreeMap::new();
    for snap in records {
        map.entry(snap.offset).or_default().push(snap.pool);
    }
    Ok((map, rejects))
}
