//! Time-tag file formats.
//!
//! Binary (`.qtag`): a 16-byte header (`b"QTAG"`, little-endian `u16`
//! version, 10 reserved zero bytes) followed by 16-byte records: `u64`
//! little-endian timestamp in ps, one channel byte (0=H, 1=V, 2=D, 3=A) and
//! 7 zero pad bytes.
//!
//! CSV (`.csv`): header `timestamp_ps,channel`, one event per row, channel
//! as its numeric code (letters are accepted on input).
//!
//! Readers stream records and reject unknown channels, decreasing
//! timestamps and duplicate events.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use entlink_core::{Channel, DetectionEvent, Party, TimeTagStream};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"QTAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 16;
pub const CSV_HEADER: &str = "timestamp_ps,channel";

#[derive(Debug, Error)]
pub enum TagFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a time-tag file (bad magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported time-tag format version {0}")]
    UnsupportedVersion(u16),
    #[error("file truncated: {0}")]
    Truncated(String),
    #[error("record {index}: unknown channel {code}")]
    UnknownChannel { index: u64, code: String },
    #[error("record {index}: timestamp {timestamp} precedes previous {previous}")]
    NonMonotone {
        index: u64,
        timestamp: u64,
        previous: u64,
    },
    #[error("record {index}: duplicate event at {timestamp} ps")]
    Duplicate { index: u64, timestamp: u64 },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum TagFormat {
    Binary,
    Csv,
}

impl TagFormat {
    /// `.csv` files are CSV, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TagFormat::Csv,
            _ => TagFormat::Binary,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TagFormat::Binary => "qtag",
            TagFormat::Csv => "csv",
        }
    }
}

/// Checks ordering as events stream past.
#[derive(Debug, Default)]
struct OrderCheck {
    previous: Option<DetectionEvent>,
    index: u64,
}

impl OrderCheck {
    fn push(&mut self, e: DetectionEvent) -> Result<DetectionEvent, TagFileError> {
        let index = self.index;
        self.index += 1;
        if let Some(p) = self.previous {
            if e.timestamp < p.timestamp {
                return Err(TagFileError::NonMonotone {
                    index,
                    timestamp: e.timestamp,
                    previous: p.timestamp,
                });
            }
            if e.timestamp == p.timestamp && e.channel <= p.channel {
                return Err(TagFileError::Duplicate {
                    index,
                    timestamp: e.timestamp,
                });
            }
        }
        self.previous = Some(e);
        Ok(e)
    }
}

pub fn write_binary_header<W: Write>(w: &mut W) -> io::Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    w.write_all(&header)
}

pub fn encode_record(e: &DetectionEvent) -> [u8; RECORD_LEN] {
    let mut rec = [0u8; RECORD_LEN];
    rec[..8].copy_from_slice(&e.timestamp.to_le_bytes());
    rec[8] = e.channel.code();
    rec
}

pub fn write_binary<W: Write>(mut w: W, events: &[DetectionEvent]) -> io::Result<()> {
    write_binary_header(&mut w)?;
    for e in events {
        w.write_all(&encode_record(e))?;
    }
    w.flush()
}

/// Streaming reader for the binary format.
pub struct BinaryReader<R: Read> {
    inner: R,
    order: OrderCheck,
    done: bool,
}

impl<R: Read> BinaryReader<R> {
    pub fn new(mut inner: R) -> Result<Self, TagFileError> {
        let mut header = [0u8; HEADER_LEN];
        let got = read_full(&mut inner, &mut header)?;
        if got < HEADER_LEN {
            return Err(TagFileError::Truncated(format!(
                "header has {got} of {HEADER_LEN} bytes"
            )));
        }
        let magic = [header[0], header[1], header[2], header[3]];
        if magic != MAGIC {
            return Err(TagFileError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(TagFileError::UnsupportedVersion(version));
        }
        Ok(Self {
            inner,
            order: OrderCheck::default(),
            done: false,
        })
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> Iterator for BinaryReader<R> {
    type Item = Result<DetectionEvent, TagFileError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut rec = [0u8; RECORD_LEN];
        let got = match read_full(&mut self.inner, &mut rec) {
            Ok(n) => n,
            Err(e) => {
                self.done = true;
                return Some(Err(e.into()));
            }
        };
        if got == 0 {
            self.done = true;
            return None;
        }
        let index = self.order.index;
        let result = if got < RECORD_LEN {
            Err(TagFileError::Truncated(format!(
                "record {index} has {got} of {RECORD_LEN} bytes"
            )))
        } else {
            let ts = u64::from_le_bytes(rec[..8].try_into().expect("8 bytes"));
            match Channel::from_code(rec[8]) {
                Some(ch) => self.order.push(DetectionEvent::new(ts, ch)),
                None => Err(TagFileError::UnknownChannel {
                    index,
                    code: rec[8].to_string(),
                }),
            }
        };
        if result.is_err() {
            self.done = true;
        }
        Some(result)
    }
}

pub fn write_csv<W: Write>(w: W, events: &[DetectionEvent]) -> Result<(), TagFileError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["timestamp_ps", "channel"])
        .map_err(csv_err)?;
    for e in events {
        wtr.write_record([e.timestamp.to_string(), e.channel.code().to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> TagFileError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TagFileError::Io(io),
        other => TagFileError::Csv(format!("{other:?}")),
    }
}

fn parse_channel(field: &str) -> Option<Channel> {
    let field = field.trim();
    if let Ok(code) = field.parse::<u8>() {
        return Channel::from_code(code);
    }
    let mut chars = field.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Channel::from_letter(c),
        _ => None,
    }
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<DetectionEvent>, TagFileError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["timestamp_ps", "channel"] {
        return Err(TagFileError::Csv(format!(
            "expected header `{CSV_HEADER}`, found `{}`",
            names.join(",")
        )));
    }
    let mut order = OrderCheck::default();
    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let index = order.index;
        let ts: u64 = rec.get(0).unwrap_or("").trim().parse().map_err(|_| {
            TagFileError::Csv(format!("record {index}: bad timestamp {:?}", rec.get(0)))
        })?;
        let raw = rec.get(1).unwrap_or("");
        let ch = parse_channel(raw).ok_or_else(|| TagFileError::UnknownChannel {
            index,
            code: raw.to_string(),
        })?;
        events.push(order.push(DetectionEvent::new(ts, ch))?);
    }
    Ok(events)
}

pub fn read_binary<R: Read>(r: R) -> Result<Vec<DetectionEvent>, TagFileError> {
    BinaryReader::new(r)?.collect()
}

pub fn read_stream(path: &Path, party: Party) -> Result<TimeTagStream, TagFileError> {
    let file = BufReader::with_capacity(1 << 20, File::open(path)?);
    let events = match TagFormat::from_path(path) {
        TagFormat::Binary => read_binary(file)?,
        TagFormat::Csv => read_csv(file)?,
    };
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("")
        .to_string();
    // ordering already validated
    TimeTagStream::new(party, label, events).map_err(|e| TagFileError::Csv(e.to_string()))
}

pub fn write_stream(path: &Path, stream: &TimeTagStream) -> Result<(), TagFileError> {
    let file = BufWriter::with_capacity(1 << 20, File::create(path)?);
    match TagFormat::from_path(path) {
        TagFormat::Binary => write_binary(file, stream.events())?,
        TagFormat::Csv => write_csv(file, stream.events())?,
    }
    Ok(())
}
