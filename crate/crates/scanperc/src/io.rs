//! PGM (P2/P5) and CSV grids.
//!
//! PGM samples are read as raw integers in `0..=maxval`; 16-bit P5 samples
//! are big-endian. CSV holds one image row per line with comma-separated
//! decimals and is written with shortest round-trip formatting, so a CSV
//! round trip is lossless.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use scanperc_core::{BinaryImage, Micrograph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Csv,
}

impl ImageFormat {
    /// Picks a format from the file extension (`.pgm`, `.csv`, `.txt`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" | "pnm" => Some(Self::Pgm),
            "csv" | "txt" => Some(Self::Csv),
            _ => None,
        }
    }
}

/// Where a parse error was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Line(usize),
    Byte(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Line(l) => write!(f, "line {l}"),
            Position::Byte(b) => write!(f, "byte {b}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at {at}: {msg}")]
    Parse { at: Position, msg: String },
    #[error("cannot infer image format of {0}; use a .pgm or .csv extension")]
    UnknownFormat(PathBuf),
    #[error(transparent)]
    Core(#[from] scanperc_core::Error),
}

fn parse_err(at: Position, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        at,
        msg: msg.into(),
    }
}

pub fn read_image(path: &Path, format: Option<ImageFormat>) -> Result<Micrograph, IoError> {
    let format = match format.or_else(|| ImageFormat::from_path(path)) {
        Some(f) => f,
        None => return Err(IoError::UnknownFormat(path.to_path_buf())),
    };
    let bytes = std::fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        ImageFormat::Pgm => decode_pgm(&bytes),
        ImageFormat::Csv => decode_csv(&bytes),
    }
}

/// Writes an image. PGM output is 16-bit binary with values rounded and
/// clamped to `0..=65535`; see [`scale_to_maxval`] for fractional data.
pub fn write_image(
    img: &Micrograph,
    path: &Path,
    format: Option<ImageFormat>,
) -> Result<(), IoError> {
    let format = match format.or_else(|| ImageFormat::from_path(path)) {
        Some(f) => f,
        None => return Err(IoError::UnknownFormat(path.to_path_buf())),
    };
    let bytes = match format {
        ImageFormat::Pgm => encode_pgm(img, 65535, true),
        ImageFormat::Csv => encode_csv(img).into_bytes(),
    };
    write_atomic(path, &bytes)
}

/// Writes a thresholded picture as a PGM with maxval 1 (1 = black).
pub fn write_binary_pgm(bin: &BinaryImage, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_binary_pgm(bin))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let io = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Affine map of `[min, max]` onto `[0, maxval]`. Detection is invariant
/// under positive affine changes of intensity, so this loses only
/// quantization precision.
pub fn scale_to_maxval(img: &Micrograph, maxval: u16) -> Result<Micrograph, IoError> {
    let (lo, hi) = (img.min(), img.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(img.map(|v| (v - lo) / span * f64::from(maxval))?)
}

pub fn encode_pgm(img: &Micrograph, maxval: u16, binary: bool) -> Vec<u8> {
    let maxval = maxval.max(1);
    let q = |v: f64| v.round().clamp(0.0, f64::from(maxval)) as u16;
    let mut out = format!(
        "{}\n{} {}\n{}\n",
        if binary { "P5" } else { "P2" },
        img.width(),
        img.height(),
        maxval
    )
    .into_bytes();
    if binary {
        for &v in img.pixels() {
            let s = q(v);
            if maxval > 255 {
                out.extend_from_slice(&s.to_be_bytes());
            } else {
                out.push(s as u8);
            }
        }
    } else {
        for r in 0..img.height() {
            let line: Vec<String> = img.row(r).iter().map(|&v| q(v).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn encode_binary_pgm(bin: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n1\n", bin.width(), bin.height()).into_bytes();
    out.extend(bin.bits().iter().map(|&b| u8::from(b)));
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    newlines: usize,
}

impl<'a> Cursor<'a> {
    fn line(&self) -> usize {
        1 + self.newlines
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => {
                    self.newlines += usize::from(b == b'\n');
                    self.pos += 1;
                }
                _ => break,
            }
        }
    }

    /// Next whitespace-delimited token; `None` at end of input.
    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let bytes: &'a [u8] = self.bytes;
        (self.pos > start).then(|| &bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u64, IoError> {
        let tok = self
            .token()
            .ok_or_else(|| parse_err(Position::Line(self.line()), format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| {
                parse_err(
                    Position::Line(self.line()),
                    format!(
                        "{what} is not a non-negative integer: {:?}",
                        String::from_utf8_lossy(tok)
                    ),
                )
            })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Micrograph, IoError> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(parse_err(Position::Byte(0), "expected magic P2 or P5")),
    };
    let mut cur = Cursor {
        bytes,
        pos: 2,
        newlines: 0,
    };
    if cur
        .bytes
        .get(2)
        .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
    {
        return Err(parse_err(
            Position::Byte(2),
            "magic number must be followed by whitespace",
        ));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(
            Position::Line(cur.line()),
            "dimensions must be positive",
        ));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(
            Position::Line(cur.line()),
            format!("maxval {maxval} is outside 1..=65535"),
        ));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| parse_err(Position::Line(cur.line()), "dimensions overflow"))?;

    let mut pixels = Vec::with_capacity(n.min(1 << 26));
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        let depth = if maxval > 255 { 2 } else { 1 };
        let need = n
            .checked_mul(depth)
            .and_then(|b| b.checked_add(start))
            .ok_or_else(|| parse_err(Position::Byte(start), "raster size overflows"))?;
        if bytes.len() < need {
            return Err(parse_err(
                Position::Byte(bytes.len()),
                format!(
                    "truncated raster: expected {} bytes after offset {start}, found {}",
                    need - start,
                    bytes.len().saturating_sub(start)
                ),
            ));
        }
        for i in 0..n {
            let off = start + i * depth;
            let v = if depth == 2 {
                u16::from_be_bytes([bytes[off], bytes[off + 1]]) as u64
            } else {
                bytes[off] as u64
            };
            if v > maxval {
                return Err(parse_err(
                    Position::Byte(off),
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            pixels.push(v as f64);
        }
    } else {
        for _ in 0..n {
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(parse_err(
                    Position::Line(cur.line()),
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            pixels.push(v as f64);
        }
        if cur.token().is_some() {
            return Err(parse_err(
                Position::Line(cur.line()),
                format!("more than {n} samples for {width}x{height}"),
            ));
        }
    }
    Ok(Micrograph::new(width, height, pixels)?)
}

pub fn decode_csv(bytes: &[u8]) -> Result<Micrograph, IoError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        parse_err(
            Position::Byte(e.valid_up_to()),
            "CSV input is not valid UTF-8",
        )
    })?;
    let mut width = None;
    let mut pixels = Vec::new();
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = pixels.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                parse_err(Position::Line(line_no), format!("not a number: {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    Position::Line(line_no),
                    format!("non-finite value {field:?}"),
                ));
            }
            pixels.push(v);
        }
        let count = pixels.len() - start;
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(parse_err(
                    Position::Line(line_no),
                    format!("row has {count} values, expected {w}"),
                ));
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or_else(|| parse_err(Position::Line(1), "empty CSV"))?;
    Ok(Micrograph::new(width, height, pixels)?)
}

pub fn encode_csv(img: &Micrograph) -> String {
    let mut out = String::new();
    for r in 0..img.height() {
        let row: Vec<String> = img.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
