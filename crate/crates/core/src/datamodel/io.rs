//! Text and binary embedding files.
//!
//! Text: a header line `#negbound-embeddings v1 n=<N> h=<h> c=<C> normalized=<0|1>`
//! followed by one `label<TAB>v0<TAB>…` row per sample.
//! Binary: the 16-byte magic below, little-endian u32 N, h, C, a u8 normalized
//! flag, N u32 labels and N·h f32 values row-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingSet;
use crate::error::{Error, Result};

pub const PACKED_MAGIC: &[u8; 16] = b"NEGBOUNDEMBED\0v1";
const TSV_TAG: &str = "#negbound-embeddings";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Packed,
}

impl Format {
    /// `.tsv`/`.txt` are text, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => Format::Tsv,
            _ => Format::Packed,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Format::Tsv),
            "packed" => Ok(Format::Packed),
            other => Err(Error::InvalidArgument(format!("unknown embedding format '{other}'"))),
        }
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path, format: Format) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Tsv => write_tsv(set, &mut w)?,
        Format::Packed => write_packed(set, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn load_embeddings(path: &Path, format: Format) -> Result<EmbeddingSet> {
    let r = BufReader::new(File::open(path)?);
    match format {
        Format::Tsv => read_tsv(r),
        Format::Packed => read_packed(r),
    }
}

pub fn write_tsv<W: Write>(set: &EmbeddingSet, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "{TSV_TAG} v1 n={} h={} c={} normalized={}",
        set.len(),
        set.dim(),
        set.n_classes(),
        u8::from(set.is_normalized())
    )?;
    for (i, row) in set.rows().enumerate() {
        write!(w, "{}", set.label(i))?;
        for v in row {
            write!(w, "\t{v:.8e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_tsv<R: BufRead>(r: R) -> Result<EmbeddingSet> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(TSV_TAG) || fields.next() != Some("v1") {
        return Err(parse_err(1, "missing '#negbound-embeddings v1' header"));
    }
    let (mut n, mut h, mut c, mut normalized) = (None, None, None, None);
    for f in fields {
        let (key, value) = f
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("malformed header field '{f}'")))?;
        let v: usize = value
            .parse()
            .map_err(|_| parse_err(1, format!("header field '{f}' is not a count")))?;
        match key {
            "n" => n = Some(v),
            "h" => h = Some(v),
            "c" => c = Some(v),
            "normalized" => normalized = Some(v != 0),
            _ => return Err(parse_err(1, format!("unknown header field '{key}'"))),
        }
    }
    let missing = |k: &str| parse_err(1, format!("header lacks '{k}='"));
    let n = n.ok_or_else(|| missing("n"))?;
    let h = h.ok_or_else(|| missing("h"))?;
    let c = c.ok_or_else(|| missing("c"))?;
    let normalized = normalized.ok_or_else(|| missing("normalized"))?;

    let mut labels = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * h);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = labels.len();
        let mut parts = line.split('\t');
        let label_text = parts.next().unwrap_or("");
        let label: usize = label_text
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad class id '{label_text}'")))?;
        if label >= c {
            return Err(parse_err(
                line_no,
                format!("unknown class id {label} (header declares {c} classes)"),
            ));
        }
        let before = features.len();
        for p in parts {
            let v: f64 = p
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad value '{p}'")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row });
            }
            features.push(v);
        }
        let got = features.len() - before;
        if got != h {
            return Err(parse_err(line_no, format!("expected {h} values, found {got}")));
        }
        labels.push(label);
    }
    if labels.len() != n {
        return Err(parse_err(
            labels.len() + 2,
            format!("header declares {n} rows, found {}", labels.len()),
        ));
    }
    EmbeddingSet::new(features, h, labels, c, normalized)
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit in 32 bits")))
}

pub fn write_packed<W: Write>(set: &EmbeddingSet, w: &mut W) -> Result<()> {
    w.write_all(PACKED_MAGIC)?;
    w.write_all(&u32_of(set.len(), "row count")?.to_le_bytes())?;
    w.write_all(&u32_of(set.dim(), "dimension")?.to_le_bytes())?;
    w.write_all(&u32_of(set.n_classes(), "class count")?.to_le_bytes())?;
    w.write_all(&[u8::from(set.is_normalized())])?;
    for &y in set.labels() {
        w.write_all(&(y as u32).to_le_bytes())?;
    }
    for &v in set.features() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| parse_err(0, format!("truncated file while reading {what}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_packed<R: Read>(mut r: R) -> Result<EmbeddingSet> {
    let mut magic = [0u8; 16];
    r.read_exact(&mut magic)
        .map_err(|_| parse_err(0, "file shorter than the magic"))?;
    if &magic != PACKED_MAGIC {
        return Err(parse_err(0, "bad magic"));
    }
    let n = read_u32(&mut r, "row count")? as usize;
    let h = read_u32(&mut r, "dimension")? as usize;
    let c = read_u32(&mut r, "class count")? as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)
        .map_err(|_| parse_err(0, "truncated file while reading the normalized flag"))?;
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let y = read_u32(&mut r, "labels")? as usize;
        if y >= c {
            return Err(parse_err(
                row,
                format!("row {row}: unknown class id {y} (header declares {c} classes)"),
            ));
        }
        labels.push(y);
    }
    let mut features = Vec::with_capacity(n * h);
    let mut b = [0u8; 4];
    for i in 0..n * h {
        r.read_exact(&mut b)
            .map_err(|_| parse_err(i / h.max(1), "truncated feature block"))?;
        let v = f32::from_le_bytes(b);
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i / h });
        }
        features.push(f64::from(v));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(parse_err(0, "trailing bytes after the feature block"));
    }
    EmbeddingSet::new(features, h, labels, c, flag[0] != 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EmbeddingSet {
        EmbeddingSet::from_rows(
            &[vec![0.6, 0.8], vec![-1.0, 0.0], vec![0.0, 1.0]],
            vec![2, 0, 1],
            3,
            true,
        )
        .unwrap()
    }

    #[test]
    fn tsv_round_trip() {
        let s = small();
        let mut buf = Vec::new();
        write_tsv(&s, &mut buf).unwrap();
        let back = read_tsv(buf.as_slice()).unwrap();
        assert_eq!(back.labels(), s.labels());
        for (a, b) in back.features().iter().zip(s.features()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn packed_round_trip_is_exact() {
        let s = small();
        let mut buf = Vec::new();
        write_packed(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 12 + 1 + 3 * 4 + 6 * 4);
        let back = read_packed(buf.as_slice()).unwrap();
        assert_eq!(back.labels(), s.labels());
        for (a, b) in back.features().iter().zip(s.features()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
    }

    #[test]
    fn tsv_errors_name_the_line() {
        let text = "#negbound-embeddings v1 n=2 h=4 c=2 normalized=0\n0\t1\t2\t3\t4\n1\t1\t2\t3\n";
        match read_tsv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let nan = "#negbound-embeddings v1 n=2 h=1 c=2 normalized=0\n0\t1\n1\tNaN\n";
        assert!(matches!(read_tsv(nan.as_bytes()), Err(Error::NonFinite { row: 1 })));
        let bad_class = "#negbound-embeddings v1 n=1 h=1 c=2 normalized=0\n5\t1\n";
        assert!(matches!(read_tsv(bad_class.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
