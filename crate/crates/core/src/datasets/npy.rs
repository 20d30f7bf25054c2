//! Minimal NPY reader and writer.
//!
//! Layout: the magic string `\x93NUMPY`, one byte each of major and minor
//! version, a little-endian header length (`u16` for version 1, `u32` for
//! versions 2 and 3), an ASCII Python dict literal with the keys `descr`,
//! `fortran_order` and `shape`, padded with spaces and terminated by a
//! newline, then the raw array data.

use std::io::Write;

use super::DatasetError;

const MAGIC: &[u8] = b"\x93NUMPY";

/// Element types this reader understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F4 { little: bool },
    F8 { little: bool },
    I4 { little: bool },
    I8 { little: bool },
    U1,
    Bool,
}

impl Dtype {
    fn parse(descr: &str) -> Option<Dtype> {
        let (order, kind) = descr.split_at(1.min(descr.len()));
        let little = match order {
            "<" | "=" => true,
            ">" => false,
            "|" => true,
            _ => return None,
        };
        Some(match (kind, order) {
            ("f4", "<" | "=" | ">") => Dtype::F4 { little },
            ("f8", "<" | "=" | ">") => Dtype::F8 { little },
            ("i4", "<" | "=" | ">") => Dtype::I4 { little },
            ("i8", "<" | "=" | ">") => Dtype::I8 { little },
            ("u1", _) => Dtype::U1,
            ("b1", _) => Dtype::Bool,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Dtype::F4 { .. } | Dtype::I4 { .. } => 4,
            Dtype::F8 { .. } | Dtype::I8 { .. } => 8,
            Dtype::U1 | Dtype::Bool => 1,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        macro_rules! read {
            ($t:ty, $little:expr) => {{
                let arr = b.try_into().expect("element width");
                if $little { <$t>::from_le_bytes(arr) } else { <$t>::from_be_bytes(arr) }
            }};
        }
        match self {
            Dtype::F4 { little } => f64::from(read!(f32, little)),
            Dtype::F8 { little } => read!(f64, little),
            Dtype::I4 { little } => f64::from(read!(i32, little)),
            Dtype::I8 { little } => read!(i64, little) as f64,
            Dtype::U1 | Dtype::Bool => f64::from(b[0]),
        }
    }
}

/// A decoded C-order array, widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Parses one `.npy` payload; `entry` names it in error messages.
pub fn parse_npy(bytes: &[u8], entry: &str) -> Result<NpyArray, DatasetError> {
    let err = |m: String| DatasetError::parse(entry, m);
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(err("missing NPY magic string".into()));
    }
    let major = bytes[6];
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(err("truncated NPY preamble".into()));
            }
            (u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize, 12)
        }
        v => return Err(err(format!("unsupported NPY version {v}"))),
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(err(format!("header claims {header_len} bytes but the entry is shorter")));
    }
    let header = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| err("header is not valid text".into()))?;
    let header = parse_header(header).map_err(err)?;
    if header.fortran_order {
        return Err(err("fortran_order arrays are not supported".into()));
    }
    let dtype = Dtype::parse(&header.descr)
        .ok_or_else(|| err(format!("unsupported dtype `{}`", header.descr)))?;
    let count: usize = header.shape.iter().product();
    let data = &bytes[end..];
    let expected = count * dtype.size();
    if data.len() != expected {
        return Err(err(format!(
            "shape {:?} needs {expected} data bytes, found {}",
            header.shape,
            data.len()
        )));
    }
    let values = data.chunks_exact(dtype.size()).map(|c| dtype.decode(c)).collect();
    Ok(NpyArray { dtype, shape: header.shape, values })
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the dict literal, e.g. `{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }`.
fn parse_header(text: &str) -> Result<Header, String> {
    let mut p = Lexer { s: text.trim_end().as_bytes(), pos: 0 };
    p.expect(b'{')?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    loop {
        p.skip_ws();
        if p.eat(b'}') {
            break;
        }
        let key = p.string()?;
        p.expect(b':')?;
        match key.as_str() {
            "descr" => descr = Some(p.string()?),
            "fortran_order" => fortran = Some(p.boolean()?),
            "shape" => shape = Some(p.tuple()?),
            other => return Err(format!("unexpected header key `{other}`")),
        }
        p.skip_ws();
        if !p.eat(b',') {
            p.expect(b'}')?;
            break;
        }
    }
    Ok(Header {
        descr: descr.ok_or("header lacks `descr`")?,
        fortran_order: fortran.ok_or("header lacks `fortran_order`")?,
        shape: shape.ok_or("header lacks `shape`")?,
    })
}

struct Lexer<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Lexer<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected `{}` at header offset {}", c as char, self.pos))
        }
    }

    fn string(&mut self) -> Result<String, String> {
        self.skip_ws();
        let quote = match self.s.get(self.pos) {
            Some(&q @ (b'\'' | b'"')) => q,
            _ => return Err(format!("expected a string at header offset {}", self.pos)),
        };
        let start = self.pos + 1;
        let len = self.s[start..]
            .iter()
            .position(|&c| c == quote)
            .ok_or("unterminated string in header")?;
        self.pos = start + len + 1;
        Ok(String::from_utf8_lossy(&self.s[start..start + len]).into_owned())
    }

    fn boolean(&mut self) -> Result<bool, String> {
        self.skip_ws();
        for (word, value) in [("True", true), ("False", false)] {
            if self.s[self.pos..].starts_with(word.as_bytes()) {
                self.pos += word.len();
                return Ok(value);
            }
        }
        Err(format!("expected True or False at header offset {}", self.pos))
    }

    fn tuple(&mut self) -> Result<Vec<usize>, String> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(b')') {
                return Ok(dims);
            }
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(format!("expected a dimension at header offset {start}"));
            }
            let digits = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
            dims.push(digits.parse().map_err(|e| format!("bad dimension: {e}"))?);
            if !self.eat(b',') {
                self.expect(b')')?;
                return Ok(dims);
            }
        }
    }
}

/// Element type written by [`write_npy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteDtype {
    F4,
    F8,
    U1,
}

/// Serializes `values` as a version 1.0 C-order NPY payload. The header is
/// padded so the data starts on a 64-byte boundary.
pub fn write_npy(
    out: &mut impl Write,
    shape: &[usize],
    values: &[f64],
    dtype: WriteDtype,
) -> std::io::Result<()> {
    let descr = match dtype {
        WriteDtype::F4 => "<f4",
        WriteDtype::F8 => "<f8",
        WriteDtype::U1 => "|u1",
    };
    let dims = match shape {
        [single] => format!("({single},)"),
        _ => format!("({})", shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")),
    };
    let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');

    out.write_all(MAGIC)?;
    out.write_all(&[1, 0])?;
    out.write_all(&(header.len() as u16).to_le_bytes())?;
    out.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for &v in values {
        match dtype {
            WriteDtype::F4 => buf.extend_from_slice(&(v as f32).to_le_bytes()),
            WriteDtype::F8 => buf.extend_from_slice(&v.to_le_bytes()),
            WriteDtype::U1 => buf.push(v as u8),
        }
    }
    out.write_all(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_matches_numpy() {
        let mut buf = Vec::new();
        write_npy(&mut buf, &[2, 3], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], WriteDtype::F4).unwrap();
        assert_eq!(&buf[..8], b"\x93NUMPY\x01\x00");
        let hlen = u16::from_le_bytes([buf[8], buf[9]]) as usize;
        assert_eq!((10 + hlen) % 64, 0);
        let header = std::str::from_utf8(&buf[10..10 + hlen]).unwrap();
        assert!(header.starts_with("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }"));
        assert!(header.ends_with('\n'));
        assert_eq!(buf.len(), 10 + hlen + 24);
    }

    #[test]
    fn parses_numpy_written_bytes() {
        // np.save of np.array([[1, 2], [3, 4]], dtype='<f8'), numpy 1.x style
        // 16-byte aligned header.
        let mut bytes = b"\x93NUMPY\x01\x00".to_vec();
        let header = "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }          \n";
        bytes.extend_from_slice(&(header.len() as u16).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for v in [1.0f64, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let arr = parse_npy(&bytes, "a.npy").unwrap();
        assert_eq!(arr.shape, vec![2, 2]);
        assert_eq!(arr.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(arr.dtype, Dtype::F8 { little: true });
    }

    #[test]
    fn big_endian_and_scalar_shapes() {
        let mut bytes = b"\x93NUMPY\x02\x00".to_vec();
        let header = "{\"descr\": \">f4\", \"fortran_order\": False, \"shape\": (3,)}\n";
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for v in [1.5f32, -2.0, 0.25] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let arr = parse_npy(&bytes, "b.npy").unwrap();
        assert_eq!(arr.values, vec![1.5, -2.0, 0.25]);

        let mut scalar = Vec::new();
        write_npy(&mut scalar, &[], &[7.0], WriteDtype::F8).unwrap();
        let arr = parse_npy(&scalar, "s.npy").unwrap();
        assert!(arr.shape.is_empty());
        assert_eq!(arr.values, vec![7.0]);
    }

    #[test]
    fn truncated_data_names_entry() {
        let mut buf = Vec::new();
        write_npy(&mut buf, &[4], &[1.0, 2.0, 3.0, 4.0], WriteDtype::F4).unwrap();
        buf.truncate(buf.len() - 3);
        let err = parse_npy(&buf, "input.npy").unwrap_err();
        match err {
            DatasetError::Parse { entry, message } => {
                assert_eq!(entry, "input.npy");
                assert!(message.contains("data bytes"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_fortran_order() {
        assert!(parse_npy(b"NUMPY\x01\x00\x00\x00", "x").is_err());
        let mut bytes = b"\x93NUMPY\x01\x00".to_vec();
        let header = "{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }\n";
        bytes.extend_from_slice(&(header.len() as u16).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&1f32.to_le_bytes());
        assert!(parse_npy(&bytes, "f").is_err());
    }
}
