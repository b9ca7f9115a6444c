//! The `TOMOGRD1` grid format and CSV export.
//!
//! Layout: 8-byte magic `TOMOGRD1`, a little-endian `u32` header length, the
//! UTF-8 JSON header, then the raw `f64` little-endian payload in row-major
//! order. Complex grids set `"complex": true` and interleave (re, im).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoxDomain, ScalarField, TomogramTable};
use crate::error::{Result, TomoError};

pub const MAGIC: &[u8; 8] = b"TOMOGRD1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub version: u32,
    pub shape: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub dtype: String,
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub complex: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl GridHeader {
    pub fn for_domain(domain: &BoxDomain) -> Self {
        Self {
            version: 1,
            shape: domain.shape().to_vec(),
            lo: domain.lo().to_vec(),
            hi: domain.hi().to_vec(),
            dtype: "f64-le".into(),
            order: "row-major".into(),
            axes: None,
            complex: false,
            meta: None,
        }
    }

    pub fn domain(&self) -> Result<BoxDomain> {
        BoxDomain::new(self.lo.clone(), self.hi.clone(), self.shape.clone())
    }

    /// Number of f64 words in the payload.
    pub fn payload_len(&self) -> usize {
        let n: usize = self.shape.iter().product();
        if self.complex {
            2 * n
        } else {
            n
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFile {
    pub header: GridHeader,
    pub data: Vec<f64>,
}

impl GridFile {
    pub fn from_field(f: &ScalarField) -> Self {
        Self {
            header: GridHeader::for_domain(f.domain()),
            data: f.values().to_vec(),
        }
    }

    pub fn from_table(t: &TomogramTable) -> Self {
        let mut header = GridHeader::for_domain(t.domain());
        header.axes = Some(t.names().to_vec());
        Self {
            header,
            data: t.values().to_vec(),
        }
    }

    pub fn into_field(self) -> Result<ScalarField> {
        if self.header.complex {
            return Err(TomoError::Header("complex grid where a real field was expected".into()));
        }
        ScalarField::new(self.header.domain()?, self.data)
    }

    pub fn into_table(self) -> Result<TomogramTable> {
        if self.header.complex {
            return Err(TomoError::Header("complex grid where a table was expected".into()));
        }
        let domain = self.header.domain()?;
        let names = self
            .header
            .axes
            .unwrap_or_else(|| (0..domain.ndim()).map(|i| format!("x{i}")).collect());
        TomogramTable::new(names, domain, self.data)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.data.len() != self.header.payload_len() {
            return Err(TomoError::PayloadSizeMismatch {
                expected: 8 * self.header.payload_len(),
                actual: 8 * self.data.len(),
            });
        }
        if let Some(index) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(TomoError::NonFiniteSample { index });
        }
        let json = serde_json::to_vec(&self.header)?;
        let len = u32::try_from(json.len()).map_err(|_| TomoError::Header("header too long".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&json)?;
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact_or(r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(TomoError::BadMagic);
        }
        let mut len = [0u8; 4];
        read_exact_or(r, &mut len, "header length")?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        read_exact_or(r, &mut json, "header")?;
        let header: GridHeader =
            serde_json::from_slice(&json).map_err(|e| TomoError::Header(e.to_string()))?;
        if header.version != 1 {
            return Err(TomoError::Header(format!("unsupported version {}", header.version)));
        }
        if header.dtype != "f64-le" || header.order != "row-major" {
            return Err(TomoError::Header(format!(
                "unsupported dtype/order {}/{}",
                header.dtype, header.order
            )));
        }
        header.domain()?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let expected = 8 * header.payload_len();
        if payload.len() != expected {
            return Err(TomoError::PayloadSizeMismatch {
                expected,
                actual: payload.len(),
            });
        }
        let mut data = Vec::with_capacity(header.payload_len());
        for (index, c) in payload.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(c.try_into().expect("chunk of 8"));
            if !v.is_finite() {
                return Err(TomoError::NonFiniteSample { index });
            }
            data.push(v);
        }
        Ok(Self { header, data })
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            TomoError::Truncated(format!("unexpected end of file in {what}"))
        } else {
            TomoError::Io(e)
        }
    })
}

pub fn write_grid(f: &ScalarField, path: &Path) -> Result<()> {
    GridFile::from_field(f).write_path(path)
}

pub fn read_grid(path: &Path) -> Result<ScalarField> {
    GridFile::read_path(path)?.into_field()
}

/// One row per node: coordinates then value, preceded by a header row.
pub fn write_csv<W: Write>(w: &mut W, names: &[String], domain: &BoxDomain, values: &[f64]) -> Result<()> {
    writeln!(w, "{},value", names.join(","))?;
    for (k, v) in values.iter().enumerate() {
        for x in domain.node(k) {
            write!(w, "{x},")?;
        }
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn field_to_csv<W: Write>(w: &mut W, f: &ScalarField) -> Result<()> {
    let names: Vec<String> = match f.ndim() {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        n => (0..n).map(|i| format!("x{i}")).collect(),
    };
    write_csv(w, &names, f.domain(), f.values())
}

pub fn table_to_csv<W: Write>(w: &mut W, t: &TomogramTable) -> Result<()> {
    write_csv(w, t.names(), t.domain(), t.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Gaussian, Phantom};

    fn sample_field() -> ScalarField {
        let d = BoxDomain::centered(3.0, 17, 2).unwrap();
        Gaussian::isotropic(&[0.3, -0.1], 0.7, 1.0).unwrap().sample(&d)
    }

    fn encode(g: &GridFile) -> Vec<u8> {
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let f = sample_field();
        let bytes = encode(&GridFile::from_field(&f));
        assert_eq!(&bytes[..8], MAGIC);
        let back = GridFile::read_from(&mut bytes.as_slice()).unwrap().into_field().unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn distinct_errors() {
        let f = sample_field();
        let good = encode(&GridFile::from_field(&f));

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(GridFile::read_from(&mut bad.as_slice()), Err(TomoError::BadMagic)));

        let short = &good[..good.len() - 8];
        let err = GridFile::read_from(&mut &short[..]).unwrap_err();
        assert!(err.to_string().contains("payload size mismatch"), "{err}");

        let mut nan = good.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        let err = GridFile::read_from(&mut nan.as_slice()).unwrap_err();
        assert!(err.to_string().contains("non-finite sample"), "{err}");

        let err = GridFile::read_from(&mut &good[..10]).unwrap_err();
        assert!(matches!(err, TomoError::Truncated(_)));

        let codes = [
            TomoError::BadMagic.code(),
            TomoError::PayloadSizeMismatch { expected: 0, actual: 0 }.code(),
            TomoError::NonFiniteSample { index: 0 }.code(),
            TomoError::Truncated(String::new()).code(),
        ];
        let mut uniq = codes.to_vec();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), codes.len());
    }

    #[test]
    fn table_keeps_axis_names() {
        let d = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 3.0], vec![3, 4]).unwrap();
        let t = TomogramTable::new(vec!["lambda".into(), "theta".into()], d, (0..12).map(f64::from).collect())
            .unwrap();
        let bytes = encode(&GridFile::from_table(&t));
        let back = GridFile::read_from(&mut bytes.as_slice()).unwrap();
        assert!(String::from_utf8_lossy(&bytes).contains(r#""axes":["lambda","theta"]"#));
        assert_eq!(back.into_table().unwrap(), t);
    }

    #[test]
    fn csv_has_stable_header() {
        let d = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]).unwrap();
        let t = TomogramTable::new(vec!["lambda".into(), "theta".into()], d, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut out = Vec::new();
        table_to_csv(&mut out, &t).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "lambda,theta,value");
        assert_eq!(lines[4], "1,1,4");
    }
}
