//! Minimal NPY (format 1.0) reader and writer for little-endian float and
//! boolean arrays in C order.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayBase, ArrayD, Data, Dimension, IxDyn};

use crate::error::{Error, Result};
use crate::real::Real;

const MAGIC: &[u8; 6] = b"\x93NUMPY";

pub trait NpyElement: Copy {
    const DESCR: &'static str;
    fn write_le(self, out: &mut Vec<u8>);
}

impl NpyElement for f32 {
    const DESCR: &'static str = "<f4";
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl NpyElement for f64 {
    const DESCR: &'static str = "<f8";
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl NpyElement for bool {
    const DESCR: &'static str = "|b1";
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self as u8);
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = match dir {
        Some(d) => d.join(tmp_name),
        None => PathBuf::from(tmp_name),
    };
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn header(descr: &str, shape: &[usize]) -> Vec<u8> {
    let shape_str = match shape.len() {
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict =
        format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_str}, }}");
    // magic(6) + version(2) + len(2) + dict + '\n' padded to a multiple of 64
    let unpadded = 10 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

/// Encodes an array as NPY 1.0 bytes (logical C order).
pub fn encode<T, S, D>(arr: &ArrayBase<S, D>) -> Vec<u8>
where
    T: NpyElement,
    S: Data<Elem = T>,
    D: Dimension,
{
    let mut out = header(T::DESCR, arr.shape());
    out.reserve(arr.len() * std::mem::size_of::<T>());
    for &v in arr.iter() {
        v.write_le(&mut out);
    }
    out
}

pub fn write<T, S, D>(path: &Path, arr: &ArrayBase<S, D>) -> Result<()>
where
    T: NpyElement,
    S: Data<Elem = T>,
    D: Dimension,
{
    write_atomic(path, &encode(arr))
}

#[derive(Debug, Clone, PartialEq)]
struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
    data_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let bad = |reason: &str| Error::Npy {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(bad("missing magic string"));
    }
    let (len, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(bad("truncated header"));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => return Err(bad(&format!("unsupported format version {v}"))),
    };
    let dict = bytes
        .get(start..start + len)
        .ok_or_else(|| bad("truncated header"))?;
    let dict = std::str::from_utf8(dict).map_err(|_| bad("header is not utf-8"))?;

    let value_after = |key: &str| -> Result<&str> {
        let pat = format!("'{key}':");
        let pos = dict
            .find(&pat)
            .ok_or_else(|| bad(&format!("missing key {key}")))?;
        Ok(dict[pos + pat.len()..].trim_start())
    };

    let descr = {
        let v = value_after("descr")?;
        let v = v
            .strip_prefix('\'')
            .ok_or_else(|| bad("descr is not a string"))?;
        let end = v.find('\'').ok_or_else(|| bad("unterminated descr"))?;
        v[..end].to_string()
    };
    let fortran_order = {
        let v = value_after("fortran_order")?;
        if v.starts_with("True") {
            true
        } else if v.starts_with("False") {
            false
        } else {
            return Err(bad("fortran_order is not a bool"));
        }
    };
    let shape = {
        let v = value_after("shape")?;
        let v = v
            .strip_prefix('(')
            .ok_or_else(|| bad("shape is not a tuple"))?;
        let end = v.find(')').ok_or_else(|| bad("unterminated shape"))?;
        v[..end]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| bad("bad shape entry")))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Header {
        descr,
        fortran_order,
        shape,
        data_offset: start + len,
    })
}

fn load(path: &Path) -> Result<(Header, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let h = parse_header(path, &bytes)?;
    if h.fortran_order {
        return Err(Error::Npy {
            path: path.to_path_buf(),
            reason: "fortran-ordered arrays are not supported".into(),
        });
    }
    Ok((h, bytes))
}

fn payload<'a>(path: &Path, h: &Header, bytes: &'a [u8], width: usize) -> Result<&'a [u8]> {
    let n: usize = h.shape.iter().product();
    let data = &bytes[h.data_offset..];
    if data.len() != n * width {
        return Err(Error::Npy {
            path: path.to_path_buf(),
            reason: format!("expected {} data bytes, found {}", n * width, data.len()),
        });
    }
    Ok(data)
}

/// Reads a float array (`<f4` or `<f8`), converting to `T`.
pub fn read<T: Real>(path: &Path) -> Result<ArrayD<T>> {
    let (h, bytes) = load(path)?;
    let values: Vec<T> = match h.descr.as_str() {
        "<f8" => payload(path, &h, &bytes, 8)?
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
            .collect(),
        "<f4" => payload(path, &h, &bytes, 4)?
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect(),
        other => {
            return Err(Error::Npy {
                path: path.to_path_buf(),
                reason: format!("unsupported dtype {other}, expected <f4 or <f8"),
            })
        }
    };
    Ok(ArrayD::from_shape_vec(IxDyn(&h.shape), values).expect("length checked"))
}

/// Reads a boolean array (`|b1` or `|u1`).
pub fn read_bool(path: &Path) -> Result<ArrayD<bool>> {
    let (h, bytes) = load(path)?;
    if h.descr != "|b1" && h.descr != "|u1" && h.descr != "<u1" {
        return Err(Error::Npy {
            path: path.to_path_buf(),
            reason: format!("unsupported dtype {}, expected |b1", h.descr),
        });
    }
    let values = payload(path, &h, &bytes, 1)?
        .iter()
        .map(|&b| b != 0)
        .collect();
    Ok(ArrayD::from_shape_vec(IxDyn(&h.shape), values).expect("length checked"))
}
