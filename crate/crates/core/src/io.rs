//! On-disk formats: binary HSRM matrices, the text HSRG sparse format and
//! headerless dense CSV tables.
//!
//! HSRM layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `HSRM`                            |
//! | 4      | 1    | version, `1`                            |
//! | 5      | 1    | dtype, `1` = f64 little-endian           |
//! | 6      | 2    | reserved, zero                          |
//! | 8      | 4    | rows                                    |
//! | 12     | 4    | cols                                    |
//! | 16     | 4    | image width (0 if not a cube)           |
//! | 20     | 4    | image height (0 if not a cube)          |
//! | 24     | 8·rows·cols | values, column-major             |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::HsImage;
use crate::linalg::{DenseMatrix, SparseMatrix};

const HSRM_MAGIC: &[u8; 4] = b"HSRM";
const HSRM_VERSION: u8 = 1;
const HSRM_DTYPE_F64: u8 = 1;
const HSRM_HEADER_LEN: usize = 24;

/// Contents of an HSRM file.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub matrix: DenseMatrix,
    /// Spatial dimensions `(width, height)` when the matrix is an image cube.
    pub dims: Option<(usize, usize)>,
}

impl MatrixFile {
    pub fn into_image(self) -> Result<HsImage> {
        let (w, h) = self
            .dims
            .ok_or_else(|| Error::Format("matrix file carries no image dimensions".into()))?;
        HsImage::new(w, h, self.matrix)
    }
}

fn u32_field(v: usize, what: &str) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
}

pub fn encode_hsrm(matrix: &DenseMatrix, dims: Option<(usize, usize)>) -> Result<Vec<u8>> {
    let (w, h) = dims.unwrap_or((0, 0));
    if dims.is_some() && w * h != matrix.cols() {
        return Err(Error::dim(format!(
            "{w}x{h} image dims for {} columns",
            matrix.cols()
        )));
    }
    let mut buf = Vec::with_capacity(HSRM_HEADER_LEN + 8 * matrix.as_slice().len());
    buf.extend_from_slice(HSRM_MAGIC);
    buf.extend_from_slice(&[HSRM_VERSION, HSRM_DTYPE_F64, 0, 0]);
    buf.extend_from_slice(&u32_field(matrix.rows(), "rows")?);
    buf.extend_from_slice(&u32_field(matrix.cols(), "cols")?);
    buf.extend_from_slice(&u32_field(w, "width")?);
    buf.extend_from_slice(&u32_field(h, "height")?);
    for v in matrix.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_hsrm(bytes: &[u8]) -> Result<MatrixFile> {
    if bytes.len() < HSRM_HEADER_LEN {
        return Err(Error::Format("truncated HSRM header".into()));
    }
    if &bytes[0..4] != HSRM_MAGIC {
        return Err(Error::Format("bad HSRM magic".into()));
    }
    if bytes[4] != HSRM_VERSION {
        return Err(Error::Format(format!(
            "unsupported HSRM version {}",
            bytes[4]
        )));
    }
    if bytes[5] != HSRM_DTYPE_F64 {
        return Err(Error::Format(format!(
            "unsupported HSRM dtype {}",
            bytes[5]
        )));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Format("nonzero reserved bytes".into()));
    }
    let field =
        |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols, w, h) = (field(8), field(12), field(16), field(20));
    let dims = match (w, h) {
        (0, 0) => None,
        (w, h) if w * h == cols => Some((w, h)),
        _ => {
            return Err(Error::Format(format!(
                "image dims {w}x{h} inconsistent with {cols} columns"
            )))
        }
    };
    let payload = &bytes[HSRM_HEADER_LEN..];
    if payload.len() != 8 * rows * cols {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            8 * rows * cols
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let matrix =
        DenseMatrix::from_col_major(rows, cols, data).map_err(|e| Error::Format(e.to_string()))?;
    Ok(MatrixFile { matrix, dims })
}

pub fn write_matrix(path: &Path, matrix: &DenseMatrix, dims: Option<(usize, usize)>) -> Result<()> {
    let bytes = encode_hsrm(matrix, dims)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn write_image(path: &Path, image: &HsImage) -> Result<()> {
    write_matrix(path, image.matrix(), Some((image.width(), image.height())))
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_hsrm(&bytes)
}

pub fn read_image(path: &Path) -> Result<HsImage> {
    read_matrix(path)?.into_image()
}

/// Writes the HSRG text format: a `HSRG rows cols nnz` header followed by
/// one `row col value` line per entry in `(row, col)` order.
pub fn write_sparse(path: &Path, g: &SparseMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "HSRG {} {} {}", g.rows(), g.cols(), g.nnz())?;
    for &(i, j, v) in g.entries() {
        writeln!(out, "{i} {j} {v:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sparse(path: &Path) -> Result<SparseMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty HSRG file".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "HSRG" {
        return Err(Error::Format(format!("bad HSRG header {header:?}")));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad HSRG integer {s:?}")))
    };
    let (rows, cols, nnz) = (num(parts[1])?, num(parts[2])?, num(parts[3])?);
    let mut entries = Vec::with_capacity(nnz);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Format(format!("bad HSRG entry {line:?}")));
        }
        let v = f[2]
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("bad HSRG value {:?}", f[2])))?;
        entries.push((num(f[0])?, num(f[1])?, v));
    }
    if entries.len() != nnz {
        return Err(Error::Format(format!(
            "HSRG header declares {nnz} entries, found {}",
            entries.len()
        )));
    }
    SparseMatrix::from_triplets(rows, cols, entries).map_err(|e| Error::Format(e.to_string()))
}

/// Headerless, comma-separated dense table, one matrix row per line.
pub fn read_dense_csv(path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number {s:?} in {}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_dense_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in m.to_rows() {
        writer.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    writer.flush()?;
    Ok(())
}
