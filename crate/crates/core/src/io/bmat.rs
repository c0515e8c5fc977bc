//! BMAT: a minimal little-endian dense matrix file.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "BEARMAT1"
//! 8       4     dtype (u32 LE; 1 = f32 LE)
//! 12      8     rows  (u64 LE, >= 1)
//! 20      8     cols  (u64 LE, >= 1)
//! 28      4·rows·cols  column-major f32 LE payload
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use memmap2::Mmap;

use crate::error::{BearError, Result};
use crate::io::batch::ColumnStore;
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 8] = b"BEARMAT1";
pub const DTYPE_F32_LE: u32 = 1;
pub const HEADER_LEN: u64 = 28;
const ELEM_BYTES: u64 = 4;

/// Default in-memory limit for [`read_bmat`] (1 GiB of payload).
pub const DEFAULT_READ_CAP: u64 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BmatHeader {
    pub dtype: u32,
    pub rows: u64,
    pub cols: u64,
}

impl BmatHeader {
    pub fn f32(rows: u64, cols: u64) -> Self {
        Self {
            dtype: DTYPE_F32_LE,
            rows,
            cols,
        }
    }

    pub fn payload_bytes(&self) -> u64 {
        self.rows * self.cols * ELEM_BYTES
    }

    pub fn file_bytes(&self) -> u64 {
        HEADER_LEN + self.payload_bytes()
    }

    pub fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[..8].copy_from_slice(MAGIC);
        out[8..12].copy_from_slice(&self.dtype.to_le_bytes());
        out[12..20].copy_from_slice(&self.rows.to_le_bytes());
        out[20..28].copy_from_slice(&self.cols.to_le_bytes());
        out
    }

    /// Parses and validates a header (magic, dtype, non-zero dimensions).
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN as usize {
            return Err(BearError::format(
                path,
                format!(
                    "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                    bytes.len()
                ),
            ));
        }
        if &bytes[..8] != MAGIC {
            return Err(BearError::format(path, "bad magic, expected \"BEARMAT1\""));
        }
        let dtype = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        if dtype != DTYPE_F32_LE {
            return Err(BearError::format(
                path,
                format!("unsupported dtype code {dtype} (only 1 = f32 LE)"),
            ));
        }
        if rows == 0 || cols == 0 {
            return Err(BearError::format(
                path,
                format!("zero dimension {rows}x{cols}"),
            ));
        }
        rows.checked_mul(cols)
            .and_then(|e| e.checked_mul(ELEM_BYTES))
            .and_then(|p| p.checked_add(HEADER_LEN))
            .ok_or_else(|| BearError::format(path, "dimensions overflow the file size"))?;
        Ok(Self { dtype, rows, cols })
    }
}

/// Reads the header and checks that the file length matches it exactly.
pub fn inspect_bmat(path: impl AsRef<Path>) -> Result<BmatHeader> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| BearError::storage(path, e))?;
    let actual = file
        .metadata()
        .map_err(|e| BearError::storage(path, e))?
        .len();
    let mut head = Vec::with_capacity(HEADER_LEN as usize);
    (&mut file)
        .take(HEADER_LEN)
        .read_to_end(&mut head)
        .map_err(|e| BearError::storage(path, e))?;
    let header = BmatHeader::decode(&head, path)?;
    check_size(&header, actual, path)?;
    Ok(header)
}

fn check_size(header: &BmatHeader, actual: u64, path: &Path) -> Result<()> {
    let expected = header.file_bytes();
    if actual != expected {
        return Err(BearError::format(
            path,
            format!(
                "{}x{} f32 matrix needs {expected} bytes ({HEADER_LEN} header + {} payload), file has {actual} bytes ({})",
                header.rows,
                header.cols,
                header.payload_bytes(),
                if actual < expected { "truncated" } else { "trailing data" }
            ),
        ));
    }
    Ok(())
}

pub fn write_bmat(m: &Matrix<f32>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BmatWriter::create(path, m.rows(), m.cols())?;
    w.push_columns(m)?;
    w.finish()
}

/// Reads a whole file into memory, refusing payloads over [`DEFAULT_READ_CAP`].
pub fn read_bmat(path: impl AsRef<Path>) -> Result<Matrix<f32>> {
    read_bmat_capped(path, DEFAULT_READ_CAP)
}

pub fn read_bmat_capped(path: impl AsRef<Path>, cap_bytes: u64) -> Result<Matrix<f32>> {
    let path = path.as_ref();
    let header = inspect_bmat(path)?;
    if header.payload_bytes() > cap_bytes {
        return Err(BearError::Capacity(format!(
            "{} has a {}-byte payload over the {cap_bytes}-byte in-memory cap; stream it with a batch source",
            path.display(),
            header.payload_bytes()
        )));
    }
    let mapped = MappedBmat::open(path)?;
    let (rows, cols) = (mapped.rows(), mapped.cols());
    let mut data = vec![0f32; rows * cols];
    decode_f32(mapped.payload(), &mut data);
    Matrix::from_col_major(rows, cols, data)
}

fn decode_f32(bytes: &[u8], out: &mut [f32]) {
    debug_assert_eq!(bytes.len(), out.len() * 4);
    for (o, b) in out.iter_mut().zip(bytes.chunks_exact(4)) {
        *o = f32::from_le_bytes(b.try_into().unwrap());
    }
}

/// Streaming writer: header first, then columns in order.
pub struct BmatWriter {
    path: PathBuf,
    out: BufWriter<File>,
    rows: usize,
    cols: usize,
    written: usize,
    scratch: Vec<u8>,
}

impl BmatWriter {
    pub fn create(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if rows == 0 || cols == 0 {
            return Err(BearError::Parameter(format!(
                "BMAT dimensions must be positive, got {rows}x{cols}"
            )));
        }
        let file = File::create(&path).map_err(|e| BearError::storage(&path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        out.write_all(&BmatHeader::f32(rows as u64, cols as u64).encode())
            .map_err(|e| BearError::storage(&path, e))?;
        Ok(Self {
            path,
            out,
            rows,
            cols,
            written: 0,
            scratch: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn columns_written(&self) -> usize {
        self.written
    }

    pub fn push_column(&mut self, col: &[f32]) -> Result<()> {
        if col.len() != self.rows {
            return Err(BearError::Dimension(format!(
                "column of length {} written to a {}-row BMAT",
                col.len(),
                self.rows
            )));
        }
        if self.written == self.cols {
            return Err(BearError::Dimension(format!(
                "BMAT {} already holds its {} columns",
                self.path.display(),
                self.cols
            )));
        }
        self.scratch.clear();
        self.scratch.extend(col.iter().flat_map(|x| x.to_le_bytes()));
        self.out
            .write_all(&self.scratch)
            .map_err(|e| BearError::storage(&self.path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn push_columns(&mut self, m: &Matrix<f32>) -> Result<()> {
        for j in 0..m.cols() {
            self.push_column(m.col(j))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.cols {
            return Err(BearError::Dimension(format!(
                "BMAT {} closed after {} of {} columns",
                self.path.display(),
                self.written,
                self.cols
            )));
        }
        self.out
            .flush()
            .map_err(|e| BearError::storage(&self.path, e))
    }
}

/// Read-only memory map of a validated BMAT file.
pub struct MappedBmat {
    path: PathBuf,
    map: Mmap,
    header: BmatHeader,
}

impl MappedBmat {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let header = inspect_bmat(&path)?;
        let file = File::open(&path).map_err(|e| BearError::storage(&path, e))?;
        // SAFETY: the mapping is read-only; concurrent truncation of the file by
        // another process is outside this type's contract.
        let map = unsafe { Mmap::map(&file) }.map_err(|e| BearError::storage(&path, e))?;
        if map.len() as u64 != header.file_bytes() {
            return Err(BearError::format(&path, "file changed while opening"));
        }
        Ok(Self { path, map, header })
    }

    pub fn header(&self) -> BmatHeader {
        self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn payload(&self) -> &[u8] {
        &self.map[HEADER_LEN as usize..]
    }
}

impl ColumnStore<f32> for MappedBmat {
    fn rows(&self) -> usize {
        self.header.rows as usize
    }

    fn cols(&self) -> usize {
        self.header.cols as usize
    }

    fn copy_column(&self, j: usize, out: &mut [f32]) {
        let n = self.rows();
        let start = j * n * 4;
        decode_f32(&self.payload()[start..start + n * 4], out);
    }
}
