//! Minimal NIfTI-1 single-file (`.nii`, `.nii.gz`) reader and writer.
//!
//! Only the header fields needed for quantification are interpreted: `dim`,
//! `pixdim`, `datatype`, `vox_offset`, the intensity scaling pair and the
//! spatial unit code. Orientation matrices are written as a plain scaling
//! and ignored on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{Dims, VoxelSpacing};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const MAGIC_SINGLE_FILE: &[u8; 4] = b"n+1\0";

pub(crate) const DT_UINT8: i16 = 2;
pub(crate) const DT_INT16: i16 = 4;
pub(crate) const DT_INT32: i16 = 8;
pub(crate) const DT_FLOAT32: i16 = 16;
pub(crate) const DT_FLOAT64: i16 = 64;

/// Raw image payload of a NIfTI file, decoded to f64.
#[derive(Debug, Clone)]
pub(crate) struct NiftiImage {
    pub dims: Dims,
    pub spacing: VoxelSpacing,
    pub values: Vec<f64>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        format: "NIfTI-1",
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut raw)
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(Cursor::new(raw))
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub(crate) fn read(path: &Path) -> Result<NiftiImage> {
    let bytes = read_all(path)?;
    if bytes.len() < HEADER_SIZE {
        return Err(format_err(path, "file shorter than the 348-byte header"));
    }
    if LittleEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        decode::<LittleEndian>(path, &bytes)
    } else if BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        decode::<BigEndian>(path, &bytes)
    } else {
        Err(format_err(path, "sizeof_hdr is not 348"))
    }
}

fn decode<E: ByteOrder>(path: &Path, bytes: &[u8]) -> Result<NiftiImage> {
    if &bytes[344..348] != MAGIC_SINGLE_FILE {
        return Err(format_err(path, "missing n+1 magic (only single-file NIfTI-1 is supported)"));
    }
    let mut dim = [0i16; 8];
    for (n, d) in dim.iter_mut().enumerate() {
        *d = E::read_i16(&bytes[40 + 2 * n..]);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(format_err(path, format!("dim[0] = {ndim} out of range")));
    }
    let extent = |axis: usize| -> Result<usize> {
        if axis as i16 > ndim {
            return Ok(1);
        }
        usize::try_from(dim[axis])
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format_err(path, format!("dim[{axis}] = {} is not positive", dim[axis])))
    };
    let (nx, ny, nz) = (extent(1)?, extent(2)?, extent(3)?);
    for axis in 4..=7 {
        if extent(axis)? != 1 {
            return Err(format_err(path, "only 3D volumes are supported"));
        }
    }
    let dims = Dims::new(nx, ny, nz)?;

    let unit_scale = match bytes[123] & 0x07 {
        1 => 1000.0, // metres
        3 => 0.001,  // micrometres
        _ => 1.0,
    };
    let pix = |n: usize| f64::from(E::read_f32(&bytes[76 + 4 * n..])) * unit_scale;
    let spacing = VoxelSpacing::new(pix(1), pix(2), pix(3))?;

    let datatype = E::read_i16(&bytes[70..]);
    let vox_offset = E::read_f32(&bytes[108..]);
    let offset = if vox_offset >= HEADER_SIZE as f32 {
        vox_offset as usize
    } else {
        VOX_OFFSET
    };
    let slope = E::read_f32(&bytes[112..]);
    let inter = E::read_f32(&bytes[116..]);

    let width = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_INT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(format_err(path, format!("unsupported datatype code {other}"))),
    };
    let n = dims.len();
    let payload = bytes
        .get(offset..)
        .filter(|p| p.len() >= n * width)
        .ok_or_else(|| {
            format_err(
                path,
                format!("expected {} data bytes after offset {offset}", n * width),
            )
        })?;

    let mut values: Vec<f64> = match datatype {
        DT_UINT8 => payload[..n].iter().map(|&b| f64::from(b)).collect(),
        DT_INT16 => payload.chunks_exact(2).take(n).map(|c| f64::from(E::read_i16(c))).collect(),
        DT_INT32 => payload.chunks_exact(4).take(n).map(|c| f64::from(E::read_i32(c))).collect(),
        DT_FLOAT32 => payload.chunks_exact(4).take(n).map(|c| f64::from(E::read_f32(c))).collect(),
        _ => payload.chunks_exact(8).take(n).map(E::read_f64).collect(),
    };
    if slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0) {
        let (s, b) = (f64::from(slope), f64::from(inter));
        values.iter_mut().for_each(|v| *v = *v * s + b);
    }
    Ok(NiftiImage {
        dims,
        spacing,
        values,
    })
}

/// Payload encodings the writer supports.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Payload<'a> {
    // Compact output for callers that can afford the precision loss.
    #[allow(dead_code)]
    Float32(&'a [f64]),
    Float64(&'a [f64]),
    Uint8(&'a [u8]),
}

pub(crate) fn write(path: &Path, dims: Dims, spacing: VoxelSpacing, payload: Payload<'_>) -> Result<()> {
    let mut buf = header(dims, spacing, &payload);
    match payload {
        Payload::Float32(values) => {
            for &v in values {
                buf.write_f32::<LittleEndian>(v as f32).expect("vec write");
            }
        }
        Payload::Float64(values) => {
            for &v in values {
                buf.write_f64::<LittleEndian>(v).expect("vec write");
            }
        }
        Payload::Uint8(values) => buf.extend_from_slice(values),
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = path
        .file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".gz"));
    let result = if gz {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        enc.write_all(&buf).and_then(|_| enc.finish()).and_then(|mut w| w.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&buf).and_then(|_| w.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

fn header(dims: Dims, spacing: VoxelSpacing, payload: &Payload<'_>) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let (datatype, bitpix) = match payload {
        Payload::Float32(_) => (DT_FLOAT32, 32),
        Payload::Float64(_) => (DT_FLOAT64, 64),
        Payload::Uint8(_) => (DT_UINT8, 8),
    };
    LittleEndian::write_i32(&mut h[0..], HEADER_SIZE as i32);
    h[38] = b'r';
    let dim: [i16; 8] = [3, dims.nx as i16, dims.ny as i16, dims.nz as i16, 1, 1, 1, 1];
    for (n, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut h[40 + 2 * n..], *d);
    }
    LittleEndian::write_i16(&mut h[70..], datatype);
    LittleEndian::write_i16(&mut h[72..], bitpix);
    let [sx, sy, sz] = spacing.as_array();
    let pixdim: [f32; 8] = [1.0, sx as f32, sy as f32, sz as f32, 1.0, 1.0, 1.0, 1.0];
    for (n, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[76 + 4 * n..], *p);
    }
    LittleEndian::write_f32(&mut h[108..], VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut h[112..], 1.0);
    h[123] = 2; // NIFTI_UNITS_MM
    LittleEndian::write_i16(&mut h[254..], 1); // sform_code
    for (row, s) in [(280usize, sx), (296, sy), (312, sz)] {
        let axis = (row - 280) / 16;
        LittleEndian::write_f32(&mut h[row + 4 * axis..], s as f32);
    }
    h[344..348].copy_from_slice(MAGIC_SINGLE_FILE);
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip_plain_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let dims = Dims::new(3, 2, 2).unwrap();
        let spacing = VoxelSpacing::new(3.64, 3.64, 3.27).unwrap();
        let values: Vec<f64> = (0..12).map(|v| v as f64 * 0.5).collect();
        for name in ["a.nii", "a.nii.gz"] {
            let path = dir.path().join(name);
            write(&path, dims, spacing, Payload::Float32(&values)).unwrap();
            let img = read(&path).unwrap();
            assert_eq!(img.dims, dims);
            assert_eq!(img.values, values);
            assert!((img.spacing.sx() - 3.64).abs() < 1e-6);
            assert!((img.spacing.sz() - 3.27).abs() < 1e-6);
        }
    }

    #[test]
    fn float64_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.nii.gz");
        let dims = Dims::new(5, 1, 1).unwrap();
        let values = vec![0.1, 1.0 / 3.0, 7.123_456_789_012_345, 0.0, 1e-300];
        write(&path, dims, VoxelSpacing::isotropic(2.0).unwrap(), Payload::Float64(&values)).unwrap();
        assert_eq!(read(&path).unwrap().values, values);
    }

    #[test]
    fn uint8_mask_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.nii.gz");
        let dims = Dims::new(2, 2, 1).unwrap();
        let spacing = VoxelSpacing::isotropic(2.0).unwrap();
        write(&path, dims, spacing, Payload::Uint8(&[0, 1, 1, 0])).unwrap();
        let img = read(&path).unwrap();
        assert_eq!(img.values, vec![0.0, 1.0, 1.0, 0.0]);
    }

    fn handmade(datatype: i16, payload: &[u8], slope: f32, inter: f32) -> Vec<u8> {
        let mut h = vec![0u8; VOX_OFFSET];
        LittleEndian::write_i32(&mut h[0..], 348);
        for (n, d) in [3i16, 2, 1, 1].iter().enumerate() {
            LittleEndian::write_i16(&mut h[40 + 2 * n..], *d);
        }
        LittleEndian::write_i16(&mut h[70..], datatype);
        for n in 1..4 {
            LittleEndian::write_f32(&mut h[76 + 4 * n..], 1.5);
        }
        LittleEndian::write_f32(&mut h[108..], 352.0);
        LittleEndian::write_f32(&mut h[112..], slope);
        LittleEndian::write_f32(&mut h[116..], inter);
        h[344..348].copy_from_slice(MAGIC_SINGLE_FILE);
        h.extend_from_slice(payload);
        h
    }

    #[test]
    fn int16_with_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ct.nii");
        let mut payload = vec![0u8; 4];
        LittleEndian::write_i16(&mut payload[0..], -1000);
        LittleEndian::write_i16(&mut payload[2..], 300);
        std::fs::write(&path, handmade(DT_INT16, &payload, 2.0, 10.0)).unwrap();
        let img = read(&path).unwrap();
        assert_eq!(img.values, vec![-1990.0, 610.0]);
        assert_eq!(img.spacing.sy(), 1.5);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.nii");
        std::fs::write(&path, handmade(DT_FLOAT32, &[0u8; 4], 0.0, 0.0)).unwrap();
        assert!(matches!(read(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn non_positive_spacing_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.nii");
        let mut bytes = handmade(DT_UINT8, &[0, 1], 0.0, 0.0);
        LittleEndian::write_f32(&mut bytes[80..], 0.0);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read(&path), Err(Error::InvalidSpacing(_))));
    }
}
