//! Uncompressed single-file NIfTI-1 (`.nii`) reading and writing.
//!
//! Only little-endian files with three spatial dimensions and uint8, int16 or
//! float32 voxels are accepted. Orientation fields (qform/sform codes,
//! quaternion, sform rows) are carried through verbatim but never interpreted;
//! the world origin is taken from `qoffset_{x,y,z}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelMap, ProbMap, Spatial, Volume, Xform, LABELS};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const VOX_OFFSET: usize = 352;
pub const MAGIC: [u8; 4] = *b"n+1\0";

const NIFTI2_HEADER_SIZE: i32 = 540;
const UNITS_MM: u8 = 2;

mod offset {
    pub const SIZEOF_HDR: usize = 0;
    pub const REGULAR: usize = 38;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    F32,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            DataType::U8 => 2,
            DataType::I16 => 4,
            DataType::F32 => 16,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(DataType::U8),
            4 => Ok(DataType::I16),
            16 => Ok(DataType::F32),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::F32 => 4,
        }
    }
}

/// Decoded image before it is interpreted as a [`Volume`] or [`LabelMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiImage {
    pub geometry: Geometry,
    pub dtype: DataType,
    pub values: Vec<f64>,
}

fn i16_at(b: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([b[at], b[at + 1]])
}

fn i32_at(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<NiftiImage> {
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        return Err(Error::UnsupportedFormat(
            "gzip-compressed NIfTI; decompress to .nii first",
        ));
    }
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile {
            expected: HEADER_SIZE,
            actual: bytes.len(),
        });
    }
    let sizeof_hdr = i32_at(bytes, offset::SIZEOF_HDR);
    let swapped = sizeof_hdr.swap_bytes();
    if sizeof_hdr != HEADER_SIZE as i32 {
        if swapped == HEADER_SIZE as i32 || swapped == NIFTI2_HEADER_SIZE {
            return Err(Error::UnsupportedEncoding("big-endian NIfTI"));
        }
        if sizeof_hdr == NIFTI2_HEADER_SIZE {
            return Err(Error::UnsupportedFormat("NIfTI-2"));
        }
    }
    if bytes.len() < HEADER_SIZE {
        return Err(Error::TruncatedFile {
            expected: HEADER_SIZE,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[offset::MAGIC..offset::MAGIC + 4].try_into().unwrap();
    if sizeof_hdr != HEADER_SIZE as i32 || magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }

    let dim: Vec<i16> = (0..8).map(|k| i16_at(bytes, offset::DIM + 2 * k)).collect();
    let ndim = dim[0];
    if !(3..=7).contains(&ndim) || dim[4..=ndim as usize].iter().any(|&d| d != 1) {
        return Err(Error::InvalidDimensions(format!(
            "expected a 3-D image, got dim {dim:?}"
        )));
    }
    if dim[1..=3].iter().any(|&d| d < 1) {
        return Err(Error::InvalidDimensions(format!("non-positive extent in {dim:?}")));
    }
    let shape = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let dtype = DataType::from_code(i16_at(bytes, offset::DATATYPE))?;
    let pixdim: Vec<f32> = (0..8).map(|k| f32_at(bytes, offset::PIXDIM + 4 * k)).collect();
    let spacing = [pixdim[1] as f64, pixdim[2] as f64, pixdim[3] as f64];
    let origin = [0, 1, 2].map(|k| f32_at(bytes, offset::QOFFSET_X + 4 * k) as f64);
    let mut geometry = Geometry::new(shape, spacing, origin)?;
    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = f32_at(bytes, offset::SROW_X + 16 * r + 4 * c);
        }
    }
    geometry.xform = Xform {
        qform_code: i16_at(bytes, offset::QFORM_CODE),
        sform_code: i16_at(bytes, offset::SFORM_CODE),
        qfac: pixdim[0],
        quatern: [0, 1, 2].map(|k| f32_at(bytes, offset::QUATERN_B + 4 * k)),
        srow,
    };

    let vox_offset = f32_at(bytes, offset::VOX_OFFSET);
    if !(vox_offset >= VOX_OFFSET as f32) || vox_offset.fract() != 0.0 {
        return Err(Error::InvalidDimensions(format!(
            "vox_offset {vox_offset} must be an integer >= {VOX_OFFSET}"
        )));
    }
    let start = vox_offset as usize;
    let n = geometry.len();
    let end = start + n * dtype.size();
    if bytes.len() < end {
        return Err(Error::TruncatedFile {
            expected: end,
            actual: bytes.len(),
        });
    }
    let raw = &bytes[start..end];
    let mut values: Vec<f64> = match dtype {
        DataType::U8 => raw.iter().map(|&b| b as f64).collect(),
        DataType::I16 => raw
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
        DataType::F32 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };

    let slope = f32_at(bytes, offset::SCL_SLOPE) as f64;
    let inter = f32_at(bytes, offset::SCL_INTER) as f64;
    if slope != 0.0 && slope.is_finite() && inter.is_finite() && (slope != 1.0 || inter != 0.0) {
        for v in &mut values {
            *v = *v * slope + inter;
        }
    }

    Ok(NiftiImage {
        geometry,
        dtype,
        values,
    })
}

pub fn read_volume(bytes: &[u8]) -> Result<Volume> {
    let img = decode(bytes)?;
    Volume::new(img.geometry, img.values)
}

pub fn read_labels(bytes: &[u8]) -> Result<LabelMap> {
    let img = decode(bytes)?;
    let mut data = Vec::with_capacity(img.values.len());
    for v in img.values {
        if !LABELS.iter().any(|&l| l as f64 == v) {
            return Err(Error::InvalidLabel(v));
        }
        data.push(v as u8);
    }
    LabelMap::new(img.geometry, data)
}

fn header(geom: &Geometry, dtype: DataType) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut Vec<u8>, at: usize, v: i16| h[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, at: usize, v: f32| h[at..at + 4].copy_from_slice(&v.to_le_bytes());

    h[offset::SIZEOF_HDR..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[offset::REGULAR] = b'r';
    let dims = [3, geom.shape[0], geom.shape[1], geom.shape[2], 1, 1, 1, 1];
    for (k, d) in dims.into_iter().enumerate() {
        put_i16(&mut h, offset::DIM + 2 * k, d as i16);
    }
    put_i16(&mut h, offset::DATATYPE, dtype.code());
    put_i16(&mut h, offset::BITPIX, (dtype.size() * 8) as i16);
    let x = &geom.xform;
    let pixdim = [
        x.qfac,
        geom.spacing[0] as f32,
        geom.spacing[1] as f32,
        geom.spacing[2] as f32,
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (k, p) in pixdim.into_iter().enumerate() {
        put_f32(&mut h, offset::PIXDIM + 4 * k, p);
    }
    put_f32(&mut h, offset::VOX_OFFSET, VOX_OFFSET as f32);
    put_f32(&mut h, offset::SCL_SLOPE, 1.0);
    put_f32(&mut h, offset::SCL_INTER, 0.0);
    h[offset::XYZT_UNITS] = UNITS_MM;
    put_i16(&mut h, offset::QFORM_CODE, x.qform_code);
    put_i16(&mut h, offset::SFORM_CODE, x.sform_code);
    for k in 0..3 {
        put_f32(&mut h, offset::QUATERN_B + 4 * k, x.quatern[k]);
        put_f32(&mut h, offset::QOFFSET_X + 4 * k, geom.origin[k] as f32);
    }
    for (r, row) in x.srow.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            put_f32(&mut h, offset::SROW_X + 16 * r + 4 * c, v);
        }
    }
    h[offset::MAGIC..offset::MAGIC + 4].copy_from_slice(&MAGIC);
    h
}

/// Encodes an image in its own dtype. Every value must be exactly
/// representable in that dtype.
pub fn encode(img: &NiftiImage) -> Result<Vec<u8>> {
    if img.values.len() != img.geometry.len() {
        return Err(Error::InvalidData(format!(
            "{} values for shape {:?}",
            img.values.len(),
            img.geometry.shape
        )));
    }
    let mut out = header(&img.geometry, img.dtype);
    out.reserve(img.values.len() * img.dtype.size());
    for &v in &img.values {
        let exact = match img.dtype {
            DataType::U8 => (v as u8) as f64 == v,
            DataType::I16 => (v as i16) as f64 == v,
            DataType::F32 => (v as f32) as f64 == v,
        };
        if !exact {
            return Err(Error::InvalidData(format!("{v} is not representable as {:?}", img.dtype)));
        }
        match img.dtype {
            DataType::U8 => out.push(v as u8),
            DataType::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            DataType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    Ok(out)
}

/// Encodes a volume as float32. Values that are not representable in
/// float32 are rounded to nearest.
pub fn write_volume(v: &Volume) -> Vec<u8> {
    let mut out = header(v.geometry(), DataType::F32);
    out.reserve(v.data().len() * 4);
    for &x in v.data() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

/// Encodes a label map as uint8.
pub fn write_labels(m: &LabelMap) -> Vec<u8> {
    let mut out = header(m.geometry(), DataType::U8);
    out.extend_from_slice(m.data());
    out
}

pub fn load_volume(path: &Path) -> Result<Volume> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_volume(&bytes)
}

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_labels(&bytes)
}

pub fn save_volume(path: &Path, v: &Volume) -> Result<()> {
    fs::write(path, write_volume(v)).map_err(|e| Error::io(path, e))
}

pub fn save_labels(path: &Path, m: &LabelMap) -> Result<()> {
    fs::write(path, write_labels(m)).map_err(|e| Error::io(path, e))
}

/// Sidecar listing one NIfTI file per probability channel. Paths are relative
/// to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbManifest {
    pub channels: Vec<u8>,
    pub files: Vec<PathBuf>,
}

impl ProbManifest {
    pub fn validate(&self) -> Result<()> {
        if self.channels != LABELS {
            return Err(Error::Config(format!(
                "probability manifest channels must be {LABELS:?}, got {:?}",
                self.channels
            )));
        }
        if self.files.len() != LABELS.len() {
            return Err(Error::Config(format!(
                "probability manifest lists {} files for {} channels",
                self.files.len(),
                LABELS.len()
            )));
        }
        Ok(())
    }
}

/// Writes `<stem>_c{label}.nii` per channel plus `<stem>.json`; returns the manifest path.
pub fn save_probmap(dir: &Path, stem: &str, p: &ProbMap) -> Result<PathBuf> {
    let mut files = Vec::with_capacity(LABELS.len());
    for (c, label) in LABELS.iter().enumerate() {
        let name = PathBuf::from(format!("{stem}_c{label}.nii"));
        let v = Volume::new(p.geometry().clone(), p.channel(c).to_vec())?;
        save_volume(&dir.join(&name), &v)?;
        files.push(name);
    }
    let manifest = ProbManifest {
        channels: LABELS.to_vec(),
        files,
    };
    let path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_probmap(manifest_path: &Path) -> Result<ProbMap> {
    let text = fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: ProbManifest = serde_json::from_slice(&text)?;
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut geom: Option<Geometry> = None;
    let mut data = Vec::new();
    for file in &manifest.files {
        let v = load_volume(&base.join(file))?;
        match &geom {
            None => geom = Some(v.geometry().clone()),
            Some(g) => g.ensure_same(v.geometry())?,
        }
        data.extend_from_slice(v.data());
    }
    // float32 storage can shift channel sums by a few ulps
    Ok(ProbMap::from_unnormalized(geom.expect("four channels"), data))
}
