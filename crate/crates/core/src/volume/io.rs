//! Raw volume files: a `<name>.json` header next to a `<name>.raw` payload of
//! little-endian values with no header bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LabelVolume, ScalarVolume, VolumeGeometry};
use crate::error::{Error, Result};

const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

/// Sidecar header. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub dtype: String,
    pub order: String,
}

impl VolumeHeader {
    fn new(geometry: &VolumeGeometry, dtype: Dtype) -> Self {
        Self {
            dims: geometry.dims(),
            spacing_mm: geometry.spacing(),
            dtype: match dtype {
                Dtype::F32 => "f32".into(),
                Dtype::U8 => "u8".into(),
            },
            order: ORDER_X_FASTEST.into(),
        }
    }

    pub fn parsed_dtype(&self) -> Result<Dtype> {
        match self.dtype.as_str() {
            "f32" => Ok(Dtype::F32),
            "u8" => Ok(Dtype::U8),
            other => Err(Error::UnknownDtype(other.to_string())),
        }
    }
}

/// Either kind of volume, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    Scalar(ScalarVolume),
    Label(LabelVolume),
}

impl AnyVolume {
    pub fn into_scalar(self) -> Result<ScalarVolume> {
        match self {
            AnyVolume::Scalar(v) => Ok(v),
            AnyVolume::Label(_) => Err(Error::InvalidArgument(
                "expected an f32 volume, found u8 labels".into(),
            )),
        }
    }

    pub fn into_labels(self) -> Result<LabelVolume> {
        match self {
            AnyVolume::Label(v) => Ok(v),
            AnyVolume::Scalar(_) => Err(Error::InvalidArgument(
                "expected a u8 label volume, found f32 data".into(),
            )),
        }
    }
}

/// Borrowed volume handed to [`save_volume`].
#[derive(Debug, Clone, Copy)]
pub enum VolumeRef<'a> {
    Scalar(&'a ScalarVolume),
    Label(&'a LabelVolume),
}

impl<'a> From<&'a ScalarVolume> for VolumeRef<'a> {
    fn from(v: &'a ScalarVolume) -> Self {
        VolumeRef::Scalar(v)
    }
}

impl<'a> From<&'a LabelVolume> for VolumeRef<'a> {
    fn from(v: &'a LabelVolume) -> Self {
        VolumeRef::Label(v)
    }
}

/// Resolves `name`, `name.json` or `name.raw` to the (header, payload) pair.
fn sidecar_paths(path: &Path) -> Result<(PathBuf, PathBuf)> {
    if path.as_os_str().is_empty() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty path"),
        ));
    }
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut header = stem.clone().into_os_string();
    header.push(".json");
    let mut payload = stem.into_os_string();
    payload.push(".raw");
    Ok((header.into(), payload.into()))
}

pub fn read_header(path: &Path) -> Result<VolumeHeader> {
    let (header_path, _) = sidecar_paths(path)?;
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let header: VolumeHeader = serde_json::from_str(&text).map_err(|e| Error::Header {
        path: header_path.clone(),
        reason: e.to_string(),
    })?;
    if header.order != ORDER_X_FASTEST {
        return Err(Error::Header {
            path: header_path,
            reason: format!("unsupported order {:?}", header.order),
        });
    }
    Ok(header)
}

/// Loads a volume. `num_classes` bounds the labels of a `u8` payload and is
/// ignored for `f32` payloads.
pub fn load_volume(path: impl AsRef<Path>, num_classes: u8) -> Result<AnyVolume> {
    let path = path.as_ref();
    let header = read_header(path)?;
    let (header_path, payload_path) = sidecar_paths(path)?;
    let geometry = VolumeGeometry::new(header.dims, header.spacing_mm).map_err(|e| Error::Header {
        path: header_path,
        reason: e.to_string(),
    })?;
    let dtype = header.parsed_dtype()?;
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let expected = geometry.len() * dtype.size();
    if bytes.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: bytes.len(),
        });
    }
    match dtype {
        Dtype::F32 => {
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            ScalarVolume::new(geometry, data).map(AnyVolume::Scalar)
        }
        Dtype::U8 => LabelVolume::new(geometry, num_classes, bytes).map(AnyVolume::Label),
    }
}

pub fn save_volume<'a>(vol: impl Into<VolumeRef<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let (header_path, payload_path) = sidecar_paths(path.as_ref())?;
    let (header, payload) = match vol.into() {
        VolumeRef::Scalar(v) => (
            VolumeHeader::new(v.geometry(), Dtype::F32),
            v.data().iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>(),
        ),
        VolumeRef::Label(v) => (VolumeHeader::new(v.geometry(), Dtype::U8), v.data().to_vec()),
    };
    let mut text = serde_json::to_string(&header).expect("header serializes");
    text.push('\n');
    fs::write(&header_path, text).map_err(|e| Error::io(&header_path, e))?;
    fs::write(&payload_path, payload).map_err(|e| Error::io(&payload_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize) -> VolumeGeometry {
        VolumeGeometry::new([n, n, n], [0.8, 0.8, 1.5]).unwrap()
    }

    #[test]
    fn constant_volume_payload_is_identical_words() {
        let dir = tempfile::tempdir().unwrap();
        let vol = ScalarVolume::filled(geom(4), 1.0).unwrap();
        save_volume(&vol, dir.path().join("ones")).unwrap();
        let payload = fs::read(dir.path().join("ones.raw")).unwrap();
        assert_eq!(payload.len(), 64 * 4);
        for word in payload.chunks_exact(4) {
            assert_eq!(word, 1.0f32.to_le_bytes());
        }
    }

    #[test]
    fn header_has_exact_keys_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let vol = LabelVolume::filled(geom(2), 5, 1).unwrap();
        save_volume(&vol, dir.path().join("lab.json")).unwrap();
        let text = fs::read_to_string(dir.path().join("lab.json")).unwrap();
        assert_eq!(
            text.trim_end(),
            r#"{"dims":[2,2,2],"spacing_mm":[0.8,0.8,1.5],"dtype":"u8","order":"x-fastest"}"#
        );
    }

    #[test]
    fn empty_path_is_io_error() {
        let vol = ScalarVolume::filled(geom(2), 0.0).unwrap();
        let err = save_volume(&vol, "").unwrap_err();
        assert!(err.is_io(), "{err}");
    }

    #[test]
    fn short_payload_is_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("short");
        fs::write(
            base.with_extension("json"),
            r#"{"dims":[2,2,2],"spacing_mm":[1,1,1],"dtype":"f32","order":"x-fastest"}"#,
        )
        .unwrap();
        let payload: Vec<u8> = (0..7).flat_map(|i| (i as f32).to_le_bytes()).collect();
        fs::write(base.with_extension("raw"), payload).unwrap();
        assert!(matches!(
            load_volume(&base, 5),
            Err(Error::LengthMismatch { expected: 32, found: 28 })
        ));
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("lab");
        fs::write(
            base.with_extension("json"),
            r#"{"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"u8","order":"x-fastest"}"#,
        )
        .unwrap();
        fs::write(base.with_extension("raw"), [7u8]).unwrap();
        assert!(matches!(
            load_volume(&base, 5),
            Err(Error::LabelOutOfRange { value: 7, .. })
        ));
    }

    #[test]
    fn unknown_dtype_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("v");
        fs::write(
            base.with_extension("json"),
            r#"{"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f64","order":"x-fastest"}"#,
        )
        .unwrap();
        fs::write(base.with_extension("raw"), [0u8; 8]).unwrap();
        assert!(matches!(load_volume(&base, 5), Err(Error::UnknownDtype(_))));

        fs::write(base.with_extension("json"), "{not json").unwrap();
        assert!(matches!(load_volume(&base, 5), Err(Error::Header { .. })));

        fs::write(
            base.with_extension("json"),
            r#"{"dims":[0,1,1],"spacing_mm":[1,1,1],"dtype":"u8","order":"x-fastest"}"#,
        )
        .unwrap();
        assert!(matches!(load_volume(&base, 5), Err(Error::Header { .. })));
    }

    #[test]
    fn nan_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("nan");
        fs::write(
            base.with_extension("json"),
            r#"{"dims":[2,1,1],"spacing_mm":[1,1,1],"dtype":"f32","order":"x-fastest"}"#,
        )
        .unwrap();
        let payload: Vec<u8> = [0.5f32, f32::NAN].iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(base.with_extension("raw"), payload).unwrap();
        assert!(matches!(load_volume(&base, 5), Err(Error::NonFinite { index: 1 })));
    }

    #[test]
    fn missing_file_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_volume(dir.path().join("nope"), 5).unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
    }
}
