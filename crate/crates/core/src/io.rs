//! Bit-exact file formats.
//!
//! * Feature tensors (`CFMT`): magic `CFMT`, then `C`, `H`, `W` as
//!   little-endian `u32`, then `C·H·W` little-endian `f32`, channel-major then
//!   row-major.
//! * Binary masks: binary PGM (`P5`), maxval 255, pixel 255 = set, 0 = unset.
//! * Label maps (`CFML`): magic `CFML`, `W`, `H` as little-endian `u32`, then
//!   `H·W` little-endian `u16` category indices.
//! * Proposal index: JSON array of `{"id", "mask", "box"}` where `mask` is a
//!   path relative to the index file and `box` is `[x0, y0, x1, y1]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BinaryMask, FeatureMap, LabelMap, PixelBox, SegmentProposal};

const CFMT_MAGIC: &[u8; 4] = b"CFMT";
const CFML_MAGIC: &[u8; 4] = b"CFML";

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format("truncated header".into()))
}

pub fn encode_feature_map(f: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * f.values().len());
    out.extend_from_slice(CFMT_MAGIC);
    for d in [f.channels(), f.height(), f.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    if bytes.get(..4) != Some(CFMT_MAGIC.as_slice()) {
        return Err(Error::Format("bad magic, expected CFMT".into()));
    }
    let c = read_u32(bytes, 4)? as usize;
    let h = read_u32(bytes, 8)? as usize;
    let w = read_u32(bytes, 12)? as usize;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::Format(format!("zero dimension in header {c}x{h}x{w}")));
    }
    let n = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let payload = &bytes[16..];
    if payload.len() != n {
        return Err(Error::Format(format!(
            "payload is {} bytes, header needs {n}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureMap::new(c, h, w, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_mask_pgm(m: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", m.width(), m.height()).into_bytes();
    out.extend(m.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&c) = bytes.get(*pos) {
                    *pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("truncated PGM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|c| !c.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad PGM header field {:?}", String::from_utf8_lossy(tok))))
}

pub fn decode_mask_pgm(bytes: &[u8]) -> Result<BinaryMask> {
    let mut pos = 0;
    if pgm_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::Format("bad magic, expected P5".into()));
    }
    let w = pgm_number(bytes, &mut pos)?;
    let h = pgm_number(bytes, &mut pos)?;
    let maxval = pgm_number(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval must be 255, got {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(Error::Format(format!("zero dimension {w}x{h}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        return Err(Error::Format("truncated PGM header".into()));
    }
    pos += 1;
    let n = w
        .checked_mul(h)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() != n {
        return Err(Error::Format(format!(
            "raster is {} bytes, header needs {n}",
            raster.len()
        )));
    }
    let bits = raster
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0 => Ok(false),
            255 => Ok(true),
            other => Err(Error::Format(format!(
                "pixel {i} has value {other}; only 0 and 255 are allowed"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryMask::from_bits(w, h, bits)
}

pub fn encode_label_map(l: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 2 * l.labels().len());
    out.extend_from_slice(CFML_MAGIC);
    out.extend_from_slice(&(l.width() as u32).to_le_bytes());
    out.extend_from_slice(&(l.height() as u32).to_le_bytes());
    for v in l.labels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_label_map(bytes: &[u8]) -> Result<LabelMap> {
    if bytes.get(..4) != Some(CFML_MAGIC.as_slice()) {
        return Err(Error::Format("bad magic, expected CFML".into()));
    }
    let w = read_u32(bytes, 4)? as usize;
    let h = read_u32(bytes, 8)? as usize;
    if w == 0 || h == 0 {
        return Err(Error::Format(format!("zero dimension {w}x{h}")));
    }
    let n = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(2))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let payload = &bytes[12..];
    if payload.len() != n {
        return Err(Error::Format(format!(
            "payload is {} bytes, header needs {n}",
            payload.len()
        )));
    }
    let labels = payload
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    LabelMap::new(w, h, labels)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    decode_feature_map(&read(path.as_ref())?)
}

pub fn save_feature_map(path: impl AsRef<Path>, f: &FeatureMap) -> Result<()> {
    write(path.as_ref(), &encode_feature_map(f))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask_pgm(&read(path.as_ref())?)
}

pub fn save_mask(path: impl AsRef<Path>, m: &BinaryMask) -> Result<()> {
    write(path.as_ref(), &encode_mask_pgm(m))
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    decode_label_map(&read(path.as_ref())?)
}

pub fn save_label_map(path: impl AsRef<Path>, l: &LabelMap) -> Result<()> {
    write(path.as_ref(), &encode_label_map(l))
}

/// One entry of a proposal index file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalEntry {
    pub id: String,
    pub mask: String,
    #[serde(rename = "box")]
    pub bbox: PixelBox,
}

/// Loads a proposal index; mask paths resolve relative to the index file.
pub fn load_proposals(index: impl AsRef<Path>) -> Result<Vec<SegmentProposal>> {
    let index = index.as_ref();
    let entries: Vec<ProposalEntry> = serde_json::from_slice(&read(index)?)?;
    let base = index.parent().unwrap_or(Path::new(""));
    entries
        .into_iter()
        .map(|e| {
            let mask = load_mask(base.join(&e.mask))?;
            SegmentProposal::with_box(e.id, mask, e.bbox)
        })
        .collect()
}

/// Writes `proposals` as an index file plus one PGM per mask under
/// `<index dir>/<mask_dir>/`.
pub fn save_proposals(index: impl AsRef<Path>, mask_dir: &str, proposals: &[SegmentProposal]) -> Result<()> {
    let index = index.as_ref();
    let base = index.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::with_capacity(proposals.len());
    for (i, p) in proposals.iter().enumerate() {
        let rel = format!("{mask_dir}/{i:05}.pgm");
        save_mask(base.join(&rel), p.mask())?;
        entries.push(ProposalEntry {
            id: p.id().to_string(),
            mask: rel,
            bbox: p.bbox(),
        });
    }
    let mut json = serde_json::to_vec_pretty(&entries)?;
    json.push(b'\n');
    write(index, &json)
}
