//! Map and fixation file formats.
//!
//! * `.pgm`: binary PGM (`P5`), 8-bit. Values in `[0, 1]` are stored as
//!   `round(v * 255)`.
//! * `.fr32`: little-endian `f32` values in row-major order, with a JSON
//!   sidecar `<file>.json` holding `{"width": .., "height": ..}`.
//! * fixations: CSV with one `x,y` pair per line and no header. Coordinates
//!   are 0-based, `x` is the column and `y` the row, origin top-left.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{FixationSet, Point, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct RawSidecar {
    width: usize,
    height: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

/// Loads a map, choosing the format from the file extension.
pub fn load_map(path: &Path) -> Result<SaliencyMap> {
    match extension(path).as_deref() {
        Some("pgm") => load_pgm(path),
        Some("fr32") => load_fr32(path),
        _ => Err(Error::malformed(path, "unknown map extension (expected .pgm or .fr32)")),
    }
}

/// Saves a map, choosing the format from the file extension.
pub fn save_map(map: &SaliencyMap, path: &Path) -> Result<()> {
    match extension(path).as_deref() {
        Some("pgm") => save_pgm(map, path),
        Some("fr32") => save_fr32(map, path),
        _ => Err(Error::InvalidArgument(format!(
            "unknown map extension for {}",
            path.display()
        ))),
    }
}

/// Quantizes a `[0, 1]` map to 8-bit gray levels.
pub fn quantize_u8(map: &SaliencyMap) -> Result<Vec<u8>> {
    map.values()
        .iter()
        .map(|&v| {
            if (0.0..=1.0).contains(&v) {
                Ok((v * 255.0).round() as u8)
            } else {
                Err(Error::InvalidArgument(format!(
                    "value {v} outside [0, 1] cannot be stored as 8-bit"
                )))
            }
        })
        .collect()
}

pub fn encode_pgm(map: &SaliencyMap) -> Result<Vec<u8>> {
    let pixels = quantize_u8(map)?;
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

pub fn save_pgm(map: &SaliencyMap, path: &Path) -> Result<()> {
    write_file(path, &encode_pgm(map)?)
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<SaliencyMap> {
    let mut pos = 0usize;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        // Skip whitespace and comments.
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::malformed(path, "truncated PGM header"));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if header[0] != "P5" {
        return Err(Error::malformed(path, format!("bad magic {:?}", header[0])));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::malformed(path, format!("bad {what} {s:?}")))
    };
    let width = parse(&header[1], "width")?;
    let height = parse(&header[2], "height")?;
    let maxval = parse(&header[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::malformed(path, format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    if width == 0 || height == 0 {
        return Err(Error::malformed(path, "zero dimension"));
    }
    if bytes.len() < pos + n {
        return Err(Error::malformed(
            path,
            format!("raster truncated: expected {n} bytes, found {}", bytes.len().saturating_sub(pos)),
        ));
    }
    let scale = maxval as f64;
    let values = bytes[pos..pos + n].iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    SaliencyMap::new(width, height, values)
}

pub fn load_pgm(path: &Path) -> Result<SaliencyMap> {
    decode_pgm(&fs::read(path)?, path)
}

pub fn save_fr32(map: &SaliencyMap, path: &Path) -> Result<()> {
    let mut raw = Vec::with_capacity(map.len() * 4);
    for &v in map.values() {
        raw.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let sidecar = serde_json::to_vec(&RawSidecar {
        width: map.width(),
        height: map.height(),
    })?;
    write_file(&sidecar_path(path), &sidecar)?;
    write_file(path, &raw)
}

pub fn load_fr32(path: &Path) -> Result<SaliencyMap> {
    let side_path = sidecar_path(path);
    let side: RawSidecar = serde_json::from_slice(&fs::read(&side_path)?)
        .map_err(|e| Error::malformed(&side_path, e.to_string()))?;
    let raw = fs::read(path)?;
    let n = side.width * side.height;
    if raw.len() != n * 4 {
        return Err(Error::malformed(
            path,
            format!("expected {} bytes for {}x{}, found {}", n * 4, side.width, side.height, raw.len()),
        ));
    }
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    SaliencyMap::new(side.width, side.height, values).map_err(|e| Error::malformed(path, e.to_string()))
}

/// Parses `x,y` lines. With `bounds = Some((w, h))` every point must lie
/// inside the image.
pub fn parse_fixations(
    text: &str,
    image_id: &str,
    bounds: Option<(usize, usize)>,
    path: &Path,
) -> Result<FixationSet> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(xs), Some(ys), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::malformed(path, format!("line {}: expected `x,y`", lineno + 1)));
        };
        let coord = |s: &str| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| Error::malformed(path, format!("line {}: bad coordinate {s:?}", lineno + 1)))
        };
        let (x, y) = (coord(xs)?, coord(ys)?);
        if let Some((w, h)) = bounds {
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                return Err(Error::OutOfBounds {
                    x,
                    y,
                    width: w,
                    height: h,
                });
            }
        } else if x < 0 || y < 0 || x > u32::MAX as i64 || y > u32::MAX as i64 {
            return Err(Error::malformed(path, format!("line {}: negative coordinate", lineno + 1)));
        }
        points.push(Point::new(x as u32, y as u32));
    }
    Ok(FixationSet::new(image_id, points))
}

pub fn load_fixations(path: &Path, image_id: &str, bounds: Option<(usize, usize)>) -> Result<FixationSet> {
    let text = fs::read_to_string(path)?;
    parse_fixations(&text, image_id, bounds, path)
}

pub fn save_fixations(set: &FixationSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in &set.points {
        out.push_str(&format!("{},{}\n", p.x, p.y));
    }
    write_file(path, out.as_bytes())
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
