//! On-disk containers.
//!
//! Compute data travels in two little-endian binary formats with
//! explicit magics; payloads are 32-bit floats (compute paths stay
//! 64-bit, files narrow):
//!
//! ```text
//! SINO1: "SINO1" | version u32 | n_angles u32 | n_s u32 |
//!        s_spacing f64 | angles f64 x n_angles | payload f32 x (n_angles * n_s)
//! IMGF1: "IMGF1" | n u32 | pixel_size f64 | payload f32 x n^2
//! ```
//!
//! CSV sinograms (one row per angle, values comma-separated) are
//! accepted for interop with externally exported data; the detector
//! spacing comes from a flag and the angles are assumed evenly
//! distributed over [0, pi).
//!
//! Display export is 16-bit PGM, min/max normalized with a plain-text
//! sidecar recording the normalization; it is lossy and never read back
//! into compute paths. Edge maps export losslessly as {0, 65535} PGM.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use tomograd::{AngleSet, DetectorGrid, EdgeMap, GridSpec, ImageGrid, Sinogram};

const SINO_MAGIC: &[u8; 5] = b"SINO1";
const SINO_VERSION: u32 = 1;
const IMG_MAGIC: &[u8; 5] = b"IMGF1";

pub fn write_sinogram(sino: &Sinogram, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(21 + 8 * sino.n_angles() + 4 * sino.data().len());
    buf.extend_from_slice(SINO_MAGIC);
    buf.write_u32::<LittleEndian>(SINO_VERSION)?;
    buf.write_u32::<LittleEndian>(sino.n_angles() as u32)?;
    buf.write_u32::<LittleEndian>(sino.n_s() as u32)?;
    buf.write_f64::<LittleEndian>(sino.detector().s_spacing)?;
    for &a in sino.angle_set().angles() {
        buf.write_f64::<LittleEndian>(a)?;
    }
    for &v in sino.data() {
        buf.write_f32::<LittleEndian>(v as f32)?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cur = Cursor::new(&raw);
    let mut magic = [0u8; 5];
    cur.read_exact(&mut magic).context("sinogram header is truncated")?;
    if &magic != SINO_MAGIC {
        bail!(
            "bad magic {:?}: not a SINO1 file: {}",
            String::from_utf8_lossy(&magic),
            path.display()
        );
    }
    let version = cur.read_u32::<LittleEndian>().context("sinogram header is truncated")?;
    if version != SINO_VERSION {
        bail!("unsupported SINO1 version {version}");
    }
    let n_angles = cur.read_u32::<LittleEndian>().context("sinogram header is truncated")? as usize;
    let n_s = cur.read_u32::<LittleEndian>().context("sinogram header is truncated")? as usize;
    let s_spacing = cur.read_f64::<LittleEndian>().context("sinogram header is truncated")?;
    let mut angles = Vec::with_capacity(n_angles);
    for _ in 0..n_angles {
        angles.push(cur.read_f64::<LittleEndian>().context("angle list is truncated")?);
    }
    let expected = n_angles
        .checked_mul(n_s)
        .and_then(|n| n.checked_mul(4))
        .context("header dimensions overflow")?;
    let actual = raw.len() - cur.position() as usize;
    if actual != expected {
        bail!("truncated payload: expected {expected} bytes, found {actual}");
    }
    let mut data = Vec::with_capacity(n_angles * n_s);
    for _ in 0..n_angles * n_s {
        data.push(cur.read_f32::<LittleEndian>()? as f64);
    }
    let angles = AngleSet::new(angles).context("sinogram angle list is invalid")?;
    let detector = DetectorGrid::new(n_s, s_spacing).context("sinogram detector is invalid")?;
    Sinogram::from_vec(angles, detector, data).context("sinogram payload is invalid")
}

pub fn write_image(img: &ImageGrid, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(17 + 4 * img.data().len());
    buf.extend_from_slice(IMG_MAGIC);
    buf.write_u32::<LittleEndian>(img.n() as u32)?;
    buf.write_f64::<LittleEndian>(img.pixel_size())?;
    for &v in img.data() {
        buf.write_f32::<LittleEndian>(v as f32)?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cur = Cursor::new(&raw);
    let mut magic = [0u8; 5];
    cur.read_exact(&mut magic).context("image header is truncated")?;
    if &magic != IMG_MAGIC {
        bail!(
            "bad magic {:?}: not an IMGF1 file: {}",
            String::from_utf8_lossy(&magic),
            path.display()
        );
    }
    let n = cur.read_u32::<LittleEndian>().context("image header is truncated")? as usize;
    let pixel_size = cur.read_f64::<LittleEndian>().context("image header is truncated")?;
    let expected = n.checked_mul(n).and_then(|n| n.checked_mul(4)).context("image size overflows")?;
    let actual = raw.len() - cur.position() as usize;
    if actual != expected {
        bail!("truncated payload: expected {expected} bytes, found {actual}");
    }
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        data.push(cur.read_f32::<LittleEndian>()? as f64);
    }
    let spec = GridSpec::new(n, pixel_size).context("image header is invalid")?;
    ImageGrid::from_vec(spec, data).context("image payload is invalid")
}

/// One row per angle, comma-separated samples; angles are assumed evenly
/// distributed over [0, pi), the detector spacing comes from the caller.
pub fn import_sinogram_csv(path: &Path, s_spacing: f64) -> Result<Sinogram> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().with_context(|| {
                format!("row {idx}: field {col} ({field:?}) is not a number")
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!(
                    "row {idx} has {} values, expected {} (ragged rows)",
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("CSV holds no data rows");
    }
    let n_s = rows[0].len();
    let angles = AngleSet::evenly_distributed(rows.len())?;
    let detector = DetectorGrid::new(n_s, s_spacing)?;
    Sinogram::from_vec(angles, detector, rows.concat()).context("CSV payload is invalid")
}

/// Min/max-normalized 16-bit grayscale PGM plus a sidecar
/// `<path>.minmax.txt` recording the physical range. A constant image
/// maps to uniform mid-gray.
pub fn export_view(img: &ImageGrid, path: &Path) -> Result<()> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in img.data() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let quantize = |v: f64| -> u16 {
        if span == 0.0 {
            32768
        } else {
            ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
        }
    };
    write_pgm16(path, img.n(), img.n(), img.data().iter().map(|&v| quantize(v)))?;
    let sidecar = sidecar_path(path);
    fs::write(&sidecar, format!("min={lo:.17e}\nmax={hi:.17e}\n"))
        .with_context(|| format!("writing {}", sidecar.display()))
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".minmax.txt");
    std::path::PathBuf::from(s)
}

/// Edge maps export losslessly: 0 or 65535 per pixel.
pub fn export_edge_map(map: &EdgeMap, path: &Path) -> Result<()> {
    write_pgm16(
        path,
        map.n(),
        map.n(),
        map.data().iter().map(|&b| if b { 65535 } else { 0 }),
    )
}

fn write_pgm16(
    path: &Path,
    width: usize,
    height: usize,
    samples: impl Iterator<Item = u16>,
) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 2 * width * height);
    write!(buf, "P5\n{width} {height}\n65535\n")?;
    for s in samples {
        buf.extend_from_slice(&s.to_be_bytes()); // PGM samples are big-endian
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// Re-reads an edge map written by [`export_edge_map`] (any 16-bit PGM
/// works; samples above half of maxval count as edges).
pub fn read_edge_map_pgm(path: &Path) -> Result<EdgeMap> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pos = 0usize;
    let mut token = |raw: &[u8]| -> Result<String> {
        while pos < raw.len() && raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            bail!("PGM header is truncated");
        }
        Ok(String::from_utf8_lossy(&raw[start..pos]).into_owned())
    };
    if token(&raw)? != "P5" {
        bail!("not a binary PGM file: {}", path.display());
    }
    let width: usize = token(&raw)?.parse().context("bad PGM width")?;
    let height: usize = token(&raw)?.parse().context("bad PGM height")?;
    let maxval: u32 = token(&raw)?.parse().context("bad PGM maxval")?;
    if width != height {
        bail!("edge maps are square, file is {width}x{height}");
    }
    if maxval != 65535 {
        bail!("expected 16-bit PGM (maxval 65535), found {maxval}");
    }
    pos += 1; // single whitespace after maxval
    let expected = width * height * 2;
    let actual = raw.len() - pos;
    if actual != expected {
        bail!("truncated PGM payload: expected {expected} bytes, found {actual}");
    }
    let half = (maxval / 2) as u16;
    let data = raw[pos..]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) > half)
        .collect();
    EdgeMap::new(width, data).map_err(Into::into)
}
