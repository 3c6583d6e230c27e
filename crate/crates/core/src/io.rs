//! On-disk formats: point clouds as text, complex fields and coefficient
//! tables as little-endian binaries, images as PGM/PBM, and the key=value
//! run configuration.
//!
//! Every writer goes through a sibling temp file and a rename, so an error
//! mid-write never leaves a partial file at the destination. All binary
//! round trips are bit-exact; point text uses 17 significant digits, which
//! is lossless for doubles.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::config::{OpticalConfig, PointCloud, PointSource};
use crate::error::{CghError, Result};
use crate::field::{BitField, ComplexField, RealField};
use crate::psf::{LutBuildStats, WasabiLut};
use crate::wavelet::{Band, CoeffEntry, FilterKind, SparseCoeffs};
use crate::Real;

fn format_err(path: &Path, msg: impl Into<String>) -> CghError {
    CghError::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CghError {
    CghError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| format_err(path, format!("cannot open: {e}")))
}

/// Run `body` against a temp file next to `path`, then move it into place.
/// On any error the temp file is removed and the destination is untouched.
fn atomic_write<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let written = (|| {
        let file =
            File::create(&tmp).map_err(|e| format_err(&tmp, format!("cannot create: {e}")))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        Ok(())
    })();
    match written {
        Ok(()) => {
            fs::rename(&tmp, path)
                .map_err(|e| format_err(path, format!("cannot move finished file: {e}")))?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Read "x y z a" lines: meters, meters, meters, relative amplitude.
/// `#` starts a comment, blank lines are skipped, order is preserved.
pub fn load_points<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    let reader = BufReader::new(open(path)?);
    let mut points = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let no = idx + 1;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(
                path,
                no,
                format!("expected 4 values (x y z a), found {}", toks.len()),
            ));
        }
        let mut vals = [0.0f64; 4];
        for (slot, (tok, name)) in vals
            .iter_mut()
            .zip(toks.iter().zip(["x", "y", "z", "a"]))
        {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, no, format!("bad {name} value {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, no, format!("{name} value {tok:?} is not finite")));
            }
            *slot = v;
        }
        points.push(PointSource {
            x: crate::real(vals[0]),
            y: crate::real(vals[1]),
            z: crate::real(vals[2]),
            a: crate::real(vals[3]),
        });
    }
    Ok(PointCloud::new(points))
}

/// Write a point cloud in the text format [`load_points`] reads.
pub fn save_points<T: Real>(path: &Path, cloud: &PointCloud<T>) -> Result<()> {
    atomic_write(path, |w| {
        for p in &cloud.points {
            writeln!(
                w,
                "{:.16e} {:.16e} {:.16e} {:.16e}",
                p.x.to_f64().unwrap_or(f64::NAN),
                p.y.to_f64().unwrap_or(f64::NAN),
                p.z.to_f64().unwrap_or(f64::NAN),
                p.a.to_f64().unwrap_or(f64::NAN),
            )?;
        }
        Ok(())
    })
}

const FIELD_MAGIC: &[u8; 4] = b"HFLD";
const FIELD_VERSION: u32 = 1;
const FIELD_HEADER_LEN: u64 = 32;

/// A complex field file: the samples plus the optical scale they were
/// computed at.
#[derive(Debug, Clone)]
pub struct FieldFile<T: Real = f64> {
    pub field: ComplexField<T>,
    pub pitch: f64,
    pub wavelength: f64,
}

/// Persist a complex field with its pixel pitch and wavelength.
pub fn write_field<T: Real>(
    path: &Path,
    field: &ComplexField<T>,
    pitch: f64,
    wavelength: f64,
) -> Result<()> {
    atomic_write(path, |w| {
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&FIELD_VERSION.to_le_bytes())?;
        w.write_all(&(field.width() as u32).to_le_bytes())?;
        w.write_all(&(field.height() as u32).to_le_bytes())?;
        w.write_all(&pitch.to_le_bytes())?;
        w.write_all(&wavelength.to_le_bytes())?;
        for v in field.as_slice() {
            w.write_all(&v.re.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
            w.write_all(&v.im.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
        }
        Ok(())
    })
}

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| format_err(path, format!("file ends inside the header ({what})")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read, path: &Path, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| format_err(path, format!("file ends inside the header ({what})")))?;
    Ok(f64::from_le_bytes(b))
}

/// Read a complex field file written by [`write_field`].
pub fn read_field<T: Real>(path: &Path) -> Result<FieldFile<T>> {
    let file = open(path)?;
    let actual_len = file
        .metadata()
        .map_err(|e| format_err(path, format!("cannot stat: {e}")))?
        .len();
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| format_err(path, "file ends inside the header (magic)"))?;
    if &magic != FIELD_MAGIC {
        return Err(format_err(path, "not a complex field file (bad magic)"));
    }
    let version = read_u32(&mut r, path, "version")?;
    if version != FIELD_VERSION {
        return Err(format_err(
            path,
            format!("field format version {version} unsupported (expected {FIELD_VERSION})"),
        ));
    }
    let width = read_u32(&mut r, path, "width")? as usize;
    let height = read_u32(&mut r, path, "height")? as usize;
    let pitch = read_f64(&mut r, path, "pitch")?;
    let wavelength = read_f64(&mut r, path, "wavelength")?;
    let expected_len = FIELD_HEADER_LEN + (width as u64) * (height as u64) * 16;
    if actual_len != expected_len {
        return Err(format_err(
            path,
            format!("payload truncated: expected {expected_len} bytes, found {actual_len}"),
        ));
    }
    let mut data = Vec::with_capacity(width * height);
    let mut row = vec![0u8; width * 16];
    for _ in 0..height {
        r.read_exact(&mut row)
            .map_err(|_| format_err(path, "payload shorter than the header promises"))?;
        for px in row.chunks_exact(16) {
            let re = f64::from_le_bytes(px[0..8].try_into().expect("8-byte chunk"));
            let im = f64::from_le_bytes(px[8..16].try_into().expect("8-byte chunk"));
            data.push(Complex::new(crate::real::<T>(re), crate::real::<T>(im)));
        }
    }
    Ok(FieldFile {
        field: ComplexField::from_vec(width, height, data)?,
        pitch,
        wavelength,
    })
}

const LUT_MAGIC: &[u8; 4] = b"WLUT";
const LUT_VERSION: u32 = 1;

/// Persist a coefficient table. The 32-byte config hash in the header ties
/// the file to the exact configuration that built it.
pub fn write_lut<T: Real>(path: &Path, lut: &WasabiLut<T>) -> Result<()> {
    atomic_write(path, |w| {
        w.write_all(LUT_MAGIC)?;
        w.write_all(&LUT_VERSION.to_le_bytes())?;
        w.write_all(&lut.cfg_hash())?;
        w.write_all(&(lut.n_z() as u32).to_le_bytes())?;
        w.write_all(&(lut.levels() as u32).to_le_bytes())?;
        w.write_all(&lut.gamma().to_le_bytes())?;
        for list in lut.lists() {
            w.write_all(&(list.len() as u32).to_le_bytes())?;
            for e in &list.entries {
                w.write_all(&[e.band.code(), e.level])?;
                w.write_all(&e.m.to_le_bytes())?;
                w.write_all(&e.n.to_le_bytes())?;
                w.write_all(&e.c.re.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
                w.write_all(&e.c.im.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
            }
        }
        Ok(())
    })
}

/// Load a coefficient table and verify it matches `cfg`. A table built from
/// any other configuration is rejected as stale.
pub fn load_lut<T: Real>(path: &Path, cfg: &OpticalConfig<T>) -> Result<WasabiLut<T>> {
    cfg.validate()?;
    let mut r = BufReader::new(open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| format_err(path, "file ends inside the header (magic)"))?;
    if &magic != LUT_MAGIC {
        return Err(format_err(path, "not a coefficient table file (bad magic)"));
    }
    let version = read_u32(&mut r, path, "version")?;
    if version != LUT_VERSION {
        return Err(format_err(
            path,
            format!("table format version {version} unsupported (expected {LUT_VERSION})"),
        ));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)
        .map_err(|_| format_err(path, "file ends inside the header (config hash)"))?;
    if hash != cfg.lut_config_hash() {
        return Err(CghError::StaleLut);
    }
    let n_z = read_u32(&mut r, path, "slice count")? as usize;
    let levels = read_u32(&mut r, path, "level count")? as usize;
    let _gamma = read_f64(&mut r, path, "gamma")?;
    if n_z != cfg.n_z || levels != cfg.level {
        return Err(format_err(
            path,
            "header shape disagrees with the matching config hash; file is corrupt",
        ));
    }
    let list_count = cfg.n_z * cfg.classes_per_slice();
    let mut lists = Vec::with_capacity(list_count);
    let mut total_entries = 0usize;
    for _ in 0..list_count {
        let count = read_u32(&mut r, path, "entry count")? as usize;
        let mut entries = Vec::with_capacity(count);
        let mut rec = [0u8; 26];
        for _ in 0..count {
            r.read_exact(&mut rec)
                .map_err(|_| format_err(path, "file ends inside a coefficient record"))?;
            let band = Band::from_code(rec[0])
                .map_err(|e| format_err(path, format!("corrupt record: {e}")))?;
            entries.push(CoeffEntry {
                band,
                level: rec[1],
                m: u32::from_le_bytes(rec[2..6].try_into().expect("4-byte chunk")),
                n: u32::from_le_bytes(rec[6..10].try_into().expect("4-byte chunk")),
                c: Complex::new(
                    crate::real::<T>(f64::from_le_bytes(
                        rec[10..18].try_into().expect("8-byte chunk"),
                    )),
                    crate::real::<T>(f64::from_le_bytes(
                        rec[18..26].try_into().expect("8-byte chunk"),
                    )),
                ),
            });
        }
        total_entries += entries.len();
        lists.push(SparseCoeffs {
            grid: cfg.n_h,
            levels: cfg.level,
            entries,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(format_err(path, "trailing bytes after the last record"));
    }
    let stats = LutBuildStats {
        lists: list_count,
        total_entries,
        clamped_lists: 0,
        seconds: 0.0,
    };
    WasabiLut::from_parts(cfg, lists, stats)
        .map_err(|e| format_err(path, format!("corrupt table: {e}")))
}

/// Write an 8-bit grayscale PGM (P5), min-max normalized; a constant plane
/// becomes mid-gray.
pub fn write_pgm<T: Real>(path: &Path, plane: &RealField<T>) -> Result<()> {
    atomic_write(path, |w| {
        write!(w, "P5\n{} {}\n255\n", plane.width(), plane.height())?;
        let (mn, mx) = plane.min_max();
        let (mn, mx) = (
            mn.to_f64().unwrap_or(f64::NAN),
            mx.to_f64().unwrap_or(f64::NAN),
        );
        if mx > mn {
            let scale = 255.0 / (mx - mn);
            for v in plane.as_slice() {
                let g = ((v.to_f64().unwrap_or(f64::NAN) - mn) * scale).round();
                w.write_all(&[g.clamp(0.0, 255.0) as u8])?;
            }
        } else {
            for _ in 0..plane.width() * plane.height() {
                w.write_all(&[128u8])?;
            }
        }
        Ok(())
    })
}

/// Write a bit-packed PBM (P4). Rows are already stored MSB-first and
/// byte-padded, exactly the P4 payload layout.
pub fn write_pbm(path: &Path, bits: &BitField) -> Result<()> {
    atomic_write(path, |w| {
        write!(w, "P4\n{} {}\n", bits.width(), bits.height())?;
        w.write_all(bits.as_bytes())?;
        Ok(())
    })
}

/// Read a PBM (P4) file written by [`write_pbm`].
pub fn read_pbm(path: &Path) -> Result<BitField> {
    let data = fs::read(path).map_err(|e| format_err(path, format!("cannot read: {e}")))?;
    let mut fields = Vec::new();
    let mut pos = 0usize;
    // header: "P4", width, height as whitespace-separated tokens, then one
    // whitespace byte, then the payload
    while fields.len() < 3 && pos < data.len() {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos > start {
            fields.push(&data[start..pos]);
        }
    }
    if fields.len() != 3 || fields[0] != b"P4" {
        return Err(format_err(path, "not a bit-packed PBM (P4) file"));
    }
    let dim = |b: &[u8]| -> Result<usize> {
        std::str::from_utf8(b)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(path, "bad dimension in PBM header"))
    };
    let width = dim(fields[1])?;
    let height = dim(fields[2])?;
    pos += 1;
    let payload = data
        .get(pos..)
        .ok_or_else(|| format_err(path, "missing PBM payload"))?;
    BitField::from_packed(width, height, payload.to_vec())
        .map_err(|_| format_err(path, "PBM payload size disagrees with its dimensions"))
}

/// Parse a key = value run configuration. Keys not in the fixed set are
/// errors so typos cannot silently fall back to defaults; behavior toggles
/// that are not physical parameters stay on the command line.
pub fn parse_config(text: &str, path: &Path) -> Result<OpticalConfig<f64>> {
    let mut cfg = OpticalConfig::<f64>::default();
    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, no, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        let as_f64 = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| parse_err(path, no, format!("bad number {v:?} for {key}")))
        };
        let as_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| parse_err(path, no, format!("bad integer {v:?} for {key}")))
        };
        match key {
            "wavelength" => cfg.wavelength = as_f64(value)?,
            "pitch" => cfg.pitch = as_f64(value)?,
            "n_w" => cfg.n_w = as_usize(value)?,
            "n_h" => cfg.n_h = as_usize(value)?,
            "z_min" => cfg.z_min = as_f64(value)?,
            "z_max" => cfg.z_max = as_f64(value)?,
            "n_z" => cfg.n_z = as_usize(value)?,
            "gamma" => cfg.gamma = as_f64(value)?,
            "level" => cfg.level = as_usize(value)?,
            "filter" => {
                cfg.filter = FilterKind::from_name(value)
                    .map_err(|e| parse_err(path, no, e.to_string()))?
            }
            "ref_x" => cfg.ref_x = as_f64(value)?,
            "ref_y" => cfg.ref_y = as_f64(value)?,
            "ref_z" => cfg.ref_z = as_f64(value)?,
            "dz_override" => cfg.dz_override = Some(as_f64(value)?),
            "threads" => cfg.threads = as_usize(value)?,
            "seed" => {
                cfg.seed = value
                    .parse()
                    .map_err(|_| parse_err(path, no, format!("bad integer {value:?} for seed")))?
            }
            other => {
                return Err(parse_err(path, no, format!("unknown key {other:?}")));
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Load and validate a key = value configuration file.
pub fn load_config(path: &Path) -> Result<OpticalConfig<f64>> {
    let mut text = String::new();
    BufReader::new(open(path)?)
        .read_to_string(&mut text)
        .map_err(|e| format_err(path, format!("cannot read: {e}")))?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::build_lut;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::TempDir;

    fn small_cfg() -> OpticalConfig<f64> {
        OpticalConfig {
            n_w: 64,
            n_h: 64,
            z_min: 0.02e-3,
            z_max: 0.05e-3,
            n_z: 2,
            level: 2,
            keep_all: true,
            ..OpticalConfig::default()
        }
    }

    #[test]
    fn points_round_trip_bit_exactly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("pts.txt");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud: PointCloud<f64> = PointCloud::new(
            (0..100)
                .map(|_| PointSource {
                    x: rng.random_range(-1.0e-3..1.0e-3),
                    y: rng.random_range(-1.0e-3..1.0e-3) * 1e-9,
                    z: rng.random_range(-15.0e-3..15.0e-3),
                    a: rng.random_range(0.0..2.0),
                })
                .collect(),
        );
        save_points(&path, &cloud).unwrap();
        let back: PointCloud<f64> = load_points(&path).unwrap();
        assert_eq!(back.len(), cloud.len());
        for (a, b) in back.points.iter().zip(&cloud.points) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
            assert_eq!(a.a.to_bits(), b.a.to_bits());
        }
    }

    #[test]
    fn point_text_is_tolerant_of_comments_and_strict_on_values() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("pts.txt");
        fs::write(&path, "").unwrap();
        assert_eq!(load_points::<f64>(&path).unwrap().len(), 0);

        fs::write(&path, "# header\n\n0 0 0.01 1.0  # a point\n").unwrap();
        let one = load_points::<f64>(&path).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.points[0].z, 0.01);

        for (bad, line) in [
            ("0 0 0.01\n", 1),
            ("# ok\n0 0 0.01 1 extra\n", 2),
            ("0 0 zzz 1\n", 1),
            ("0 0 inf 1\n", 1),
        ] {
            fs::write(&path, bad).unwrap();
            match load_points::<f64>(&path) {
                Err(CghError::Parse { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
                other => panic!("expected a parse error for {bad:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn field_files_round_trip_bit_exactly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("u.hfld");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<Complex<f64>> = (0..64 * 64)
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let field = ComplexField::from_vec(64, 64, data).unwrap();
        write_field(&path, &field, 1e-6, 632.8e-9).unwrap();
        assert_eq!(
            fs::metadata(&path).unwrap().len(),
            FIELD_HEADER_LEN + 64 * 64 * 16
        );
        let back = read_field::<f64>(&path).unwrap();
        assert_eq!(back.pitch, 1e-6);
        assert_eq!(back.wavelength, 632.8e-9);
        assert!(field
            .as_slice()
            .iter()
            .zip(back.field.as_slice())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }

    #[test]
    fn field_reader_rejects_damage() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("u.hfld");
        let field = ComplexField::<f64>::zeros(8, 8);
        write_field(&path, &field, 1e-6, 632.8e-9).unwrap();

        let good = fs::read(&path).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(
            read_field::<f64>(&path),
            Err(CghError::Format { .. })
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        fs::write(&path, &bad_version).unwrap();
        assert!(matches!(
            read_field::<f64>(&path),
            Err(CghError::Format { .. })
        ));

        fs::write(&path, &good[..good.len() - 5]).unwrap();
        match read_field::<f64>(&path) {
            Err(CghError::Format { msg, .. }) => {
                assert!(msg.contains("1056") && msg.contains("1051"), "{msg}");
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn lut_files_round_trip_bit_exactly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("table.wlut");
        let cfg = small_cfg();
        let lut = build_lut(&cfg).unwrap();
        write_lut(&path, &lut).unwrap();
        let back = load_lut::<f64>(&path, &cfg).unwrap();
        assert_eq!(back.cfg_hash(), lut.cfg_hash());
        assert_eq!(back.lists().len(), lut.lists().len());
        for (a, b) in back.lists().iter().zip(lut.lists()) {
            assert_eq!(a.entries.len(), b.entries.len());
            for (x, y) in a.entries.iter().zip(&b.entries) {
                assert_eq!(x.key(), y.key());
                assert_eq!(x.c.re.to_bits(), y.c.re.to_bits());
                assert_eq!(x.c.im.to_bits(), y.c.im.to_bits());
            }
        }
    }

    #[test]
    fn lut_loader_rejects_mismatch_and_damage() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("table.wlut");
        let cfg = small_cfg();
        write_lut(&path, &build_lut(&cfg).unwrap()).unwrap();

        let mut other = cfg.clone();
        other.gamma = 0.31;
        other.keep_all = false;
        assert!(matches!(
            load_lut::<f64>(&path, &other),
            Err(CghError::StaleLut)
        ));

        let mut bytes = fs::read(&path).unwrap();
        bytes[60] = 200; // first record's band code, just past the list count
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_lut::<f64>(&path, &cfg),
            Err(CghError::Format { .. })
        ));
    }

    #[test]
    fn pgm_normalizes_and_handles_constant_planes() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("img.pgm");
        let ramp = RealField::from_vec(4, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        write_pgm(&path, &ramp).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..11], b"P5\n4 2\n255\n");
        let px = &bytes[11..];
        assert_eq!(px.len(), 8);
        assert_eq!(px[0], 0);
        assert_eq!(px[7], 255);
        assert!(px.windows(2).all(|w| w[0] < w[1]));

        let flat = RealField::from_vec(2, 2, vec![3.3; 4]).unwrap();
        write_pgm(&path, &flat).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[bytes.len() - 4..], &[128, 128, 128, 128]);
    }

    #[test]
    fn pbm_packs_rows_msb_first() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("img.pbm");
        let mut bits = BitField::zeros(2, 2);
        for (x, y) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            bits.set(x, y, true);
        }
        write_pbm(&path, &bits).unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"P4\n2 2\n\xC0\xC0");

        let mut wide = BitField::zeros(10, 2);
        wide.set(0, 0, true);
        wide.set(9, 1, true);
        write_pbm(&path, &wide).unwrap();
        let back = read_pbm(&path).unwrap();
        assert_eq!(back.width(), 10);
        assert_eq!(back.height(), 2);
        assert_eq!(back.as_bytes(), wide.as_bytes());
    }

    #[test]
    fn config_files_parse_strictly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "# robin's desk run\n\
             wavelength = 632.8e-9\n\
             pitch = 1e-6\n\
             n_w = 2048\n\
             n_h = 1024\n\
             z_min = -15e-3\n\
             z_max = 15e-3\n\
             n_z = 29\n\
             gamma = 0.2\n\
             level = 3\n\
             filter = coif2\n\
             ref_x = 0\n\
             ref_y = 30e-3\n\
             ref_z = -400e-3\n\
             dz_override = 1.0344827586206897e-3\n\
             threads = 2\n\
             seed = 42\n",
        )
        .unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.n_w, 2048);
        assert_eq!(cfg.n_h, 1024);
        assert_eq!(cfg.gamma, 0.2);
        assert_eq!(cfg.dz_override, Some(1.0344827586206897e-3));
        assert_eq!(cfg.threads, 2);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.tile_count(), 4);

        fs::write(&path, "n_w = 1024\nn_h = 1024\nwarp_factor = 9\n").unwrap();
        match load_config(&path) {
            Err(CghError::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("warp_factor"));
            }
            other => panic!("expected unknown-key rejection, got {other:?}"),
        }

        fs::write(&path, "level banana\n").unwrap();
        assert!(matches!(
            load_config(&path),
            Err(CghError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn full_scale_config_is_accepted_and_planned() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("full.cfg");
        fs::write(
            &path,
            "n_w = 65536\nn_h = 8192\nn_z = 29\nz_min = -15e-3\nz_max = 15e-3\n",
        )
        .unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.tile_count(), 64);
    }

    #[test]
    fn failed_writes_leave_no_trace() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("out.bin");
        let boom: Result<()> = atomic_write(&path, |w| {
            w.write_all(b"partial")?;
            Err(CghError::Config("synthetic failure".into()))
        });
        assert!(boom.is_err());
        assert!(!path.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

        fs::write(&path, b"precious").unwrap();
        let boom: Result<()> = atomic_write(&path, |w| {
            w.write_all(b"partial")?;
            Err(CghError::Config("synthetic failure".into()))
        });
        assert!(boom.is_err());
        assert_eq!(fs::read(&path).unwrap(), b"precious");

        atomic_write(&path, |w| {
            w.write_all(b"fresh").map_err(CghError::from)
        })
        .unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"fresh");
    }
}
