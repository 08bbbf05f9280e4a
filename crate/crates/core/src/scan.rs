//! Polar radar scans and the RSCN v1 on-disk format.
//!
//! RSCN v1 is a little-endian binary layout: magic `RSCN`, u16 version (=1),
//! u32 azimuth count, u32 range bin count, f64 range resolution in metres,
//! u64 timestamp in nanoseconds, followed by `azimuth_count * range_bin_count`
//! intensity bytes in azimuth-major order. One file holds one scan; a scan
//! sequence is a directory of files ordered lexicographically.

use crate::error::{Error, Result};
use nalgebra::Vector2;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"RSCN";
const VERSION: u16 = 1;

/// A raw polar intensity grid with sensor metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarScan {
    pub azimuth_count: u32,
    pub range_bin_count: u32,
    /// Metres per range bin.
    pub range_resolution: f64,
    pub timestamp_ns: u64,
    /// Azimuth-major grid, `azimuth_count * range_bin_count` bytes.
    pub intensities: Vec<u8>,
}

impl RadarScan {
    pub fn new(
        azimuth_count: u32,
        range_bin_count: u32,
        range_resolution: f64,
        timestamp_ns: u64,
        intensities: Vec<u8>,
    ) -> Result<Self> {
        if azimuth_count == 0 || range_bin_count == 0 {
            return Err(Error::InvalidInput(
                "scan dimensions must be positive".into(),
            ));
        }
        if !range_resolution.is_finite() || range_resolution <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "range resolution must be positive, got {range_resolution}"
            )));
        }
        let expected = azimuth_count as usize * range_bin_count as usize;
        if intensities.len() != expected {
            return Err(Error::InvalidInput(format!(
                "intensity grid has {} bytes, expected {expected}",
                intensities.len()
            )));
        }
        Ok(RadarScan {
            azimuth_count,
            range_bin_count,
            range_resolution,
            timestamp_ns,
            intensities,
        })
    }

    /// All-zero scan, mostly for tests and as a rendering canvas.
    pub fn zeroed(
        azimuth_count: u32,
        range_bin_count: u32,
        range_resolution: f64,
        timestamp_ns: u64,
    ) -> Self {
        RadarScan {
            azimuth_count,
            range_bin_count,
            range_resolution,
            timestamp_ns,
            intensities: vec![0; azimuth_count as usize * range_bin_count as usize],
        }
    }

    #[inline]
    pub fn intensity(&self, azimuth: u32, bin: u32) -> u8 {
        self.intensities[azimuth as usize * self.range_bin_count as usize + bin as usize]
    }

    /// Intensity row for one azimuth.
    #[inline]
    pub fn row(&self, azimuth: u32) -> &[u8] {
        let w = self.range_bin_count as usize;
        let start = azimuth as usize * w;
        &self.intensities[start..start + w]
    }

    /// Centre range of a bin in metres.
    #[inline]
    pub fn bin_range(&self, bin: u32) -> f64 {
        (bin as f64 + 0.5) * self.range_resolution
    }

    /// Azimuth angle of a row in radians, rows uniformly spaced over [0, 2pi).
    #[inline]
    pub fn azimuth_angle(&self, azimuth: u32) -> f64 {
        2.0 * std::f64::consts::PI * azimuth as f64 / self.azimuth_count as f64
    }

    /// Sensor-frame Cartesian point of a polar cell centre.
    ///
    /// Panics if either index is out of range.
    pub fn polar_to_cartesian(&self, azimuth: u32, bin: u32) -> Vector2<f64> {
        assert!(
            azimuth < self.azimuth_count,
            "azimuth index {azimuth} out of range (count {})",
            self.azimuth_count
        );
        assert!(
            bin < self.range_bin_count,
            "range bin index {bin} out of range (count {})",
            self.range_bin_count
        );
        let range = self.bin_range(bin);
        let angle = self.azimuth_angle(azimuth);
        Vector2::new(range * angle.cos(), range * angle.sin())
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.azimuth_count.to_le_bytes())?;
        w.write_all(&self.range_bin_count.to_le_bytes())?;
        w.write_all(&self.range_resolution.to_le_bytes())?;
        w.write_all(&self.timestamp_ns.to_le_bytes())?;
        w.write_all(&self.intensities)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_to(&mut buf)
            .and_then(|_| buf.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from(r: &mut impl Read, path: &Path) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != MAGIC {
            return Err(Error::format(path, "bad magic, not an RSCN file"));
        }
        let version = read_u16(r, path)?;
        if version != VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        let azimuth_count = read_u32(r, path)?;
        let range_bin_count = read_u32(r, path)?;
        let range_resolution = f64::from_le_bytes(read_array(r, path)?);
        let timestamp_ns = u64::from_le_bytes(read_array(r, path)?);
        if azimuth_count == 0 || range_bin_count == 0 {
            return Err(Error::format(path, "zero scan dimensions"));
        }
        let len = azimuth_count as usize * range_bin_count as usize;
        let mut intensities = vec![0u8; len];
        r.read_exact(&mut intensities)
            .map_err(|e| Error::io(path, e))?;
        RadarScan::new(
            azimuth_count,
            range_bin_count,
            range_resolution,
            timestamp_ns,
            intensities,
        )
        .map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut buf = std::io::BufReader::new(file);
        Self::read_from(&mut buf, path)
    }
}

fn read_array<const N: usize>(r: &mut impl Read, path: &Path) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn read_u16(r: &mut impl Read, path: &Path) -> Result<u16> {
    Ok(u16::from_le_bytes(read_array(r, path)?))
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r, path)?))
}

/// Lists the scan files of a sequence directory in lexicographic order.
pub fn scan_sequence(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "rscn"))
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn polar_to_cartesian_on_axes() {
        let scan = RadarScan::zeroed(400, 1000, 0.1, 0);
        let p = scan.polar_to_cartesian(0, 7);
        assert_abs_diff_eq!(p.x, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        let p = scan.polar_to_cartesian(100, 7); // A/4 -> +y axis
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn polar_to_cartesian_diagonal() {
        // A/8 at bin 99, 0.1 m bins: range 9.95 m at 45 degrees.
        let scan = RadarScan::zeroed(400, 1000, 0.1, 0);
        let p = scan.polar_to_cartesian(50, 99);
        assert_abs_diff_eq!(p.x, 9.95 * (PI / 4.0).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 9.95 * (PI / 4.0).sin(), epsilon = 1e-12);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn polar_to_cartesian_rejects_bad_index() {
        let scan = RadarScan::zeroed(4, 8, 0.1, 0);
        scan.polar_to_cartesian(4, 0);
    }

    #[test]
    fn rejects_wrong_grid_size() {
        assert!(RadarScan::new(4, 8, 0.1, 0, vec![0; 31]).is_err());
        assert!(RadarScan::new(0, 8, 0.1, 0, vec![]).is_err());
        assert!(RadarScan::new(4, 8, -0.1, 0, vec![0; 32]).is_err());
    }

    #[test]
    fn read_rejects_corrupt_header() {
        let mut bytes = Vec::new();
        RadarScan::zeroed(2, 3, 0.5, 7).write_to(&mut bytes).unwrap();
        bytes[0] = b'X';
        let err = RadarScan::read_from(&mut bytes.as_slice(), Path::new("t.rscn"));
        assert!(matches!(err, Err(Error::Format { .. })));
    }

    #[test]
    fn read_rejects_truncated_body() {
        let mut bytes = Vec::new();
        RadarScan::zeroed(2, 3, 0.5, 7).write_to(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(RadarScan::read_from(&mut bytes.as_slice(), Path::new("t.rscn")).is_err());
    }

    proptest! {
        #[test]
        fn prop_roundtrip(
            az in 1u32..16, bins in 1u32..64, res in 0.01f64..2.0, ts in 0u64..u64::MAX,
            seed in 0u64..1000,
        ) {
            let n = az as usize * bins as usize;
            let data: Vec<u8> = (0..n).map(|i| ((i as u64 * 31 + seed) % 256) as u8).collect();
            let scan = RadarScan::new(az, bins, res, ts, data).unwrap();
            let mut bytes = Vec::new();
            scan.write_to(&mut bytes).unwrap();
            let back = RadarScan::read_from(&mut bytes.as_slice(), Path::new("p.rscn")).unwrap();
            prop_assert_eq!(scan, back);
        }
    }
}
