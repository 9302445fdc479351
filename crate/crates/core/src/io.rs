//! Run directories, NetPBM images and CSV tables.
//!
//! A run directory holds `manifest.json`, `metrics.csv`, `images/` and
//! `curves/`. Everything except the manifest timestamp is a pure function of
//! the command, the configuration and the seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::sweep::{PointResult, SweepResult};

/// Encode an image as 16-bit binary PGM, scaled so its maximum maps to 65535.
/// Row 0 of the file is the largest `y`.
pub fn encode_pgm16(grid: &GridSpec, data: &[f64]) -> Result<Vec<u8>> {
    if data.len() != grid.len() {
        return Err(Error::Contract(format!(
            "image has {} samples, grid has {}",
            data.len(),
            grid.len()
        )));
    }
    let max = data.iter().cloned().fold(0.0, f64::max);
    let mut out = format!("P5\n{} {}\n65535\n", grid.nx, grid.ny).into_bytes();
    out.reserve(2 * data.len());
    for iy in (0..grid.ny).rev() {
        for ix in 0..grid.nx {
            let v = data[grid.idx(ix, iy)];
            let q = if max > 0.0 {
                (v.max(0.0) / max * 65535.0).round() as u16
            } else {
                0
            };
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

/// Parse a 16-bit binary PGM into `(width, height, samples)`, rows as stored.
pub fn decode_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let bad = |m: &str| Error::Contract(format!("not a 16-bit PGM: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("wrong magic or depth"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let body = bytes.get(pos..).ok_or_else(|| bad("no body"))?;
    if body.len() != 2 * w * h {
        return Err(bad("body length"));
    }
    let px = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((w, h, px))
}

fn heat(t: f64) -> [u8; 3] {
    let c = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [c(3.0 * t), c(3.0 * t - 1.0), c(3.0 * t - 2.0)]
}

/// Binary PPM montage of equally sized tiles, one row of tiles per entry of
/// `rows`, each tile scaled to its own maximum, separated by `gap` pixels.
pub fn encode_ppm_montage(grid: &GridSpec, rows: &[Vec<&[f64]>], gap: usize) -> Result<Vec<u8>> {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Contract("montage needs at least one tile".into()));
    }
    let (tw, th) = (grid.nx, grid.ny);
    let w = cols * tw + (cols + 1) * gap;
    let h = rows.len() * th + (rows.len() + 1) * gap;
    let mut px = vec![[255u8; 3]; w * h];
    for (r, row) in rows.iter().enumerate() {
        for (c, tile) in row.iter().enumerate() {
            if tile.len() != grid.len() {
                return Err(Error::Contract("montage tile does not match the grid".into()));
            }
            let max = tile.iter().cloned().fold(0.0, f64::max);
            let (x0, y0) = (gap + c * (tw + gap), gap + r * (th + gap));
            for iy in 0..th {
                for ix in 0..tw {
                    let v = tile[grid.idx(ix, th - 1 - iy)];
                    let t = if max > 0.0 { v / max } else { 0.0 };
                    px[(y0 + iy) * w + x0 + ix] = heat(t);
                }
            }
        }
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for p in px {
        out.extend_from_slice(&p);
    }
    Ok(out)
}

/// `re,im` pair for CSV cells.
pub fn complex_cells(z: Complex64) -> String {
    format!("{},{}", z.re, z.im)
}

pub fn metrics_csv(result: &SweepResult) -> String {
    let mut s = String::from(
        "index,label,d_energy_nJ,input_x_re,input_x_im,input_y_re,input_y_im,\
gamma_x_plus_re,gamma_x_plus_im,gamma_x_minus_re,gamma_x_minus_im,\
gamma_y_plus_re,gamma_y_plus_im,gamma_y_minus_re,gamma_y_minus_im,\
efficiency,vectorness,extinction_DA_dB,extinction_HV_dB,delta_beta_per_m,xi_per_m,\
charge,charge_raw,relation_residual,lobe_H_rad,lobe_D_rad,lobe_V_rad,lobe_A_rad,crest_radius_um\n",
    );
    for p in &result.points {
        push_point(&mut s, p);
    }
    s
}

fn push_point(s: &mut String, p: &PointResult) {
    let g = p.gamma.as_array();
    let (charge, raw) = match &p.charge {
        Some(c) => (c.charge.to_string(), c.raw.to_string()),
        None => ("".into(), "".into()),
    };
    let rel = p.relation.map(|r| r.to_string()).unwrap_or_default();
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.index,
        p.label,
        p.d_energy * 1e9,
        complex_cells(p.input[0]),
        complex_cells(p.input[1]),
        complex_cells(g[0]),
        complex_cells(g[1]),
        complex_cells(g[2]),
        complex_cells(g[3]),
        p.efficiency,
        p.vectorness,
        p.extinction_da,
        p.extinction_hv,
        p.delta_beta,
        p.xi,
        charge,
        raw,
        rel,
        p.lobe_axes[0],
        p.lobe_axes[1],
        p.lobe_axes[2],
        p.lobe_axes[3],
        p.crest_radius
    );
}

pub fn correlations_csv(result: &SweepResult) -> String {
    let mut s = String::from("i,j,correlation\n");
    for (i, j, r) in &result.correlations {
        let _ = writeln!(s, "{i},{j},{r}");
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord {
            kind: e.kind().into(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub created_unix_s: u64,
    pub config: serde_json::Value,
    pub summary: serde_json::Value,
    pub notices: Vec<String>,
    pub files: Vec<FileRecord>,
    pub error: Option<ErrorRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Output directory of one run. Files are written immediately and recorded
/// in order for the manifest.
#[derive(Debug)]
pub struct RunDir {
    pub root: PathBuf,
    files: Vec<FileRecord>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<RunDir> {
        for sub in ["", "images", "curves"] {
            let p = root.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(RunDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.root.join(rel);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.files.push(FileRecord {
            path: rel.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(p)
    }

    pub fn write_pgm(&mut self, rel: &str, grid: &GridSpec, data: &[f64]) -> Result<PathBuf> {
        let b = encode_pgm16(grid, data)?;
        self.write(rel, &b)
    }

    /// Metrics table plus one PGM per recorded image.
    pub fn write_sweep(&mut self, result: &SweepResult) -> Result<()> {
        self.write("metrics.csv", metrics_csv(result).as_bytes())?;
        if !result.correlations.is_empty() {
            self.write("curves/correlations.csv", correlations_csv(result).as_bytes())?;
        }
        for p in &result.points {
            for img in &p.images {
                self.write_pgm(&format!("images/{}_{}.pgm", p.label, img.name), &result.grid, &img.data)?;
            }
        }
        Ok(())
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Write `manifest.json` last; it is not listed among its own files.
    pub fn finish(self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.files = self.files;
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let p = self.root.join("manifest.json");
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_flips_rows() {
        let g = GridSpec::new(16, 17, 1.0, 1.0, (0.0, 0.0)).unwrap();
        let data: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        let b = encode_pgm16(&g, &data).unwrap();
        let (w, h, px) = decode_pgm16(&b).unwrap();
        assert_eq!((w, h), (16, 17));
        // first stored row is the top of the grid
        assert_eq!(
            px[0],
            (g.idx(0, 16) as f64 / (g.len() - 1) as f64 * 65535.0).round() as u16
        );
        assert_eq!(*px.iter().max().unwrap(), 65535);
        assert_eq!(px[(h - 1) * w], 0);
    }

    #[test]
    fn pgm_of_zero_image_is_black() {
        let g = GridSpec::new(16, 16, 1.0, 1.0, (0.0, 0.0)).unwrap();
        let (_, _, px) = decode_pgm16(&encode_pgm16(&g, &vec![0.0; 256]).unwrap()).unwrap();
        assert!(px.iter().all(|v| *v == 0));
        assert!(encode_pgm16(&g, &[1.0]).is_err());
    }

    #[test]
    fn montage_size() {
        let g = GridSpec::new(16, 16, 1.0, 1.0, (0.0, 0.0)).unwrap();
        let t = vec![1.0; 256];
        let rows = vec![vec![t.as_slice(); 5]; 6];
        let b = encode_ppm_montage(&g, &rows, 2).unwrap();
        let header = format!("P6\n{} {}\n255\n", 5 * 16 + 6 * 2, 6 * 16 + 7 * 2);
        assert!(b.starts_with(header.as_bytes()));
        assert_eq!(b.len(), header.len() + 3 * (5 * 16 + 12) * (6 * 16 + 14));
    }

    #[test]
    fn run_dir_records_hashes() {
        let t = tempfile::tempdir().unwrap();
        let mut r = RunDir::create(t.path()).unwrap();
        r.write("curves/a.csv", b"x\n").unwrap();
        assert_eq!(r.files()[0].sha256, sha256_hex(b"x\n"));
        assert_eq!(sha256_hex(b"").len(), 64);
        assert!(sha256_hex(b"").starts_with("e3b0c442"));
    }
}
