//! Uniform rectangular sampling of the chip cross-section.
//!
//! Coordinates are in micrometres. Samples are stored row-major with `x`
//! varying fastest, so index `iy * nx + ix` addresses pixel `(ix, iy)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_PIXELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Physical position of pixel (0, 0).
    pub origin: (f64, f64),
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, origin: (f64, f64)) -> Result<Self> {
        if nx < MIN_PIXELS || ny < MIN_PIXELS {
            return Err(Error::Geometry(format!(
                "grid must be at least {MIN_PIXELS}x{MIN_PIXELS} pixels, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::Geometry(format!(
                "grid spacing must be positive, got dx={dx} dy={dy}"
            )));
        }
        Ok(GridSpec { nx, ny, dx, dy, origin })
    }

    /// Square-pixel grid covering `[x0, x1] x [y0, y1]`, with a pixel centred on
    /// `(cx, cy)` whenever the box is symmetric about it.
    pub fn covering(x0: f64, x1: f64, y0: f64, y1: f64, d: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::Geometry("empty bounding box".into()));
        }
        let nx = ((x1 - x0) / d).round() as usize + 1;
        let ny = ((y1 - y0) / d).round() as usize + 1;
        let cx = 0.5 * (x0 + x1);
        let cy = 0.5 * (y0 + y1);
        let origin = (cx - 0.5 * (nx - 1) as f64 * d, cy - 0.5 * (ny - 1) as f64 * d);
        GridSpec::new(nx, ny, d, d, origin)
    }

    /// Square-pixel grid covering the box with a pixel exactly on `anchor`.
    pub fn covering_anchored(x0: f64, x1: f64, y0: f64, y1: f64, d: f64, anchor: (f64, f64)) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::Geometry("empty bounding box".into()));
        }
        let lo_x = ((anchor.0 - x0) / d).ceil();
        let hi_x = ((x1 - anchor.0) / d).ceil();
        let lo_y = ((anchor.1 - y0) / d).ceil();
        let hi_y = ((y1 - anchor.1) / d).ceil();
        let nx = (lo_x + hi_x) as usize + 1;
        let ny = (lo_y + hi_y) as usize + 1;
        GridSpec::new(nx, ny, d, d, (anchor.0 - lo_x * d, anchor.1 - lo_y * d))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.origin.0 + ix as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.origin.1 + iy as f64 * self.dy
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Physical coordinates of the flat index `k`.
    #[inline]
    pub fn coords(&self, k: usize) -> (f64, f64) {
        (self.x(k % self.nx), self.y(k / self.nx))
    }

    /// Whether the box `[x0, x1] x [y0, y1]` lies inside the grid with at least
    /// `margin_px` whole pixels to spare on every side.
    pub fn contains_box(&self, x0: f64, x1: f64, y0: f64, y1: f64, margin_px: usize) -> bool {
        let mx = margin_px as f64 * self.dx;
        let my = margin_px as f64 * self.dy;
        x0 - mx >= self.origin.0 - 1e-9
            && x1 + mx <= self.x_max() + 1e-9
            && y0 - my >= self.origin.1 - 1e-9
            && y1 + my <= self.y_max() + 1e-9
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.dy - other.dy).abs() <= 1e-12 * self.dy
            && (self.origin.0 - other.origin.0).abs() <= 1e-9
            && (self.origin.1 - other.origin.1).abs() <= 1e-9
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "grid mismatch: {}x{} @ {:?} vs {}x{} @ {:?}",
                self.nx, self.ny, self.origin, other.nx, other.ny, other.origin
            )))
        }
    }

    /// Sample `f(x, y)` at every pixel.
    pub fn sample<T, F: Fn(f64, f64) -> T>(&self, f: F) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.ny {
            let y = self.y(iy);
            for ix in 0..self.nx {
                out.push(f(self.x(ix), y));
            }
        }
        out
    }

    /// Bilinear interpolation of `values` at `(x, y)`; zero outside the grid.
    pub fn bilinear(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let fx = (x - self.origin.0) / self.dx;
        let fy = (y - self.origin.1) / self.dy;
        if fx < 0.0 || fy < 0.0 || fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 {
            return 0.0;
        }
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v00 = values[self.idx(ix, iy)];
        let v10 = values[self.idx(ix + 1, iy)];
        let v01 = values[self.idx(ix, iy + 1)];
        let v11 = values[self.idx(ix + 1, iy + 1)];
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(GridSpec::new(15, 32, 0.1, 0.1, (0.0, 0.0)).is_err());
        assert!(GridSpec::new(32, 32, 0.0, 0.1, (0.0, 0.0)).is_err());
        assert!(GridSpec::new(32, 32, 0.1, -1.0, (0.0, 0.0)).is_err());
    }

    #[test]
    fn covering_is_centred() {
        let g = GridSpec::covering(-5.0, 5.0, -4.0, 4.0, 0.5).unwrap();
        assert_eq!((g.nx, g.ny), (21, 17));
        assert!((g.x(10)).abs() < 1e-12);
        assert!((g.y(8)).abs() < 1e-12);
    }

    #[test]
    fn anchored_grid_has_pixel_on_anchor() {
        let g = GridSpec::covering_anchored(-28.3, 16.1, -3.7, 3.9, 0.2, (0.0, 0.0)).unwrap();
        assert!(g.origin.0 <= -28.3 && g.x_max() >= 16.1);
        let ix = (-g.origin.0 / g.dx).round();
        assert!((g.origin.0 + ix * g.dx).abs() < 1e-12);
        let iy = (-g.origin.1 / g.dy).round();
        assert!((g.origin.1 + iy * g.dy).abs() < 1e-12);
    }

    #[test]
    fn bilinear_reproduces_plane() {
        let g = GridSpec::covering(-2.0, 2.0, -2.0, 2.0, 0.25).unwrap();
        let v = g.sample(|x, y| 3.0 * x - 2.0 * y + 1.0);
        let got = g.bilinear(&v, 0.37, -1.11);
        assert!((got - (3.0 * 0.37 + 2.0 * 1.11 + 1.0)).abs() < 1e-12);
        assert_eq!(g.bilinear(&v, 10.0, 0.0), 0.0);
    }
}
