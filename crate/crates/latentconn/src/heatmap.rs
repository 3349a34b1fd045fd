//! Binary PPM (P6) heatmaps with two fixed colormaps, plus a JSON sidecar
//! recording the color scale so renders are reproducible.
//!
//! * `grayscale`: value v in [0, 1] maps to gray level round(255 v).
//! * `diverging`: signed value v with symmetric bound m maps through
//!   t = v/m in [-1, 1]; negative values fade white -> blue, positive
//!   white -> red: r = 255 min(1, 1+t), g = 255 (1-|t|), b = 255 min(1, 1-t).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connectome::ConnectivityMatrix;
use crate::error::{Error, Result};
use crate::generator::{DeltaMatrix, ManifoldGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleSidecar {
    pub colormap: String,
    pub min: f64,
    pub max: f64,
    pub width: usize,
    pub height: usize,
}

fn write_ppm(path: &Path, width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Shape(format!(
            "pixel buffer holds {} entries, expected {width}x{height}",
            pixels.len()
        )));
    }
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write!(out, "P6\n{width} {height}\n255\n")?;
    for px in pixels {
        out.write_all(px)?;
    }
    out.flush()?;
    Ok(())
}

fn write_sidecar(image_path: &Path, sidecar: &ScaleSidecar) -> Result<()> {
    let path = image_path.with_extension("scale.json");
    let text = serde_json::to_string_pretty(sidecar)
        .map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn gray(v: f64) -> [u8; 3] {
    let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [g, g, g]
}

fn diverging(v: f64, bound: f64) -> [u8; 3] {
    let t = if bound > 0.0 { (v / bound).clamp(-1.0, 1.0) } else { 0.0 };
    let r = (255.0 * (1.0 + t).min(1.0)).round() as u8;
    let g = (255.0 * (1.0 - t.abs())).round() as u8;
    let b = (255.0 * (1.0 - t).min(1.0)).round() as u8;
    [r, g, b]
}

/// Grayscale heatmap of a connectivity matrix (one pixel per cell).
pub fn write_matrix_heatmap(path: &Path, m: &ConnectivityMatrix) -> Result<()> {
    let n = m.n_regions();
    let pixels: Vec<[u8; 3]> = m.weights().iter().map(|&v| gray(v)).collect();
    write_ppm(path, n, n, &pixels)?;
    write_sidecar(
        path,
        &ScaleSidecar {
            colormap: "grayscale".into(),
            min: 0.0,
            max: 1.0,
            width: n,
            height: n,
        },
    )
}

/// Diverging heatmap of a delta matrix, scale symmetric about zero. The
/// bound is the largest |delta| unless a shared bound is supplied.
pub fn write_delta_heatmap(path: &Path, d: &DeltaMatrix, bound: Option<f64>) -> Result<()> {
    let n = d.n_regions();
    let m = bound.unwrap_or_else(|| d.abs_max());
    let pixels: Vec<[u8; 3]> = d.values().iter().map(|&v| diverging(v, m)).collect();
    write_ppm(path, n, n, &pixels)?;
    write_sidecar(
        path,
        &ScaleSidecar {
            colormap: "diverging-blue-white-red".into(),
            min: -m,
            max: m,
            width: n,
            height: n,
        },
    )
}

/// Contact sheet of a manifold grid: `steps x steps` cells separated by
/// 2-pixel black gutters, one shared diverging scale across all cells.
pub fn write_manifold_sheet(path: &Path, grid: &ManifoldGrid) -> Result<()> {
    let steps = grid.coords.len();
    let n = grid.cells[0].n_regions();
    let gutter = 2;
    let side = steps * n + (steps - 1) * gutter;
    let bound = grid.cells.iter().map(|c| c.abs_max()).fold(0.0f64, f64::max);
    let mut pixels = vec![[0u8, 0u8, 0u8]; side * side];
    for (cell_idx, cell) in grid.cells.iter().enumerate() {
        let row = cell_idx / steps;
        let col = cell_idx % steps;
        let y0 = row * (n + gutter);
        let x0 = col * (n + gutter);
        for i in 0..n {
            for j in 0..n {
                pixels[(y0 + i) * side + (x0 + j)] = diverging(cell.get(i, j), bound);
            }
        }
    }
    write_ppm(path, side, side, &pixels)?;
    write_sidecar(
        path,
        &ScaleSidecar {
            colormap: "diverging-blue-white-red".into(),
            min: -bound,
            max: bound,
            width: side,
            height: side,
        },
    )
}
