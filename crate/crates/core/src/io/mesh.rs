//! Text mesh export.
//!
//! The mesh file holds `v x y z r g b` vertex records followed by 1-based
//! `f i j k` triangles. Each grid quad is split along its shorter diagonal;
//! masked points and their faces are omitted. A sidecar CSV carries the
//! per-vertex fields `index,i,j,x,y,mu,margin,K`.

use super::config::ColorField;
use crate::surface::{gauss_mean_curvature, Frontal};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

const POSITIVE: [f64; 3] = [0.85, 0.33, 0.10];
const NEGATIVE: [f64; 3] = [0.00, 0.45, 0.74];
const UNKNOWN: [f64; 3] = [0.5, 0.5, 0.5];

/// `(index map, faces)`: vertex numbers (1-based) of unmasked points and triangles.
pub fn triangulate(frontal: &Frontal) -> (Vec<Option<usize>>, Vec<[usize; 3]>) {
    let spec = &frontal.spec;
    let mut index = vec![None; spec.len()];
    let mut next = 1;
    for (k, v) in frontal.valid.iter().enumerate() {
        if *v {
            index[k] = Some(next);
            next += 1;
        }
    }
    let mut faces = Vec::new();
    for j in 0..spec.ny.saturating_sub(1) {
        for i in 0..spec.nx.saturating_sub(1) {
            let (a, b, c, d) = (spec.index(i, j), spec.index(i + 1, j), spec.index(i + 1, j + 1), spec.index(i, j + 1));
            let p = |k: usize| frontal.positions[k];
            let tris = if (p(a) - p(c)).norm() <= (p(b) - p(d)).norm() { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
            for t in tris {
                if let (Some(x), Some(y), Some(z)) = (index[t[0]], index[t[1]], index[t[2]]) {
                    faces.push([x, y, z]);
                }
            }
        }
    }
    (index, faces)
}

/// Gauss curvature estimate per grid point, NaN where the oracle is unavailable.
pub fn curvature_field(frontal: &Frontal, reg_floor: f64) -> Vec<f64> {
    let spec = &frontal.spec;
    (0..spec.len())
        .map(|k| gauss_mean_curvature(frontal, k % spec.nx, k / spec.nx, reg_floor).map_or(f64::NAN, |(kk, _)| kk))
        .collect()
}

fn colour(field: ColorField, mu: f64, margin: f64, k: f64) -> [f64; 3] {
    match field {
        ColorField::Degeneracy if mu.is_finite() => {
            if mu >= 0.0 {
                POSITIVE
            } else {
                NEGATIVE
            }
        }
        ColorField::Margin if margin.is_finite() => {
            let g = margin / (1.0 + margin);
            [g, g, g]
        }
        ColorField::Curvature if k.is_finite() => {
            // blue below 1, red above, saturating at |K - 1| = 1
            let t = (k - 1.0).clamp(-1.0, 1.0);
            [0.5 + 0.5 * t.max(0.0), 0.5 - 0.5 * t.abs(), 0.5 + 0.5 * (-t).max(0.0)]
        }
        _ => UNKNOWN,
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

pub fn write_mesh<W: Write, C: Write>(frontal: &Frontal, field: ColorField, reg_floor: f64, mesh: &mut W, sidecar: &mut C) -> io::Result<()> {
    let spec = &frontal.spec;
    let (index, faces) = triangulate(frontal);
    let curvature = curvature_field(frontal, reg_floor);
    writeln!(mesh, "# dpw mesh {}x{} {} surface", spec.nx, spec.ny, frontal.kind.name())?;
    writeln!(sidecar, "index,i,j,x,y,mu,margin,K")?;
    for k in 0..spec.len() {
        let Some(n) = index[k] else { continue };
        let (i, j) = (k % spec.nx, k / spec.nx);
        let (mu, margin, kk) = (frontal.degeneracy[k], frontal.margin[k], curvature[k]);
        let p = frontal.positions[k];
        let c = colour(field, mu, margin, kk);
        writeln!(mesh, "v {} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2])?;
        writeln!(sidecar, "{n},{i},{j},{},{},{},{},{}", spec.x(i), spec.y(j), num(mu), num(margin), num(kk))?;
    }
    for f in faces {
        writeln!(mesh, "f {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

/// Sidecar path: the mesh path with extension `csv`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

pub fn export_mesh(frontal: &Frontal, path: &Path, field: ColorField, reg_floor: f64) -> io::Result<PathBuf> {
    let side = sidecar_path(path);
    let mut mesh = io::BufWriter::new(std::fs::File::create(path)?);
    let mut csv = io::BufWriter::new(std::fs::File::create(&side)?);
    write_mesh(frontal, field, reg_floor, &mut mesh, &mut csv)?;
    mesh.flush()?;
    csv.flush()?;
    Ok(side)
}
