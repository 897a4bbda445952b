//! SVG rendering of a two-dimensional slice of configuration space.

use std::fmt::Write as _;

use irisnp::{DMatrix, DVector, RegionResult, Scene};

use crate::error::{CliError, Result};

/// Collision raster resolution per axis.
pub const RASTER: usize = 400;
const PAD: f64 = 20.0;
const ELLIPSE_POINTS: usize = 96;

/// `*` marks a free coordinate; other entries fix that joint. An empty spec
/// frees every joint.
pub fn parse_slice(spec: &str, dim: usize) -> Result<Vec<Option<f64>>> {
    let slice: Vec<Option<f64>> = if spec.trim().is_empty() {
        vec![None; dim]
    } else {
        spec.split(',')
            .map(|s| match s.trim() {
                "*" => Ok(None),
                v => crate::text::parse_number(v)
                    .map(Some)
                    .ok_or_else(|| CliError::Usage(format!("slice: expected '*' or a number, found '{v}'"))),
            })
            .collect::<Result<_>>()?
    };
    if slice.len() != dim {
        return Err(CliError::Usage(format!("slice has {} entries, scene has {dim} joints", slice.len())));
    }
    let free = slice.iter().filter(|s| s.is_none()).count();
    if free < 2 {
        return Err(CliError::Usage("need ≥2 free coordinates".into()));
    }
    if free > 2 {
        return Err(CliError::Usage(format!("slice leaves {free} coordinates free; fix all but 2")));
    }
    Ok(slice)
}

struct Frame {
    free: [usize; 2],
    base: DVector<f64>,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn lift(&self, y: [f64; 2]) -> DVector<f64> {
        let mut q = self.base.clone();
        q[self.free[0]] = y[0];
        q[self.free[1]] = y[1];
        q
    }

    fn px(&self, y: [f64; 2]) -> (f64, f64) {
        let s = RASTER as f64;
        (
            PAD + (y[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * s,
            PAD + (self.hi[1] - y[1]) / (self.hi[1] - self.lo[1]) * s,
        )
    }

    fn points(&self, poly: &[[f64; 2]]) -> String {
        poly.iter()
            .map(|&y| {
                let (x, z) = self.px(y);
                format!("{x:.3},{z:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Sutherland-Hodgman clip of a convex polygon by `a·y ≤ b`.
fn clip(poly: &[[f64; 2]], a: [f64; 2], b: f64) -> Vec<[f64; 2]> {
    let f = |p: [f64; 2]| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::new();
    for (i, &p) in poly.iter().enumerate() {
        let q = poly[(i + 1) % poly.len()];
        let (fp, fq) = (f(p), f(q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn region_polygon(frame: &Frame, r: &RegionResult) -> Vec<[f64; 2]> {
    let mut poly = vec![frame.lo, [frame.hi[0], frame.lo[1]], frame.hi, [frame.lo[0], frame.hi[1]]];
    let (a, b) = (r.polytope.a(), r.polytope.b());
    for i in 0..a.nrows() {
        let fixed: f64 = (0..a.ncols()).filter(|j| !frame.free.contains(j)).map(|j| a[(i, j)] * frame.base[j]).sum();
        let ai = [a[(i, frame.free[0])], a[(i, frame.free[1])]];
        if ai[0] == 0.0 && ai[1] == 0.0 {
            if fixed > b[i] {
                return Vec::new();
            }
            continue;
        }
        poly = clip(&poly, ai, b[i] - fixed);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Boundary of the ellipsoid's intersection with the slice plane, if any.
fn ellipse_slice(frame: &Frame, r: &RegionResult) -> Option<Vec<[f64; 2]>> {
    let c = r.ellipsoid.c();
    let m = DMatrix::from_fn(c.nrows(), 2, |i, k| c[(i, frame.free[k])]);
    let mut x0 = frame.base.clone();
    x0[frame.free[0]] = 0.0;
    x0[frame.free[1]] = 0.0;
    let res = c * (x0 - r.ellipsoid.center());
    // |M y + res|² ≤ 1  ⇔  (y − y*)ᵀ Q (y − y*) ≤ k
    let q = m.transpose() * &m;
    let qinv = q.clone().try_inverse()?;
    let mtr = m.transpose() * &res;
    let ystar = -(&qinv * &mtr);
    let k = 1.0 - (res.norm_squared() - mtr.dot(&(&qinv * &mtr)));
    if k <= 0.0 {
        return None;
    }
    let eig = q.symmetric_eigen();
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (k / l).sqrt())) * eig.eigenvectors.transpose();
    Some(
        (0..ELLIPSE_POINTS)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / ELLIPSE_POINTS as f64;
                let y = &ystar + &root * DVector::from_vec(vec![t.cos(), t.sin()]);
                [y[0], y[1]]
            })
            .collect(),
    )
}

/// Limit box, collision raster, one `<polygon>` per region meeting the slice,
/// and each region's ellipse as a `<path>`.
pub fn plot_svg(scene: &Scene, regions: &[RegionResult], slice: &[Option<f64>]) -> Result<String> {
    let n = scene.num_joints();
    if slice.len() != n {
        return Err(CliError::Usage(format!("slice has {} entries, scene has {n} joints", slice.len())));
    }
    let free: Vec<usize> = (0..n).filter(|&i| slice[i].is_none()).collect();
    if free.len() != 2 {
        return Err(CliError::Usage("need ≥2 free coordinates".into()));
    }
    for r in regions {
        if r.polytope.ambient_dim() != n {
            return Err(irisnp::Error::DimensionMismatch { expected: n, found: r.polytope.ambient_dim() }.into());
        }
    }
    let chain = scene.chain();
    let frame = Frame {
        free: [free[0], free[1]],
        base: DVector::from_fn(n, |i, _| slice[i].unwrap_or(0.0)),
        lo: [chain.lower()[free[0]], chain.lower()[free[1]]],
        hi: [chain.upper()[free[0]], chain.upper()[free[1]]],
    };
    let size = RASTER as f64 + 2.0 * PAD;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(
        svg,
        r#"<rect class="limits" x="{PAD}" y="{PAD}" width="{RASTER}" height="{RASTER}" fill="white" stroke="black"/>"#
    );

    // collision raster, one rect per run of colliding cells in a row
    let _ = writeln!(svg, r##"<g class="obstacles" fill="#c44" fill-opacity="0.6">"##);
    let cell = |k: usize, lo: f64, hi: f64| lo + (k as f64 + 0.5) / RASTER as f64 * (hi - lo);
    for row in 0..RASTER {
        let y1 = cell(RASTER - 1 - row, frame.lo[1], frame.hi[1]);
        let mut run: Option<usize> = None;
        for col in 0..=RASTER {
            let hit = col < RASTER && {
                let q = frame.lift([cell(col, frame.lo[0], frame.hi[0]), y1]);
                scene.in_collision(q.as_slice())?
            };
            match (hit, run) {
                (true, None) => run = Some(col),
                (false, Some(start)) => {
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{}" y="{}" width="{}" height="1"/>"#,
                        PAD + start as f64,
                        PAD + row as f64,
                        col - start
                    );
                    run = None;
                }
                _ => {}
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    for (i, r) in regions.iter().enumerate() {
        let poly = region_polygon(&frame, r);
        if poly.len() >= 3 {
            let _ = writeln!(
                svg,
                r##"<polygon class="region" data-index="{i}" points="{}" fill="#48c" fill-opacity="0.3" stroke="#246"/>"##,
                frame.points(&poly)
            );
        }
        if let Some(ell) = ellipse_slice(&frame, r) {
            let _ = writeln!(
                svg,
                r##"<path class="ellipse" data-index="{i}" d="M {} Z" fill="none" stroke="#080"/>"##,
                frame.points(&ell)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
