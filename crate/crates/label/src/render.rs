//! Box overlays: SVG always, PNG on request.
//!
//! Front-face edges are green and back-face edges blue; the four lateral
//! edges are orange. Edges on at least one visible face are solid, the rest
//! dashed. Degenerate labels are never drawn; the output carries only a
//! watermark naming the reason.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cuboid_core::obox::EDGES;
use cuboid_core::{Face, Keypoint};
use image::{Rgba, RgbaImage};
use imageproc::drawing::{self, Blend};
use imageproc::point::Point;
use thiserror::Error;

use crate::label::Label3D;

pub const FRONT_COLOR: &str = "#2ca02c";
pub const BACK_COLOR: &str = "#1f77b4";
pub const SIDE_COLOR: &str = "#ff7f0e";
const DASH: &str = "10 7";

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Encode { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRole {
    Front,
    Back,
    Side,
}

impl EdgeRole {
    fn of(a: usize, b: usize) -> Self {
        if Face::Front.has_edge(a, b) {
            EdgeRole::Front
        } else if Face::Back.has_edge(a, b) {
            EdgeRole::Back
        } else {
            EdgeRole::Side
        }
    }

    pub fn color(self) -> &'static str {
        match self {
            EdgeRole::Front => FRONT_COLOR,
            EdgeRole::Back => BACK_COLOR,
            EdgeRole::Side => SIDE_COLOR,
        }
    }

    fn rgb(self) -> [u8; 3] {
        match self {
            EdgeRole::Front => [0x2c, 0xa0, 0x2c],
            EdgeRole::Back => [0x1f, 0x77, 0xb4],
            EdgeRole::Side => [0xff, 0x7f, 0x0e],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStyle {
    pub corners: (usize, usize),
    pub role: EdgeRole,
    /// The edge borders at least one visible face.
    pub solid: bool,
}

fn visible_faces(label: &Label3D) -> Vec<Face> {
    label
        .faces
        .iter()
        .filter(|f| f.visible && !f.behind_camera)
        .filter_map(|f| Face::from_label(&f.label))
        .collect()
}

pub fn edge_styles(label: &Label3D) -> [EdgeStyle; 12] {
    let vis = visible_faces(label);
    EDGES.map(|(a, b)| EdgeStyle {
        corners: (a, b),
        role: EdgeRole::of(a, b),
        solid: vis.iter().any(|f| f.has_edge(a, b)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RenderOutcome {
    Drawn,
    /// Degenerate label; only the watermark was written.
    Refused {
        reason: String,
    },
}

fn refusal_reason(label: &Label3D) -> Option<String> {
    label.degenerate.flag.then(|| {
        label
            .degenerate
            .reason
            .clone()
            .unwrap_or_else(|| "degenerate".into())
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(label: &Label3D, keypoints: &[Keypoint]) -> String {
    let (w, h) = (label.intrinsics.width, label.intrinsics.height);
    let fs = (f64::from(w.max(h)) / 60.0).max(12.0);
    let stroke = (fs / 6.0).max(1.5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"##
    );
    if let Some(reason) = refusal_reason(label) {
        let _ = writeln!(
            s,
            r##"  <text class="watermark" x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="{:.1}" fill="#d62728" text-anchor="middle">DEGENERATE LABEL: {}</text>"##,
            f64::from(w) / 2.0,
            f64::from(h) / 2.0,
            2.0 * fs,
            escape(&reason)
        );
        s.push_str("</svg>\n");
        return s;
    }

    let px = &label.cuboid.corners_px;
    for face in visible_faces(label) {
        let color = match face {
            Face::Front => FRONT_COLOR,
            Face::Back => BACK_COLOR,
            _ => continue,
        };
        let pts: Vec<String> = face
            .corners()
            .iter()
            .map(|&c| format!("{:.3},{:.3}", px[c][0], px[c][1]))
            .collect();
        let _ = writeln!(
            s,
            r##"  <polygon class="face {}" points="{}" fill="{color}" fill-opacity="0.3" stroke="none"/>"##,
            face.label(),
            pts.join(" ")
        );
    }
    for e in edge_styles(label) {
        let (a, b) = e.corners;
        let dash = if e.solid {
            String::new()
        } else {
            format!(r##" stroke-dasharray="{DASH}" stroke-opacity="0.7""##)
        };
        let _ = writeln!(
            s,
            r##"  <line class="edge {}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{}" stroke-width="{stroke:.2}"{dash}/>"##,
            if e.solid { "solid" } else { "hidden" },
            px[a][0],
            px[a][1],
            px[b][0],
            px[b][1],
            e.role.color()
        );
    }
    for kp in keypoints {
        let fill = if kp.visible { "#d62728" } else { "none" };
        let _ = writeln!(
            s,
            r##"  <circle class="keypoint" cx="{:.3}" cy="{:.3}" r="{:.2}" fill="{fill}" stroke="#d62728"><title>{}</title></circle>"##,
            kp.pixel.x,
            kp.pixel.y,
            stroke * 1.5,
            escape(&kp.name)
        );
    }

    let line_h = 1.3 * fs;
    let _ = writeln!(
        s,
        r##"  <g class="legend" font-family="sans-serif" font-size="{fs:.1}">"##
    );
    let _ = writeln!(
        s,
        r##"    <rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="white" fill-opacity="0.8"/>"##,
        0.5 * fs,
        0.5 * fs,
        11.0 * fs,
        line_h * (label.faces.len() as f64 + 0.6)
    );
    for (i, f) in label.faces.iter().enumerate() {
        let text = if f.visible {
            format!("{} {:.2}%", f.label, f.percentage)
        } else {
            format!("{} hidden", f.label)
        };
        let color = match f.label.as_str() {
            "front" => FRONT_COLOR,
            "back" => BACK_COLOR,
            _ => "#333333",
        };
        let _ = writeln!(
            s,
            r##"    <text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"##,
            fs,
            0.5 * fs + line_h * (i as f64 + 1.0),
            escape(&text)
        );
    }
    s.push_str("  </g>\n</svg>\n");
    s
}

fn dashed_segments(
    a: (f32, f32),
    b: (f32, f32),
    on: f32,
    off: f32,
) -> Vec<((f32, f32), (f32, f32))> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt();
    if len < 1e-3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut t = 0.0;
    while t < len {
        let t1 = (t + on).min(len);
        out.push((
            (a.0 + dx * t / len, a.1 + dy * t / len),
            (a.0 + dx * t1 / len, a.1 + dy * t1 / len),
        ));
        t += on + off;
    }
    out
}

/// Raster version of [`render_svg`] on a transparent canvas. The legend is
/// omitted since no font is bundled.
pub fn render_png(label: &Label3D, keypoints: &[Keypoint]) -> RgbaImage {
    let (w, h) = (label.intrinsics.width, label.intrinsics.height);
    let mut canvas = Blend(RgbaImage::new(w, h));
    if label.degenerate.flag {
        let red = Rgba([0xd6, 0x27, 0x28, 0xff]);
        let (fw, fh) = (w as f32, h as f32);
        drawing::draw_line_segment_mut(&mut canvas, (0.0, 0.0), (fw, fh), red);
        drawing::draw_line_segment_mut(&mut canvas, (fw, 0.0), (0.0, fh), red);
        return canvas.0;
    }
    let px = &label.cuboid.corners_px;
    let at = |c: usize| (px[c][0] as f32, px[c][1] as f32);
    for face in visible_faces(label) {
        let rgb = match face {
            Face::Front => EdgeRole::Front.rgb(),
            Face::Back => EdgeRole::Back.rgb(),
            _ => continue,
        };
        let mut poly: Vec<Point<i32>> = face
            .corners()
            .iter()
            .map(|&c| Point::new(px[c][0].round() as i32, px[c][1].round() as i32))
            .collect();
        poly.dedup();
        if poly.len() >= 3 && poly.first() != poly.last() {
            drawing::draw_polygon_mut(&mut canvas, &poly, Rgba([rgb[0], rgb[1], rgb[2], 77]));
        }
    }
    for e in edge_styles(label) {
        let [r, g, b] = e.role.rgb();
        let (a, c) = (at(e.corners.0), at(e.corners.1));
        if e.solid {
            drawing::draw_antialiased_line_segment_mut(
                &mut canvas.0,
                (a.0 as i32, a.1 as i32),
                (c.0 as i32, c.1 as i32),
                Rgba([r, g, b, 255]),
                imageproc::pixelops::interpolate,
            );
        } else {
            for (p, q) in dashed_segments(a, c, 10.0, 7.0) {
                drawing::draw_line_segment_mut(&mut canvas, p, q, Rgba([r, g, b, 180]));
            }
        }
    }
    for kp in keypoints {
        let c = (kp.pixel.x.round() as i32, kp.pixel.y.round() as i32);
        let red = Rgba([0xd6, 0x27, 0x28, 0xff]);
        if kp.visible {
            drawing::draw_filled_circle_mut(&mut canvas, c, 3, red);
        } else {
            drawing::draw_hollow_circle_mut(&mut canvas, c, 3, red);
        }
    }
    canvas.0
}

/// Write `out` as SVG (the extension is forced to `.svg`) and, when `png`
/// is set, a PNG next to it.
pub fn render_overlay(
    label: &Label3D,
    keypoints: &[Keypoint],
    out: &Path,
    png: bool,
) -> Result<RenderOutcome, RenderError> {
    let svg_path = out.with_extension("svg");
    fs::write(&svg_path, render_svg(label, keypoints)).map_err(|source| RenderError::Io {
        path: svg_path.clone(),
        source,
    })?;
    if png {
        let png_path = out.with_extension("png");
        render_png(label, keypoints)
            .save(&png_path)
            .map_err(|e| RenderError::Encode {
                path: png_path,
                message: e.to_string(),
            })?;
    }
    Ok(match refusal_reason(label) {
        Some(reason) => RenderOutcome::Refused { reason },
        None => RenderOutcome::Drawn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dashes_cover_the_segment() {
        let d = dashed_segments((0.0, 0.0), (34.0, 0.0), 10.0, 7.0);
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].0, (17.0, 0.0));
        assert_eq!(d[1].1, (27.0, 0.0));
    }

    #[test]
    fn front_and_back_edges_are_four_each() {
        let roles: Vec<_> = EDGES.iter().map(|&(a, b)| EdgeRole::of(a, b)).collect();
        assert_eq!(roles.iter().filter(|r| **r == EdgeRole::Front).count(), 4);
        assert_eq!(roles.iter().filter(|r| **r == EdgeRole::Back).count(), 4);
    }
}
