//! RD curves: PSNR against bpp, one series per method variant. Solid lines
//! count only the enhancement payload; dotted lines count both layers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::Report;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::imaging::image::write_png;
use crate::imaging::reportable_db;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accounting {
    /// Enhancement payload only (solid).
    AdditionalOnly,
    /// Base plus enhancement payloads (dotted).
    Total,
}

impl Accounting {
    pub fn name(self) -> &'static str {
        match self {
            Accounting::AdditionalOnly => "additional_only",
            Accounting::Total => "total",
        }
    }
}

/// Externally measured RD points drawn alongside the report's series.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Overlay {
    /// Parses `bpp,psnr` rows; a non-numeric first line is a header.
    pub fn parse_csv(name: &str, text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let parsed = match (it.next(), it.next()) {
                (Some(a), Some(b)) => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some(p) => points.push(p),
                None if i == 0 => continue,
                None => return Err(Error::Config(format!("overlay '{name}' line {}: expected bpp,psnr", i + 1))),
            }
        }
        Ok(Overlay {
            name: name.to_string(),
            points,
        })
    }
}

/// One polyline of the figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dotted: bool,
}

/// Series for the report under one accounting: without post-processing,
/// then one per RRDB count.
pub fn series(report: &Report, accounting: Accounting) -> Vec<Series> {
    let dotted = accounting == Accounting::Total;
    let x = |p: &super::RdPoint| match accounting {
        Accounting::AdditionalOnly => p.bpp_additional,
        Accounting::Total => p.bpp_total,
    };
    let mut out = vec![Series {
        label: "w/o post-processing".into(),
        points: report.points.iter().map(|p| (x(p), reportable_db(p.psnr_human))).collect(),
        dotted,
    }];
    for l in report.levels() {
        out.push(Series {
            label: format!("w/ post-processing (l={l})"),
            points: report
                .points
                .iter()
                .filter_map(|p| p.psnr_refined.get(&l).map(|&v| (x(p), reportable_db(v))))
                .collect(),
            dotted,
        });
    }
    out
}

const W: usize = 640;
const H: usize = 480;
const MARGIN: f64 = 60.0;
const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [214, 39, 40],
    [44, 160, 44],
    [148, 103, 189],
    [255, 127, 14],
    [127, 127, 127],
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(all: &[Series]) -> Frame {
        let pts = all.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let pad = |a: f64, b: f64| {
            let span = (b - a).max(1e-6);
            (a - 0.08 * span, b + 0.08 * span)
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let px = MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W as f64 - 2.0 * MARGIN);
        let py = H as f64 - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H as f64 - 2.0 * MARGIN);
        (px, py)
    }
}

struct Canvas {
    rgb: Vec<u8>,
}

impl Canvas {
    fn new() -> Self {
        Canvas { rgb: vec![255; W * H * 3] }
    }

    fn dot(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if (0..W as i64).contains(&x) && (0..H as i64).contains(&y) {
            let i = (y as usize * W + x as usize) * 3;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), c: [u8; 3], dotted: bool) {
        let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
        for s in 0..=steps {
            if dotted && (s / 4) % 2 == 1 {
                continue;
            }
            let t = s as f64 / steps as f64;
            let x = (a.0 + t * (b.0 - a.0)).round() as i64;
            let y = (a.1 + t * (b.1 - a.1)).round() as i64;
            self.dot(x, y, c);
            self.dot(x, y + 1, c);
            self.dot(x + 1, y, c);
        }
    }

    fn marker(&mut self, p: (f64, f64), c: [u8; 3]) {
        let (x, y) = (p.0.round() as i64, p.1.round() as i64);
        for dy in -3..=3 {
            for dx in -3..=3 {
                self.dot(x + dx, y + dy, c);
            }
        }
    }
}

fn all_series(report: &Report, accounting: Accounting, overlays: &[Overlay]) -> Vec<Series> {
    let mut all = series(report, accounting);
    all.extend(overlays.iter().map(|o| Series {
        label: o.name.clone(),
        points: o.points.clone(),
        dotted: false,
    }));
    all
}

fn render_png(all: &[Series], frame: &Frame) -> Vec<u8> {
    let mut cv = Canvas::new();
    let black = [0, 0, 0];
    let (left, bottom) = (MARGIN, H as f64 - MARGIN);
    cv.line((left, bottom), (W as f64 - MARGIN, bottom), black, false);
    cv.line((left, bottom), (left, MARGIN), black, false);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let x = left + t * (W as f64 - 2.0 * MARGIN);
        let y = bottom - t * (H as f64 - 2.0 * MARGIN);
        cv.line((x, bottom), (x, bottom + 6.0), black, false);
        cv.line((left - 6.0, y), (left, y), black, false);
    }
    for (k, s) in all.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let pts: Vec<_> = s.points.iter().map(|&p| frame.map(p)).collect();
        for w in pts.windows(2) {
            cv.line(w[0], w[1], c, s.dotted);
        }
        pts.iter().for_each(|&p| cv.marker(p, c));
    }
    cv.rgb
}

fn render_svg(all: &[Series], frame: &Frame, accounting: Accounting) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (left, bottom, right, top) = (MARGIN, H as f64 - MARGIN, W as f64 - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let x = left + t * (right - left);
        let y = bottom - t * (bottom - top);
        let xv = frame.x0 + t * (frame.x1 - frame.x0);
        let yv = frame.y0 + t * (frame.y1 - frame.y0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text>"#, bottom + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{yv:.2}</text>"#, left - 8.0);
    }
    let label = match accounting {
        Accounting::AdditionalOnly => "bpp (additional information only)",
        Accounting::Total => "bpp (machine + additional information)",
    };
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, W as f64 / 2.0, H as f64 - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" transform="rotate(-90 15 {:.1})" text-anchor="middle">PSNR [dB]</text>"#,
        H as f64 / 2.0,
        H as f64 / 2.0
    );
    for (k, series) in all.iter().enumerate() {
        let [r, g, b] = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .map(|&p| {
                let (x, y) = frame.map(p);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let dash = if series.dotted { r#" stroke-dasharray="2 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="rgb({r},{g},{b})" stroke-width="2" fill="none"{dash}/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="rgb({r},{g},{b})" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            left + 10.0,
            left + 40.0,
            left + 46.0,
            ly + 4.0,
            series.label
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `rd_{accounting}_{timestamp}.png` and `.svg` into `out_dir` and
/// returns both paths.
pub fn plot_rd(
    report: &Report,
    accounting: Accounting,
    out_dir: &Path,
    timestamp: &str,
    overlays: &[Overlay],
) -> Result<Vec<PathBuf>> {
    if report.points.len() < 2 {
        return Err(Error::TooFewPoints(report.points.len()));
    }
    let all = all_series(report, accounting, overlays);
    let frame = Frame::fit(&all);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = format!("rd_{}_{timestamp}", accounting.name());
    let png_path = out_dir.join(format!("{stem}.png"));
    let svg_path = out_dir.join(format!("{stem}.svg"));
    write_png(&png_path, W, H, png::ColorType::Rgb, &render_png(&all, &frame))?;
    write_atomic(&svg_path, render_svg(&all, &frame, accounting).as_bytes())?;
    Ok(vec![png_path, svg_path])
}
