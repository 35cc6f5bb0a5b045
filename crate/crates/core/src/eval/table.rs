use std::fmt::Write as _;

use super::Report;
use crate::imaging::reportable_db;

/// Human-readable and CSV renderings of a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

fn db(v: f64) -> String {
    format!("{:.2}", reportable_db(v))
}

/// PSNR rows (without post-processing, then one per RRDB count) against λ
/// columns, followed by the rates. CSV holds one row per λ.
pub fn render_table(report: &Report) -> RenderedTable {
    let levels = report.levels();
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    rows.push(("w/o post-processing".into(), report.points.iter().map(|p| db(p.psnr_human)).collect()));
    for &l in &levels {
        rows.push((
            format!("w/ post-processing (l={l})"),
            report
                .points
                .iter()
                .map(|p| p.psnr_refined.get(&l).map_or("-".into(), |&v| db(v)))
                .collect(),
        ));
    }
    rows.push(("machine layer".into(), report.points.iter().map(|p| db(p.psnr_machine)).collect()));
    rows.push((
        "bpp additional".into(),
        report.points.iter().map(|p| format!("{:.4}", p.bpp_additional)).collect(),
    ));
    rows.push((
        "bpp total".into(),
        report.points.iter().map(|p| format!("{:.4}", p.bpp_total)).collect(),
    ));
    let header: Vec<String> = report.points.iter().map(|p| format!("{:.3}", p.lambda)).collect();
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max("lambda".len());
    let col_w = rows
        .iter()
        .flat_map(|(_, c)| c.iter().map(String::len))
        .chain(header.iter().map(String::len))
        .max()
        .unwrap_or(0);
    let mut text = String::new();
    let line = |label: &str, cells: &[String]| {
        let mut s = format!("{label:<label_w$}");
        for c in cells {
            let _ = write!(s, " | {c:>col_w$}");
        }
        s + "\n"
    };
    text.push_str(&line("lambda", &header));
    text.push_str(&"-".repeat(label_w + header.len() * (col_w + 3)));
    text.push('\n');
    for (label, cells) in &rows {
        text.push_str(&line(label, cells));
    }

    let mut csv = String::from("lambda,bpp_additional,bpp_total,psnr_machine,psnr_human,psnr_l1,psnr_l2,n_images\n");
    for p in &report.points {
        let refined = |l: usize| p.psnr_refined.get(&l).map_or(String::new(), |&v| db(v));
        let _ = writeln!(
            csv,
            "{:.3},{:.6},{:.6},{},{},{},{},{}",
            p.lambda,
            p.bpp_additional,
            p.bpp_total,
            db(p.psnr_machine),
            db(p.psnr_human),
            refined(1),
            refined(2),
            p.n_images
        );
    }
    RenderedTable { text, csv }
}
