//! Report emission: per-pipeline CSV and markdown tables mirroring the
//! paper's column set, a summary CSV of per-pipeline aggregates, and a
//! two-panel SVG (per-fault compressed rates; mean accuracy per pipeline).
//! Output is byte-identical for identical reports.

use super::{GridReport, PipelineAggregate, ReportRow};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

const SERIES_COLORS: [&str; 7] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#7f7f7f",
];

/// Round to one decimal for display, keeping -0.0 out of the tables.
fn round1(x: f64) -> f64 {
    let r = (x * 10.0).round() / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fmt1(x: f64) -> String {
    format!("{:.1}", round1(x))
}

/// Write every report artifact into `dir`; returns the created paths.
pub fn emit_report(report: &GridReport, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    for agg in &report.aggregates {
        let rows: Vec<&ReportRow> = report.rows_for(agg.pipeline).collect();
        let tag = agg.pipeline.tag();

        let csv_path = dir.join(format!("report_{tag}.csv"));
        fs::write(&csv_path, table_csv(tag, &rows))?;
        written.push(csv_path);

        let md_path = dir.join(format!("report_{tag}.md"));
        fs::write(&md_path, table_markdown(tag, &rows, agg))?;
        written.push(md_path);
    }

    let summary_path = dir.join("summary.csv");
    fs::write(&summary_path, summary_csv(report))?;
    written.push(summary_path);

    let failures_path = dir.join("failures.csv");
    fs::write(&failures_path, failures_csv(report))?;
    written.push(failures_path);

    let svg_path = dir.join("summary.svg");
    fs::write(&svg_path, summary_svg(report))?;
    written.push(svg_path);

    Ok(written)
}

fn table_csv(tag: &str, rows: &[&ReportRow]) -> String {
    let mut out = String::from(
        "pipeline,fault,ann_size_bytes,ann_acc_pct,compressed_size_bytes,\
         compressed_acc_pct,compressed_rate_pct,acc_change_pct\n",
    );
    for r in rows {
        writeln!(
            out,
            "{tag},{},{},{},{},{},{},{}",
            r.fault,
            r.baseline_size,
            fmt1(r.baseline_acc),
            r.compressed_size,
            fmt1(r.compressed_acc),
            fmt1(r.compressed_rate),
            fmt1(r.acc_change),
        )
        .unwrap();
    }
    out
}

fn table_markdown(tag: &str, rows: &[&ReportRow], agg: &PipelineAggregate) -> String {
    let mut out = String::new();
    writeln!(out, "## Compression results with pipeline `{tag}`\n").unwrap();
    writeln!(
        out,
        "| Pipeline | Fault | ANN Size (bytes) | ANN Acc (%) | Compressed Size (bytes) | \
         Compressed Acc (%) | Compressed Rate (%) | Acc Change (%) |"
    )
    .unwrap();
    writeln!(out, "|---|---|---|---|---|---|---|---|").unwrap();
    for r in rows {
        writeln!(
            out,
            "| {tag} | {} | {} | {} | {} | {} | {} | {} |",
            r.fault,
            r.baseline_size,
            fmt1(r.baseline_acc),
            r.compressed_size,
            fmt1(r.compressed_acc),
            fmt1(r.compressed_rate),
            fmt1(r.acc_change),
        )
        .unwrap();
    }
    writeln!(
        out,
        "| {tag} | Average | | | | | {} | {} |",
        fmt1(agg.mean_rate),
        fmt1(agg.mean_change),
    )
    .unwrap();
    out
}

fn summary_csv(report: &GridReport) -> String {
    let mut out = String::from(
        "pipeline,rows,mean_compressed_rate_pct,var_compressed_rate,\
         mean_acc_change_pct,var_acc_change,mean_compressed_acc_pct,complete\n",
    );
    for a in &report.aggregates {
        writeln!(
            out,
            "{},{},{},{:.2},{},{:.2},{},{}",
            a.pipeline.tag(),
            a.rows,
            fmt1(a.mean_rate),
            a.var_rate,
            fmt1(a.mean_change),
            a.var_change,
            fmt1(a.mean_compressed_acc),
            report.complete,
        )
        .unwrap();
    }
    out
}

fn failures_csv(report: &GridReport) -> String {
    let mut out = String::from("fault,pipeline,error\n");
    for f in &report.failures {
        writeln!(
            out,
            "{},{},{:?}",
            f.fault,
            f.pipeline.map_or("-".to_string(), |p| p.tag().to_string()),
            f.error,
        )
        .unwrap();
    }
    out
}

/// Two panels: per-fault compressed rates (one series per pipeline) and the
/// mean compressed accuracy per pipeline.
fn summary_svg(report: &GridReport) -> String {
    let width = 940.0;
    let height = 420.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();

    // Left panel: rate by fault.
    let (lx, ly, lw, lh) = (60.0, 40.0, 380.0, 300.0);
    writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14">Compressed rate (%) by fault</text>"#,
        lx
    )
    .unwrap();
    panel_axes(&mut s, lx, ly, lw, lh);
    let faults: Vec<u8> = {
        let mut f: Vec<u8> = report.rows.iter().map(|r| r.fault).collect();
        f.sort_unstable();
        f.dedup();
        f
    };
    let x_of = |fault: u8| -> f64 {
        let i = faults.iter().position(|&f| f == fault).unwrap() as f64;
        let n = faults.len().max(2) as f64;
        lx + lw * (i + 0.5) / n
    };
    let y_of = |rate: f64| ly + lh * (1.0 - (rate.clamp(0.0, 100.0) / 100.0));
    for (i, agg) in report.aggregates.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let points: Vec<String> = report
            .rows_for(agg.pipeline)
            .map(|r| format!("{:.1},{:.1}", x_of(r.fault), y_of(r.compressed_rate)))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            lx + lw + 8.0,
            ly + 14.0 * (i as f64 + 1.0),
            agg.pipeline.tag()
        )
        .unwrap();
    }

    // Right panel: mean compressed accuracy per pipeline.
    let (rx, ry, rw, rh) = (560.0, 40.0, 340.0, 300.0);
    writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14">Mean compressed accuracy (%)</text>"#,
        rx
    )
    .unwrap();
    panel_axes(&mut s, rx, ry, rw, rh);
    let n = report.aggregates.len().max(1) as f64;
    for (i, agg) in report.aggregates.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let slot = rw / n;
        let bar_w = slot * 0.6;
        let x = rx + slot * i as f64 + (slot - bar_w) / 2.0;
        let acc = if agg.mean_compressed_acc.is_finite() {
            agg.mean_compressed_acc.clamp(0.0, 100.0)
        } else {
            0.0
        };
        let bar_h = rh * acc / 100.0;
        writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="{bar_w:.1}" height="{bar_h:.1}" fill="{color}"/>"#,
            ry + rh - bar_h
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            x + bar_w / 2.0,
            ry + rh + 16.0,
            agg.pipeline.tag()
        )
        .unwrap();
    }

    writeln!(s, "</svg>").unwrap();
    s
}

fn panel_axes(s: &mut String, x: f64, y: f64, w: f64, h: f64) {
    writeln!(
        s,
        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="none" stroke="#444" stroke-width="1"/>"##
    )
    .unwrap();
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let yy = y + h * (1.0 - frac);
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            x - 6.0,
            yy + 3.0,
            (100.0 * frac) as u32
        )
        .unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy_grid_config;
    use super::*;
    use crate::bench::run_grid;

    #[test]
    fn emits_expected_files_deterministically() {
        let report = run_grid(&toy_grid_config(4)).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let files_a = emit_report(&report, dir_a.path()).unwrap();
        emit_report(&report, dir_b.path()).unwrap();

        let names: Vec<String> = files_a
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().to_string())
            .collect();
        assert_eq!(names.len(), 7 * 2 + 3, "7 csv + 7 md + summary/failures/svg");
        assert!(names.contains(&"report_pcq.csv".to_string()));
        assert!(names.contains(&"summary.svg".to_string()));

        for name in &names {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} must be byte-identical");
        }
    }

    #[test]
    fn markdown_has_eight_columns_and_average_row() {
        let report = run_grid(&toy_grid_config(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, dir.path()).unwrap();
        let md = std::fs::read_to_string(dir.path().join("report_p.md")).unwrap();
        let header = md.lines().find(|l| l.starts_with("| Pipeline")).unwrap();
        let cols = header.matches('|').count() - 1;
        assert_eq!(cols, 8, "{header}");
        assert!(md.contains("| Average |"));
    }

    #[test]
    fn svg_has_one_series_per_pipeline() {
        let report = run_grid(&toy_grid_config(4)).unwrap();
        let svg = summary_svg(&report);
        assert_eq!(svg.matches("<polyline").count(), 7);
        assert_eq!(svg.matches("<rect x=").count(), 2 + 7, "2 panels + 7 bars");
    }

    #[test]
    fn rounding_is_paper_style() {
        assert_eq!(fmt1(64.0176), "64.0");
        assert_eq!(fmt1(91.4987), "91.5");
        assert_eq!(fmt1(-0.04), "0.0");
        assert_eq!(fmt1(-4.149), "-4.1");
    }
}
