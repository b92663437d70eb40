//! Plain-text rendering of evaluation results as aligned tables.

use std::collections::BTreeMap;

use crate::category::Category;
use crate::evaluation::{CategoryReport, ModularizationReport, SimilarityReport, SimilarityStats};

/// Two-decimal metric.
pub fn metric(v: f64) -> String {
    format!("{v:.2}")
}

/// `"0.77 0.69 0.72"`
pub fn metric_triplet(p: f64, r: f64, f1: f64) -> String {
    format!("{} {} {}", metric(p), metric(r), metric(f1))
}

/// `"121 modules, 8556 functions, 0.77/0.69/0.72"`
pub fn modularization_summary(r: &ModularizationReport) -> String {
    format!(
        "{} modules, {} functions, {}/{}/{}",
        r.module_count,
        r.function_count,
        metric(r.p_w),
        metric(r.r_w),
        metric(r.f1_w)
    )
}

/// `"0.76 ± 0.16"`
pub fn similarity_cell(s: &SimilarityStats) -> String {
    format!("{} ± {}", metric(s.mean), metric(s.std))
}

/// `"0.33 (0.52)"`, or just the value without an upper bound.
pub fn with_upper_bound(v: f64, upper: Option<f64>) -> String {
    match upper {
        Some(u) => format!("{} ({})", metric(v), metric(u)),
        None => metric(v),
    }
}

/// `72000.0` seconds renders as `"20.0 h"`.
pub fn format_hours(seconds: f64) -> String {
    format!("{:.1} h", seconds / 3600.0)
}

/// Left-aligned columns separated by two spaces, with a rule under the
/// header. Widths count characters, not bytes.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0usize; cols];
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (i, cell) in row.iter().enumerate().take(cols) {
            width[i] = width[i].max(cell.chars().count());
        }
    }
    let line = |row: &[String]| {
        let cells: Vec<String> =
            row.iter().enumerate().map(|(i, c)| format!("{c}{}", " ".repeat(width[i] - c.chars().count()))).collect();
        cells.join("  ").trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * cols.saturating_sub(1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn modularization_table(reports: &[ModularizationReport]) -> String {
    let header = strings(&["Device", "# of Modules", "# of Functions", "P_w", "R_w", "F1_w"]);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.device.clone(),
                r.module_count.to_string(),
                r.function_count.to_string(),
                metric(r.p_w),
                metric(r.r_w),
                metric(r.f1_w),
            ]
        })
        .collect();
    render_table(&header, &rows)
}

/// Devices as rows, models as columns.
pub fn similarity_table(report: &SimilarityReport) -> String {
    let mut models: Vec<&String> = report.cells.values().flat_map(|m| m.keys()).collect();
    models.sort();
    models.dedup();
    let mut header = vec!["Device".to_string()];
    header.extend(models.iter().map(|m| m.to_string()));
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|(device, by_model)| {
            let mut row = vec![device.clone()];
            row.extend(models.iter().map(|m| by_model.get(*m).map_or_else(|| "-".to_string(), similarity_cell)));
            row
        })
        .collect();
    render_table(&header, &rows)
}

/// One model's category results, optionally paired with the run on
/// normalized source that bounds it from above.
#[derive(Debug, Clone)]
pub struct CategoryColumn<'a> {
    pub model: &'a str,
    pub decompiled: &'a CategoryReport,
    pub upper_bound: Option<&'a CategoryReport>,
}

/// Per-category precision, recall and F1 for each model; upper-bound
/// values appear in parentheses when present.
pub fn category_table(device: &str, columns: &[CategoryColumn<'_>]) -> String {
    let mut header = strings(&["Device", "Category"]);
    for c in columns {
        let suffix = if c.upper_bound.is_some() { " (UB)" } else { "" };
        for m in ["P", "R", "F1"] {
            header.push(format!("{} {m}{suffix}", c.model));
        }
    }
    let mut rows = Vec::new();
    for (i, cat) in Category::ALL.iter().enumerate() {
        let mut row = vec![if i == 0 { device.to_string() } else { String::new() }, cat.title().to_string()];
        for c in columns {
            let s = c.decompiled.per_category.get(cat).copied().unwrap_or_default();
            let u = c.upper_bound.map(|u| u.per_category.get(cat).copied().unwrap_or_default());
            row.push(with_upper_bound(s.precision, u.map(|u| u.precision)));
            row.push(with_upper_bound(s.recall, u.map(|u| u.recall)));
            row.push(with_upper_bound(s.f1, u.map(|u| u.f1)));
        }
        rows.push(row);
    }
    render_table(&header, &rows)
}

/// Total generation time per model and device.
pub fn timing_table(seconds: &BTreeMap<String, BTreeMap<String, f64>>) -> String {
    let header = strings(&["Model", "Device", "Seconds", "Hours"]);
    let rows: Vec<Vec<String>> = seconds
        .iter()
        .flat_map(|(model, by_device)| {
            by_device
                .iter()
                .map(move |(device, s)| vec![model.clone(), device.clone(), format!("{s:.1}"), format_hours(*s)])
        })
        .collect();
    render_table(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CategoryScore;

    fn quadcopter() -> ModularizationReport {
        ModularizationReport {
            device: "QuadCopter".into(),
            module_count: 121,
            function_count: 8556,
            p_w: 0.77,
            r_w: 0.69,
            f1_w: 0.72,
            matches: vec![],
        }
    }

    #[test]
    fn modularization_cells() {
        let r = quadcopter();
        assert_eq!(metric_triplet(r.p_w, r.r_w, r.f1_w), "0.77 0.69 0.72");
        assert_eq!(modularization_summary(&r), "121 modules, 8556 functions, 0.77/0.69/0.72");
        let t = modularization_table(&[r]);
        assert!(t.lines().nth(2).unwrap().contains("0.77  0.69  0.72"), "{t}");
    }

    #[test]
    fn similarity_cells() {
        let s = SimilarityStats { count: 10, mean: 0.76, std: 0.16 };
        assert_eq!(similarity_cell(&s), "0.76 ± 0.16");
        let mut rep = SimilarityReport::default();
        rep.cells.entry("QuadCopter".into()).or_default().insert("deepseek".into(), s);
        let t = similarity_table(&rep);
        assert!(t.contains("QuadCopter  0.76 ± 0.16"), "{t}");
    }

    #[test]
    fn upper_bound_columns() {
        assert_eq!(with_upper_bound(0.33, Some(0.52)), "0.33 (0.52)");
        assert_eq!(with_upper_bound(0.0, Some(0.0)), "0.00 (0.00)");
        let mut per = BTreeMap::new();
        per.insert(
            Category::DataTransfer,
            CategoryScore { precision: 0.33, recall: 0.14, f1: 0.2, ..Default::default() },
        );
        let dec = CategoryReport { modules: 1, per_category: per.clone() };
        per.get_mut(&Category::DataTransfer).unwrap().precision = 0.52;
        let ub = CategoryReport { modules: 1, per_category: per };
        let t =
            category_table("QuadCopter", &[CategoryColumn { model: "m", decompiled: &dec, upper_bound: Some(&ub) }]);
        assert!(t.contains("m P (UB)"));
        assert!(t.contains("0.33 (0.52)"), "{t}");
        let plain = category_table("Q", &[CategoryColumn { model: "m", decompiled: &dec, upper_bound: None }]);
        assert!(!plain.contains('('));
    }

    #[test]
    fn hours() {
        assert_eq!(format_hours(72_000.0), "20.0 h");
        let mut t = BTreeMap::new();
        t.entry("codestral".to_string()).or_insert_with(BTreeMap::new).insert("QuadCopter".to_string(), 72_000.0);
        assert!(timing_table(&t).contains("20.0 h"));
    }
}
