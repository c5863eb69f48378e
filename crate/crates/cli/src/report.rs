//! CSV, Markdown and JSON renderings of study reports and certificates.

use std::fmt::Write as _;

use anyhow::Result;
use nodalquad_core::analysis::{fitted_order, StudyReport, StudyRows};
use nodalquad_core::verify::{ElementCertificate, SequenceReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Md,
    Json,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        String::new()
    }
}

fn order_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        String::new()
    }
}

/// One line per `(row, n)`. Columns: `label` (only with several rows),
/// `n`, `error_1..error_m`, then `order_last,order_fit` for the first norm
/// and `order_last_k,order_fit_k` for the others. `order_last` is the
/// order from the previous `n`; `order_fit` fits the last four points up
/// to this `n`.
pub fn to_csv(report: &StudyReport) -> String {
    let labelled = report.rows.len() > 1;
    let m = report.norms.len();
    let mut out = String::new();
    let mut header: Vec<String> = Vec::new();
    if labelled {
        header.push("label".into());
    }
    header.push("n".into());
    header.extend((1..=m).map(|k| format!("error_{k}")));
    for k in 1..=m {
        if k == 1 {
            header.extend(["order_last".to_string(), "order_fit".to_string()]);
        } else {
            header.extend([format!("order_last_{k}"), format!("order_fit_{k}")]);
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    let ns = &report.config.ns;
    for row in &report.rows {
        for (i, p) in row.points.iter().enumerate() {
            let mut cells: Vec<String> = Vec::new();
            if labelled {
                cells.push(row.label.clone());
            }
            cells.push(p.n.to_string());
            cells.extend(p.errors.iter().map(|&e| num(e)));
            for k in 0..m {
                let e = row.errors(k);
                let last = if i == 0 { f64::NAN } else { row.orders[k].pairwise[i - 1] };
                let fit = if i == 0 { f64::NAN } else { fitted_order(&ns[..=i], &e[..=i]) };
                cells.push(order_cell(last));
                cells.push(order_cell(fit));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    out
}

fn sci(v: f64) -> String {
    format!("{v:.3E}")
}

fn row_header(report: &StudyReport) -> &'static str {
    match report.config.rows {
        StudyRows::Scalar(_) => "eps",
        StudyRows::Brinkman(_) => "nu^(1/2)",
    }
}

/// One table per norm: a row per parameter, a column per `n`, and the
/// last-pair order.
pub fn to_markdown(report: &StudyReport) -> String {
    let mut out = String::new();
    let ns = &report.config.ns;
    for (k, norm) in report.norms.iter().enumerate() {
        let _ = writeln!(out, "{} error, {} meshes\n", norm, report.config.family.name());
        let mut head = format!("| {} |", row_header(report));
        let mut rule = String::from("|---|");
        for n in ns {
            let _ = write!(head, " n={n} |");
            rule.push_str("---|");
        }
        head.push_str(" order |");
        rule.push_str("---|");
        let _ = writeln!(out, "{head}\n{rule}");
        for row in &report.rows {
            let mut line = format!("| {} |", row.label);
            for e in row.errors(k) {
                let _ = write!(line, " {} |", sci(e));
            }
            let _ = write!(line, " {:.2} |", row.orders[k].last);
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn render_study(report: &StudyReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => to_csv(report),
        Format::Md => to_markdown(report),
        Format::Json => to_json(report)?,
    })
}

pub fn certificate_markdown(cert: &ElementCertificate) -> String {
    let mut out = format!(
        "element certificate: family {:?}, {} samples, seed {}\n\n| check | worst | tolerance | result |\n|---|---|---|---|\n",
        cert.family, cert.samples, cert.seed
    );
    for c in &cert.checks {
        let _ = writeln!(
            out,
            "| {} | {:.3e} | {:.0e} | {} |",
            c.name,
            c.worst,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(out, "\noverall: {}", if cert.passed { "pass" } else { "FAIL" });
    out
}

pub fn sequence_markdown(r: &SequenceReport) -> String {
    let (nw, nv, np) = r.dims;
    let mut out = format!("exact sequence: {} mesh, {} cells\n\n| quantity | value |\n|---|---|\n", r.family, r.cells);
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "| {k} | {v} |");
    };
    line("dims (W_h, V_h, P_h)", format!("({nw}, {nv}, {np})"));
    line("Euler characteristic", r.euler.to_string());
    line("rank div_h", format!("{} (gap {:.1} decades)", r.div_rank.rank, r.div_rank.gap_decades));
    line("nullity div_h", r.div_nullity.to_string());
    line("rank curl_h", format!("{} (gap {:.1} decades)", r.curl_rank.rank, r.curl_rank.gap_decades));
    line("rank [curl image | kernel]", format!("{} (gap {:.1} decades)", r.span_rank.rank, r.span_rank.gap_decades));
    line("curl re-interpolation residual", format!("{:.3e}", r.curl_reinterpolation));
    line("curl continuity residual", format!("{:.3e}", r.curl_continuity));
    line("max |div_h curl_h|", format!("{:.3e}", r.div_curl));
    line("commuting residual", format!("{:.3e}", r.commuting));
    line("divergence-free probe", format!("{:.3e}", r.discrete_divergence_free));
    let _ = writeln!(out, "\noverall: {}", if r.exact { "pass" } else { "FAIL" });
    out
}
