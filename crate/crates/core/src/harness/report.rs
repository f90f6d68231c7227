use std::fmt::Write as _;

use super::ab::Metric;
use super::experiment::ExperimentReport;
use crate::Result;

pub fn report_to_json(report: &ExperimentReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn report_from_json(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}

fn pct(v: f64) -> String {
    format!("{:+.3}%", 100.0 * v)
}

/// Plain-text summary for terminals.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let w = report.report_weights;
    let _ = writeln!(
        out,
        "seed {}  days {} (warm-up {})  sessions/day {}",
        report.seed, report.days, report.warmup_days, report.sessions_per_day
    );
    let _ = writeln!(
        out,
        "downstream-value effects (top, middle, bottom): {:.4} {:.4} {:.4}  -> weights {:.3} {:.3} {:.3}",
        report.dvwpx.beta[0], report.dvwpx.beta[1], report.dvwpx.beta[2], w.top, w.middle, w.bottom
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>10} {:>12} {:>10} {:>10}",
        "arm", "sessions", "revenue", "long-term", "ctr", "pr-wp-bmr"
    );
    for a in &report.arms {
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>10.4} {:>12.4} {:>10.4} {:>10.4}",
            a.name, a.sessions, a.revenue, a.long_term_revenue, a.search_ctr, a.pr_wp_bmr
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "template share:");
    for a in &report.arms {
        let shares: Vec<String> = report
            .templates
            .iter()
            .zip(&a.template_share)
            .map(|(t, s)| format!("{t}={:.2}", s))
            .collect();
        let _ = writeln!(out, "  {:<10} {}", a.name, shares.join(" "));
    }
    for lifts in &report.lifts {
        let _ = writeln!(out);
        let _ = writeln!(out, "lift {} vs {}:", lifts.arm, lifts.baseline);
        for row in &lifts.rows {
            match row.estimate {
                Some(e) => {
                    let _ = writeln!(
                        out,
                        "  {:<18} {:>10}  95% CI [{}, {}]",
                        row.metric.name(),
                        pct(e.lift),
                        pct(e.ci_low),
                        pct(e.ci_high)
                    );
                }
                None => {
                    let _ = writeln!(out, "  {:<18} undefined (control mean is zero)", row.metric.name());
                }
            }
        }
    }
    out
}

/// Per-arm, per-day metric series.
pub fn daily_csv(report: &ExperimentReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(
        ["arm", "day", "warmup", "sessions"]
            .into_iter()
            .chain(Metric::ALL.iter().map(|m| m.name())),
    )?;
    for r in &report.daily {
        writer.write_record([
            r.arm.clone(),
            r.day.to_string(),
            r.warmup.to_string(),
            r.sessions.to_string(),
            r.revenue.to_string(),
            r.long_term_revenue.to_string(),
            r.search_ctr.to_string(),
            r.pr_wp_bmr.to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
