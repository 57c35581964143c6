use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::ExperimentReport;
use crate::error::{Error, Result};
use crate::metrics::ScoreSummary;
use crate::segmenters::BestParamRecord;

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn summary_fields(s: &ScoreSummary) -> String {
    format!("{},{},{},{},{}", s.mean, s.sd, s.ci_lo, s.ci_hi, s.n)
}

/// `image_id,param,score` with a header line.
pub fn best_params_csv(records: &[BestParamRecord]) -> String {
    let mut out = String::from("image_id,param,score\n");
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.image_id, r.param, r.score);
    }
    out
}

pub fn parse_best_params_csv(text: &str) -> Result<Vec<BestParamRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("image_id,param,score") {
        return Err(Error::Parse(
            "expected header 'image_id,param,score'".into(),
        ));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad record line '{l}'")));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("'{s}': {e}")))
            };
            Ok(BestParamRecord {
                image_id: f[0].to_string(),
                param: num(f[1])?,
                score: num(f[2])?,
            })
        })
        .collect()
}

/// Per-run summary table: one row per run and method, then the overall rows.
pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("run,method,mean,sd,ci_lo,ci_hi,n\n");
    for r in &report.runs {
        let mut rows = vec![
            ("default", &r.default),
            ("maa", &r.maa),
            ("scefis", &r.scefis),
        ];
        if let Some(f) = &r.fusion {
            rows.push(("fusion", f));
        }
        for (name, m) in rows {
            let _ = writeln!(out, "{},{},{}", r.run, name, summary_fields(&m.summary));
        }
    }
    for (name, s) in &report.overall {
        let _ = writeln!(out, "all,{},{}", name, summary_fields(s));
    }
    out
}

pub fn per_image_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("run,image_id,default,maa,scefis,t_star,t_b,rules,m_rows\n");
    for r in &report.runs {
        for (j, e) in r.log.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.run,
                e.image_id,
                r.default.scores[j],
                r.maa.scores[j],
                e.score,
                e.t_star,
                e.t_b,
                e.rule_count,
                e.m_rows
            );
        }
    }
    out
}

pub fn comparisons_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("run,comparison,test,statistic,p_value,df,degenerate\n");
    for r in &report.runs {
        for c in &r.comparisons {
            let stat = c
                .statistic
                .map(|v| v.to_string())
                .unwrap_or_else(|| "nan".into());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.run, c.label, c.test, stat, c.p_value, c.df, c.degenerate
            );
        }
    }
    out
}

/// Line chart of the rule count after each processed image. The first
/// point is the count before the stream starts.
pub fn trajectory_svg(title: &str, counts: &[usize]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 240.0;
    const PAD: f64 = 40.0;
    let max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let steps = (counts.len().max(2) - 1) as f64;
    let px = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / steps;
    let py = |c: usize| H - PAD - (H - 2.0 * PAD) * c as f64 / max;
    let points: Vec<String> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| format!("{:.1},{:.1}", px(i), py(c)))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        W / 2.0,
        title
    );
    let _ = writeln!(
        svg,
        "<path d=\"M{PAD},{PAD} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
        PAD - 4.0,
        PAD + 4.0,
        max
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">images processed</text>",
        W / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" stroke=\"steelblue\" stroke-width=\"2\" fill=\"none\"/>",
        points.join(" ")
    );
    for p in &points {
        let (x, y) = p.split_once(',').unwrap();
        let _ = writeln!(
            svg,
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"2.5\" fill=\"steelblue\"/>"
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes the JSON report, the CSV tables and one trajectory SVG per run.
/// Returns the written paths.
pub fn write_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("report.json".to_string(), report.to_json()?),
        ("summary.csv".to_string(), summary_csv(report)),
        ("per_image.csv".to_string(), per_image_csv(report)),
        ("ttests.csv".to_string(), comparisons_csv(report)),
        (
            "best_params.csv".to_string(),
            best_params_csv(&report.best_params),
        ),
    ];
    if let Some(sel) = &report.selection {
        files.push(("selection.txt".to_string(), sel.trace.to_text()));
    }
    for r in &report.runs {
        let mut counts = vec![r.initial_rules];
        counts.extend(r.log.rule_counts());
        let title = format!("{} rules, run {}", report.spec.kind.short(), r.run);
        files.push((
            format!("rules_run{:02}.svg", r.run),
            trajectory_svg(&title, &counts),
        ));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        write(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_params_round_trip() {
        let r = vec![
            BestParamRecord {
                image_id: "a".into(),
                param: 0.25,
                score: 0.9,
            },
            BestParamRecord {
                image_id: "b".into(),
                param: 1.0 / 3.0,
                score: 1.0,
            },
        ];
        assert_eq!(parse_best_params_csv(&best_params_csv(&r)).unwrap(), r);
        assert!(parse_best_params_csv("id,p\n").is_err());
    }

    #[test]
    fn svg_has_one_marker_per_count() {
        let svg = trajectory_svg("t", &[3, 5, 4]);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg"));
    }
}
