//! Static accuracy-versus-round line chart.

use std::fmt::Write;

use crate::harness::RunLog;
use crate::select::AggregationRule;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

fn color(rule: AggregationRule) -> &'static str {
    match rule {
        AggregationRule::FedAvg => "#1f77b4",
        AggregationRule::Krum => "#ff7f0e",
        AggregationRule::ModifiedKrum => "#2ca02c",
    }
}

/// Accuracy on `[0, 1]` against round, one polyline per log.
pub fn accuracy_chart(logs: &[RunLog]) -> String {
    let rounds = logs.iter().map(|l| l.records.len()).max().unwrap_or(0).max(2);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |round: usize| LEFT + plot_w * round as f64 / (rounds - 1) as f64;
    let y = |acc: f64| TOP + plot_h * (1.0 - acc.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for i in 0..=5 {
        let acc = i as f64 / 5.0;
        let yy = y(acc);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{acc:.1}</text>"#,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    let ticks = 5.min(rounds - 1);
    for i in 0..=ticks {
        let round = i * (rounds - 1) / ticks;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{round}</text>"#,
            x(round),
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">test accuracy</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, log) in logs.iter().enumerate() {
        let points: Vec<String> = log
            .records
            .iter()
            .enumerate()
            .map(|(r, rec)| format!("{:.2},{:.2}", x(r), y(rec.accuracy)))
            .collect();
        let c = color(log.rule);
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{c}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, log.rule);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{GlobalStep, RoundRecord};

    fn log(rule: AggregationRule, accs: &[f64]) -> RunLog {
        RunLog {
            rule,
            byzantine: vec![],
            global_step: GlobalStep::Mean,
            records: accs
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    let mut r = RoundRecord::new(i, rule);
                    r.accuracy = a;
                    r
                })
                .collect(),
            wall_clock_secs: 0.0,
        }
    }

    #[test]
    fn one_series_per_rule() {
        let logs = [
            log(AggregationRule::FedAvg, &[0.1, 0.5, 0.9]),
            log(AggregationRule::Krum, &[0.2, 0.6, 0.8]),
        ];
        let svg = accuracy_chart(&logs);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">fedavg<") && svg.contains(">krum<"));
        // first fedavg point: x = LEFT, y = TOP + plot_h · 0.9
        assert!(svg.contains("points=\"60.00,317.00 "));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn deterministic_and_ignores_wall_clock() {
        let a = [log(AggregationRule::ModifiedKrum, &[0.3, 0.4])];
        let mut b = a.clone();
        b[0].wall_clock_secs = 99.0;
        assert_eq!(accuracy_chart(&a), accuracy_chart(&b));
        assert!(accuracy_chart(&[]).contains("</svg>"));
    }
}
