//! Plain-text summary tables of a selection report.

use std::fmt::Write as _;

use featsel_core::baselines::Method;
use featsel_core::harness::SelectionReport;
use featsel_core::synth::AdhesionLabel;

fn methods(r: &SelectionReport) -> Vec<Method> {
    let mut m: Vec<Method> = r.cells.iter().map(|c| c.method).collect();
    m.sort();
    m.dedup();
    m
}

pub fn render_summary(r: &SelectionReport) -> String {
    let mut s = String::new();
    let methods = methods(r);
    let combos = r.condition_tags.len();
    let last = r.last_combo();
    let _ = writeln!(
        s,
        "Synthetic benchmark, master seed {}, {} repetition(s)\n",
        r.seed, r.repetitions
    );

    let _ = writeln!(s, "Macro F-score by condition mix (mean ± std)");
    let _ = write!(s, "{:<8}", "method");
    for c in 0..combos {
        let _ = write!(s, "{:>22}", r.condition_tags[..=c].join("+"));
    }
    s.push('\n');
    for &m in &methods {
        let _ = write!(s, "{:<8}", m.as_str());
        for c in 0..combos {
            match r.cell(c, m) {
                Some(cell) => {
                    let _ = write!(
                        s,
                        "{:>22}",
                        format!("{:.4} ± {:.4}", cell.macro_f1_mean, cell.macro_f1_std)
                    );
                }
                None => {
                    let _ = write!(s, "{:>22}", "-");
                }
            }
        }
        s.push('\n');
    }
    if let Some(mg) = r.margins.iter().find(|m| m.combo == last) {
        let _ = writeln!(
            s,
            "\nPPO margin over the best baseline ({}) on the {} mix, synthetic data: {:+.4}",
            mg.best_baseline,
            r.condition_tags.join("+"),
            mg.margin
        );
    }

    let _ = writeln!(
        s,
        "\nPer-label F-score on the {} mix (mean / variance)",
        r.condition_tags.join("+")
    );
    let _ = write!(s, "{:<18}", "label");
    for &m in &methods {
        let _ = write!(s, "{:>20}", m.as_str());
    }
    s.push('\n');
    for label in AdhesionLabel::ALL {
        let _ = write!(s, "{:<18}", label.as_str());
        for &m in &methods {
            let row = r
                .per_label
                .iter()
                .find(|p| p.combo == last && p.method == m && p.label == label);
            let cell = match row {
                Some(p) if !p.undefined => format!(
                    "{:.4} / {:.5}",
                    p.fscore_mean.unwrap_or(0.0),
                    p.fscore_variance.unwrap_or(0.0)
                ),
                Some(_) => "undefined".to_string(),
                None => "-".to_string(),
            };
            let _ = write!(s, "{cell:>20}");
        }
        s.push('\n');
    }

    let _ = writeln!(
        s,
        "\nAccuracy under salt-and-pepper noise on the {} mix",
        r.condition_tags.join("+")
    );
    let _ = write!(s, "{:<8}", "method");
    for d in &r.noise_densities {
        let _ = write!(s, "{:>10}", format!("{:.0}%", d * 100.0));
    }
    let _ = writeln!(s, "{:>10}", "drop");
    for &m in &methods {
        if let Some(c) = r.curve(last, m) {
            let _ = write!(s, "{:<8}", m.as_str());
            for a in &c.accuracy_mean {
                let _ = write!(s, "{a:>10.4}");
            }
            let _ = writeln!(s, "{:>10.4}", c.drop());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use featsel_core::harness::{CellReport, Margin, NoiseCurve, PerLabelRow, REPORT_FORMAT_VERSION};

    fn report() -> SelectionReport {
        let cell = |method, f1| CellReport {
            combo: 0,
            conditions: vec!["1kg".into()],
            method,
            macro_f1_mean: f1,
            macro_f1_std: 0.0,
            accuracy_mean: f1,
            macro_f1: vec![f1],
            subsets: vec![vec![1, 2]],
        };
        SelectionReport {
            format_version: REPORT_FORMAT_VERSION,
            seed: 4,
            condition_tags: vec!["1kg".into()],
            noise_densities: vec![0.0, 0.1],
            repetitions: 1,
            cells: vec![cell(Method::Rfe, 0.8), cell(Method::Ppo, 0.85)],
            per_label: vec![PerLabelRow {
                combo: 0,
                method: Method::Ppo,
                label: AdhesionLabel::Safe,
                fscore_mean: None,
                fscore_variance: None,
                undefined: true,
            }],
            noise_curves: vec![NoiseCurve {
                combo: 0,
                method: Method::Ppo,
                densities: vec![0.0, 0.1],
                accuracy_mean: vec![0.9, 0.7],
                accuracy: vec![vec![0.9, 0.7]],
            }],
            stability_refs: vec![],
            margins: vec![Margin {
                combo: 0,
                best_baseline: Method::Rfe,
                margin: 0.05,
            }],
        }
    }

    #[test]
    fn summary_has_margin_and_tables() {
        let s = render_summary(&report());
        assert!(s.contains("PPO margin over the best baseline (RFE)"), "{s}");
        assert!(s.contains("+0.0500"));
        assert!(s.contains("undefined"));
        assert!(s.contains("0.2000"));
        assert!(s.contains("0.8500 ± 0.0000"));
    }
}
