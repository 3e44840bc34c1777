//! CSV tables, SVG error curves and the text report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::record::RunRecord;

use super::experiment::{aggregate, mean_std, StrategySpec};

/// All repeats of one strategy, in seed order.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub strategy: StrategySpec,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    FeatureMismatch,
    RewardGap,
}

impl Metric {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "feature_mismatch" => Some(Metric::FeatureMismatch),
            "reward_gap" => Some(Metric::RewardGap),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::FeatureMismatch => "feature_mismatch",
            Metric::RewardGap => "reward_gap",
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Metric::FeatureMismatch => "feature expectation mismatch",
            Metric::RewardGap => "reward gap",
        }
    }
}

/// File-name form of a strategy (`spirl:0.1` becomes `spirl_0.1`).
pub fn slug(strategy: &StrategySpec) -> String {
    strategy.to_string().replace(':', "_")
}

pub fn run_csv(run: &RunRecord) -> String {
    let mut out = String::from("step,feature_mismatch,reward_gap,selected_count,lambda,seed\n");
    for s in &run.steps {
        let selected = s.selected_count.map(|c| c.to_string()).unwrap_or_default();
        let lambda = s.lambda.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{selected},{lambda},{}",
            s.step, s.metrics.feature_mismatch, s.metrics.reward_gap, run.seed
        );
    }
    out
}

pub fn aggregate_csv(results: &[StrategyResult]) -> String {
    let mut out = String::from("step,strategy,mean_mismatch,std_mismatch,mean_gap,std_gap,n\n");
    for r in results {
        for row in aggregate(&r.runs) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.step,
                r.strategy,
                row.mean_mismatch,
                row.std_mismatch,
                row.mean_gap,
                row.std_gap,
                row.n
            );
        }
    }
    out
}

const COLORS: [&str; 9] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#17becf",
];

/// Mean `metric` against training step, one polyline per strategy in input
/// order.
pub fn svg_plot(results: &[StrategyResult], metric: Metric) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 170.0, 20.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let curves: Vec<Vec<(usize, f64)>> = results
        .iter()
        .map(|r| {
            aggregate(&r.runs)
                .into_iter()
                .map(|row| {
                    let y = match metric {
                        Metric::FeatureMismatch => row.mean_mismatch,
                        Metric::RewardGap => row.mean_gap,
                    };
                    (row.step, y)
                })
                .filter(|(_, y)| y.is_finite())
                .collect()
        })
        .collect();
    let max_step = curves
        .iter()
        .flatten()
        .map(|p| p.0)
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let mut y_min = curves
        .iter()
        .flatten()
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    let mut y_max = curves
        .iter()
        .flatten()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    y_min = y_min.min(0.0);
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| left + pw * (x - 1.0).max(0.0) / (max_step - 1.0).max(1.0);
    let sy = |y: f64| top + ph * (1.0 - (y - y_min) / (y_max - y_min));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        top + ph,
        left + pw,
        top + ph
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        top + ph
    );
    for i in 0..=4 {
        let v = y_min + (y_max - y_min) * i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 4.0,
            left - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    for i in 0..=4 {
        let v = 1.0 + (max_step - 1.0) * i as f64 / 4.0;
        let x = sx(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            top + ph,
            top + ph + 4.0,
            top + ph + 18.0,
            v.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">training step</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">mean {}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        metric.label()
    );
    for (i, (r, curve)) in results.iter().zip(&curves).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = curve
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x as f64), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            r.strategy
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            r.strategy
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1000.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Final-step mean ± std per strategy, plus non-converged soft VI solves.
pub fn report(results: &[StrategyResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>4} {:>24} {:>24} {:>12}",
        "strategy", "steps", "n", "final_mismatch", "final_gap", "nonconverged"
    );
    for r in results {
        let finals: Vec<_> = r.runs.iter().filter_map(RunRecord::final_metrics).collect();
        let (mm, sm) = mean_std(
            &finals
                .iter()
                .map(|f| f.feature_mismatch)
                .collect::<Vec<_>>(),
        );
        let (mg, sg) = mean_std(&finals.iter().map(|f| f.reward_gap).collect::<Vec<_>>());
        let steps = r.runs.iter().map(|run| run.steps.len()).max().unwrap_or(0);
        let nonconv: usize = r.runs.iter().map(|run| run.nonconverged_solves).sum();
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>4} {:>24} {:>24} {:>12}",
            r.strategy.to_string(),
            steps,
            r.runs.len(),
            format!("{mm:.6} ± {sm:.6}"),
            format!("{mg:.6} ± {sg:.6}"),
            nonconv
        );
    }
    let flagged: Vec<String> = results
        .iter()
        .filter(|r| r.runs.iter().any(|run| run.nonconverged_solves > 0))
        .map(|r| r.strategy.to_string())
        .collect();
    if !flagged.is_empty() {
        let _ = writeln!(
            out,
            "warning: soft value iteration hit max_iter in: {}",
            flagged.join(", ")
        );
    }
    out
}

/// Writes `runs/<strategy>/seed_<seed>.csv`, `aggregate.csv`, one
/// `<metric>.svg` per requested metric and `report.txt`. Returns the written
/// paths in write order.
pub fn write_outputs(
    dir: &Path,
    results: &[StrategyResult],
    metrics: &[Metric],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |path: PathBuf, body: String| -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for r in results {
        let sub = dir.join("runs").join(slug(&r.strategy));
        for run in &r.runs {
            put(sub.join(format!("seed_{}.csv", run.seed)), run_csv(run))?;
        }
    }
    put(dir.join("aggregate.csv"), aggregate_csv(results))?;
    for m in metrics {
        put(dir.join(format!("{}.svg", m.name())), svg_plot(results, *m))?;
    }
    put(dir.join("report.txt"), report(results))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{StepMetrics, StepRecord};

    fn run(seed: u64, values: &[f64]) -> RunRecord {
        RunRecord {
            seed,
            steps: values
                .iter()
                .enumerate()
                .map(|(i, &v)| StepRecord {
                    step: i + 1,
                    metrics: StepMetrics {
                        feature_mismatch: v,
                        reward_gap: v / 2.0,
                    },
                    selected_count: None,
                    lambda: None,
                })
                .collect(),
            ..Default::default()
        }
    }

    fn results() -> Vec<StrategyResult> {
        vec![
            StrategyResult {
                strategy: StrategySpec::Random,
                runs: vec![run(1, &[1.0, 0.5]), run(2, &[3.0, 1.5])],
            },
            StrategyResult {
                strategy: StrategySpec::Spirl { delta_lambda: 0.1 },
                runs: vec![run(1, &[2.0, 1.0])],
            },
        ]
    }

    #[test]
    fn run_csv_leaves_lambda_empty_outside_spirl() {
        let mut r = run(9, &[0.25]);
        assert_eq!(
            run_csv(&r),
            "step,feature_mismatch,reward_gap,selected_count,lambda,seed\n1,0.25,0.125,,,9\n"
        );
        r.steps[0].selected_count = Some(3);
        r.steps[0].lambda = Some(0.5);
        assert!(run_csv(&r).ends_with("1,0.25,0.125,3,0.5,9\n"));
    }

    #[test]
    fn aggregate_rows() {
        let csv = aggregate_csv(&results());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "step,strategy,mean_mismatch,std_mismatch,mean_gap,std_gap,n"
        );
        assert_eq!(
            lines[1],
            format!("1,random,2,{},1,{},2", 2f64.sqrt(), 0.5f64.sqrt())
        );
        assert_eq!(lines[3], "1,spirl:0.1,2,0,1,0,1");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn svg_has_one_polyline_per_strategy() {
        let svg = svg_plot(&results(), Metric::FeatureMismatch);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("training step"));
        assert!(svg.contains("mean feature expectation mismatch"));
        assert!(svg.find(">random<").unwrap() < svg.find(">spirl:0.1<").unwrap());
        assert_eq!(svg, svg_plot(&results(), Metric::FeatureMismatch));
    }

    #[test]
    fn report_flags_nonconverged() {
        let mut res = results();
        assert!(!report(&res).contains("warning"));
        res[1].runs[0].nonconverged_solves = 2;
        let text = report(&res);
        assert!(
            text.contains("warning") && text.contains("spirl:0.1"),
            "{text}"
        );
    }

    #[test]
    fn writes_expected_tree() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_outputs(dir.path(), &results(), &[Metric::RewardGap]).unwrap();
        assert_eq!(paths.len(), 6);
        assert!(dir.path().join("runs/spirl_0.1/seed_1.csv").exists());
        assert!(dir.path().join("reward_gap.svg").exists());
        assert!(!dir.path().join("feature_mismatch.svg").exists());
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_outputs(&blocker.join("out"), &results(), &[]).unwrap_err();
        assert!(matches!(err, crate::Error::Io(_)));
    }
}
