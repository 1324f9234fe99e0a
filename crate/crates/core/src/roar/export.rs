use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::debug;

use super::mask::BinaryMask;
use super::run::{roar_curves, Condition, RoarCurve, RoarPoint};
use crate::attribution::export_pgm;
use crate::data::write_matrix_csv;
use crate::error::{Error, Result};
use crate::model::FoldResult;
use crate::stats::{anova_oneway, holm_correction, ks_two_sample, TestResult};

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// `method,r,subject,accuracy`, one row per point.
pub fn curves_csv(points: &[RoarPoint]) -> String {
    let mut out = String::from("method,r,subject,accuracy\n");
    for p in points {
        writeln!(out, "{},{},{},{}", p.condition, p.r, p.subject, p.accuracy).expect("string write");
    }
    out
}

/// `method,r,mean,std,n,partial` per curve point.
pub fn summary_csv(curves: &[RoarCurve]) -> String {
    let mut out = String::from("method,r,mean,std,n,partial\n");
    for c in curves {
        for p in &c.points {
            writeln!(out, "{},{},{},{},{},{}", c.condition, p.r, p.mean, p.std, p.per_subject.len(), p.partial)
                .expect("string write");
        }
    }
    out
}

/// Every fold of every point.
pub fn folds_csv(points: &[RoarPoint]) -> String {
    let mut out = String::from("method,r,subject,fold,trial_id,label,predicted,iterations,stopped_early,error\n");
    for p in points {
        for f in &p.folds {
            let error = f.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                p.condition,
                p.r,
                p.subject,
                f.fold,
                f.trial_id,
                f.label,
                opt(f.predicted),
                f.iterations_used,
                f.stopped_early,
                error
            )
            .expect("string write");
        }
    }
    out
}

/// Rebuilds points from [`folds_csv`] output. Accuracy is recomputed
/// over the folds that trained; fold probabilities are not stored.
pub fn points_from_folds_csv(text: &str, path: &Path) -> Result<Vec<RoarPoint>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("method,r,subject,fold,") => {}
        _ => return Err(Error::parse(path, 1, "not a ROAR folds file")),
    }
    let mut points: Vec<RoarPoint> = Vec::new();
    for (n, line) in lines {
        let bad = |what: &str| Error::parse(path, n + 1, format!("bad {what}"));
        let f: Vec<&str> = line.splitn(10, ',').collect();
        if f.len() != 10 {
            return Err(Error::parse(path, n + 1, format!("expected 10 fields, got {}", f.len())));
        }
        let condition: Condition = f[0].parse().map_err(|_| bad("method"))?;
        let r: f64 = f[1].parse().map_err(|_| bad("r"))?;
        let fold = FoldResult {
            fold: f[3].parse().map_err(|_| bad("fold"))?,
            trial_id: f[4].to_string(),
            label: f[5].parse().map_err(|_| bad("label"))?,
            predicted: if f[6].is_empty() { None } else { Some(f[6].parse().map_err(|_| bad("predicted"))?) },
            probs: None,
            iterations_used: f[7].parse().map_err(|_| bad("iterations"))?,
            stopped_early: f[8].parse().map_err(|_| bad("stopped_early"))?,
            error: if f[9].is_empty() { None } else { Some(f[9].to_string()) },
        };
        let existing = points
            .iter()
            .position(|p| p.condition == condition && p.r.to_bits() == r.to_bits() && p.subject == f[2]);
        let i = existing.unwrap_or_else(|| {
            points.push(RoarPoint {
                condition,
                r,
                subject: f[2].to_string(),
                accuracy: 0.0,
                removed_fraction: f64::NAN,
                partial: false,
                folds: Vec::new(),
            });
            points.len() - 1
        });
        points[i].folds.push(fold);
    }
    for p in &mut points {
        let scored: Vec<&FoldResult> = p.folds.iter().filter(|f| f.predicted.is_some()).collect();
        let correct = scored.iter().filter(|f| f.predicted == Some(f.label)).count();
        p.accuracy = if scored.is_empty() { 0.0 } else { correct as f64 / scored.len() as f64 };
        p.partial = scored.len() < p.folds.len();
    }
    Ok(points)
}

/// Writes `curves.csv`, `summary.csv` and `folds.csv` into `dir`.
pub fn write_roar_csvs(points: &[RoarPoint], dir: &Path) -> Result<Vec<RoarCurve>> {
    let curves = roar_curves(points);
    write(&dir.join("curves.csv"), &curves_csv(points))?;
    write(&dir.join("summary.csv"), &summary_csv(&curves))?;
    write(&dir.join("folds.csv"), &folds_csv(points))?;
    Ok(curves)
}

/// Mask as a 0/1 CSV plus a black-and-white PGM.
pub fn export_mask(mask: &BinaryMask, stem: &Path) -> Result<()> {
    write_matrix_csv(&stem.with_extension("csv"), &mask.data)?;
    export_pgm(&mask.data.map(|v| 2.0 * v - 1.0), &stem.with_extension("pgm"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub test: &'static str,
    pub comparison: String,
    /// `None` for tests across all rates.
    pub r: Option<f64>,
    pub result: Option<TestResult>,
    pub p_adjusted: Option<f64>,
    pub note: String,
}

/// Per-fold correctness (1 or 0) pooled over subjects.
fn correctness(points: &[RoarPoint], condition: Condition, r: f64) -> Vec<f64> {
    points
        .iter()
        .filter(|p| p.condition == condition && p.r == r)
        .flat_map(|p| p.folds.iter())
        .filter_map(|f| f.predicted.map(|y| if y == f.label { 1.0 } else { 0.0 }))
        .collect()
}

fn row(test: &'static str, comparison: String, r: Option<f64>, result: Result<TestResult>) -> ReportRow {
    let (result, note) = match result {
        Ok(t) => {
            let note = if t.degenerate { "zero within-group variance".to_string() } else { String::new() };
            (Some(t), note)
        }
        Err(e) => {
            debug!("{test} {comparison}: {e}");
            (None, e.to_string().replace(',', ";"))
        }
    };
    ReportRow {
        test,
        comparison,
        r,
        result,
        p_adjusted: None,
        note,
    }
}

/// Method-versus-baseline tests at each shared rate (ANOVA and KS on
/// per-fold correctness), plus a one-way ANOVA across rates per
/// condition. Holm adjustment runs within each test family.
pub fn significance_report(points: &[RoarPoint], alpha: f64) -> Result<Vec<ReportRow>> {
    let curves = roar_curves(points);
    let mut rows = Vec::new();
    for c in &curves {
        let groups: Vec<Vec<f64>> = c.points.iter().map(|p| correctness(points, c.condition, p.r)).collect();
        rows.push(row("anova", format!("{} across r", c.condition), None, anova_oneway(&groups)));
    }
    for m in curves.iter().filter(|c| !c.condition.is_baseline()) {
        let Condition::Method(method) = m.condition else { unreachable!() };
        for b in curves.iter().filter(|c| c.condition.is_baseline()) {
            if matches!(b.condition, Condition::MethodSlices(other) if other != method) {
                continue;
            }
            for p in &m.points {
                if !b.points.iter().any(|q| q.r == p.r) {
                    continue;
                }
                let x = correctness(points, m.condition, p.r);
                let y = correctness(points, b.condition, p.r);
                let name = format!("{} vs {}", m.condition, b.condition);
                rows.push(row("anova", name.clone(), Some(p.r), anova_oneway(&[x.clone(), y.clone()])));
                rows.push(row("ks", name, Some(p.r), ks_two_sample(&x, &y)));
            }
        }
    }
    for family in ["anova", "ks"] {
        let idx: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].test == family && rows[i].result.is_some())
            .collect();
        let p: Vec<f64> = idx.iter().map(|&i| rows[i].result.as_ref().expect("filtered").p_value).collect();
        let holm = holm_correction(&p, alpha)?;
        for (&i, adj) in idx.iter().zip(holm.adjusted) {
            rows[i].p_adjusted = Some(adj);
        }
    }
    Ok(rows)
}

/// `test,comparison,r,statistic,df,p_raw,p_adjusted,note`.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("test,comparison,r,statistic,df,p_raw,p_adjusted,note\n");
    for row in rows {
        let r = row.r.map_or("all".to_string(), |r| r.to_string());
        let (stat, df, p) = match &row.result {
            Some(t) => (t.statistic.to_string(), t.df_label(), t.p_value.to_string()),
            None => Default::default(),
        };
        writeln!(out, "{},{},{r},{stat},{df},{p},{},{}", row.test, row.comparison, opt(row.p_adjusted), row.note)
            .expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::Method;

    fn point(condition: Condition, r: f64, correct: &[bool]) -> RoarPoint {
        let folds = correct
            .iter()
            .enumerate()
            .map(|(i, &ok)| FoldResult {
                fold: i,
                trial_id: format!("t{i}"),
                label: 0,
                predicted: Some(if ok { 0 } else { 1 }),
                probs: None,
                iterations_used: 3,
                stopped_early: false,
                error: None,
            })
            .collect();
        RoarPoint {
            condition,
            r,
            subject: "s01".into(),
            accuracy: correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64,
            removed_fraction: r,
            partial: false,
            folds,
        }
    }

    #[test]
    fn report_rows_and_holm() {
        let m = Condition::Method(Method::LrpB);
        let points = vec![
            point(m, 0.0, &[true, true, true, false]),
            point(m, 0.5, &[false, false, true, false]),
            point(Condition::Uniform, 0.0, &[true, true, true, false]),
            point(Condition::Uniform, 0.5, &[true, true, true, true]),
            point(Condition::MethodSlices(Method::Gradient), 0.5, &[true, false, true, false]),
        ];
        let rows = significance_report(&points, 0.05).unwrap();
        // two across-r rows, then anova+ks for 2 rates vs uniform; other method's slices skipped
        assert_eq!(rows.len(), 3 + 4);
        assert!(rows.iter().all(|r| !r.comparison.contains("gradient") || r.comparison.ends_with("across r")));
        for r in rows.iter().filter(|r| r.result.is_some()) {
            let raw = r.result.as_ref().unwrap().p_value;
            assert!(r.p_adjusted.unwrap() >= raw);
        }
        let csv = report_csv(&rows);
        assert!(csv.starts_with("test,comparison,r,statistic,df,p_raw,p_adjusted,note\n"));
        assert!(csv.contains("anova,lrp_b vs uniform,0.5,"));
        assert!(csv.ends_with('\n'));
        // method at r=0 equals uniform at r=0: F = 0, p = 1
        let same = rows.iter().find(|r| r.test == "anova" && r.r == Some(0.0)).unwrap();
        assert_eq!(same.result.as_ref().unwrap().statistic, 0.0);
    }

    #[test]
    fn folds_csv_round_trips() {
        let mut points = vec![
            point(Condition::Method(Method::LrpB), 0.35, &[true, false, true]),
            point(Condition::MethodSlices(Method::LrpB), 1.0, &[false, false]),
        ];
        points[1].folds[1].predicted = None;
        points[1].folds[1].error = Some("training diverged at iteration 3: loss is NaN".into());
        points[1].partial = true;
        let back = points_from_folds_csv(&folds_csv(&points), Path::new("folds.csv")).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&points) {
            assert_eq!((a.condition, a.r, a.accuracy, a.partial), (b.condition, b.r, b.accuracy, b.partial));
            assert_eq!(a.folds, b.folds);
        }
        assert_eq!(folds_csv(&back), folds_csv(&points));
        let err = points_from_folds_csv("method,r,subject,fold,x\nlrp_b,0.5\n", Path::new("f.csv")).unwrap_err();
        assert!(err.to_string().contains("f.csv:2"));
    }

    #[test]
    fn csv_layouts() {
        let points = vec![point(Condition::Uniform, 0.5, &[true, false])];
        assert_eq!(curves_csv(&points), "method,r,subject,accuracy\nuniform,0.5,s01,0.5\n");
        assert_eq!(summary_csv(&roar_curves(&points)), "method,r,mean,std,n,partial\nuniform,0.5,0.5,0,1,false\n");
        assert!(folds_csv(&points).lines().nth(2).unwrap().starts_with("uniform,0.5,s01,1,t1,0,1,3,false,"));
    }
}
