//! Report serialization: JSON, flat CSV, confusion matrices and a text summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::eval::{EvalReport, FoldResult, Scheme};
use crate::model::store::write_atomic;
use crate::model::{Condition, Word};
use crate::Result;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

/// Published accuracies on recorded (non-synthetic) sessions, kept for
/// side-by-side annotation only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferencePoint {
    pub condition: Condition,
    pub scheme: Scheme,
    pub mean: f64,
    pub std: f64,
}

pub fn reference_points() -> [ReferencePoint; 4] {
    let r = |condition, scheme, mean, std| ReferencePoint {
        condition,
        scheme,
        mean,
        std,
    };
    [
        r(Condition::Vocalized, Scheme::Global5Fold, 0.87, 0.03),
        r(Condition::Silent, Scheme::Global5Fold, 0.68, 0.03),
        r(Condition::Vocalized, Scheme::Loso, 0.64, 0.18),
        r(Condition::Silent, Scheme::Loso, 0.54, 0.07),
    ]
}

/// One row per (fold, label) plus one `OVERALL` row per fold.
pub fn flat_csv(r: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "fold", "session", "train_size", "test_size", "label", "accuracy"])?;
    for f in &r.folds {
        let base = [
            r.scheme.label().to_string(),
            f.name.clone(),
            f.session.clone().unwrap_or_default(),
            f.train_size.to_string(),
            f.test_size.to_string(),
        ];
        for word in Word::ALL {
            let acc = f.per_label_accuracy[word.code()].map(|a| a.to_string()).unwrap_or_default();
            w.write_record(base.iter().cloned().chain([word.name().to_string(), acc]))?;
        }
        w.write_record(base.iter().cloned().chain(["OVERALL".to_string(), f.overall_accuracy.to_string()]))?;
    }
    csv_string(w)
}

/// 8x8 matrix with true labels as rows.
pub fn confusion_csv(f: &FoldResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("true\\pred").chain(Word::ALL.iter().map(|w| w.name())))?;
    for (i, row) in f.confusion.iter().enumerate() {
        let name = Word::ALL[i].name().to_string();
        w.write_record(std::iter::once(name).chain(row.iter().map(u32::to_string)))?;
    }
    csv_string(w)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| crate::Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "   n/a".to_string(), |a| format!("{:6.3}", a))
}

/// Human-readable summary with the reference annotations.
pub fn summary_text(r: &EvalReport) -> String {
    let a = &r.aggregate;
    let mut s = String::new();
    let _ = writeln!(s, "scheme {}  seed {}  folds {}  samples {}", r.scheme, r.seed, a.n_folds, r.n_samples);
    let _ = writeln!(s, "overall accuracy = {:.3} ± {:.3} (std across folds)", a.overall_mean, a.overall_std);
    let _ = writeln!(s, "std across labels = {:.3}", a.overall_std_across_labels);
    let _ = writeln!(s, "chance = {:.3}", r.chance_level);
    let _ = writeln!(s, "per label (mean ± std):");
    for w in Word::ALL {
        let _ = writeln!(
            s,
            "  {:<6} {} ± {}",
            w.name(),
            pct(a.per_label_mean[w.code()]),
            pct(a.per_label_std[w.code()])
        );
    }
    for ps in &r.per_session {
        let _ = writeln!(
            s,
            "session {}: {:.3} ± {:.3}",
            ps.session, ps.aggregate.overall_mean, ps.aggregate.overall_std
        );
    }
    let refs: Vec<_> = reference_points().into_iter().filter(|p| p.scheme == r.scheme).collect();
    if !refs.is_empty() {
        let _ = writeln!(s, "reference (recorded sessions, not reproducible on synthetic data):");
        for p in refs {
            let _ = writeln!(s, "  {:<9} {:.2} ± {:.2}", p.condition.to_string(), p.mean, p.std);
        }
    }
    s
}

/// Writes `report.json`, `report.csv`, `confusion_<k>.csv` per fold and
/// `summary.txt` into `dir`. Returns the written paths.
pub fn write_report(dir: &Path, r: &EvalReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let mut out = Vec::with_capacity(r.folds.len() + 3);
    let mut put = |name: String, body: &[u8]| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, body)?;
        out.push(p);
        Ok(())
    };
    let mut json = serde_json::to_string_pretty(r)?;
    json.push('\n');
    put(REPORT_JSON.into(), json.as_bytes())?;
    put(REPORT_CSV.into(), flat_csv(r)?.as_bytes())?;
    for (k, f) in r.folds.iter().enumerate() {
        put(format!("confusion_{k:02}.csv"), confusion_csv(f)?.as_bytes())?;
    }
    put("summary.txt".into(), summary_text(r).as_bytes())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::eval::Aggregate;
    use crate::learn::ForestParams;
    use crate::model::N_WORDS;

    fn report() -> EvalReport {
        let mut c = [[0u32; N_WORDS]; N_WORDS];
        for (i, row) in c.iter_mut().enumerate() {
            row[i] = 2;
            row[(i + 1) % N_WORDS] = 1;
        }
        let f = FoldResult::from_confusion("fold 0".into(), None, 48, c);
        EvalReport {
            scheme: Scheme::Global5Fold,
            seed: 1,
            forest: ForestParams::default(),
            n_samples: 24,
            feature_dim: 3,
            chance_level: 0.125,
            aggregate: Aggregate::from_folds(std::slice::from_ref(&f)),
            folds: vec![f],
            per_session: Vec::new(),
        }
    }

    #[test]
    fn csv_shapes() {
        let r = report();
        let flat = flat_csv(&r).unwrap();
        assert_eq!(flat.lines().count(), 1 + 9);
        assert!(flat.lines().last().unwrap().ends_with("OVERALL,0.6666666666666666"));
        let conf = confusion_csv(&r.folds[0]).unwrap();
        let lines: Vec<&str> = conf.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[1], "UP,2,1,0,0,0,0,0,0");
    }

    #[test]
    fn summary_mentions_chance_and_references() {
        let s = summary_text(&report());
        assert!(s.contains("chance = 0.125"));
        assert!(s.contains("0.87 ± 0.03"));
        assert!(!s.contains("0.64"));
    }

    #[test]
    fn json_round_trip_and_files() {
        let r = report();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_report(dir.path(), &r).unwrap();
        assert_eq!(paths.len(), 4);
        let back: EvalReport = serde_json::from_slice(&std::fs::read(&paths[0]).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
