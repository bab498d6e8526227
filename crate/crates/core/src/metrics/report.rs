use serde::{Deserialize, Serialize};

use super::{amplification, ScoringFunctionKind};

pub const REPORT_CSV_HEADER: &str = "model_id,scorer_id,attribute,scoring_fn,b_d,b_m,b_amp,n_gt,n_model";

/// Percent-scale presentation values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedPercent {
    pub b_d: f64,
    pub b_m: f64,
    pub b_amp: f64,
}

/// Dataset bias, model bias and their difference for one model, scorer,
/// attribute and scoring function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub model_id: String,
    pub scorer_id: String,
    pub attribute: String,
    pub scoring_fn: ScoringFunctionKind,
    pub b_d: f64,
    pub b_m: f64,
    pub b_amp: f64,
    pub n_gt: usize,
    pub n_model: usize,
    pub reported_percent: ReportedPercent,
}

impl BiasReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model_id: impl Into<String>,
        scorer_id: impl Into<String>,
        attribute: impl Into<String>,
        scoring_fn: ScoringFunctionKind,
        b_d: f64,
        b_m: f64,
        n_gt: usize,
        n_model: usize,
    ) -> Self {
        let b_amp = amplification(b_m, b_d);
        Self {
            model_id: model_id.into(),
            scorer_id: scorer_id.into(),
            attribute: attribute.into(),
            scoring_fn,
            b_d,
            b_m,
            b_amp,
            n_gt,
            n_model,
            reported_percent: ReportedPercent { b_d: 100.0 * b_d, b_m: 100.0 * b_m, b_amp: 100.0 * b_amp },
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&self.model_id),
            csv_field(&self.scorer_id),
            csv_field(&self.attribute),
            self.scoring_fn,
            self.b_d,
            self.b_m,
            self.b_amp,
            self.n_gt,
            self.n_model
        )
    }

    pub fn to_csv(reports: &[BiasReport]) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for r in reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn to_json(reports: &[BiasReport]) -> String {
        let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Fixed-width percent table for terminals.
    pub fn render_table(reports: &[BiasReport]) -> String {
        let mut out = format!(
            "{:<16} {:<14} {:<10} {:<8} {:>8} {:>8} {:>8}\n",
            "model", "scorer", "attribute", "fn", "D", "M", "Amp"
        );
        for r in reports {
            out.push_str(&format!(
                "{:<16} {:<14} {:<10} {:<8} {:>8.2} {:>8.2} {:>8.2}\n",
                r.model_id,
                r.scorer_id,
                r.attribute,
                r.scoring_fn.as_str(),
                r.reported_percent.b_d,
                r.reported_percent.b_m,
                r.reported_percent.b_amp
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = BiasReport::new("sat", "bow", "gender", ScoringFunctionKind::Ours, 0.5, 0.75, 10, 9);
        assert_eq!(r.b_amp, 0.25);
        assert_eq!(r.reported_percent.b_amp, 25.0);
        let csv = BiasReport::to_csv(&[r]);
        assert_eq!(csv, format!("{REPORT_CSV_HEADER}\nsat,bow,gender,ours,0.5,0.75,0.25,10,9\n"));
    }

    #[test]
    fn json_mirror_roundtrips() {
        let r = BiasReport::new("m,1", "s", "gender", ScoringFunctionKind::Lic, 0.1, 0.3, 1, 1);
        let back: Vec<BiasReport> = serde_json::from_str(&BiasReport::to_json(std::slice::from_ref(&r))).unwrap();
        assert_eq!(back, vec![r.clone()]);
        assert!(r.csv_row().starts_with("\"m,1\","));
    }
}
