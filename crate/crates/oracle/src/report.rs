use std::fmt;

/// Outcome of comparing computed values against reference values under an
/// absolute tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub values: Vec<f64>,
    pub reference: Vec<f64>,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Set when the check could not be evaluated.
    pub note: Option<String>,
}

impl OracleReport {
    pub fn compare(name: &str, values: &[f64], reference: &[f64], tolerance: f64) -> Self {
        let mut abs_error: f64 = if values.len() == reference.len() { 0.0 } else { f64::INFINITY };
        let mut rel_error: f64 = 0.0;
        for (v, r) in values.iter().zip(reference) {
            let e = (v - r).abs();
            abs_error = if e.is_nan() { f64::INFINITY } else { abs_error.max(e) };
            rel_error = rel_error.max(if *r == 0.0 { e } else { e / r.abs() });
        }
        OracleReport {
            name: name.to_string(),
            values: values.to_vec(),
            reference: reference.to_vec(),
            abs_error,
            rel_error,
            tolerance,
            pass: abs_error <= tolerance,
            note: None,
        }
    }

    pub fn scalar(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        Self::compare(name, &[value], &[reference], tolerance)
    }

    /// A check that could not be computed; always fails.
    pub fn failed(name: &str, tolerance: f64, why: impl fmt::Display) -> Self {
        OracleReport {
            name: name.to_string(),
            values: Vec::new(),
            reference: Vec::new(),
            abs_error: f64::INFINITY,
            rel_error: f64::INFINITY,
            tolerance,
            pass: false,
            note: Some(why.to_string()),
        }
    }

    pub const CSV_HEADER: &'static str = "name,value,reference,abs_error,rel_error,tolerance,pass";

    pub fn csv_row(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(";");
        format!(
            "{},{},{},{:e},{:e},{:e},{}",
            self.name,
            join(&self.values),
            join(&self.reference),
            self.abs_error,
            self.rel_error,
            self.tolerance,
            self.pass
        )
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {:<52} err={:.3e} tol={:.1e}", self.name, self.abs_error, self.tolerance)?;
        if let Some(note) = &self.note {
            write!(f, " ({note})")?;
        }
        Ok(())
    }
}

/// CSV document with one row per report, ordered by name.
pub fn to_csv(reports: &[OracleReport]) -> String {
    let mut sorted: Vec<&OracleReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = String::from(OracleReport::CSV_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_within_tolerance() {
        assert!(OracleReport::scalar("a", 1.0 + 5e-7, 1.0, 1e-6).pass);
        assert!(!OracleReport::scalar("a", 1.0 + 2e-6, 1.0, 1e-6).pass);
        assert!(!OracleReport::scalar("a", f64::NAN, 1.0, 1e-6).pass);
        assert!(!OracleReport::compare("a", &[1.0], &[1.0, 2.0], 1.0).pass);
        assert!(!OracleReport::failed("a", 1.0, "no").pass);
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let rs = vec![OracleReport::scalar("b", 1.0, 1.0, 0.1), OracleReport::scalar("a", 2.0, 1.0, 0.1)];
        let csv = to_csv(&rs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("a,"));
        assert_eq!(lines[2].split(',').count(), 7);
    }
}
