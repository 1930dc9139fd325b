use serde::{Deserialize, Serialize};

use super::spec::{FeDim, LAGGED_DEPENDENT, POLICY_CONTROLS, WAI_REGRESSORS};
use super::RegressionResult;

/// Display order and labels of the table rows.
const ROW_LABELS: [(&str, &str); 12] = [
    (LAGGED_DEPENDENT, "Lagged dependent"),
    ("covid_mention", "Covid mention"),
    ("mild", "Mild"),
    ("moderate", "Moderate"),
    ("severe", "Severe"),
    ("lag_log_assets", "Lagged log total assets"),
    ("workplace_recommended", "Workplace closing: recommended"),
    ("workplace_required", "Workplace closing: required"),
    ("stayhome_recommended", "Stay at home: recommended"),
    ("stayhome_required", "Stay at home: required"),
    ("log_fiscal", "Log fiscal measures"),
    ("covid_deaths", "Covid deaths"),
];

const _: () = assert!(ROW_LABELS.len() == 1 + WAI_REGRESSORS.len() + POLICY_CONTROLS.len());

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Three decimals, or three significant digits below one.
pub fn format_estimate(v: f64) -> String {
    if v == 0.0 || v.abs() >= 1.0 || !v.is_finite() {
        format!("{v:.3}")
    } else {
        let decimals = (2 - v.abs().log10().floor() as i32).max(3) as usize;
        format!("{v:.decimals$}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub term: String,
    pub label: String,
    /// One entry per column; `None` where the term is not in that model.
    pub cells: Vec<Option<TableCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumn {
    pub name: String,
    pub dependent: String,
    pub fixed_effects: Vec<String>,
    pub n_firms: usize,
    pub n_obs: usize,
    pub r2_within: f64,
}

/// Regression table with one column per specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTable {
    pub columns: Vec<TableColumn>,
    pub rows: Vec<TableRow>,
}

impl RegressionTable {
    pub fn new(results: &[(String, RegressionResult)]) -> Self {
        let columns = results
            .iter()
            .map(|(name, r)| TableColumn {
                name: name.clone(),
                dependent: r.spec.dependent.label().to_string(),
                fixed_effects: r.spec.fe_dims.iter().map(|d| d.label().to_string()).collect(),
                n_firms: r.n_firms,
                n_obs: r.n_obs,
                r2_within: r.r2_within,
            })
            .collect();
        let rows = ROW_LABELS
            .iter()
            .filter(|(term, _)| results.iter().any(|(_, r)| r.coefficients.contains_key(*term)))
            .map(|(term, label)| TableRow {
                term: term.to_string(),
                label: label.to_string(),
                cells: results
                    .iter()
                    .map(|(_, r)| {
                        let estimate = *r.coefficients.get(*term)?;
                        let p = r.p_value(term)?;
                        Some(TableCell {
                            estimate,
                            se: r.clustered_se[*term],
                            p_value: p,
                            stars: stars(p).to_string(),
                        })
                    })
                    .collect(),
            })
            .collect();
        Self { columns, rows }
    }

    fn fe_flags(&self) -> Vec<(&'static str, Vec<bool>)> {
        [FeDim::Firm, FeDim::Quarter, FeDim::CountryNace2Quarter]
            .into_iter()
            .map(|d| {
                let label = d.label();
                let flags = self.columns.iter().map(|c| c.fixed_effects.iter().any(|f| f == label)).collect();
                (label, flags)
            })
            .collect()
    }

    /// Long format: one line per column and term.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("column,dependent,term,estimate,se,p_value,stars\n");
        for (j, col) in self.columns.iter().enumerate() {
            for row in &self.rows {
                if let Some(c) = &row.cells[j] {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        col.name, col.dependent, row.term, c.estimate, c.se, c.p_value, c.stars
                    ));
                }
            }
            for (term, v) in [
                ("n_firms", col.n_firms.to_string()),
                ("n_obs", col.n_obs.to_string()),
                ("r2_within", col.r2_within.to_string()),
            ] {
                out.push_str(&format!("{},{},{term},{v},,,\n", col.name, col.dependent));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Plain-text layout: estimates with stars, SEs in parentheses beneath.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        lines.push(header);
        let mut dep = vec![String::new()];
        dep.extend(self.columns.iter().map(|c| c.dependent.clone()));
        lines.push(dep);
        for row in &self.rows {
            let mut est = vec![row.label.clone()];
            let mut se = vec![String::new()];
            for c in &row.cells {
                match c {
                    Some(c) => {
                        est.push(format!("{}{}", format_estimate(c.estimate), c.stars));
                        se.push(format!("({})", format_estimate(c.se)));
                    }
                    None => {
                        est.push(String::new());
                        se.push(String::new());
                    }
                }
            }
            lines.push(est);
            lines.push(se);
        }
        for (label, flags) in self.fe_flags() {
            let mut l = vec![label.to_string()];
            l.extend(flags.iter().map(|f| if *f { "Yes" } else { "No" }.to_string()));
            lines.push(l);
        }
        let mut push = |label: &str, f: &dyn Fn(&TableColumn) -> String| {
            let mut l = vec![label.to_string()];
            l.extend(self.columns.iter().map(f));
            lines.push(l);
        };
        push("No. Firms", &|c| c.n_firms.to_string());
        push("Observations", &|c| c.n_obs.to_string());
        push("R^2 (within)", &|c| format!("{:.3}", c.r2_within));

        let ncols = lines[0].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|j| lines.iter().map(|l| l[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    if j == 0 {
                        format!("{s:<w$}", w = widths[j])
                    } else {
                        format!("{s:>w$}", w = widths[j])
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out.push_str("Standard errors clustered by firm in parentheses.\n");
        out.push_str("* p < 0.05, ** p < 0.01, *** p < 0.001 (normal approximation).\n");
        out
    }
}
