//! Table rendering (CSV and aligned text) and the summary verdict.

use calikd::distill::Summary;
use serde::{Deserialize, Serialize};

/// Row labels of the before/after calibration table.
pub const CALIBRATION_LABELS: [&str; 5] =
    ["Optimal Temp", "ECE Before", "ECE After", "NLL Before", "NLL After"];

/// Left-aligned first column, right-aligned others, two-space gutters.
pub fn render_text(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut out = String::new();
        for (j, cell) in cells.iter().enumerate().take(cols) {
            if j == 0 {
                out.push_str(&format!("{cell:<w$}", w = widths[0]));
            } else {
                out.push_str(&format!("  {cell:>w$}", w = widths[j]));
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    let rule = widths.iter().sum::<usize>() + 2 * (cols.saturating_sub(1));
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

pub fn render_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",") + "\n";
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn fmt_summary(s: &Summary) -> String {
    if s.n > 1 {
        format!("{:.4} ± {:.4}", s.mean, s.std)
    } else {
        format!("{:.4}", s.mean)
    }
}

/// Student accuracies arranged like a teacher × student comparison matrix.
/// `None` marks a cell that was not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub teacher_sizes: Vec<usize>,
    pub student_sizes: Vec<usize>,
    pub vanilla: Vec<Vec<Option<f64>>>,
    pub calibrated: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// Calibrated >= vanilla in every filled cell of every teacher row.
    pub calibrated_dominates: bool,
    /// Calibrated accuracy non-decreasing in teacher size down every student column.
    pub monotone_calibrated: bool,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "calibrated_dominates={} monotone_calibrated={}",
            self.calibrated_dominates, self.monotone_calibrated
        )
    }
}

impl ComparisonMatrix {
    /// Per teacher row: does the calibrated row match or beat the vanilla
    /// row wherever both are filled?
    pub fn dominates_per_teacher(&self) -> Vec<(usize, bool)> {
        self.teacher_sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| {
                let ok = self.vanilla[i].iter().zip(&self.calibrated[i]).all(|pair| match pair {
                    (Some(v), Some(c)) => c >= v,
                    _ => true,
                });
                (size, ok)
            })
            .collect()
    }

    pub fn verdict(&self) -> Verdict {
        let calibrated_dominates = self.dominates_per_teacher().iter().all(|&(_, ok)| ok);
        let monotone_calibrated = (0..self.student_sizes.len()).all(|j| {
            let column: Vec<f64> = self.calibrated.iter().filter_map(|row| row[j]).collect();
            column.windows(2).all(|w| w[1] >= w[0])
        });
        Verdict { calibrated_dominates, monotone_calibrated }
    }
}
