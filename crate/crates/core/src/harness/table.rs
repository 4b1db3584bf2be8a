//! Result tables and their CSV/SVG renderings.

use std::fmt::Write as _;

/// One table entry. Failures are explicit strings, never NaN.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Sentinel(&'static str),
}

pub const UNACHIEVABLE: &str = "unachievable";
pub const DIVERGED: &str = "diverged";
pub const NOT_CONVERGED: &str = "not_converged";
pub const FAILED: &str = "failed";
pub const NO_DATA: &str = "no_data";

impl Cell {
    /// Non-finite numbers become [`DIVERGED`] (infinite) or [`FAILED`].
    pub fn num(x: f64) -> Self {
        if x.is_finite() {
            Self::Num(x)
        } else if x.is_infinite() {
            Self::Sentinel(DIVERGED)
        } else {
            Self::Sentinel(FAILED)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Num(x) => Some(*x),
            Self::Sentinel(_) => None,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            // Shortest representation that round-trips.
            Self::Num(x) => write!(f, "{x:?}"),
            Self::Sentinel(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Written as `# key: value` lines ahead of the header.
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All cells of a column, by name.
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Numeric view of a column; sentinels become `None`.
    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        Some(self.column(name)?.into_iter().map(Cell::value).collect())
    }

    /// Header and data rows only.
    pub fn csv_body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.csv_body());
        out
    }

    /// Line plot of every column against the first, skipping standard-error
    /// columns. `log_y` plots log10 of positive values.
    pub fn to_svg(&self, title: &str, log_y: bool) -> String {
        const W: f64 = 720.0;
        const H: f64 = 480.0;
        const M: f64 = 60.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
        ];
        let xs: Vec<Option<f64>> = self.rows.iter().map(|r| r.first().and_then(Cell::value)).collect();
        let ty = |y: f64| if log_y { (y > 0.0).then(|| y.log10()) } else { Some(y) };
        let series: Vec<(usize, Vec<(f64, f64)>)> = (1..self.columns.len())
            .filter(|&c| !self.columns[c].ends_with("_se"))
            .map(|c| {
                let pts = self
                    .rows
                    .iter()
                    .zip(&xs)
                    .filter_map(|(r, x)| Some((((*x)?), ty(r[c].value()?)?)))
                    .collect();
                (c, pts)
            })
            .collect();
        let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
        let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
        );
        if all.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, W / 2.0);
        let _ = writeln!(
            s,
            r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
            b = H - M,
            r = W - M
        );
        let ylab = |y: f64| if log_y { format!("1e{y:.1}") } else { format!("{y:.3}") };
        let _ = writeln!(s, r#"<text x="{M}" y="{}" text-anchor="middle">{x0:.3}</text>"#, H - M + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x1:.3}</text>"#, W - M, H - M + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, H - M, ylab(y0));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, M + 4.0, ylab(y1));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 16.0,
            self.columns.first().map(String::as_str).unwrap_or("")
        );
        for (i, (c, pts)) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            if !pts.is_empty() {
                let d: Vec<String> = pts
                    .iter()
                    .enumerate()
                    .map(|(j, &(x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, px(x), py(y)))
                    .collect();
                let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" "));
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                W - M - 150.0,
                M + 14.0 * i as f64,
                self.columns[*c]
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new(vec!["snr_db".into(), "a".into(), "a_se".into()]);
        t.meta("seed", 7);
        t.push_row(vec![Cell::Num(-1.0), Cell::Num(0.25), Cell::Num(0.01)]);
        t.push_row(vec![Cell::Num(0.5), Cell::num(f64::INFINITY), Cell::Sentinel(UNACHIEVABLE)]);
        t
    }

    #[test]
    fn csv_layout() {
        let csv = table().to_csv();
        assert_eq!(
            csv,
            "# seed: 7\nsnr_db,a,a_se\n-1.0,0.25,0.01\n0.5,diverged,unachievable\n"
        );
        assert!(!csv.contains("NaN") && !csv.contains("inf"));
    }

    #[test]
    fn nan_becomes_sentinel() {
        assert_eq!(Cell::num(f64::NAN), Cell::Sentinel(FAILED));
        assert_eq!(Cell::num(0.1 + 0.2).to_string(), "0.30000000000000004");
    }

    #[test]
    fn column_access() {
        let t = table();
        assert_eq!(t.values("a").unwrap(), vec![Some(0.25), None]);
        assert!(t.values("zzz").is_none());
        assert_eq!(t.meta_value("seed"), Some("7"));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = table().to_svg("demo", true);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(">a</text>"));
        assert!(!svg.contains("a_se"));
    }
}
