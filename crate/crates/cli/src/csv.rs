//! Two-column CSV files: a fixed header, one `t,value` row per grid node,
//! LF line endings, no trailing delimiter.

use std::fmt::Write as _;
use std::path::Path;

use coefid::TimeGrid;

use crate::error::CliError;

/// `x` in scientific notation with `digits` significant digits.
pub fn format_value(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

pub fn render(header: &str, rows: impl IntoIterator<Item = Vec<f64>>, digits: usize) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| format_value(x, digits)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// `header` then `(t_n, values[n])` for `n < values.len()`.
pub fn render_series(header: &str, grid: &TimeGrid, values: &[f64], digits: usize) -> String {
    render(
        header,
        values
            .iter()
            .enumerate()
            .map(|(n, &v)| vec![grid.node(n), v]),
        digits,
    )
}

/// Reads a `t,value` file whose times must match `grid` to within `1e-9 T`.
pub fn read_series(path: &Path, text: &str, grid: &TimeGrid) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Input {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("t,value") => {}
        other => return Err(bad(format!("expected header 't,value', found {other:?}"))),
    }
    let tol = 1e-9 * grid.final_time();
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("row {}: expected two columns", i + 1)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("row {}: invalid number '{}'", i + 1, s.trim())))
        };
        let (t, v) = (parse(t)?, parse(v)?);
        let n = values.len();
        if n >= grid.len() {
            return Err(bad(format!(
                "more than the {} rows the grid needs",
                grid.len()
            )));
        }
        if (t - grid.node(n)).abs() > tol {
            return Err(bad(format!(
                "row {}: time {t} does not match grid node t_{n} = {}",
                i + 1,
                grid.node(n)
            )));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(bad(format!(
            "{} rows, expected {}",
            values.len(),
            grid.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let s = render_series("t,value", &g, &[1.0, 0.5, -0.25], 3);
        assert_eq!(
            s,
            "t,value\n0.00e0,1.00e0\n5.00e-1,5.00e-1\n1.00e0,-2.50e-1\n"
        );
    }

    #[test]
    fn rejects_mismatched_times() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let p = Path::new("phi.csv");
        assert!(read_series(p, "t,value\n0,1\n0.5,1\n1,1\n", &g).is_ok());
        let e = read_series(p, "t,value\n0,1\n0.6,1\n1,1\n", &g).unwrap_err();
        assert!(e.to_string().contains("does not match"));
        assert!(read_series(p, "t,value\n0,1\n0.5,1\n", &g).is_err());
        assert!(read_series(p, "time,phi\n0,1\n0.5,1\n1,1\n", &g).is_err());
        assert_eq!(
            read_series(p, "t,value\n0,1\n0.5000000000001,2\n1,3\n", &g).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
    }

    proptest! {
        #[test]
        fn full_precision_round_trips(values in prop::collection::vec(-1e6f64..1e6, 3..30)) {
            let g = TimeGrid::new(2.5, values.len() - 1).unwrap();
            let text = render_series("t,value", &g, &values, 17);
            prop_assert_eq!(read_series(Path::new("x"), &text, &g).unwrap(), values);
        }
    }
}
