use std::collections::HashMap;

use negbound::bounds::CSV_COLUMNS;

use crate::args::PlotArgs;
use crate::manifest::RunManifest;
use crate::svg::{self, Bar};
use crate::{CliError, CliResult};

fn bar(cell: &str) -> Bar {
    match cell.trim() {
        "inf" | "+inf" | "Infinity" => Bar::Infinite,
        s => s.parse::<f64>().map_or(Bar::Missing, |v| {
            if v.is_infinite() && v > 0.0 {
                Bar::Infinite
            } else {
                Bar::Value(v)
            }
        }),
    }
}

fn accuracy(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Renders the upper-bound columns of a bound table, one group per row.
pub fn render(reader: impl std::io::Read, title: &str) -> CliResult<String> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(|e| CliError::Usage(format!("unreadable header: {e}")))?.clone();
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    if let Some(missing) = CSV_COLUMNS.iter().find(|c| !index.contains_key(**c)) {
        return Err(CliError::Usage(format!("bound table is missing column '{missing}'")));
    }
    let rows: Vec<csv::StringRecord> = r
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("malformed bound table: {e}")))?;
    if rows.is_empty() {
        return Err(CliError::Usage("bound table has no rows".into()));
    }
    let col = |name: &str| -> Vec<&str> { rows.iter().map(|row| row.get(index[name]).unwrap_or("")).collect() };
    let groups: Vec<String> = col("k_plus_1").into_iter().map(str::to_string).collect();
    let bars = vec![
        ("CURL".to_string(), col("sup_ub_curl").into_iter().map(bar).collect()),
        ("proposed".to_string(), col("sup_ub_proposed").into_iter().map(bar).collect()),
    ];
    let overlay = vec![
        ("mean accuracy".to_string(), col("mu_acc").into_iter().map(accuracy).collect()),
        ("probe accuracy".to_string(), col("linear_acc").into_iter().map(accuracy).collect()),
    ];
    Ok(svg::grouped_bar_chart(title, "K+1", &groups, &bars, &overlay))
}

pub fn run(a: &PlotArgs, manifest: &mut RunManifest) -> CliResult<()> {
    manifest.config = serde_json::json!({"input": a.input, "out": a.out, "title": a.title});
    let file = std::fs::File::open(&a.input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.input.display())))?;
    let text = render(file, &a.title)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&a.out, text)?;
    manifest.output(&a.out);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&str]) -> String {
        let mut s = CSV_COLUMNS.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    #[test]
    fn one_row_gives_one_group() {
        let t = table(&["8,0.5,0,0.9,0.91,1.4,-0.2,0.7,0.4,0,0.5,0.5,0,0.5,0.2,inf,12.5"]);
        let s = render(t.as_bytes(), "x").unwrap();
        assert_eq!(s.matches(r#"text-anchor="middle">8<"#).count(), 1);
        assert!(s.contains(">inf<"));
    }

    #[test]
    fn missing_column_is_named() {
        let t = "k_plus_1,tau\n8,0.5\n";
        match render(t.as_bytes(), "x") {
            Err(CliError::Usage(m)) => assert!(m.contains("'upsilon'"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn na_and_inf_cells() {
        assert_eq!(bar("NA"), Bar::Missing);
        assert_eq!(bar("inf"), Bar::Infinite);
        assert_eq!(bar("3.5"), Bar::Value(3.5));
        assert_eq!(accuracy("NA"), None);
    }
}
