use std::fmt::Write as _;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use sdaccel::emamodel::REPORT_SCHEMA;
use serde_json::Value;

use crate::io::{emit, read_text};
use crate::ReportArgs;

const SCHEMES: [&str; 4] = ["raw", "csr", "rle", "pssa"];

/// Left-aligned first column, right-aligned numbers.
fn table(head: &[&str], rows: &[Vec<String>]) -> String {
    let mut w: Vec<usize> = head.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            w[i] = w[i].max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<width$}", width = w[i]);
            } else {
                let _ = write!(s, "  {c:>width$}", width = w[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&head.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out += &line(&w.iter().map(|&n| "-".repeat(n)).collect::<Vec<_>>());
    for r in rows {
        out += &line(r);
    }
    out
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn scalars(v: &Value) -> String {
    let rows: Vec<Vec<String>> = v
        .as_object()
        .map(|o| {
            o.iter()
                .filter(|(_, x)| !x.is_object() && !x.is_array())
                .map(|(k, x)| vec![k.clone(), cell(x)])
                .collect()
        })
        .unwrap_or_default();
    table(&["field", "value"], &rows)
}

fn per_scheme(label: &str, v: &Value) -> Vec<String> {
    std::iter::once(label.to_string()).chain(SCHEMES.iter().map(|s| cell(&v[s]))).collect()
}

fn ema(v: &Value) -> String {
    let mut layers: Vec<Vec<String>> = Vec::new();
    for l in v["layers"].as_array().into_iter().flatten() {
        let mut r = vec![cell(&l["name"]), cell(&l["kind"]), cell(&l["stage"])];
        r.extend(SCHEMES.iter().map(|s| cell(&l["bytes"][s])));
        layers.push(r);
    }
    let mut out = table(&["layer", "kind", "stage", "raw", "csr", "rle", "pssa"], &layers);
    out += "\n";
    out += &table(
        &["bytes", "raw", "csr", "rle", "pssa"],
        &[per_scheme("total", &v["totals"]), per_scheme("scores", &v["sas_bytes"]), per_scheme("score index bits", &v["sas_index_bits"]), per_scheme("energy pJ", &v["energy_pj"])],
    );
    out += "\n";
    let mut shares = vec![
        vec!["cnn bytes".into(), cell(&v["cnn_bytes"])],
        vec!["transformer bytes".into(), cell(&v["transformer_bytes"])],
        vec!["self-attention bytes".into(), cell(&v["self_attention_bytes"])],
        vec!["transformer share %".into(), cell(&v["transformer_share_pct"])],
        vec!["self-attention share of transformer %".into(), cell(&v["self_attention_share_of_transformer_pct"])],
        vec!["score share %".into(), cell(&v["sas_share_pct"])],
    ];
    if let Some(o) = v["reductions"].as_object() {
        shares.extend(o.iter().map(|(k, x)| vec![format!("reduction {k}"), cell(x)]));
    }
    out += &table(&["metric", "value"], &shares);
    out
}

fn bench(v: &Value) -> String {
    let cols = crate::bench::CSV_COLUMNS;
    let rows: Vec<Vec<String>> = v["points"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|p| cols.iter().map(|c| cell(&p[c])).collect())
        .collect();
    table(&cols, &rows)
}

fn encode(v: &Value) -> String {
    let rows: Vec<Vec<String>> = SCHEMES
        .iter()
        .map(|s| vec![s.to_string(), cell(&v["index_bits"][s]), cell(&v["bits"][s]), cell(&v["bytes"][s])])
        .collect();
    format!("{}\n{}", scalars(v), table(&["scheme", "index_bits", "bits", "bytes"], &rows))
}

fn gemm(v: &Value) -> String {
    let rows: Vec<Vec<String>> = v["stats"]
        .as_object()
        .map(|o| o.iter().map(|(k, x)| vec![k.clone(), cell(x)]).collect())
        .unwrap_or_default();
    format!("{}\n{}", scalars(v), table(&["counter", "count"], &rows))
}

fn verify(v: &Value) -> String {
    let rows: Vec<Vec<String>> = v["failures"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|f| vec![cell(&f["case"]), cell(&f["check"]), cell(&f["detail"])])
        .collect();
    let mut out = scalars(v);
    if !rows.is_empty() {
        out += "\n";
        out += &table(&["case", "check", "detail"], &rows);
    }
    out
}

pub fn render(v: &Value) -> Result<String> {
    match v.get("schema").and_then(Value::as_str) {
        Some(REPORT_SCHEMA) => {}
        Some(other) => bail!("unsupported report schema {other:?}"),
        None => bail!("not a report: missing \"schema\""),
    }
    Ok(match v.get("kind").and_then(Value::as_str) {
        Some("ema") => ema(v),
        Some("bench") => bench(v),
        Some("encode") => encode(v),
        Some("gemm") => gemm(v),
        Some("verify") => verify(v),
        _ => scalars(v),
    })
}

pub fn run(a: &ReportArgs) -> Result<ExitCode> {
    let v: Value = serde_json::from_str(&read_text(&a.input)?).context("report is not valid JSON")?;
    emit(None, &render(&v)?)?;
    Ok(ExitCode::SUCCESS)
}
