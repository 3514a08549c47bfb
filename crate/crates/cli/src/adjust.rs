use std::fs::File;

use gbh_core::{bh_step_up, gbh1, storey, GroupedPValues, RejectionResult};

use crate::error::{CliError, CliResult};
use crate::output::sink;
use crate::{AdjustArgs, ProcedureArg};

const WEIGHTED: &str = "weighted_pvalue";
const REJECTED: &str = "rejected";

struct Table {
    headers: csv::StringRecord,
    rows: Vec<csv::StringRecord>,
    pvalues: Vec<f64>,
    groups: Option<Vec<String>>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn read_error(path: &str, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => {
            let msg = match kind {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
                other => format!("{other:?}"),
            };
            match line {
                Some(l) => CliError::Input(format!("{path}: line {l}: {msg}")),
                None => CliError::Input(format!("{path}: {msg}")),
            }
        }
    }
}

fn read(args: &AdjustArgs) -> CliResult<Table> {
    let path = args.input.display().to_string();
    let file = File::open(&args.input).map_err(|e| CliError::io(&path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| read_error(&path, e))?.clone();
    let p_col = column(&headers, "pvalue")
        .ok_or_else(|| CliError::Input(format!("{path}: line 1: missing `pvalue` column")))?;
    let g_col = column(&headers, "group");
    if g_col.is_none() && args.procedure == ProcedureArg::Gbh1 {
        return Err(CliError::Input(format!(
            "{path}: line 1: missing `group` column (required by gbh1)"
        )));
    }

    let mut rows = Vec::new();
    let mut pvalues = Vec::new();
    let mut groups = g_col.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| read_error(&path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record[p_col].trim();
        let p: f64 =
            raw.parse().ok().filter(|p| (0.0..=1.0).contains(p)).ok_or_else(|| {
                CliError::Input(format!("{path}: line {line}: pvalue `{raw}` is not a number in [0, 1]"))
            })?;
        pvalues.push(p);
        if let (Some(c), Some(g)) = (g_col, groups.as_mut()) {
            let label = record[c].trim();
            if label.is_empty() {
                return Err(CliError::Input(format!("{path}: line {line}: empty group label")));
            }
            g.push(label.to_string());
        }
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{path}: no data rows")));
    }
    Ok(Table {
        headers,
        rows,
        pvalues,
        groups,
    })
}

fn decide(args: &AdjustArgs, table: &Table) -> CliResult<RejectionResult> {
    let p = table.pvalues.clone();
    Ok(match args.procedure {
        ProcedureArg::Gbh1 => {
            let labels = table.groups.as_ref().expect("checked when reading");
            gbh1(&GroupedPValues::from_labels(p, labels)?, args.lambda, args.alpha)?
        }
        ProcedureArg::Storey => storey(&p, args.lambda, args.alpha)?,
        ProcedureArg::Bh => bh_step_up(&p, args.alpha)?,
    })
}

/// Copies `record`, putting `values` into the given columns (appending when
/// the column is new).
fn with_columns(record: &csv::StringRecord, slots: [usize; 2], values: [&str; 2]) -> csv::StringRecord {
    let mut fields: Vec<&str> = record.iter().collect();
    for (slot, value) in slots.into_iter().zip(values) {
        if slot < fields.len() {
            fields[slot] = value;
        } else {
            fields.push(value);
        }
    }
    fields.into_iter().collect()
}

pub fn run(args: &AdjustArgs) -> CliResult<()> {
    let table = read(args)?;
    let result = decide(args, &table)?;

    let width = table.headers.len();
    let w_slot = column(&table.headers, WEIGHTED).unwrap_or(width);
    let r_slot = column(&table.headers, REJECTED).unwrap_or(if w_slot == width { width + 1 } else { width });
    let slots = [w_slot, r_slot];
    let out_label = args
        .out
        .as_ref()
        .map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string());
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(&out_label, io),
        other => CliError::Input(format!("{other:?}")),
    };

    let mut writer = csv::Writer::from_writer(sink(args.out.as_deref())?);
    writer
        .write_record(&with_columns(&table.headers, slots, [WEIGHTED, REJECTED]))
        .map_err(io_err)?;
    for (i, row) in table.rows.iter().enumerate() {
        let weighted = result.weighted_pvalues[i].to_string();
        let rejected = if result.is_rejected(i) { "true" } else { "false" };
        writer
            .write_record(&with_columns(row, slots, [&weighted, rejected]))
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| CliError::io(&out_label, e))
}
