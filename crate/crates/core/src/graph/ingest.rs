use std::io::BufRead;

use log::warn;

use super::{EdgeInsert, GraphBuilder, KnowledgeGraph};
use crate::causal::CausalityTable;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Required leading columns of a triple file.
pub const TRIPLE_HEADER: [&str; 7] = [
    "subject_cui",
    "subject_name",
    "subject_semtypes",
    "predicate",
    "object_cui",
    "object_name",
    "object_semtypes",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows: usize,
    pub malformed: usize,
    pub duplicates: usize,
    pub warnings: Vec<String>,
}

/// Builds a graph from a triple TSV stream.
///
/// Edge strength comes from the optional eighth column when present, and from
/// `table` otherwise. Malformed rows are counted and skipped; the call fails
/// only when there are no data rows or none of them is usable.
pub fn ingest_triples<S: Scalar, R: BufRead>(
    reader: R,
    table: &CausalityTable<S>,
) -> Result<(KnowledgeGraph<S>, IngestReport)> {
    let mut builder = GraphBuilder::<S>::new();
    let mut report = IngestReport::default();
    let mut header_seen = false;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            check_header(line, line_no)?;
            header_seen = true;
            continue;
        }
        report.rows += 1;
        match parse_row(line, table) {
            Some(row) => {
                let inserted = builder
                    .add_node(
                        row.subject,
                        row.subject_name,
                        split_types(row.subject_types),
                    )
                    .and_then(|_| {
                        builder.add_node(row.object, row.object_name, split_types(row.object_types))
                    })
                    .and_then(|_| {
                        builder.add_edge(row.subject, row.predicate, row.object, row.strength)
                    });
                match inserted {
                    Ok(EdgeInsert::New(_)) => {}
                    Ok(EdgeInsert::Duplicate(_)) => {
                        report.duplicates += 1;
                        let msg = format!(
                            "line {line_no}: duplicate triple {} {} {}, keeping max strength",
                            row.subject, row.predicate, row.object
                        );
                        warn!("{msg}");
                        report.warnings.push(msg);
                    }
                    Err(e) => {
                        report.malformed += 1;
                        report.warnings.push(format!("line {line_no}: {e}"));
                    }
                }
            }
            None => {
                report.malformed += 1;
                report
                    .warnings
                    .push(format!("line {line_no}: malformed row"));
            }
        }
    }

    if !header_seen || report.rows == 0 {
        return Err(Error::Ingest("no triple rows in input".into()));
    }
    if report.malformed == report.rows {
        return Err(Error::Ingest(format!(
            "all {} rows are malformed",
            report.rows
        )));
    }
    if report.malformed > 0 {
        warn!("skipped {} malformed triple rows", report.malformed);
    }
    Ok((builder.build(), report))
}

fn check_header(line: &str, line_no: usize) -> Result<()> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    let ok = cols.len() >= TRIPLE_HEADER.len()
        && cols.len() <= TRIPLE_HEADER.len() + 1
        && cols
            .iter()
            .zip(TRIPLE_HEADER)
            .all(|(c, h)| c.eq_ignore_ascii_case(h));
    if ok {
        Ok(())
    } else {
        Err(Error::Ingest(format!(
            "line {line_no}: expected header starting with {}",
            TRIPLE_HEADER.join("\\t")
        )))
    }
}

struct Row<'a, S> {
    subject: &'a str,
    subject_name: &'a str,
    subject_types: &'a str,
    predicate: &'a str,
    object: &'a str,
    object_name: &'a str,
    object_types: &'a str,
    strength: S,
}

fn parse_row<'a, S: Scalar>(line: &'a str, table: &CausalityTable<S>) -> Option<Row<'a, S>> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cols.len() < 7 || cols.len() > 8 {
        return None;
    }
    let required = [0, 1, 3, 4, 5];
    if required.iter().any(|&i| cols[i].is_empty()) {
        return None;
    }
    let strength = match cols.get(7) {
        Some(s) if !s.is_empty() => {
            let v: f64 = s.parse().ok()?;
            let v = S::from_f64(v)?;
            if !v.in_unit_interval() {
                return None;
            }
            v
        }
        _ => table.weight(cols[3]),
    };
    Some(Row {
        subject: cols[0],
        subject_name: cols[1],
        subject_types: cols[2],
        predicate: cols[3],
        object: cols[4],
        object_name: cols[5],
        object_types: cols[6],
        strength,
    })
}

fn split_types(field: &str) -> impl Iterator<Item = &str> {
    field.split(',').map(str::trim).filter(|t| !t.is_empty())
}
