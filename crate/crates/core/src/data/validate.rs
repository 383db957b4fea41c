//! Data quality checks run before cleaning.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Schema};
use super::table::{Cell, RawTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub name: String,
    pub missing: usize,
    pub type_invalid: usize,
    pub out_of_range: usize,
    /// Missing cells count toward failure only in mandatory columns.
    pub mandatory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_rows: usize,
    pub columns: Vec<ColumnReport>,
    /// Repeated identifiers rendered as `column=value`, first-seen order.
    pub duplicate_ids: Vec<String>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn column(&self, name: &str) -> Option<&ColumnReport> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn failure_count(&self) -> usize {
        let cells: usize = self
            .columns
            .iter()
            .map(|c| c.type_invalid + c.out_of_range + if c.mandatory { c.missing } else { 0 })
            .sum();
        cells + self.duplicate_ids.len()
    }

    /// Tab-separated export, one record per column.
    pub fn to_text(&self) -> String {
        let mut out = String::from("column\tmandatory\tmissing\ttype_invalid\tout_of_range\n");
        for c in &self.columns {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                c.name, c.mandatory, c.missing, c.type_invalid, c.out_of_range
            );
        }
        for d in &self.duplicate_ids {
            let _ = writeln!(out, "#duplicate\t{d}");
        }
        let _ = writeln!(out, "#rows\t{}", self.n_rows);
        let _ = writeln!(out, "#pass\t{}", self.pass);
        out
    }
}

/// Counts missing, type-invalid and out-of-range cells and repeated
/// identifiers. Never fails; a schema column absent from the table is
/// reported as entirely missing.
pub fn validate(table: &RawTable, schema: &Schema) -> ValidationReport {
    let mut columns = Vec::with_capacity(schema.columns().len());
    let mut duplicate_ids = Vec::new();
    for spec in schema.columns() {
        let mut rep = ColumnReport {
            name: spec.name.clone(),
            missing: 0,
            type_invalid: 0,
            out_of_range: 0,
            mandatory: spec.is_mandatory(),
        };
        let Some(j) = table.column_index(&spec.name) else {
            rep.missing = table.n_rows();
            columns.push(rep);
            continue;
        };
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for row in &table.rows {
            match &row[j] {
                Cell::Missing => rep.missing += 1,
                Cell::Invalid(_) => rep.type_invalid += 1,
                Cell::Number(v) => {
                    if !spec.in_range(*v) {
                        rep.out_of_range += 1;
                    }
                }
                Cell::Text(s) => match &spec.kind {
                    ColumnKind::Ordinal(order) if !order.contains(s) => rep.type_invalid += 1,
                    ColumnKind::Identifier => {
                        let count = seen.entry(s.clone()).or_default();
                        *count += 1;
                        if *count == 2 {
                            duplicate_ids.push(format!("{}={}", spec.name, s));
                        }
                    }
                    _ => {}
                },
            }
        }
        columns.push(rep);
    }
    let mut report = ValidationReport {
        n_rows: table.n_rows(),
        columns,
        duplicate_ids,
        pass: false,
    };
    report.pass = report.failure_count() == 0;
    report
}

#[cfg(test)]
mod tests {
    use super::super::schema::ColumnSpec;
    use super::super::table::{read_csv, LoadOptions};
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::identifier("PID"),
            ColumnSpec::numeric("area").with_range(Some(0.0), Some(1e4)),
            ColumnSpec::ordinal("q", ["Po", "Fa", "TA"]),
            ColumnSpec::categorical("zone"),
            ColumnSpec::target("price"),
        ])
        .unwrap()
    }

    fn table(text: &str) -> RawTable {
        read_csv(text.as_bytes(), &schema(), LoadOptions::default()).unwrap()
    }

    #[test]
    fn clean_toy_table_passes() {
        let r = validate(&table("PID,area,q,zone,price\n1,10,TA,a,5\n2,20,Po,b,6\n"), &schema());
        assert!(r.pass);
        assert_eq!(r.failure_count(), 0);
        assert!(r.columns.iter().all(|c| c.missing + c.type_invalid + c.out_of_range == 0));
    }

    #[test]
    fn duplicated_identifier_is_listed() {
        let r = validate(
            &table("PID,area,q,zone,price\n5286,10,TA,a,5\n5286,20,Po,b,6\n7,1,Fa,a,1\n"),
            &schema(),
        );
        assert!(!r.pass);
        assert_eq!(r.duplicate_ids, vec!["PID=5286".to_string()]);
    }

    #[test]
    fn type_and_range_violations() {
        let r = validate(
            &table("PID,area,q,zone,price\n1,abc,TA,a,5\n2,-3,Gd,,6\n"),
            &schema(),
        );
        let area = r.column("area").unwrap();
        assert_eq!(area.type_invalid, 1);
        assert_eq!(area.out_of_range, 1);
        assert_eq!(r.column("q").unwrap().type_invalid, 1);
        assert_eq!(r.column("zone").unwrap().missing, 1);
        assert!(!r.pass);
    }

    #[test]
    fn optional_missing_does_not_fail_but_target_missing_does() {
        let r = validate(&table("PID,area,q,zone,price\n1,,TA,,5\n"), &schema());
        assert!(r.pass);
        let r = validate(&table("PID,area,q,zone,price\n1,2,TA,a,\n"), &schema());
        assert!(!r.pass);
        assert!(r.to_text().contains("#pass\tfalse"));
    }
}
