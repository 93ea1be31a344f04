use crate::error::{Error, Result};
use crate::scalar::Real;

use super::LineSpec;

/// Branch table of the IEEE 57-bus case: `from to R X B` per line, p.u.
pub const IEEE57_BRANCH_DATA: &str = include_str!("../../data/ieee57_branch.txt");

/// One branch row with 1-based bus numbers and per-unit series/charging values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b: f64,
}

/// Parses whitespace-separated `from to R X B` rows. `#` starts a comment.
pub fn parse_branch_data(text: &str) -> Result<Vec<BranchRecord>> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(Error::Parse(format!(
                "line {}: expected 5 columns, found {}",
                ln + 1,
                cols.len()
            )));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: invalid {what}", ln + 1));
        let from: usize = cols[0].parse().map_err(|_| bad("from bus"))?;
        let to: usize = cols[1].parse().map_err(|_| bad("to bus"))?;
        let r: f64 = cols[2].parse().map_err(|_| bad("resistance"))?;
        let x: f64 = cols[3].parse().map_err(|_| bad("reactance"))?;
        let b: f64 = cols[4].parse().map_err(|_| bad("charging"))?;
        if r == 0.0 && x == 0.0 {
            return Err(bad("impedance (zero)"));
        }
        out.push(BranchRecord { from, to, r, x, b });
    }
    Ok(out)
}

/// Converts a branch row to series admittance magnitudes between the internal
/// node indices `from` and `to`. Charging is not included here.
pub fn branch_to_line<T: Real>(rec: &BranchRecord, from: usize, to: usize) -> LineSpec<T> {
    let z2 = rec.r * rec.r + rec.x * rec.x;
    LineSpec::new(from, to, T::lit(rec.r / z2), T::lit(rec.x / z2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_table_has_80_branches() {
        let rows = parse_branch_data(IEEE57_BRANCH_DATA).unwrap();
        assert_eq!(rows.len(), 80);
        assert!(rows.iter().all(|r| (1..=57).contains(&r.from) && (1..=57).contains(&r.to)));
        assert_eq!((rows[0].from, rows[0].to), (1, 2));
    }

    #[test]
    fn admittance_conversion() {
        let rec = BranchRecord { from: 1, to: 2, r: 0.03, x: 0.04, b: 0.0 };
        let l: LineSpec<f64> = branch_to_line(&rec, 0, 1);
        assert!((l.conductance - 12.0).abs() < 1e-12);
        assert!((l.susceptance - 16.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(parse_branch_data("1 2 0.1").is_err());
        assert!(parse_branch_data("1 x 0.1 0.2 0").is_err());
        assert!(parse_branch_data("1 2 0 0 0").is_err());
        assert_eq!(parse_branch_data("# only comments\n\n").unwrap().len(), 0);
    }
}
