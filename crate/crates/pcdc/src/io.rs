//! Text formats and report documents.
//!
//! Arrays travel as plain text: one row per line, tokens separated by
//! whitespace, `*` for a star and a positive decimal for an integer.
//! Lines starting with `#` are comments, except `# blocks K1 K2 F1 F2`,
//! which records how an extended array tiles into blocks. Serialization
//! is canonical (directive first, single spaces, newline-terminated
//! rows), so parse and serialize round-trip byte for byte.
//!
//! Reports are JSON documents with exact rationals carried as canonical
//! "p/q" strings next to a decimal convenience value. Sweeps are CSV with
//! a fixed column set so runs diff cleanly.

use crate::audit::AuditReport;
use crate::loads::{LoadPoint, LoadSource, Rat, SweepFamily, SweepPoint};
use crate::pda::{Grid, PdaEntry};
use crate::sim::{canonical_bytes, CodedSymbol, SimulationReport};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: invalid token {token:?}")]
    InvalidToken { line: usize, column: usize, token: String },
    #[error("line {line}: row has {len} entries, expected {expected}")]
    RaggedRows { line: usize, len: usize, expected: usize },
    #[error("line {line}: bad directive: {detail}")]
    BadDirective { line: usize, detail: String },
    #[error("line {line}: bad record: {detail}")]
    InvalidRecord { line: usize, detail: String },
    #[error("no grid rows found")]
    Empty,
}

/// Block tiling of an extended array: K1 x K2 columns, F1 x F2 rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockDirective {
    pub k1: usize,
    pub k2: usize,
    pub f1: usize,
    pub f2: usize,
}

fn parse_directive(line_no: usize, rest: &str) -> Result<BlockDirective, ParseError> {
    let bad = |detail: String| ParseError::BadDirective { line: line_no, detail };
    let fields: Vec<&str> = rest.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(bad(format!("expected 4 block dimensions, got {}", fields.len())));
    }
    let mut dims = [0usize; 4];
    for (slot, field) in dims.iter_mut().zip(&fields) {
        *slot = field
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| bad(format!("{field:?} is not a positive integer")))?;
    }
    Ok(BlockDirective { k1: dims[0], k2: dims[1], f1: dims[2], f2: dims[3] })
}

/// Parses grid text. Validation is the caller's job; this only shapes the
/// entries and picks up an optional block directive.
pub fn parse_pda(text: &str) -> Result<(Grid, Option<BlockDirective>), ParseError> {
    let mut directive = None;
    let mut rows: Vec<Vec<PdaEntry>> = Vec::new();
    let mut expected = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(rest) = comment.trim_start().strip_prefix("blocks") {
                directive = Some(parse_directive(line_no, rest)?);
            }
            continue;
        }
        let mut row = Vec::new();
        for token in trimmed.split_whitespace() {
            // Column = 1-based token position, not byte offset.
            let column = row.len() + 1;
            let entry = if token == "*" {
                PdaEntry::Star
            } else {
                token
                    .parse::<u32>()
                    .ok()
                    .filter(|&v| v > 0)
                    .map(PdaEntry::Int)
                    .ok_or_else(|| ParseError::InvalidToken {
                        line: line_no,
                        column,
                        token: token.to_string(),
                    })?
            };
            row.push(entry);
        }
        if let Some(expected) = expected {
            if row.len() != expected {
                return Err(ParseError::RaggedRows { line: line_no, len: row.len(), expected });
            }
        } else {
            expected = Some(row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ParseError::Empty);
    }
    let grid = Grid::from_rows(&rows).expect("shape checked during parsing");
    Ok((grid, directive))
}

/// Canonical text form: the directive first when present, then one row
/// per line with single-space separation.
pub fn serialize_pda(grid: &Grid, directive: Option<BlockDirective>) -> String {
    let mut out = String::new();
    if let Some(d) = directive {
        writeln!(out, "# blocks {} {} {} {}", d.k1, d.k2, d.f1, d.f2).unwrap();
    }
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{}", grid.entry(r, c)).unwrap();
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Report documents.

/// An exact rational as its canonical reduced string plus a decimal
/// convenience value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalValue {
    pub exact: String,
    pub approx: f64,
}

impl From<Rat> for RationalValue {
    fn from(r: Rat) -> RationalValue {
        RationalValue { exact: r.to_string(), approx: *r.numer() as f64 / *r.denom() as f64 }
    }
}

/// Measured versus predicted loads of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub measured_r: RationalValue,
    pub measured_l: RationalValue,
    pub predicted_r: RationalValue,
    pub predicted_l: RationalValue,
    pub matches: bool,
    pub total_bits: u64,
    pub symbol_count: usize,
}

impl LoadSummary {
    pub fn from_report(report: &SimulationReport) -> LoadSummary {
        LoadSummary {
            measured_r: report.measured.r.into(),
            measured_l: report.measured.l.into(),
            predicted_r: report.predicted.r.into(),
            predicted_l: report.predicted.l.into(),
            matches: report.loads_match,
            total_bits: report.total_bits,
            symbol_count: report.symbol_count,
        }
    }
}

/// Top-level JSON report the command-line tools write. `kind` says which
/// run produced it; absent sections are omitted from the output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportDocument {
    pub kind: String,
    /// Echo of the run configuration, free-form.
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub loads: Option<LoadSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decode_success: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transcript_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub queries: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audit: Option<AuditReport>,
}

/// Hex digest committing to the whole shuffle transcript: senders,
/// integers, contributors, and payload bits.
pub fn transcript_digest(symbols: &[CodedSymbol]) -> String {
    let mut hasher = Sha256::new();
    for sym in symbols {
        hasher.update((sym.sender as u64).to_le_bytes());
        hasher.update(sym.t.to_le_bytes());
        hasher.update((sym.contributors.len() as u64).to_le_bytes());
        for c in &sym.contributors {
            hasher.update((c.batch as u64).to_le_bytes());
            hasher.update((c.effective_node as u64).to_le_bytes());
            hasher.update((c.function as u64).to_le_bytes());
        }
        hasher.update((sym.payload.len() as u64).to_le_bytes());
        hasher.update(canonical_bytes(&sym.payload));
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").unwrap();
    }
    hex
}

// ---------------------------------------------------------------------------
// Sweep CSV.

pub const SWEEP_CSV_HEADER: &str = "family,r1,r2,r_num,r_den,L_num,L_den,F_required";

/// Serializes sweep rows in their canonical (family, r1, r2) order with
/// exact rational numerators and denominators.
pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        let r2 = p.r2.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.family.label(),
            p.r1,
            r2,
            p.point.r.numer(),
            p.point.r.denom(),
            p.point.l.numer(),
            p.point.l.denom(),
            p.files_required
        )
        .unwrap();
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepPoint>, ParseError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(ParseError::Empty)?;
    if header.trim_end() != SWEEP_CSV_HEADER {
        return Err(ParseError::InvalidRecord {
            line: 1,
            detail: format!("expected header {SWEEP_CSV_HEADER:?}"),
        });
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| ParseError::InvalidRecord { line: line_no, detail };
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 8 {
            return Err(bad(format!("expected 8 fields, got {}", fields.len())));
        }
        let (family, source) = match fields[0] {
            "nonprivate" => (SweepFamily::NonPrivate, LoadSource::NonPrivateOptimal),
            "theorem2" => (SweepFamily::Theorem2, LoadSource::Theorem2),
            "theorem3" => (SweepFamily::Theorem3, LoadSource::Theorem3),
            other => return Err(bad(format!("unknown family {other:?}"))),
        };
        let int = |field: &str, what: &str| {
            field
                .parse::<i64>()
                .map_err(|_| bad(format!("{what} {field:?} is not an integer")))
        };
        let r1 = int(fields[1], "r1")? as usize;
        let r2 = match fields[2] {
            "" => None,
            v => Some(int(v, "r2")? as usize),
        };
        if (family == SweepFamily::Theorem3) != r2.is_some() {
            return Err(bad("r2 must be present exactly for theorem3 rows".into()));
        }
        let denom = |v: i64, what: &str| {
            if v <= 0 {
                Err(bad(format!("{what} must have a positive denominator")))
            } else {
                Ok(v)
            }
        };
        let r = Rat::new(int(fields[3], "r_num")?, denom(int(fields[4], "r_den")?, "r")?);
        let l = Rat::new(int(fields[5], "L_num")?, denom(int(fields[6], "L_den")?, "L")?);
        let files_required = int(fields[7], "F_required")? as u64;
        points.push(SweepPoint {
            family,
            r1,
            r2,
            point: LoadPoint { r, l, source },
            files_required,
        });
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// Atomic file output.

/// Writes via a temporary file in the same directory plus a rename, so
/// readers never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp = std::ffi::OsString::from(".");
    tmp.push(file_name);
    tmp.push(format!(".tmp.{}", std::process::id()));
    let tmp_path = match dir {
        Some(d) => d.join(&tmp),
        None => std::path::PathBuf::from(&tmp),
    };
    let result = std::fs::write(&tmp_path, contents)
        .and_then(|()| std::fs::rename(&tmp_path, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp_path);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{construct_one, construct_two};
    use crate::loads::tradeoff_sweep;
    use crate::pda::Pda;
    use crate::sim::{run_simulation, BlockStructure, SimConfig};
    use crate::testutil::grid;

    #[test]
    fn parses_stars_integers_comments_and_blanks() {
        let text = "# a leading comment\n\n* 1 2\n1 * 3\n# trailing note\n2 3 *\n";
        let (parsed, directive) = parse_pda(text).unwrap();
        assert_eq!(parsed, grid("* 1 2; 1 * 3; 2 3 *"));
        assert_eq!(directive, None);
    }

    #[test]
    fn parses_the_block_directive() {
        let text = "# blocks 3 3 3 3\n* 1\n1 *\n";
        let (_, directive) = parse_pda(text).unwrap();
        assert_eq!(directive, Some(BlockDirective { k1: 3, k2: 3, f1: 3, f2: 3 }));
    }

    #[test]
    fn rejects_malformed_inputs_with_positions() {
        assert_eq!(
            parse_pda("1 *\n* 1 1\n").unwrap_err(),
            ParseError::RaggedRows { line: 2, len: 3, expected: 2 }
        );
        assert_eq!(
            parse_pda("* 0\n").unwrap_err(),
            ParseError::InvalidToken { line: 1, column: 2, token: "0".into() }
        );
        assert_eq!(
            parse_pda("* x\n").unwrap_err(),
            ParseError::InvalidToken { line: 1, column: 2, token: "x".into() }
        );
        assert_eq!(
            parse_pda("# blocks 3 3 3\n1 1\n").unwrap_err(),
            ParseError::BadDirective { line: 1, detail: "expected 4 block dimensions, got 3".into() }
        );
        assert_eq!(
            parse_pda("# blocks 3 0 3 3\n1 1\n").unwrap_err(),
            ParseError::BadDirective { line: 1, detail: "\"0\" is not a positive integer".into() }
        );
        assert_eq!(parse_pda("# only comments\n\n").unwrap_err(), ParseError::Empty);
    }

    #[test]
    fn serialization_is_canonical_and_round_trips() {
        let (extended, meta) = construct_one(3, 3, 2).unwrap();
        let directive =
            BlockDirective { k1: meta.k1, k2: meta.k2, f1: meta.f1, f2: meta.f2 };
        let text = serialize_pda(extended.grid(), Some(directive));
        assert!(text.starts_with("# blocks 3 3 3 1\n"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1).unwrap(), "* * * * * * 1 2 3");
        let (reparsed, redirective) = parse_pda(&text).unwrap();
        assert_eq!(&reparsed, extended.grid());
        assert_eq!(redirective, Some(directive));
        assert_eq!(serialize_pda(&reparsed, redirective), text);
    }

    #[test]
    fn parser_accepts_authored_whitespace_variants() {
        let tidy = grid("* 1; 1 *");
        let (sloppy, _) = parse_pda("  *   1 \n\t1 *\n").unwrap();
        assert_eq!(serialize_pda(&sloppy, None), serialize_pda(&tidy, None));
    }

    #[test]
    fn rationals_format_reduced_with_decimal_convenience() {
        let v: RationalValue = Rat::new(5, 3).into();
        assert_eq!(v.exact, "5/3");
        assert!((v.approx - 1.6666666).abs() < 1e-6);
        let v: RationalValue = Rat::new(4, 2).into();
        assert_eq!(v.exact, "2");
        assert_eq!(v.approx, 2.0);
    }

    #[test]
    fn report_documents_round_trip_through_json() {
        let structure = {
            let (extended, meta) = construct_two(3, 3, 1, 1).unwrap();
            BlockStructure::recover(extended, meta.k1, meta.k2, meta.f1, meta.f2).unwrap()
        };
        let config = SimConfig::new(structure, vec![1, 2, 3]);
        let report = run_simulation(&config).unwrap();
        let doc = ReportDocument {
            kind: "simulation".into(),
            config: serde_json::json!({"seed": config.master_seed}),
            params: Some(config.structure.extended().params().to_string()),
            loads: Some(LoadSummary::from_report(&report)),
            decode_success: Some(report.decode_success.clone()),
            transcript_digest: Some(transcript_digest(&report.symbols)),
            queries: Some(report.queries.clone()),
            audit: None,
        };
        let json = serde_json::to_string_pretty(&doc).unwrap();
        assert!(json.contains("\"exact\": \"5/3\""));
        assert!(json.contains("\"exact\": \"2/3\""));
        assert!(!json.contains("\"audit\""));
        let back: ReportDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.loads, doc.loads);
        assert_eq!(back.transcript_digest, doc.transcript_digest);
    }

    #[test]
    fn transcript_digest_tracks_payload_and_metadata() {
        let structure = {
            let (extended, meta) = construct_two(3, 3, 1, 1).unwrap();
            BlockStructure::recover(extended, meta.k1, meta.k2, meta.f1, meta.f2).unwrap()
        };
        let mut config = SimConfig::new(structure, vec![1, 2, 3]);
        let first = run_simulation(&config).unwrap();
        assert_eq!(transcript_digest(&first.symbols), transcript_digest(&first.symbols));
        config.master_seed = 1;
        let second = run_simulation(&config).unwrap();
        assert_ne!(transcript_digest(&first.symbols), transcript_digest(&second.symbols));
    }

    #[test]
    fn sweep_csv_has_the_pinned_layout_and_round_trips() {
        let points = tradeoff_sweep(3, 3).unwrap();
        let csv = sweep_to_csv(&points);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "family,r1,r2,r_num,r_den,L_num,L_den,F_required");
        assert_eq!(lines.next().unwrap(), "nonprivate,1,,1,1,2,3,3");
        assert!(csv.lines().any(|l| l == "theorem2,2,,2,1,1,2,3"));
        assert!(csv.lines().any(|l| l == "theorem3,2,2,8,3,1,18,9"));
        assert_eq!(parse_sweep_csv(&csv).unwrap(), points);
    }

    #[test]
    fn sweep_csv_parser_rejects_damaged_files() {
        let points = tradeoff_sweep(3, 3).unwrap();
        let csv = sweep_to_csv(&points);
        assert_eq!(parse_sweep_csv("").unwrap_err(), ParseError::Empty);
        assert!(matches!(
            parse_sweep_csv("family,r1\n").unwrap_err(),
            ParseError::InvalidRecord { line: 1, .. }
        ));
        let broken = csv.replace("theorem2,2,,2,1,1,2,3", "theorem2,2,,2,1,1,2");
        assert!(matches!(
            parse_sweep_csv(&broken).unwrap_err(),
            ParseError::InvalidRecord { .. }
        ));
        let broken = csv.replace("theorem3,2,2,", "theorem3,2,,");
        assert!(matches!(
            parse_sweep_csv(&broken).unwrap_err(),
            ParseError::InvalidRecord { .. }
        ));
        let broken = csv.replace("nonprivate", "baseline");
        assert!(matches!(
            parse_sweep_csv(&broken).unwrap_err(),
            ParseError::InvalidRecord { .. }
        ));
    }

    #[test]
    fn atomic_writes_replace_files_without_leftovers() {
        let dir = std::env::temp_dir().join(format!("pcdc-io-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.csv");
        write_atomic(&path, b"first").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"first");
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        let leftovers: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy() != "out.csv")
            .collect();
        assert!(leftovers.is_empty(), "{leftovers:?}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn parse_then_validate_flags_bad_grids() {
        let (parsed, _) = parse_pda("1 1\n* *\n").unwrap();
        assert!(Pda::from_grid(parsed).is_err());
    }
}
