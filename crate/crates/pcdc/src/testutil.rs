//! Helpers shared by unit tests across modules.

use crate::pda::{Grid, Pda, PdaEntry};

/// Parses a compact grid literal: rows separated by ';', entries by
/// whitespace, '*' for stars.
pub(crate) fn grid(text: &str) -> Grid {
    let rows: Vec<Vec<PdaEntry>> = text
        .split(';')
        .map(|row| {
            row.split_whitespace()
                .map(|tok| {
                    if tok == "*" {
                        PdaEntry::Star
                    } else {
                        PdaEntry::Int(tok.parse().expect("grid literal token"))
                    }
                })
                .collect()
        })
        .collect();
    Grid::from_rows(&rows).expect("literal grid must be rectangular")
}

pub(crate) fn pda(text: &str) -> Pda {
    Pda::from_grid(grid(text)).expect("literal grid must be a valid array")
}
