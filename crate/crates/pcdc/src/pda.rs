//! Placement delivery array data model and validation.
//!
//! A grid over `*` and positive integers is a valid array when three
//! conditions hold:
//!
//! - A1: every column contains the same number of stars.
//! - A2: the integers present are exactly 1..=S for some S.
//! - A3: two equal integers lie in distinct rows and distinct columns, and
//!   both opposite corners of the 2x2 subarray they span are stars.
//!
//! [`Pda`] wraps a [`Grid`] that passed validation together with its
//! derived parameters (K, F, Z, S). Validation collects every violation it
//! can find rather than stopping at the first.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// One cell of a grid: a star or a positive integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PdaEntry {
    Star,
    Int(u32),
}

impl PdaEntry {
    pub fn is_star(self) -> bool {
        matches!(self, PdaEntry::Star)
    }

    pub fn integer(self) -> Option<u32> {
        match self {
            PdaEntry::Star => None,
            PdaEntry::Int(v) => Some(v),
        }
    }
}

impl fmt::Display for PdaEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PdaEntry::Star => write!(f, "*"),
            PdaEntry::Int(v) => write!(f, "{v}"),
        }
    }
}

/// A rectangular matrix of entries, not yet validated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    entries: Vec<PdaEntry>,
    rows: usize,
    cols: usize,
}

impl Grid {
    /// Builds a grid from row vectors. Fails if the rows are ragged or the
    /// input is empty.
    pub fn from_rows(rows: &[Vec<PdaEntry>]) -> Result<Grid, Vec<PdaViolation>> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(vec![PdaViolation::Empty]);
        }
        let cols = rows[0].len();
        let ragged: Vec<PdaViolation> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.len() != cols)
            .map(|(i, r)| PdaViolation::NonRectangular {
                row: i + 1,
                len: r.len(),
                expected: cols,
            })
            .collect();
        if !ragged.is_empty() {
            return Err(ragged);
        }
        Ok(Grid {
            entries: rows.concat(),
            rows: rows.len(),
            cols,
        })
    }

    /// Builds a grid by evaluating `f` at every (row, col), 0-based.
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> PdaEntry) -> Grid {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Grid { entries, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 0-based (row, col).
    pub fn entry(&self, row: usize, col: usize) -> PdaEntry {
        assert!(row < self.rows && col < self.cols, "grid index out of range");
        self.entries[row * self.cols + col]
    }

    pub fn iter(&self) -> impl Iterator<Item = PdaEntry> + '_ {
        self.entries.iter().copied()
    }

    fn column_star_count(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.entry(r, col).is_star()).count()
    }

    /// Positions of every integer value, keyed by value, positions 0-based
    /// in row-major order.
    pub fn occurrences(&self) -> BTreeMap<u32, Vec<(usize, usize)>> {
        let mut map: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if let Some(v) = self.entry(r, c).integer() {
                    map.entry(v).or_default().push((r, c));
                }
            }
        }
        map
    }
}

/// 1-based grid coordinate used in diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    fn from_zero_based(row: usize, col: usize) -> Pos {
        Pos { row: row + 1, col: col + 1 }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(row {}, col {})", self.row, self.col)
    }
}

/// Why a pair of equal integers breaks condition A3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum A3Reason {
    SameRow,
    SameColumn,
    /// An opposite corner of the spanned 2x2 subarray is not a star.
    MissingStar(Pos),
}

impl fmt::Display for A3Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            A3Reason::SameRow => write!(f, "they share a row"),
            A3Reason::SameColumn => write!(f, "they share a column"),
            A3Reason::MissingStar(p) => write!(f, "the corner at {p} is not a star"),
        }
    }
}

/// A single validation failure, with 1-based coordinates.
#[derive(Clone, Debug, Error, PartialEq, Eq, PartialOrd, Ord)]
pub enum PdaViolation {
    #[error("grid is empty")]
    Empty,
    #[error("grid is not rectangular: row {row} has {len} entries, expected {expected}")]
    NonRectangular { row: usize, len: usize, expected: usize },
    #[error("A1: column {col} has {stars} stars, expected {expected}")]
    A1 { col: usize, stars: usize, expected: usize },
    #[error("A2: integer {value} does not occur although {max} does")]
    A2 { value: u32, max: u32 },
    #[error("A3: integer {value} at {first} and {second}: {reason}")]
    A3 { value: u32, first: Pos, second: Pos, reason: A3Reason },
}

/// Derived parameters of a valid array: K columns, F rows, Z stars per
/// column, S distinct integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PdaParams {
    pub k: usize,
    pub f: usize,
    pub z: usize,
    pub s: u32,
}

impl fmt::Display for PdaParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.k, self.f, self.z, self.s)
    }
}

/// Block shape of an array produced by the extension product: the source
/// array contributes K1 column blocks and F1 row blocks, the inner array
/// the per-block shape K2 x F2 and the integer span S2 per source integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtendedPdaMeta {
    pub k1: usize,
    pub k2: usize,
    pub f1: usize,
    pub f2: usize,
    pub s1: u32,
    pub s2: u32,
}

/// A validated placement delivery array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pda {
    grid: Grid,
    params: PdaParams,
}

/// Why no regularity degree exists.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RegularityError {
    #[error("array contains no integers, so no multiplicity is defined")]
    NoIntegers,
    #[error(
        "not regular: integer {first_value} occurs {first_count} times but \
         integer {second_value} occurs {second_count} times"
    )]
    NotRegular {
        first_value: u32,
        first_count: usize,
        second_value: u32,
        second_count: usize,
    },
}

/// Map from multiplicity g to the number of integers occurring exactly g
/// times. Multiplicities that occur zero times are absent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MultiplicityProfile {
    counts: BTreeMap<usize, u32>,
}

impl MultiplicityProfile {
    /// Number of integers with multiplicity exactly `g` (0 when absent).
    pub fn count(&self, g: usize) -> u32 {
        self.counts.get(&g).copied().unwrap_or(0)
    }

    /// (multiplicity, count) pairs in ascending multiplicity order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts.iter().map(|(&g, &n)| (g, n))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total number of distinct integers, i.e. S.
    pub fn total_integers(&self) -> u32 {
        self.counts.values().sum()
    }

    /// Total count of integer-valued cells, i.e. sum of g * S_g.
    pub fn total_cells(&self) -> u64 {
        self.counts.iter().map(|(&g, &n)| g as u64 * n as u64).sum()
    }
}

impl FromIterator<(usize, u32)> for MultiplicityProfile {
    fn from_iter<I: IntoIterator<Item = (usize, u32)>>(iter: I) -> Self {
        MultiplicityProfile { counts: iter.into_iter().filter(|&(_, n)| n > 0).collect() }
    }
}

impl Pda {
    /// Validates a grid against A1, A2 and A3. Returns the array with
    /// derived parameters, or every violation found.
    pub fn from_grid(grid: Grid) -> Result<Pda, Vec<PdaViolation>> {
        let violations = validate(&grid);
        if !violations.is_empty() {
            return Err(violations);
        }
        let params = PdaParams {
            k: grid.cols(),
            f: grid.rows(),
            z: grid.column_star_count(0),
            s: grid.iter().filter_map(PdaEntry::integer).max().unwrap_or(0),
        };
        Ok(Pda { grid, params })
    }

    /// Validates row vectors directly; see [`Pda::from_grid`].
    pub fn from_rows(rows: &[Vec<PdaEntry>]) -> Result<Pda, Vec<PdaViolation>> {
        Pda::from_grid(Grid::from_rows(rows)?)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> PdaParams {
        self.params
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn f(&self) -> usize {
        self.params.f
    }

    pub fn z(&self) -> usize {
        self.params.z
    }

    pub fn s(&self) -> u32 {
        self.params.s
    }

    /// Entry at 0-based (row, col).
    pub fn entry(&self, row: usize, col: usize) -> PdaEntry {
        self.grid.entry(row, col)
    }

    /// The common multiplicity g when every integer occurs equally often.
    pub fn regularity(&self) -> Result<usize, RegularityError> {
        let occ = self.grid.occurrences();
        let mut iter = occ.iter();
        let (&first_value, first) = iter.next().ok_or(RegularityError::NoIntegers)?;
        for (&value, positions) in iter {
            if positions.len() != first.len() {
                return Err(RegularityError::NotRegular {
                    first_value,
                    first_count: first.len(),
                    second_value: value,
                    second_count: positions.len(),
                });
            }
        }
        Ok(first.len())
    }

    /// Histogram of integer multiplicities.
    pub fn multiplicity_profile(&self) -> MultiplicityProfile {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for positions in self.grid.occurrences().values() {
            *counts.entry(positions.len()).or_insert(0) += 1;
        }
        MultiplicityProfile { counts }
    }

    /// A copy of the grid with every integer increased by `offset`. Stars
    /// are unchanged. The result is a raw grid; revalidate to use it as an
    /// array (the shift breaks A2 for offset > 0).
    pub fn shift_integers(&self, offset: u32) -> Grid {
        Grid::from_fn(self.f(), self.k(), |r, c| match self.entry(r, c) {
            PdaEntry::Star => PdaEntry::Star,
            PdaEntry::Int(v) => PdaEntry::Int(v + offset),
        })
    }
}

/// Collects every violation of A1, A2 and A3 in the grid.
pub fn validate(grid: &Grid) -> Vec<PdaViolation> {
    let mut violations = Vec::new();

    // A1: star counts, with column 1 as the reference.
    let expected = grid.column_star_count(0);
    for c in 1..grid.cols() {
        let stars = grid.column_star_count(c);
        if stars != expected {
            violations.push(PdaViolation::A1 { col: c + 1, stars, expected });
        }
    }

    let occ = grid.occurrences();
    let max = occ.keys().next_back().copied().unwrap_or(0);

    // A2: every value up to the maximum present must occur.
    for value in 1..=max {
        if !occ.contains_key(&value) {
            violations.push(PdaViolation::A2 { value, max });
        }
    }

    // A3: check pairs within each value group.
    for (&value, positions) in &occ {
        for (i, &(r1, c1)) in positions.iter().enumerate() {
            for &(r2, c2) in &positions[i + 1..] {
                violations.extend(check_a3_pair(grid, value, (r1, c1), (r2, c2)));
            }
        }
    }

    violations
}

/// A3 for one pair of equal integers; coordinates 0-based.
fn check_a3_pair(
    grid: &Grid,
    value: u32,
    (r1, c1): (usize, usize),
    (r2, c2): (usize, usize),
) -> Vec<PdaViolation> {
    let first = Pos::from_zero_based(r1, c1);
    let second = Pos::from_zero_based(r2, c2);
    let violation = |reason| PdaViolation::A3 { value, first, second, reason };
    if r1 == r2 {
        return vec![violation(A3Reason::SameRow)];
    }
    if c1 == c2 {
        return vec![violation(A3Reason::SameColumn)];
    }
    let mut out = Vec::new();
    for (r, c) in [(r1, c2), (r2, c1)] {
        if !grid.entry(r, c).is_star() {
            out.push(violation(A3Reason::MissingStar(Pos::from_zero_based(r, c))));
        }
    }
    out
}
