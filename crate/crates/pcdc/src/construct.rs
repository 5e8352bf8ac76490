//! Builders for placement delivery arrays.
//!
//! [`build_regular_pda`] produces the classic combinatorial array whose
//! rows are the t-subsets of [d] in lexicographic order: the entry at row T,
//! column c is a star when c is in T and otherwise the lexicographic rank of
//! the (t+1)-subset T + {c}. The result is a (t+1)-regular
//! (d, C(d,t), C(d-1,t-1), C(d,t+1)) array.
//!
//! [`extend_pda`] is the block product that turns a source array p1 and an
//! inner array p2 into a (K1K2, F1F2, Z1F2+(F1-Z1)Z2, S1S2) array: integer s
//! of p1 becomes a copy of p2 with integers shifted into the s-th span, and
//! stars become all-star blocks.
//!
//! [`construct_one`] and [`construct_two`] are the two compositions used by
//! the simulator: a regular source with a single-row inner array, and two
//! regular arrays.

use crate::loads::Rat;
use crate::pda::{ExtendedPdaMeta, Grid, Pda, PdaEntry};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConstructError {
    #[error("invalid parameters: {0}")]
    InvalidSpec(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// C(n, k) without overflow at the supported desk scale.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u64 = 1;
    for i in 0..k {
        result = result * (n - i) as u64 / (i + 1) as u64;
    }
    result
}

/// All size-`size` subsets of 1..=universe, each ascending, in
/// lexicographic order.
pub fn subsets_lex(universe: usize, size: usize) -> Vec<Vec<usize>> {
    assert!(size <= universe, "subset size exceeds universe");
    let mut out = Vec::with_capacity(binomial(universe, size) as usize);
    let mut current = Vec::with_capacity(size);
    fn rec(universe: usize, size: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        let remaining = size - current.len();
        for v in start..=(universe - remaining + 1) {
            current.push(v);
            rec(universe, size, v + 1, current, out);
            current.pop();
        }
    }
    if size == 0 {
        out.push(Vec::new());
    } else {
        rec(universe, size, 1, &mut current, &mut out);
    }
    out
}

/// 1-based lexicographic rank of an ascending subset of 1..=universe among
/// all subsets of the same size.
pub fn subset_rank(universe: usize, subset: &[usize]) -> u64 {
    debug_assert!(subset.windows(2).all(|w| w[0] < w[1]), "subset must be ascending");
    debug_assert!(subset.iter().all(|&x| 1 <= x && x <= universe));
    let m = subset.len();
    let mut rank = 1u64;
    let mut prev = 0usize;
    for (i, &x) in subset.iter().enumerate() {
        for v in prev + 1..x {
            rank += binomial(universe - v, m - i - 1);
        }
        prev = x;
    }
    rank
}

/// A regular array together with the subset labeling its rows.
#[derive(Clone, Debug)]
pub struct RegularPda {
    pub pda: Pda,
    /// Row i of the array corresponds to `row_subsets[i]`.
    pub row_subsets: Vec<Vec<usize>>,
}

/// Builds the (t+1)-regular array on d columns; requires 1 <= t <= d-1.
pub fn build_regular_pda(d: usize, t: usize) -> Result<RegularPda, ConstructError> {
    if t < 1 || t >= d {
        return Err(ConstructError::InvalidSpec(format!(
            "regular array needs 1 <= t <= d-1, got d={d}, t={t}"
        )));
    }
    let row_subsets = subsets_lex(d, t);
    let grid = Grid::from_fn(row_subsets.len(), d, |r, c| {
        let subset = &row_subsets[r];
        let col = c + 1;
        match subset.binary_search(&col) {
            Ok(_) => PdaEntry::Star,
            Err(insert_at) => {
                let mut extended = subset.clone();
                extended.insert(insert_at, col);
                PdaEntry::Int(subset_rank(d, &extended) as u32)
            }
        }
    });
    let pda = Pda::from_grid(grid).expect("the subset construction satisfies A1-A3");
    Ok(RegularPda { pda, row_subsets })
}

/// The 1 x q array [1 2 .. q]; requires q >= 2 so it can serve as the inner
/// factor of an extension.
pub fn row_pda(q: usize) -> Result<Pda, ConstructError> {
    if q < 2 {
        return Err(ConstructError::InvalidSpec(format!(
            "single-row array needs q >= 2, got q={q}"
        )));
    }
    let grid = Grid::from_fn(1, q, |_, c| PdaEntry::Int(c as u32 + 1));
    Ok(Pda::from_grid(grid).expect("a row of distinct integers satisfies A1-A3"))
}

/// Block product of two arrays. Every integer of `p1` must occur at least
/// twice, and `p2` must have more than one column.
pub fn extend_pda(p1: &Pda, p2: &Pda) -> Result<(Pda, ExtendedPdaMeta), ConstructError> {
    if let Some((g, _)) = p1.multiplicity_profile().iter().find(|&(g, _)| g < 2) {
        return Err(ConstructError::Precondition(format!(
            "every integer of the source array must occur at least twice; \
             found multiplicity {g}"
        )));
    }
    if p2.k() < 2 {
        return Err(ConstructError::Precondition(
            "the inner array must have more than one column".to_string(),
        ));
    }

    let (f2, k2, s2) = (p2.f(), p2.k(), p2.s());
    let grid = Grid::from_fn(p1.f() * f2, p1.k() * k2, |r, c| {
        match p1.entry(r / f2, c / k2) {
            PdaEntry::Star => PdaEntry::Star,
            PdaEntry::Int(s) => match p2.entry(r % f2, c % k2) {
                PdaEntry::Star => PdaEntry::Star,
                PdaEntry::Int(u) => PdaEntry::Int((s - 1) * s2 + u),
            },
        }
    });
    let meta = ExtendedPdaMeta {
        k1: p1.k(),
        k2,
        f1: p1.f(),
        f2,
        s1: p1.s(),
        s2,
    };
    let pda = Pda::from_grid(grid).expect("the extension preserves A1-A3");
    Ok((pda, meta))
}

/// Regular source on K columns at parameter r, extended by the single-row
/// array on Q columns: a (KQ, C(K,r), C(K-1,r-1), Q*C(K,r+1)) array.
pub fn construct_one(k: usize, q: usize, r: usize) -> Result<(Pda, ExtendedPdaMeta), ConstructError> {
    let source = build_regular_pda(k, r)?;
    let inner = row_pda(q)?;
    extend_pda(&source.pda, &inner)
}

/// Two regular factors: source on K columns at r1, inner on Q columns at
/// r2, with the standing assumption Q >= K.
pub fn construct_two(
    k: usize,
    q: usize,
    r1: usize,
    r2: usize,
) -> Result<(Pda, ExtendedPdaMeta), ConstructError> {
    if q < k {
        return Err(ConstructError::InvalidSpec(format!(
            "the two-factor construction assumes Q >= K, got K={k}, Q={q}"
        )));
    }
    let source = build_regular_pda(k, r1)?;
    let inner = build_regular_pda(q, r2)?;
    extend_pda(&source.pda, &inner.pda)
}

/// The closed-form star count once printed for the two-factor construction:
/// C(K-1, r1-1) * C(Q, r2+1) * (Q/r2 - (K-r1)/r1).
///
/// This formula disagrees with the star count of the array the construction
/// actually produces (Z = Z1*F2 + (F1-Z1)*Z2); for example it yields 3 at
/// (K,Q,r1,r2) = (3,3,1,1) where the built array has Z = 5. It is kept only
/// so tools can surface the discrepancy; the constructive count is
/// authoritative.
pub fn construction_two_printed_z(k: usize, q: usize, r1: usize, r2: usize) -> Rat {
    let front = (binomial(k - 1, r1 - 1) * binomial(q, r2 + 1)) as i64;
    let gap = Rat::new(q as i64, r2 as i64) - Rat::new((k - r1) as i64, r1 as i64);
    Rat::from_integer(front) * gap
}

/// Constructive star count of the extension product, from the factor
/// parameters.
pub fn extended_z(z1: usize, f1: usize, z2: usize, f2: usize) -> usize {
    z1 * f2 + (f1 - z1) * z2
}
