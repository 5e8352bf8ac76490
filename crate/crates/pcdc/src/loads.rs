//! Closed-form computation and communication loads, evaluated exactly.
//!
//! The computation load r counts mapped file bits relative to the input
//! size; the communication load L counts shuffled bits relative to
//! K1 * N * alpha, the total demanded intermediate-value bits across the
//! real nodes. All arithmetic is rational; floating point appears only in
//! serialized convenience fields elsewhere.
//!
//! [`theorem1_loads`] evaluates the general extended-array formulas from
//! the factor parameters. [`theorem2_point`] and [`theorem3_point`] are the
//! specializations to the two concrete construction families, and
//! [`tradeoff_sweep`] enumerates every corner point of both families next
//! to the non-private baseline.

use crate::construct::binomial;
use crate::pda::{MultiplicityProfile, PdaParams};
use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact rational value at desk scale.
pub type Rat = Ratio<i64>;

fn rat(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}

fn int(n: i64) -> Rat {
    Ratio::from_integer(n)
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LoadError {
    #[error("{param} = {value} is outside the admissible range {range}")]
    OutOfRange {
        param: &'static str,
        value: String,
        range: String,
    },
    #[error("an integer with multiplicity {g} cannot be served by coded multicast; every multiplicity must be at least 2")]
    SingletonInteger { g: usize },
}

fn out_of_range(param: &'static str, value: impl ToString, range: impl ToString) -> LoadError {
    LoadError::OutOfRange {
        param,
        value: value.to_string(),
        range: range.to_string(),
    }
}

/// Which formula or measurement produced a load point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LoadSource {
    /// General extended-array closed form from factor parameters.
    Theorem1,
    /// Single-parameter family: regular source extended by a row array.
    Theorem2,
    /// Two-parameter family: two regular factors.
    Theorem3,
    /// Non-private optimal trade-off envelope.
    NonPrivateOptimal,
    /// Non-private load of a concrete array.
    NonPrivatePda,
    /// Measured by the simulator.
    Measured,
}

/// A computation/communication load pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadPoint {
    pub r: Rat,
    pub l: Rat,
    pub source: LoadSource,
}

/// Non-private optimal communication load at computation load `r` on `k`
/// nodes: (1/r)(1 - r/K) at integer r, linear interpolation between the
/// adjacent integer corners otherwise. Defined for 1 <= r <= K; there is no
/// corner left of r = 1.
pub fn optimal_nonprivate_load(r: Rat, k: usize) -> Result<Rat, LoadError> {
    if k == 0 {
        return Err(out_of_range("k", k, "k >= 1"));
    }
    if r < int(1) || r > int(k as i64) {
        return Err(out_of_range("r", r, format!("1 <= r <= {k}")));
    }
    let corner = |ri: i64| rat(1, ri) * (Rat::one() - rat(ri, k as i64));
    if r.is_integer() {
        return Ok(corner(r.to_integer()));
    }
    let lo = r.floor().to_integer();
    let low = corner(lo);
    let high = corner(lo + 1);
    Ok(low + (r - int(lo)) * (high - low))
}

/// Non-private communication load of a concrete array from its
/// multiplicity profile: sum over g of g * S_g / (K * F * (g - 1)).
pub fn pda_nonprivate_load(
    profile: &MultiplicityProfile,
    k: usize,
    f: usize,
) -> Result<Rat, LoadError> {
    if k == 0 {
        return Err(out_of_range("k", k, "k >= 1"));
    }
    if f == 0 {
        return Err(out_of_range("f", f, "f >= 1"));
    }
    let mut total = Rat::zero();
    for (g, count) in profile.iter() {
        if g < 2 {
            return Err(LoadError::SingletonInteger { g });
        }
        total += rat((g as i64) * (count as i64), (g as i64 - 1) * (k as i64) * (f as i64));
    }
    Ok(total)
}

/// Loads of the extension of a source array `p1` (with multiplicity profile
/// `p1_profile`) by an inner array `p2`:
///
/// r = Z1 K1 / F1 + (1 - Z1/F1) Z2 K1 / F2
/// L = S2 / (K1 F1 F2) * (S1 + sum over g of S1_g / (g - 1))
///
/// where S1_g counts the source integers with multiplicity g. Every source
/// multiplicity must be at least 2 (the extension precondition).
pub fn theorem1_loads(
    p1: PdaParams,
    p1_profile: &MultiplicityProfile,
    p2: PdaParams,
) -> Result<LoadPoint, LoadError> {
    debug_assert_eq!(
        p1_profile.total_integers(),
        p1.s,
        "profile must describe exactly the source integers"
    );
    let (k1, f1, z1) = (p1.k as i64, p1.f as i64, p1.z as i64);
    let (f2, z2) = (p2.f as i64, p2.z as i64);

    let r = rat(z1 * k1, f1) + (Rat::one() - rat(z1, f1)) * rat(z2 * k1, f2);

    let mut sum = int(p1.s as i64);
    for (g, count) in p1_profile.iter() {
        if g < 2 {
            return Err(LoadError::SingletonInteger { g });
        }
        sum += rat(count as i64, g as i64 - 1);
    }
    let l = rat(p2.s as i64, k1 * f1 * f2) * sum;

    Ok(LoadPoint { r, l, source: LoadSource::Theorem1 })
}

/// Corner point of the single-parameter family on `k` nodes and `q`
/// functions at integer computation load `r`: (r, (Q/r)(1 - r/K)).
pub fn theorem2_point(k: usize, q: usize, r: usize) -> Result<LoadPoint, LoadError> {
    if k < 2 {
        return Err(out_of_range("k", k, "k >= 2"));
    }
    if q < 1 {
        return Err(out_of_range("q", q, "q >= 1"));
    }
    if r < 1 || r >= k {
        return Err(out_of_range("r", r, format!("1 <= r <= {}", k - 1)));
    }
    let l = rat(q as i64, r as i64) * (Rat::one() - rat(r as i64, k as i64));
    Ok(LoadPoint { r: int(r as i64), l, source: LoadSource::Theorem2 })
}

/// Corner point of the two-parameter family at (r1, r2):
/// ( r1 + (K - r1) r2 / Q , (1/r1)(1 - r1/K)(Q - r2)/(r2 + 1) ).
pub fn theorem3_point(k: usize, q: usize, r1: usize, r2: usize) -> Result<LoadPoint, LoadError> {
    if k < 2 {
        return Err(out_of_range("k", k, "k >= 2"));
    }
    if q < 2 {
        return Err(out_of_range("q", q, "q >= 2"));
    }
    if r1 < 1 || r1 >= k {
        return Err(out_of_range("r1", r1, format!("1 <= r1 <= {}", k - 1)));
    }
    if r2 < 1 || r2 >= q {
        return Err(out_of_range("r2", r2, format!("1 <= r2 <= {}", q - 1)));
    }
    let (ki, qi, r1i, r2i) = (k as i64, q as i64, r1 as i64, r2 as i64);
    let r = int(r1i) + rat((ki - r1i) * r2i, qi);
    let l = rat(1, r1i) * (Rat::one() - rat(r1i, ki)) * rat(qi - r2i, r2i + 1);
    Ok(LoadPoint { r, l, source: LoadSource::Theorem3 })
}

/// Comparison of the two families at equal computation load.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadComparison {
    /// Common computation load r1 + (K - r1) r2 / Q.
    pub r: Rat,
    /// Single-parameter family load, read off the continuous formula at
    /// the (generally non-integer) computation load `r`.
    pub a: Rat,
    /// Two-parameter family load at (r1, r2).
    pub b: Rat,
    /// a / b, which always equals Q r1 (r2 + 1) / (r1 Q + (K - r1) r2).
    pub ratio: Rat,
    /// Whether a > b. Guaranteed for Q >= K; may fail (at equality) below.
    pub dominates: bool,
}

/// Evaluates both family loads at the computation load of the
/// two-parameter point (r1, r2) and their exact ratio. For Q >= K the
/// two-parameter family is asserted to be strictly cheaper.
pub fn compare_theorems(
    k: usize,
    q: usize,
    r1: usize,
    r2: usize,
) -> Result<LoadComparison, LoadError> {
    let b_point = theorem3_point(k, q, r1, r2)?;
    let (ki, qi, r1i, r2i) = (k as i64, q as i64, r1 as i64, r2 as i64);
    let denominator = r1i * qi + (ki - r1i) * r2i;
    let a = rat(qi * (ki - r1i) * (qi - r2i), ki * denominator);
    let ratio = a / b_point.l;
    let closed_form = rat(qi * r1i * (r2i + 1), denominator);
    assert_eq!(ratio, closed_form, "ratio must match its closed form");
    let dominates = a > b_point.l;
    if q >= k {
        assert!(dominates, "the two-parameter family must win for Q >= K");
    }
    Ok(LoadComparison { r: b_point.r, a, b: b_point.l, ratio, dominates })
}

/// Family tag for sweep rows. The serialized labels sort the non-private
/// baseline first, then the two private families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum SweepFamily {
    NonPrivate,
    Theorem2,
    Theorem3,
}

impl SweepFamily {
    pub fn label(self) -> &'static str {
        match self {
            SweepFamily::NonPrivate => "nonprivate",
            SweepFamily::Theorem2 => "theorem2",
            SweepFamily::Theorem3 => "theorem3",
        }
    }
}

/// One sweep row: a corner point plus the number of file batches the
/// underlying array needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepPoint {
    pub family: SweepFamily,
    pub r1: usize,
    /// Only the two-parameter family has a second knob.
    pub r2: Option<usize>,
    pub point: LoadPoint,
    /// Row count F of the array achieving the point.
    pub files_required: u64,
}

/// Every corner point of both private families plus the non-private
/// baseline corners, sorted by (family, r1, r2). Requires k >= 2 and
/// q >= 2.
pub fn tradeoff_sweep(k: usize, q: usize) -> Result<Vec<SweepPoint>, LoadError> {
    if k < 2 {
        return Err(out_of_range("k", k, "k >= 2"));
    }
    if q < 2 {
        return Err(out_of_range("q", q, "q >= 2"));
    }
    let mut points = Vec::new();
    for r in 1..k {
        points.push(SweepPoint {
            family: SweepFamily::NonPrivate,
            r1: r,
            r2: None,
            point: LoadPoint {
                r: int(r as i64),
                l: optimal_nonprivate_load(int(r as i64), k)?,
                source: LoadSource::NonPrivateOptimal,
            },
            files_required: binomial(k, r),
        });
    }
    for r in 1..k {
        points.push(SweepPoint {
            family: SweepFamily::Theorem2,
            r1: r,
            r2: None,
            point: theorem2_point(k, q, r)?,
            files_required: binomial(k, r),
        });
    }
    for r1 in 1..k {
        for r2 in 1..q {
            points.push(SweepPoint {
                family: SweepFamily::Theorem3,
                r1,
                r2: Some(r2),
                point: theorem3_point(k, q, r1, r2)?,
                files_required: binomial(k, r1) * binomial(q, r2),
            });
        }
    }
    debug_assert!(points.windows(2).all(|w| {
        (w[0].family, w[0].r1, w[0].r2) <= (w[1].family, w[1].r1, w[1].r2)
    }));
    Ok(points)
}
