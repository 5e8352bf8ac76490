//! Bit-exact simulation of the private map-shuffle-reduce protocol an
//! extended array describes.
//!
//! One run proceeds in four steps. `map_phase` draws each real node's
//! private column choice, assigns storage from the star pattern, computes
//! intermediate values, and fixes the broadcast query permutations.
//! `shuffle_phase` encodes, for every integer the node serves, the XOR of
//! the demanded packet slices it can compute locally. `reduce_phase`
//! reconstructs every missing packet by cancelling the locally computable
//! contributions out of the received symbols and evaluates the output
//! function. `oracle_compute` evaluates the same outputs centrally from
//! the raw files so a decode error anywhere in the pipeline is detected by
//! comparison.
//!
//! File, map, and reduce contents are pseudorandom streams keyed by the
//! master seed, so transcripts are deterministic and any wrong decoded bit
//! flips the final output with overwhelming probability. All per-node
//! randomness comes from one independent stream per node; injecting column
//! choices or queries replays a recorded run without disturbing anything
//! else.

use crate::loads::{theorem1_loads, LoadPoint, LoadSource, Rat};
use crate::construct::extend_pda;
use crate::pda::{Grid, Pda, PdaEntry};
use bitvec::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

/// Payload bit string. Msb0 keeps serialized bytes readable left to right.
pub type Bits = BitVec<u8, Msb0>;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error("file count {n} is not a multiple of the batch count {f}")]
    IndivisibleFiles { n: usize, f: usize },
    #[error("{bits} payload bits cannot be split into {packets} equal packets")]
    PacketIndivisible { bits: usize, packets: usize },
    #[error("the array is not a consistent block extension: {0}")]
    InvalidBlockStructure(String),
    #[error("internal inconsistency (the array should have been rejected): {0}")]
    InternalInconsistency(String),
    #[error("node {node} cannot decode: {detail}")]
    DecodeFailure { node: usize, detail: String },
}

// ---------------------------------------------------------------------------
// Deterministic content functions.

fn expand(tag: &[u8], key: &[u64], data: &[u8], nbits: usize) -> Bits {
    let mut out: Bits = BitVec::with_capacity(nbits);
    let mut counter: u64 = 0;
    while out.len() < nbits {
        let mut hasher = Sha256::new();
        hasher.update(tag);
        for k in key {
            hasher.update(k.to_le_bytes());
        }
        hasher.update(data);
        hasher.update(counter.to_le_bytes());
        let digest = hasher.finalize();
        let take = (nbits - out.len()).min(digest.len() * 8);
        out.extend_from_bitslice(&digest.as_slice().view_bits::<Msb0>()[..take]);
        counter += 1;
    }
    out
}

/// Copies a bit string into whole bytes, zero-padding the tail, so hashing
/// is independent of the backing allocation.
pub(crate) fn canonical_bytes(bits: &Bits) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, bit) in bits.iter().enumerate() {
        if *bit {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

/// Contents of file `n`: a pseudorandom `bits`-bit string keyed by the
/// master seed.
pub fn file_contents(seed: u64, n: usize, bits: usize) -> Bits {
    expand(b"pcdc.file.v1", &[seed, n as u64], &[], bits)
}

/// Map function: the intermediate value of output function `q` on a file.
pub fn map_iv(seed: u64, q: usize, file: &Bits, bits: usize) -> Bits {
    expand(
        b"pcdc.map.v1",
        &[seed, q as u64, file.len() as u64],
        &canonical_bytes(file),
        bits,
    )
}

/// Reduce function: XOR-fold of all intermediate values of function `q`
/// followed by a hash, so any wrong input bit changes the output.
pub fn reduce_output(seed: u64, q: usize, ivs: &[Bits], bits: usize) -> Bits {
    let mut fold = ivs.first().cloned().unwrap_or_default();
    for iv in ivs.iter().skip(1) {
        debug_assert_eq!(iv.len(), fold.len(), "intermediate values must share a size");
        fold ^= iv;
    }
    expand(
        b"pcdc.reduce.v1",
        &[seed, q as u64, fold.len() as u64],
        &canonical_bytes(&fold),
        bits,
    )
}

fn node_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"pcdc.node-rng.v1");
    hasher.update(seed.to_le_bytes());
    hasher.update((k as u64).to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

// ---------------------------------------------------------------------------
// Block structure.

/// A validated extended array together with its two factors.
///
/// The factors determine everything the protocol needs: the source array
/// assigns one column block per real node and fixes which node serves
/// which integers; the inner array shapes each block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    extended: Pda,
    p1: Pda,
    p2: Pda,
}

impl BlockStructure {
    /// Builds the extension of `p1` by `p2` and wraps it.
    pub fn from_components(p1: &Pda, p2: &Pda) -> Result<BlockStructure, SimError> {
        let (extended, _) = extend_pda(p1, p2)
            .map_err(|e| SimError::InvalidBlockStructure(e.to_string()))?;
        Ok(BlockStructure { extended, p1: p1.clone(), p2: p2.clone() })
    }

    /// Recovers the factors of an extended array from its block
    /// dimensions, rejecting any array that is not exactly an extension
    /// product.
    pub fn recover(
        extended: Pda,
        k1: usize,
        k2: usize,
        f1: usize,
        f2: usize,
    ) -> Result<BlockStructure, SimError> {
        let bad = |msg: String| Err(SimError::InvalidBlockStructure(msg));
        if k1 == 0 || k2 == 0 || f1 == 0 || f2 == 0 {
            return bad("block dimensions must be positive".into());
        }
        if k1 * k2 != extended.k() || f1 * f2 != extended.f() {
            return bad(format!(
                "block dimensions ({k1} x {k2}, {f1} x {f2}) do not tile a {} x {} array",
                extended.f(),
                extended.k()
            ));
        }
        if k2 < 2 {
            return bad("an extension has at least two columns per block".into());
        }

        // Classify each block: all-star, or the set of integers it holds.
        let mut block_values: Vec<Option<Vec<u32>>> = Vec::with_capacity(f1 * k1);
        for bi in 0..f1 {
            for bj in 0..k1 {
                let mut values = Vec::new();
                for r in 0..f2 {
                    for c in 0..k2 {
                        if let Some(v) = extended.entry(bi * f2 + r, bj * k2 + c).integer() {
                            values.push(v);
                        }
                    }
                }
                block_values.push((!values.is_empty()).then_some(values));
            }
        }

        let mins: std::collections::BTreeSet<u32> = block_values
            .iter()
            .flatten()
            .map(|vs| *vs.iter().min().expect("integer blocks are nonempty"))
            .collect();
        let s1 = mins.len() as u32;
        let s_total = extended.s();

        let (p1_grid, p2_grid);
        if s1 == 0 {
            p1_grid = Grid::from_fn(f1, k1, |_, _| PdaEntry::Star);
            p2_grid = Grid::from_fn(f2, k2, |_, _| PdaEntry::Star);
        } else {
            if s_total % s1 != 0 {
                return bad(format!(
                    "{s_total} integers cannot split into {s1} equal spans"
                ));
            }
            let s2 = s_total / s1;
            let class_of = |values: &[u32]| -> Result<u32, SimError> {
                let lo = *values.iter().min().unwrap();
                let class = lo.div_ceil(s2);
                for &v in values {
                    if v <= (class - 1) * s2 || v > class * s2 {
                        return Err(SimError::InvalidBlockStructure(format!(
                            "a block mixes integers {lo} and {v} from different spans of width {s2}"
                        )));
                    }
                }
                Ok(class)
            };
            let mut classes: Vec<Option<u32>> = Vec::with_capacity(f1 * k1);
            for values in &block_values {
                classes.push(match values {
                    None => None,
                    Some(vs) => Some(class_of(vs)?),
                });
            }
            // Any integer block, unshifted, is the inner-factor candidate.
            let exemplar = classes
                .iter()
                .position(|c| c.is_some())
                .expect("s1 > 0 implies an integer block");
            let (ebi, ebj) = (exemplar / k1, exemplar % k1);
            let eclass = classes[exemplar].unwrap();
            p2_grid = Grid::from_fn(f2, k2, |r, c| {
                match extended.entry(ebi * f2 + r, ebj * k2 + c) {
                    PdaEntry::Star => PdaEntry::Star,
                    PdaEntry::Int(v) => PdaEntry::Int(v - (eclass - 1) * s2),
                }
            });
            p1_grid = Grid::from_fn(f1, k1, |bi, bj| match classes[bi * k1 + bj] {
                None => PdaEntry::Star,
                Some(class) => PdaEntry::Int(class),
            });
        }

        let p1 = Pda::from_grid(p1_grid).map_err(|violations| {
            SimError::InvalidBlockStructure(format!(
                "the block pattern is not a valid source array: {}",
                violations[0]
            ))
        })?;
        let p2 = Pda::from_grid(p2_grid).map_err(|violations| {
            SimError::InvalidBlockStructure(format!(
                "the inner block is not a valid array: {}",
                violations[0]
            ))
        })?;
        let (rebuilt, _) = extend_pda(&p1, &p2)
            .map_err(|e| SimError::InvalidBlockStructure(e.to_string()))?;
        if rebuilt != extended {
            return bad("blocks are not uniform shifted copies of one inner array".into());
        }
        Ok(BlockStructure { extended, p1, p2 })
    }

    pub fn extended(&self) -> &Pda {
        &self.extended
    }

    pub fn p1(&self) -> &Pda {
        &self.p1
    }

    pub fn p2(&self) -> &Pda {
        &self.p2
    }

    pub fn k1(&self) -> usize {
        self.p1.k()
    }

    pub fn k2(&self) -> usize {
        self.p2.k()
    }

    pub fn f1(&self) -> usize {
        self.p1.f()
    }

    pub fn f2(&self) -> usize {
        self.p2.f()
    }

    pub fn s2(&self) -> u32 {
        self.p2.s()
    }

    /// Source integer whose span contains extended integer `t`.
    fn source_class(&self, t: u32) -> u32 {
        (t - 1) / self.s2() + 1
    }

    /// Column blocks (0-based) in which each source integer occurs,
    /// ascending. These are the real nodes serving that integer.
    fn source_blocks(&self) -> BTreeMap<u32, Vec<usize>> {
        self.p1
            .grid()
            .occurrences()
            .into_iter()
            .map(|(s, positions)| {
                let mut blocks: Vec<usize> = positions.into_iter().map(|(_, c)| c).collect();
                blocks.sort_unstable();
                (s, blocks)
            })
            .collect()
    }

    /// 0-based column block of 1-based effective node `j`.
    fn block_of_node(&self, j: usize) -> usize {
        (j - 1) / self.k2()
    }

    fn default_iv_bits(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 { a } else { gcd(b, a % b) }
        }
        let mut l = 1usize;
        for (g, _) in self.p1.multiplicity_profile().iter() {
            if g >= 2 {
                l = l / gcd(l, g - 1) * (g - 1);
            }
        }
        8 * l
    }
}

// ---------------------------------------------------------------------------
// Configuration.

/// One simulation run. Indices are 1-based as everywhere else: demands and
/// injected column choices live in [K2], injected queries are permutations
/// of [K2].
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub structure: BlockStructure,
    pub n_files: usize,
    pub file_bits: usize,
    pub iv_bits: usize,
    pub output_bits: usize,
    pub master_seed: u64,
    pub demands: Vec<usize>,
    pub inject_a: Option<Vec<usize>>,
    pub inject_y: Option<Vec<Vec<usize>>>,
}

impl SimConfig {
    /// Defaults: one file per batch, 64-bit files and outputs, and the
    /// smallest byte-aligned IV size every packet split divides evenly.
    pub fn new(structure: BlockStructure, demands: Vec<usize>) -> SimConfig {
        SimConfig {
            n_files: structure.extended().f(),
            file_bits: 64,
            iv_bits: structure.default_iv_bits(),
            output_bits: 64,
            master_seed: 0,
            demands,
            inject_a: None,
            inject_y: None,
            structure,
        }
    }

    /// Files per batch.
    pub fn eta(&self) -> usize {
        self.n_files / self.structure.extended().f()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let s = &self.structure;
        let (k1, k2) = (s.k1(), s.k2());
        let f = s.extended().f();
        if self.n_files == 0 || self.n_files % f != 0 {
            return Err(SimError::IndivisibleFiles { n: self.n_files, f });
        }
        if self.file_bits == 0 || self.iv_bits == 0 || self.output_bits == 0 {
            return Err(SimError::ConfigInvalid(
                "file, IV, and output sizes must be positive".into(),
            ));
        }
        if self.demands.len() != k1 {
            return Err(SimError::ConfigInvalid(format!(
                "expected {k1} demands, got {}",
                self.demands.len()
            )));
        }
        if let Some(d) = self.demands.iter().find(|d| **d < 1 || **d > k2) {
            return Err(SimError::ConfigInvalid(format!(
                "demand {d} is outside [1, {k2}]"
            )));
        }
        let eta = self.n_files / f;
        for (g, _) in s.p1().multiplicity_profile().iter() {
            if g >= 2 && (eta * self.iv_bits) % (g - 1) != 0 {
                return Err(SimError::PacketIndivisible {
                    bits: eta * self.iv_bits,
                    packets: g - 1,
                });
            }
        }
        if let Some(a) = &self.inject_a {
            if a.len() != k1 {
                return Err(SimError::ConfigInvalid(format!(
                    "expected {k1} injected column choices, got {}",
                    a.len()
                )));
            }
            if let Some(v) = a.iter().find(|v| **v < 1 || **v > k2) {
                return Err(SimError::ConfigInvalid(format!(
                    "injected column choice {v} is outside [1, {k2}]"
                )));
            }
        }
        if let Some(ys) = &self.inject_y {
            let a = self.inject_a.as_ref().ok_or_else(|| {
                SimError::ConfigInvalid(
                    "injected queries need injected column choices to pin positions".into(),
                )
            })?;
            if ys.len() != k1 {
                return Err(SimError::ConfigInvalid(format!(
                    "expected {k1} injected queries, got {}",
                    ys.len()
                )));
            }
            for (k, y) in ys.iter().enumerate() {
                let mut seen = vec![false; k2];
                if y.len() != k2 {
                    return Err(SimError::ConfigInvalid(format!(
                        "injected query for node {} has length {}, expected {k2}",
                        k + 1,
                        y.len()
                    )));
                }
                for &v in y {
                    if v < 1 || v > k2 || std::mem::replace(&mut seen[v - 1], true) {
                        return Err(SimError::ConfigInvalid(format!(
                            "injected query for node {} is not a permutation of 1..={k2}",
                            k + 1
                        )));
                    }
                }
                if y[a[k] - 1] != self.demands[k] {
                    return Err(SimError::ConfigInvalid(format!(
                        "injected query for node {} does not place its demand at position {}",
                        k + 1,
                        a[k]
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Phases.

/// Files of one batch, 1-based and contiguous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub index: usize,
    pub files: Vec<usize>,
}

/// Splits files 1..=n into f contiguous batches of equal size.
pub fn partition_files(n_files: usize, f_count: usize) -> Result<Vec<Batch>, SimError> {
    if f_count == 0 || n_files % f_count != 0 {
        return Err(SimError::IndivisibleFiles { n: n_files, f: f_count });
    }
    let eta = n_files / f_count;
    Ok((1..=f_count)
        .map(|f| Batch { index: f, files: ((f - 1) * eta + 1..=f * eta).collect() })
        .collect())
}

fn batch_files(f: usize, eta: usize) -> impl Iterator<Item = usize> {
    (f - 1) * eta + 1..=f * eta
}

/// A real node after the map step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealNodeState {
    pub k: usize,
    /// Private position of this node's column inside its block.
    pub a: usize,
    /// Impersonated effective node (k-1) * K2 + a.
    pub beta: usize,
    /// Stored batches, ascending.
    pub stored_batches: Vec<usize>,
    /// Broadcast permutation of [K2]; position `a` holds the demand.
    pub query: Vec<usize>,
    ivs: BTreeMap<(usize, usize), Bits>,
}

impl RealNodeState {
    /// Intermediate value of function `q` on file `n`, if locally computed.
    pub fn iv(&self, q: usize, n: usize) -> Option<&Bits> {
        self.ivs.get(&(q, n))
    }
}

/// A query permutation of [K2] whose position `a` holds `d`; the other
/// positions are a uniformly random arrangement of the remaining values.
pub fn generate_query(d: usize, a: usize, k2: usize, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!((1..=k2).contains(&d) && (1..=k2).contains(&a));
    let mut others: Vec<usize> = (1..=k2).filter(|&v| v != d).collect();
    others.shuffle(rng);
    let mut y = Vec::with_capacity(k2);
    let mut it = others.into_iter();
    for pos in 1..=k2 {
        y.push(if pos == a { d } else { it.next().expect("k2 - 1 fillers") });
    }
    y
}

/// Draws column choices, assigns storage, computes all local intermediate
/// values, and fixes the query each node broadcasts.
pub fn map_phase(config: &SimConfig) -> Result<Vec<RealNodeState>, SimError> {
    config.validate()?;
    let s = &config.structure;
    let (k1, k2) = (s.k1(), s.k2());
    let eta = config.eta();
    let mut states = Vec::with_capacity(k1);
    for k in 1..=k1 {
        let mut rng = node_rng(config.master_seed, k);
        let a = match &config.inject_a {
            Some(a) => a[k - 1],
            None => rng.gen_range(1..=k2),
        };
        let beta = (k - 1) * k2 + a;
        let stored: Vec<usize> = (1..=s.extended().f())
            .filter(|&f| s.extended().entry(f - 1, beta - 1).is_star())
            .collect();
        let mut ivs = BTreeMap::new();
        for &f in &stored {
            for n in batch_files(f, eta) {
                let file = file_contents(config.master_seed, n, config.file_bits);
                for q in 1..=k2 {
                    ivs.insert((q, n), map_iv(config.master_seed, q, &file, config.iv_bits));
                }
            }
        }
        let query = match &config.inject_y {
            Some(ys) => ys[k - 1].clone(),
            None => generate_query(config.demands[k - 1], a, k2, &mut rng),
        };
        states.push(RealNodeState { k, a, beta, stored_batches: stored, query, ivs });
    }
    Ok(states)
}

/// Demanded intermediate values per effective node: node j with query value
/// y_j demands (y_j, n) for every file n of every batch whose entry in
/// column j is an integer.
pub fn demand_table(
    config: &SimConfig,
    queries: &[Vec<usize>],
) -> BTreeMap<usize, Vec<(usize, usize)>> {
    let s = &config.structure;
    let eta = config.eta();
    let mut table = BTreeMap::new();
    for j in 1..=s.extended().k() {
        let y_j = queries[s.block_of_node(j)][(j - 1) % s.k2()];
        let mut wants = Vec::new();
        for f in 1..=s.extended().f() {
            if s.extended().entry(f - 1, j - 1).integer().is_some() {
                wants.extend(batch_files(f, eta).map(|n| (y_j, n)));
            }
        }
        table.insert(j, wants);
    }
    table
}

/// One packet slice feeding a coded symbol: the `sender`-labeled slice of
/// the payload demanded by `effective_node` for `batch`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PacketRef {
    pub batch: usize,
    pub effective_node: usize,
    pub function: usize,
}

/// One multicast transmission: the XOR of the sender-labeled slices of all
/// payloads demanded under extended integer `t` outside the sender's block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedSymbol {
    pub sender: usize,
    pub t: u32,
    pub contributors: Vec<PacketRef>,
    pub payload: Bits,
}

/// Packet labels for a payload owned by `owner_block`: the other blocks in
/// which the source integer occurs, ascending. Slice i of the payload is
/// sent by the real node of label i.
fn packet_labels(blocks: &[usize], owner_block: usize) -> Vec<usize> {
    blocks.iter().copied().filter(|&b| b != owner_block).collect()
}

/// Concatenation of the intermediate values (q, n) for every file n of
/// batch f, ascending; None if any is not locally available.
fn concat_ivs(
    ivs: &BTreeMap<(usize, usize), Bits>,
    q: usize,
    f: usize,
    eta: usize,
    iv_bits: usize,
) -> Option<Bits> {
    let mut u: Bits = BitVec::with_capacity(eta * iv_bits);
    for n in batch_files(f, eta) {
        u.extend_from_bitslice(ivs.get(&(q, n))?);
    }
    Some(u)
}

/// Encodes every coded symbol, in (sender, integer) order.
pub fn shuffle_phase(
    config: &SimConfig,
    states: &[RealNodeState],
) -> Result<Vec<CodedSymbol>, SimError> {
    let s = &config.structure;
    let (k2, s2) = (s.k2(), s.s2());
    let eta = config.eta();
    let source_blocks = s.source_blocks();
    let occurrences = s.extended().grid().occurrences();
    let queries: Vec<&Vec<usize>> = states.iter().map(|st| &st.query).collect();

    let mut symbols = Vec::new();
    for state in states {
        let block = state.k - 1;
        let served: Vec<u32> = (0..s.f1())
            .filter_map(|r| s.p1().entry(r, block).integer())
            .collect();
        for source in served {
            let blocks = &source_blocks[&source];
            let g = blocks.len();
            let packet_bits = eta * config.iv_bits / (g - 1);
            for local in 1..=s2 {
                let t = (source - 1) * s2 + local;
                let mut contributors = Vec::new();
                for &(r0, c0) in &occurrences[&t] {
                    let owner_block = c0 / k2;
                    if owner_block == block {
                        continue;
                    }
                    if !blocks.contains(&owner_block) {
                        return Err(SimError::InternalInconsistency(format!(
                            "integer {t} strays outside the blocks of source integer {source}"
                        )));
                    }
                    contributors.push(PacketRef {
                        batch: r0 + 1,
                        effective_node: c0 + 1,
                        function: queries[owner_block][c0 % k2],
                    });
                }
                contributors.sort();
                let mut payload: Bits = bitvec![u8, Msb0; 0; packet_bits];
                for c in &contributors {
                    let u = concat_ivs(&state.ivs, c.function, c.batch, eta, config.iv_bits)
                        .ok_or_else(|| {
                            SimError::InternalInconsistency(format!(
                                "node {} cannot compute the payload for batch {} it must encode",
                                state.k, c.batch
                            ))
                        })?;
                    let labels = packet_labels(blocks, s.block_of_node(c.effective_node));
                    let idx = labels
                        .iter()
                        .position(|&b| b == block)
                        .expect("sender serves this integer");
                    payload ^= &u[idx * packet_bits..(idx + 1) * packet_bits];
                }
                symbols.push(CodedSymbol { sender: state.k, t, contributors, payload });
            }
        }
    }
    Ok(symbols)
}

/// One recovered packet: while decoding the payload it demands for
/// `batch`, `node` took the symbol for integer `t` multicast by `sender`
/// and cancelled every other contribution locally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeStep {
    pub node: usize,
    pub batch: usize,
    pub function: usize,
    pub t: u32,
    pub sender: usize,
}

/// Outputs and the packet-recovery log of the reduce step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReduceOutcome {
    pub outputs: Vec<Bits>,
    pub steps: Vec<DecodeStep>,
}

/// Decodes every missing intermediate value from the coded symbols and
/// evaluates each node's output function.
pub fn reduce_phase(
    config: &SimConfig,
    states: &[RealNodeState],
    symbols: &[CodedSymbol],
) -> Result<ReduceOutcome, SimError> {
    let s = &config.structure;
    let eta = config.eta();
    let source_blocks = s.source_blocks();
    let by_sender_t: BTreeMap<(usize, u32), &CodedSymbol> =
        symbols.iter().map(|sym| ((sym.sender, sym.t), sym)).collect();

    let mut outputs = Vec::with_capacity(states.len());
    let mut steps = Vec::new();
    for state in states {
        let k = state.k;
        let d = config.demands[k - 1];
        let fail = |detail: String| SimError::DecodeFailure { node: k, detail };
        let mut ivs = state.ivs.clone();
        for f in 1..=s.extended().f() {
            let Some(t) = s.extended().entry(f - 1, state.beta - 1).integer() else {
                continue;
            };
            let source = s.source_class(t);
            let blocks = &source_blocks[&source];
            let g = blocks.len();
            let packet_bits = eta * config.iv_bits / (g - 1);
            let labels = packet_labels(blocks, k - 1);
            let mut u: Bits = BitVec::with_capacity(eta * config.iv_bits);
            for &label_block in &labels {
                let sender = label_block + 1;
                let symbol = by_sender_t
                    .get(&(sender, t))
                    .ok_or_else(|| fail(format!("no symbol for integer {t} from node {sender}")))?;
                let mut packet = symbol.payload.clone();
                if packet.len() != packet_bits {
                    return Err(fail(format!(
                        "symbol for integer {t} from node {sender} has {} bits, expected {packet_bits}",
                        packet.len()
                    )));
                }
                let mut found = false;
                for c in &symbol.contributors {
                    if (c.batch, c.effective_node) == (f, state.beta) {
                        found = true;
                        continue;
                    }
                    let other = concat_ivs(&state.ivs, c.function, c.batch, eta, config.iv_bits)
                        .ok_or_else(|| {
                            fail(format!(
                                "cannot cancel the contribution of batch {} to the symbol for integer {t}",
                                c.batch
                            ))
                        })?;
                    let c_labels = packet_labels(blocks, s.block_of_node(c.effective_node));
                    let idx = c_labels
                        .iter()
                        .position(|&b| b == label_block)
                        .expect("symbol contributors carry the sender's label");
                    packet ^= &other[idx * packet_bits..(idx + 1) * packet_bits];
                }
                if !found {
                    return Err(fail(format!(
                        "the symbol for integer {t} from node {sender} does not cover batch {f}"
                    )));
                }
                u.extend_from_bitslice(&packet);
                steps.push(DecodeStep { node: k, batch: f, function: d, t, sender });
            }
            for (i, n) in batch_files(f, eta).enumerate() {
                let iv = u[i * config.iv_bits..(i + 1) * config.iv_bits].to_bitvec();
                ivs.insert((d, n), iv);
            }
        }
        let all: Vec<Bits> = (1..=config.n_files)
            .map(|n| {
                ivs.get(&(d, n))
                    .cloned()
                    .ok_or_else(|| fail(format!("intermediate value for file {n} never arrived")))
            })
            .collect::<Result<_, _>>()?;
        outputs.push(reduce_output(config.master_seed, d, &all, config.output_bits));
    }
    Ok(ReduceOutcome { outputs, steps })
}

/// Ground truth: evaluates every output centrally from the raw files,
/// bypassing storage, coding, and decoding.
pub fn oracle_compute(config: &SimConfig) -> Vec<Bits> {
    config
        .demands
        .iter()
        .map(|&d| {
            let ivs: Vec<Bits> = (1..=config.n_files)
                .map(|n| {
                    let file = file_contents(config.master_seed, n, config.file_bits);
                    map_iv(config.master_seed, d, &file, config.iv_bits)
                })
                .collect();
            reduce_output(config.master_seed, d, &ivs, config.output_bits)
        })
        .collect()
}

/// Everything a finished run produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationReport {
    pub a: Vec<usize>,
    pub queries: Vec<Vec<usize>>,
    pub demand_sets: BTreeMap<usize, Vec<(usize, usize)>>,
    pub symbols: Vec<CodedSymbol>,
    pub decode_steps: Vec<DecodeStep>,
    pub outputs: Vec<Bits>,
    pub decode_success: Vec<bool>,
    pub symbol_count: usize,
    pub total_bits: u64,
    /// Measured loads: r counts stored file bits over input bits; L counts
    /// transmitted bits over K1 * N * alpha, the demanded IV bits across
    /// the real nodes.
    pub measured: LoadPoint,
    /// Closed-form loads from the factor parameters.
    pub predicted: LoadPoint,
    pub loads_match: bool,
}

/// Runs all phases and checks the outcome against the oracle and the
/// closed-form loads.
pub fn run_simulation(config: &SimConfig) -> Result<SimulationReport, SimError> {
    let states = map_phase(config)?;
    let queries: Vec<Vec<usize>> = states.iter().map(|st| st.query.clone()).collect();
    let demand_sets = demand_table(config, &queries);
    let symbols = shuffle_phase(config, &states)?;
    let outcome = reduce_phase(config, &states, &symbols)?;
    let oracle = oracle_compute(config);

    let s = &config.structure;
    let eta = config.eta();
    let stored: usize = states.iter().map(|st| st.stored_batches.len()).sum();
    let measured_r = Rat::new((stored * eta) as i64, config.n_files as i64);
    let total_bits: u64 = symbols.iter().map(|sym| sym.payload.len() as u64).sum();
    let measured_l = Rat::new(
        total_bits as i64,
        (s.k1() * config.n_files * config.iv_bits) as i64,
    );
    let predicted = theorem1_loads(
        s.p1().params(),
        &s.p1().multiplicity_profile(),
        s.p2().params(),
    )
    .map_err(|e| SimError::InternalInconsistency(e.to_string()))?;
    let measured = LoadPoint { r: measured_r, l: measured_l, source: LoadSource::Measured };

    Ok(SimulationReport {
        a: states.iter().map(|st| st.a).collect(),
        queries,
        demand_sets,
        decode_success: outcome
            .outputs
            .iter()
            .zip(&oracle)
            .map(|(got, want)| got == want)
            .collect(),
        symbol_count: symbols.len(),
        total_bits,
        symbols,
        decode_steps: outcome.steps,
        outputs: outcome.outputs,
        loads_match: measured.r == predicted.r && measured.l == predicted.l,
        measured,
        predicted,
    })
}

/// Runs independent configs, in parallel when the `parallel` feature is
/// enabled; results keep input order either way.
pub fn run_simulations(configs: &[SimConfig]) -> Vec<Result<SimulationReport, SimError>> {
    crate::exec::map_indexed(configs.len(), |i| run_simulation(&configs[i]))
}
