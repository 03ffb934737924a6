//! Simulated non-interactive protocol execution: partitioning, message
//! transcripts with exact bit accounting, and orchestration of the
//! randomizers in [`crate::ldp`].
//!
//! Player code lives in the [`player`] submodule and receives only the
//! player's own record, public randomness, and parameters; the server fold
//! is deterministic and players may run in any order or in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::{
    one_bit_estimate, DiscreteGrid, OneBitReport, PrivacyParams, PublicStrings,
    ONE_BIT_MAX_EPSILON,
};
use crate::loss::{DataRecord, LossSpec};
use crate::poly::SurrogateConfig;
use crate::rng::{Substreams, STREAM_PARTITION};
use crate::util::{flat_index, for_each_multi_index};

/// Which protocol the simulator runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Mechanism {
    /// Every player reports all (k+1)^p grid losses, each under budget
    /// eps/(k+1)^p (sequential composition over her own reports).
    FullGrid,
    /// Every player reports a single bit for her partition's grid point.
    PartitionedOneBit,
    /// Every player reports a rounded noisy value, O(log n) bits.
    Discretized {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_step: Option<f64>,
    },
}

impl Mechanism {
    pub fn tag(&self) -> &'static str {
        match self {
            Mechanism::FullGrid => "full-grid",
            Mechanism::PartitionedOneBit => "partitioned-one-bit",
            Mechanism::Discretized { .. } => "discretized",
        }
    }
}

/// Full configuration of one protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mechanism: Mechanism,
    pub privacy: PrivacyParams,
    pub surrogate: SurrogateConfig,
    pub master_seed: u64,
    /// Test hook: replace each one-bit contribution by its exact expectation
    /// v/2 (noiseless limit of the one-bit protocol).
    #[serde(default)]
    pub one_bit_expectation: bool,
}

impl ProtocolConfig {
    pub fn new(
        mechanism: Mechanism,
        privacy: PrivacyParams,
        surrogate: SurrogateConfig,
        master_seed: u64,
    ) -> Self {
        ProtocolConfig {
            mechanism,
            privacy,
            surrogate,
            master_seed,
            one_bit_expectation: false,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// A randomly balanced assignment of players to subsets, regenerable from
/// its seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionAssignment {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub assignment: Vec<usize>,
}

/// Assigns each of n players independently and uniformly to one of d
/// subsets: disjoint, covering, balanced in expectation.
pub fn partition_players(n: usize, d: usize, seed: u64) -> Result<PartitionAssignment> {
    if d == 0 || n < d {
        return Err(Error::domain(format!(
            "cannot partition {n} players into {d} subsets"
        )));
    }
    use rand::Rng;
    let mut rng = Substreams::new(seed).labeled(STREAM_PARTITION);
    let assignment = (0..n).map(|_| rng.random_range(0..d)).collect();
    Ok(PartitionAssignment { n, d, seed, assignment })
}

impl PartitionAssignment {
    /// Player indices per subset, in player order.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.d];
        for (player, &subset) in self.assignment.iter().enumerate() {
            out[subset].push(player);
        }
        out
    }

    /// Subsets left empty by the random assignment (possible at small n; the
    /// caller fills the matching grid points from neighbors).
    pub fn empty_subsets(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.d];
        for &s in &self.assignment {
            counts[s] += 1;
        }
        counts
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == 0).then_some(i))
            .collect()
    }
}

/// One player's recorded message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerMessage {
    pub player: usize,
    pub payload: Payload,
    pub bit_size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Payload {
    /// Full-grid protocol: one real per grid point.
    Reals(Vec<f64>),
    Bit(bool),
    GridIndex(u32),
}

impl Payload {
    fn message_count(&self) -> u64 {
        match self {
            Payload::Reals(v) => v.len() as u64,
            _ => 1,
        }
    }
}

/// The record of one protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub protocol: String,
    pub records: Vec<PlayerMessage>,
    pub total_bits: u64,
}

impl Transcript {
    fn from_records(protocol: &str, records: Vec<PlayerMessage>) -> Self {
        let total_bits = records.iter().map(|r| r.bit_size).sum();
        Transcript { protocol: protocol.into(), records, total_bits }
    }

    /// JSON debug form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    /// Compact binary form: header plus packed payloads (one-bit reports are
    /// packed one bit per player).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"LDPT");
        out.push(1u8); // format version
        let tag: u8 = match self.records.first().map(|r| &r.payload) {
            Some(Payload::Reals(_)) => 0,
            Some(Payload::Bit(_)) | None => 1,
            Some(Payload::GridIndex(_)) => 2,
        };
        out.push(tag);
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        match tag {
            0 => {
                let per = match &self.records[0].payload {
                    Payload::Reals(v) => v.len() as u64,
                    _ => unreachable!(),
                };
                out.extend_from_slice(&per.to_le_bytes());
                for r in &self.records {
                    if let Payload::Reals(v) = &r.payload {
                        for x in v {
                            out.extend_from_slice(&x.to_le_bytes());
                        }
                    }
                }
            }
            1 => {
                let mut packed = vec![0u8; self.records.len().div_ceil(8)];
                for (i, r) in self.records.iter().enumerate() {
                    if matches!(r.payload, Payload::Bit(true)) {
                        packed[i / 8] |= 1 << (i % 8);
                    }
                }
                out.extend_from_slice(&packed);
            }
            2 => {
                // per-message bit size repeated in the header for accounting
                out.extend_from_slice(&self.records[0].bit_size.to_le_bytes());
                for r in &self.records {
                    if let Payload::GridIndex(idx) = &r.payload {
                        out.extend_from_slice(&idx.to_le_bytes());
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Serialization("malformed transcript".into());
        if bytes.len() < 14 || &bytes[0..4] != b"LDPT" || bytes[4] != 1 {
            return Err(bad());
        }
        let tag = bytes[5];
        let n = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
        let mut records = Vec::with_capacity(n);
        match tag {
            0 => {
                if bytes.len() < 22 {
                    return Err(bad());
                }
                let per = u64::from_le_bytes(bytes[14..22].try_into().unwrap()) as usize;
                let mut off = 22;
                for player in 0..n {
                    let mut v = Vec::with_capacity(per);
                    for _ in 0..per {
                        if off + 8 > bytes.len() {
                            return Err(bad());
                        }
                        v.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
                        off += 8;
                    }
                    records.push(PlayerMessage {
                        player,
                        payload: Payload::Reals(v),
                        bit_size: 64 * per as u64,
                    });
                }
                Ok(Transcript::from_records("full-grid", records))
            }
            1 => {
                let packed = &bytes[14..];
                if packed.len() < n.div_ceil(8) {
                    return Err(bad());
                }
                for player in 0..n {
                    let bit = packed[player / 8] >> (player % 8) & 1 == 1;
                    records.push(PlayerMessage {
                        player,
                        payload: Payload::Bit(bit),
                        bit_size: 1,
                    });
                }
                Ok(Transcript::from_records("partitioned-one-bit", records))
            }
            2 => {
                if bytes.len() < 22 {
                    return Err(bad());
                }
                let bits = u64::from_le_bytes(bytes[14..22].try_into().unwrap());
                let mut off = 22;
                for player in 0..n {
                    if off + 4 > bytes.len() {
                        return Err(bad());
                    }
                    let idx = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
                    off += 4;
                    records.push(PlayerMessage {
                        player,
                        payload: Payload::GridIndex(idx),
                        bit_size: bits,
                    });
                }
                Ok(Transcript::from_records("discretized", records))
            }
            _ => Err(bad()),
        }
    }
}

/// Exact communication accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    pub total_bits: u64,
    pub max_player_bits: u64,
    pub messages: u64,
}

pub fn comm_stats(t: &Transcript) -> CommStats {
    CommStats {
        total_bits: t.records.iter().map(|r| r.bit_size).sum(),
        max_player_bits: t.records.iter().map(|r| r.bit_size).max().unwrap_or(0),
        messages: t.records.iter().map(|r| r.payload.message_count()).sum(),
    }
}

/// Per-grid-point estimates of the mean loss, with the indices of any grid
/// points that had to be filled from neighbors because their subset came out
/// empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEstimates {
    pub values: Vec<f64>,
    pub filled_from_neighbors: Vec<usize>,
}

/// The grid {0, 1/k, ..., 1}^p in lexicographic multi-index order.
pub fn grid_points(k: usize, p: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity((k + 1).pow(p as u32));
    for_each_multi_index(k, p, |idx| {
        out.push(idx.iter().map(|&v| v as f64 / k as f64).collect());
    });
    out
}

/// Player-side computations. Everything here sees only the player's own
/// record, public randomness, and protocol parameters — no server state is
/// reachable, which is what makes the protocol non-interactive.
pub mod player {
    use rand::Rng;

    use super::*;
    use crate::ldp::{discretized_randomize, laplace_sample, one_bit_randomize};

    fn checked_loss(
        loss: &LossSpec,
        point: &[f64],
        record: &DataRecord,
        player: usize,
    ) -> Result<f64> {
        let v = loss.evaluate(point, record);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::LossContract { player, value: v });
        }
        Ok(v)
    }

    /// Full-grid report: the loss at every grid point, each perturbed with
    /// Laplace(1/eps_report) where eps_report = eps/(k+1)^p.
    pub fn full_grid_report<R: Rng + ?Sized>(
        record: &DataRecord,
        loss: &LossSpec,
        grid: &[Vec<f64>],
        eps_report: f64,
        player: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        grid.iter()
            .map(|point| {
                let v = checked_loss(loss, point, record, player)?;
                Ok(v + laplace_sample(1.0 / eps_report, rng)?)
            })
            .collect()
    }

    /// One-bit report against the player's public string.
    pub fn one_bit_report<R: Rng + ?Sized>(
        record: &DataRecord,
        loss: &LossSpec,
        grid_point: &[f64],
        public_y: f64,
        epsilon: f64,
        player: usize,
        rng: &mut R,
    ) -> Result<bool> {
        let v = checked_loss(loss, grid_point, record, player)?;
        one_bit_randomize(v, public_y, epsilon, rng)
    }

    /// Discretized report: noisy loss rounded to the message grid.
    pub fn discretized_report<R: Rng + ?Sized>(
        record: &DataRecord,
        loss: &LossSpec,
        grid_point: &[f64],
        epsilon: f64,
        message_grid: &DiscreteGrid,
        player: usize,
        rng: &mut R,
    ) -> Result<u32> {
        let v = checked_loss(loss, grid_point, record, player)?;
        Ok(discretized_randomize(v, epsilon, message_grid, rng)? as u32)
    }
}

/// Fills estimates at `missing` grid indices with the average of their
/// filled neighbors, sweeping until everything is covered.
fn fill_from_neighbors(values: &mut [f64], missing: &[usize], k: usize, p: usize) {
    let mut unfilled: Vec<Vec<usize>> = Vec::new();
    {
        let mut flat_to_idx = vec![Vec::new(); values.len()];
        for_each_multi_index(k, p, |idx| {
            flat_to_idx[flat_index(idx, k)] = idx.to_vec();
        });
        for &m in missing {
            unfilled.push(flat_to_idx[m].clone());
        }
    }
    let mut filled = vec![true; values.len()];
    for &m in missing {
        filled[m] = false;
    }
    while !unfilled.is_empty() {
        let mut progressed = false;
        let mut still = Vec::new();
        for idx in unfilled {
            let mut sum = 0.0;
            let mut count = 0usize;
            for axis in 0..p {
                for delta in [-1isize, 1] {
                    let v = idx[axis] as isize + delta;
                    if v < 0 || v > k as isize {
                        continue;
                    }
                    let mut nb = idx.clone();
                    nb[axis] = v as usize;
                    let fl = flat_index(&nb, k);
                    if filled[fl] {
                        sum += values[fl];
                        count += 1;
                    }
                }
            }
            if count > 0 {
                let fl = flat_index(&idx, k);
                values[fl] = sum / count as f64;
                filled[fl] = true;
                progressed = true;
            } else {
                still.push(idx);
            }
        }
        unfilled = still;
        if !progressed {
            // grid graph is connected, so this only happens when every cell
            // is missing; leave zeros rather than loop forever
            break;
        }
    }
}

/// Executes one non-interactive round and returns the transcript plus the
/// server's per-grid-point estimates of the mean loss.
pub fn run_protocol(
    dataset: &[DataRecord],
    loss: &LossSpec,
    config: &ProtocolConfig,
) -> Result<(Transcript, GridEstimates)> {
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }
    if loss.p != config.surrogate.p {
        return Err(Error::domain(format!(
            "loss dimension {} != surrogate dimension {}",
            loss.p, config.surrogate.p
        )));
    }
    let d = config.surrogate.grid_len_capped(crate::erm::GRID_CAP)?;
    let k = config.surrogate.k;
    let p = config.surrogate.p;
    let n = dataset.len();
    let eps = config.privacy.epsilon;
    let grid = grid_points(k, p);
    let subs = Substreams::new(config.master_seed);

    match config.mechanism {
        Mechanism::FullGrid => {
            let eps_report = eps / d as f64;
            let reports: Vec<Vec<f64>> = dataset
                .par_iter()
                .enumerate()
                .map(|(i, record)| {
                    let mut rng = subs.player(i);
                    player::full_grid_report(record, loss, &grid, eps_report, i, &mut rng)
                })
                .collect::<Result<_>>()?;
            // deterministic fold in player order
            let mut values = vec![0.0; d];
            for report in &reports {
                for (acc, r) in values.iter_mut().zip(report) {
                    *acc += r;
                }
            }
            for v in &mut values {
                *v /= n as f64;
            }
            let records = reports
                .into_iter()
                .enumerate()
                .map(|(i, v)| PlayerMessage {
                    player: i,
                    bit_size: 64 * v.len() as u64,
                    payload: Payload::Reals(v),
                })
                .collect();
            Ok((
                Transcript::from_records("full-grid", records),
                GridEstimates { values, filled_from_neighbors: Vec::new() },
            ))
        }
        Mechanism::PartitionedOneBit => {
            if !config.one_bit_expectation && eps > ONE_BIT_MAX_EPSILON + 1e-15 {
                return Err(Error::domain(format!(
                    "one-bit protocol requires epsilon <= ln 2, got {eps}"
                )));
            }
            let partition = partition_players(n, d, config.master_seed)?;
            let publics = PublicStrings::generate(config.master_seed, n, eps.min(ONE_BIT_MAX_EPSILON))?;
            let bits: Vec<bool> = dataset
                .par_iter()
                .enumerate()
                .map(|(i, record)| {
                    let subset = partition.assignment[i];
                    let mut rng = subs.player(i);
                    player::one_bit_report(
                        record,
                        loss,
                        &grid[subset],
                        publics.value(i),
                        eps.min(ONE_BIT_MAX_EPSILON),
                        i,
                        &mut rng,
                    )
                })
                .collect::<Result<_>>()?;

            let subsets = partition.subsets();
            let mut values = vec![0.0; d];
            let mut missing = Vec::new();
            for (subset_idx, members) in subsets.iter().enumerate() {
                if members.is_empty() {
                    missing.push(subset_idx);
                    continue;
                }
                if config.one_bit_expectation {
                    // replace each contribution by E[2 b y] = v
                    let sum: f64 = members
                        .iter()
                        .map(|&i| loss.evaluate(&grid[subset_idx], &dataset[i]))
                        .sum();
                    values[subset_idx] = sum / members.len() as f64;
                } else {
                    let reports: Vec<OneBitReport> = members
                        .iter()
                        .map(|&i| OneBitReport {
                            bit: bits[i],
                            player_index: i,
                            public_string_index: i,
                        })
                        .collect();
                    values[subset_idx] = one_bit_estimate(&reports, &publics)?;
                }
            }
            fill_from_neighbors(&mut values, &missing, k, p);

            let records = bits
                .into_iter()
                .enumerate()
                .map(|(i, b)| PlayerMessage {
                    player: i,
                    payload: Payload::Bit(b),
                    bit_size: 1,
                })
                .collect();
            Ok((
                Transcript::from_records("partitioned-one-bit", records),
                GridEstimates { values, filled_from_neighbors: missing },
            ))
        }
        Mechanism::Discretized { grid_step } => {
            let partition = partition_players(n, d, config.master_seed)?;
            let step =
                grid_step.unwrap_or_else(|| DiscreteGrid::default_step(n, d, eps, config.privacy.beta));
            let step = step.clamp(1e-9, 0.5);
            let message_grid = DiscreteGrid::new(step, DiscreteGrid::default_clamp_radius(eps, n))?;
            let indices: Vec<u32> = dataset
                .par_iter()
                .enumerate()
                .map(|(i, record)| {
                    let subset = partition.assignment[i];
                    let mut rng = subs.player(i);
                    player::discretized_report(
                        record,
                        loss,
                        &grid[subset],
                        eps,
                        &message_grid,
                        i,
                        &mut rng,
                    )
                })
                .collect::<Result<_>>()?;

            let subsets = partition.subsets();
            let mut values = vec![0.0; d];
            let mut missing = Vec::new();
            for (subset_idx, members) in subsets.iter().enumerate() {
                if members.is_empty() {
                    missing.push(subset_idx);
                    continue;
                }
                let sum: f64 = members
                    .iter()
                    .map(|&i| message_grid.value_of(indices[i] as usize))
                    .sum();
                values[subset_idx] = sum / members.len() as f64;
            }
            fill_from_neighbors(&mut values, &missing, k, p);

            let bits = message_grid.message_bits() as u64;
            let records = indices
                .into_iter()
                .enumerate()
                .map(|(i, idx)| PlayerMessage {
                    player: i,
                    payload: Payload::GridIndex(idx),
                    bit_size: bits,
                })
                .collect();
            Ok((
                Transcript::from_records("discretized", records),
                GridEstimates { values, filled_from_neighbors: missing },
            ))
        }
    }
}

/// Exact per-grid-point mean losses — the epsilon -> infinity reference.
pub fn exact_grid_means(dataset: &[DataRecord], loss: &LossSpec, k: usize, p: usize) -> Vec<f64> {
    let grid = grid_points(k, p);
    grid.iter()
        .map(|point| {
            let sum: f64 = dataset.iter().map(|r| loss.evaluate(point, r)).sum();
            sum / dataset.len() as f64
        })
        .collect()
}
