//! Seeded, platform-independent map generation.
//!
//! A text seed is hashed with 64-bit FNV-1a into the state of an xorshift64*
//! generator. Every cell consumes exactly four draws (block, then three
//! overlay slots) in row-major order, so cell `i` of the row-major sequence
//! depends only on the seed and `i`, never on the map dimensions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FNV_OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
pub const FNV_PRIME: u64 = 1_099_511_628_211;
pub const XORSHIFT_MULTIPLIER: u64 = 2_685_821_657_736_338_717;

/// Draws consumed per map cell.
pub const DRAWS_PER_CELL: usize = 4;
/// Overlay slots per cell.
pub const OVERLAY_SLOTS: usize = 3;

/// Nonzero xorshift64* state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrngState(u64);

impl PrngState {
    /// Zero is remapped to the FNV offset basis; xorshift is stuck at zero.
    pub fn new(state: u64) -> Self {
        if state == 0 {
            Self(FNV_OFFSET_BASIS)
        } else {
            Self(state)
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

pub fn hash_seed(seed: &str) -> PrngState {
    let hash = seed.bytes().fold(FNV_OFFSET_BASIS, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME));
    PrngState::new(hash)
}

/// One xorshift64* step: returns the advanced state and the output value.
pub fn next_random(state: PrngState) -> (PrngState, u64) {
    let mut x = state.0;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    (PrngState(x), x.wrapping_mul(XORSHIFT_MULTIPLIER))
}

/// Stream of draws over a [`PrngState`].
#[derive(Clone, Debug)]
pub struct Prng {
    state: PrngState,
}

impl Prng {
    pub fn from_seed(seed: &str) -> Self {
        Self { state: hash_seed(seed) }
    }

    pub fn state(&self) -> PrngState {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        let (state, value) = next_random(self.state);
        self.state = state;
        value
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedId {
    pub id: String,
    pub weight: f64,
}

/// Block and overlay weight table.
///
/// `slots[k]` is the probability that overlay slot `k` is filled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub blocks: Vec<WeightedId>,
    #[serde(default)]
    pub overlays: Vec<WeightedId>,
    #[serde(default)]
    pub slots: [f64; OVERLAY_SLOTS],
}

impl Palette {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json { what: "palette".into(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Default table for the synthetic atlas.
    pub fn standard() -> Self {
        let w = |id: &str, weight: f64| WeightedId { id: id.into(), weight };
        Self {
            blocks: vec![w("grass", 3.0), w("dirt", 1.0)],
            overlays: vec![w("bush", 3.0), w("tree", 2.0)],
            slots: [0.35, 0.1, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::EmptyPalette);
        }
        let bad_weight = |e: &WeightedId| !e.weight.is_finite() || e.weight < 0.0;
        if let Some(e) = self.blocks.iter().chain(&self.overlays).find(|e| bad_weight(e)) {
            return Err(Error::InvalidPalette(format!(
                "weight of `{}` must be finite and nonnegative, got {}",
                e.id, e.weight
            )));
        }
        if let Some(p) = self.slots.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidPalette(format!("slot probability {p} outside [0, 1]")));
        }
        if !self.blocks.iter().any(|e| e.weight > 0.0) {
            return Err(Error::ZeroWeights("block"));
        }
        if self.slots.iter().any(|&p| p > 0.0) && !self.overlays.iter().any(|e| e.weight > 0.0) {
            return Err(Error::ZeroWeights("overlay"));
        }
        Ok(())
    }
}

const ONE: u128 = 1 << 64;

/// Fixed-point probability threshold in `0..=2^64`.
fn fixed_point(p: f64) -> u128 {
    if p >= 1.0 {
        ONE
    } else if p <= 0.0 {
        0
    } else {
        (p * ONE as f64) as u128
    }
}

/// Cumulative weights as 64-bit fixed-point upper bounds; a draw `v`
/// selects the first entry whose bound exceeds `v`.
#[derive(Clone, Debug)]
struct WeightedTable {
    bounds: Vec<u128>,
}

impl WeightedTable {
    fn new(entries: &[WeightedId]) -> Self {
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        let last_positive = entries.iter().rposition(|e| e.weight > 0.0);
        let mut acc = 0.0;
        let bounds = entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                acc += e.weight;
                if Some(i) == last_positive {
                    ONE
                } else if e.weight == 0.0 {
                    // zero-weight entries must never be chosen
                    0
                } else {
                    fixed_point(acc / total)
                }
            })
            .collect();
        Self { bounds }
    }

    fn choose(&self, value: u64) -> usize {
        let v = value as u128;
        self.bounds.iter().position(|&b| v < b).expect("last positive bound is 2^64")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSpec {
    #[serde(rename = "b")]
    pub block_id: String,
    #[serde(rename = "o")]
    pub overlays: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneMap {
    #[serde(rename = "seed")]
    pub seed_string: String,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Vec<CellSpec>>,
}

impl SceneMap {
    pub fn cell(&self, row: usize, col: usize) -> &CellSpec {
        &self.cells[row][col]
    }

    /// Cells in row-major order.
    pub fn iter_cells(&self) -> impl Iterator<Item = ((usize, usize), &CellSpec)> {
        self.cells.iter().enumerate().flat_map(|(r, row)| row.iter().enumerate().map(move |(c, cell)| ((r, c), cell)))
    }

    /// Compact JSON, the canonical byte form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene maps always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: Self =
            serde_json::from_str(text).map_err(|source| Error::Json { what: "scene map".into(), source })?;
        if map.rows == 0 || map.cols == 0 {
            return Err(Error::EmptyMap { rows: map.rows, cols: map.cols });
        }
        if map.cells.len() != map.rows || map.cells.iter().any(|r| r.len() != map.cols) {
            return Err(Error::InvalidParameter(format!(
                "scene map cells do not form a {}x{} grid",
                map.rows, map.cols
            )));
        }
        if map.iter_cells().any(|(_, c)| c.overlays.len() > OVERLAY_SLOTS) {
            return Err(Error::InvalidParameter(format!("a cell carries more than {OVERLAY_SLOTS} overlays")));
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }
}

pub fn generate_map(seed: &str, rows: usize, cols: usize, palette: &Palette) -> Result<SceneMap> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMap { rows, cols });
    }
    palette.validate()?;

    let blocks = WeightedTable::new(&palette.blocks);
    let overlays = (!palette.overlays.is_empty()).then(|| WeightedTable::new(&palette.overlays));
    let slot_bounds = palette.slots.map(fixed_point);
    let mut rng = Prng::from_seed(seed);

    let mut cells = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for _ in 0..cols {
            let block = &palette.blocks[blocks.choose(rng.next_u64())];
            let mut cell = CellSpec { block_id: block.id.clone(), overlays: Vec::new() };
            for bound in slot_bounds {
                let v = rng.next_u64() as u128;
                if v < bound {
                    // Rescale the accepted draw back onto 0..2^64 so the
                    // slot decision and the overlay choice share one draw.
                    let table = overlays.as_ref().expect("validated: overlays present");
                    let rescaled = ((v << 64) / bound) as u64;
                    cell.overlays.push(palette.overlays[table.choose(rescaled)].id.clone());
                }
            }
            row.push(cell);
        }
        cells.push(row);
    }

    Ok(SceneMap { seed_string: seed.to_string(), rows, cols, cells })
}
