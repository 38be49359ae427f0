//! Partitions of the image grid into rectangular patches and the column
//! permutation that groups each patch's pixels contiguously.

use std::ops::Range;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Axis-aligned block of pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// A partition of a `width × height` image into rectangles.
///
/// Patch-order columns list the pixels of patch 0 (raster order within the
/// patch), then patch 1 and so on, so patch `i` occupies the column range
/// `ranges()[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchLayout {
    width: usize,
    height: usize,
    blocks: Vec<Rect>,
    offsets: Vec<usize>,
    /// raster index -> patch-order index
    forward: Vec<usize>,
    /// patch-order index -> raster index
    inverse: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRecord {
    width: usize,
    height: usize,
    blocks: Vec<Rect>,
}

impl PatchLayout {
    /// Builds a layout from explicit blocks, checking that they tile the image.
    pub fn from_blocks(width: usize, height: usize, blocks: Vec<Rect>) -> Result<Self> {
        if width == 0 || height == 0 || blocks.is_empty() {
            return Err(Error::config("empty layout"));
        }
        let n = width * height;
        let mut forward = vec![usize::MAX; n];
        let mut inverse = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            if b.width == 0 || b.height == 0 || b.x + b.width > width || b.y + b.height > height {
                return Err(Error::config(format!(
                    "block {b:?} outside {width}x{height}"
                )));
            }
            for y in b.y..b.y + b.height {
                for x in b.x..b.x + b.width {
                    let r = y * width + x;
                    if forward[r] != usize::MAX {
                        return Err(Error::config(format!("pixel ({x}, {y}) covered twice")));
                    }
                    forward[r] = inverse.len();
                    inverse.push(r);
                }
            }
            offsets.push(inverse.len());
        }
        if inverse.len() != n {
            return Err(Error::config(format!(
                "blocks cover {} of {n} pixels",
                inverse.len()
            )));
        }
        Ok(Self {
            width,
            height,
            blocks,
            offsets,
            forward,
            inverse,
        })
    }

    /// The single-patch layout.
    pub fn whole(width: usize, height: usize) -> Result<Self> {
        grid_layout(width, height, 1, 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Rect] {
        &self.blocks
    }

    /// Column range of patch `i` in patch order.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.len()).map(|i| self.range(i))
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges().map(|r| r.len()).collect()
    }

    /// Raster index -> patch-order index.
    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    /// Patch-order index -> raster index.
    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// Raster indices belonging to patch `i`.
    pub fn patch_pixels(&self, i: usize) -> &[usize] {
        &self.inverse[self.range(i)]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&LayoutRecord {
            width: self.width,
            height: self.height,
            blocks: self.blocks.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: LayoutRecord = serde_json::from_str(s)?;
        Self::from_blocks(rec.width, rec.height, rec.blocks)
    }
}

impl Serialize for PatchLayout {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LayoutRecord {
            width: self.width,
            height: self.height,
            blocks: self.blocks.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PatchLayout {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = LayoutRecord::deserialize(d)?;
        PatchLayout::from_blocks(rec.width, rec.height, rec.blocks)
            .map_err(serde::de::Error::custom)
    }
}

fn blocks_from_edges(row_edges: &[usize], col_edges: &[usize]) -> Vec<Rect> {
    let mut blocks = Vec::new();
    for r in row_edges.windows(2) {
        for c in col_edges.windows(2) {
            blocks.push(Rect {
                x: c[0],
                y: r[0],
                width: c[1] - c[0],
                height: r[1] - r[0],
            });
        }
    }
    blocks
}

/// Near-equal rectangular grid with `rows × cols` blocks, numbered
/// row-major. Block edges sit at `⌊height·i/rows⌋` and `⌊width·j/cols⌋`.
pub fn grid_layout(width: usize, height: usize, rows: usize, cols: usize) -> Result<PatchLayout> {
    if rows == 0 || cols == 0 {
        return Err(Error::config(
            "patch grid needs at least one row and column",
        ));
    }
    if rows > height || cols > width {
        return Err(Error::config(format!(
            "{rows}x{cols} patch grid does not fit a {width}x{height} image"
        )));
    }
    let row_edges: Vec<usize> = (0..=rows).map(|i| height * i / rows).collect();
    let col_edges: Vec<usize> = (0..=cols).map(|j| width * j / cols).collect();
    PatchLayout::from_blocks(width, height, blocks_from_edges(&row_edges, &col_edges))
}

// Uniform composition of `total` into `parts` pieces, each at least `min`.
fn random_edges(total: usize, parts: usize, min: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let slack = total - parts * min;
    let mut cuts: Vec<usize> = sample(rng, slack + parts - 1, parts - 1).into_vec();
    cuts.sort_unstable();
    let mut edges = vec![0];
    let mut prev = 0usize;
    for (k, &c) in cuts.iter().enumerate() {
        // c - k stars precede the k-th bar
        let extra = c - k;
        let pos = edges.last().unwrap() + min + (extra - prev);
        prev = extra;
        edges.push(pos);
    }
    edges.push(total);
    edges
}

/// Random rectangular partition into exactly `target` blocks.
///
/// A factorization `rows × cols = target` is drawn uniformly among those for
/// which every block can be at least 2 pixels on each side; cut positions
/// are then drawn uniformly subject to that minimum.
pub fn random_rect_layout(
    width: usize,
    height: usize,
    target: usize,
    seed: u64,
) -> Result<PatchLayout> {
    const MIN_SIDE: usize = 2;
    if target == 0 {
        return Err(Error::config("patch count must be positive"));
    }
    if target == 1 {
        return PatchLayout::whole(width, height);
    }
    let pairs: Vec<(usize, usize)> = (1..=target)
        .filter(|&r| target.is_multiple_of(r))
        .map(|r| (r, target / r))
        .filter(|&(r, c)| r * MIN_SIDE <= height && c * MIN_SIDE <= width)
        .collect();
    if pairs.is_empty() {
        return Err(Error::config(format!(
            "{target} patches of at least {MIN_SIDE}x{MIN_SIDE} do not fit {width}x{height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = pairs[rng.random_range(0..pairs.len())];
    let row_edges = random_edges(height, rows, MIN_SIDE, &mut rng);
    let col_edges = random_edges(width, cols, MIN_SIDE, &mut rng);
    PatchLayout::from_blocks(width, height, blocks_from_edges(&row_edges, &col_edges))
}

/// Reorders raster-order columns into patch order.
pub fn to_patch_order(x: &DenseMatrix, layout: &PatchLayout) -> Result<DenseMatrix> {
    permute_columns(x, layout.inverse(), layout.pixels())
}

/// Inverse of [`to_patch_order`].
pub fn from_patch_order(x: &DenseMatrix, layout: &PatchLayout) -> Result<DenseMatrix> {
    permute_columns(x, layout.forward(), layout.pixels())
}

// out column k = x column source[k]
fn permute_columns(x: &DenseMatrix, source: &[usize], expected: usize) -> Result<DenseMatrix> {
    if x.cols() != expected {
        return Err(Error::dim(format!(
            "{} columns for a layout of {expected} pixels",
            x.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for (k, &src) in source.iter().enumerate() {
        out.col_mut(k).copy_from_slice(x.col(src));
    }
    Ok(out)
}
