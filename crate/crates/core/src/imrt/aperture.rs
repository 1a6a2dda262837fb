//! Aperture shapes and the row-by-row pricing oracle.
//!
//! A shape opens at most one contiguous run of columns per collimator row.
//! Shapes are kept in canonical form (the effective open set), so leaf
//! configurations that open the same beamlets share one identity.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::geometry::LeafModel;

/// Inclusive open column range of one row, or closed.
pub type RowOpening = Option<(u16, u16)>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shape {
    pub angle: u32,
    pub rows: Vec<RowOpening>,
}

impl Shape {
    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Option::is_none)
    }

    /// Stable 64-bit identity (FNV-1a over the canonical form).
    pub fn id(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u64| {
            for byte in b.to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(u64::from(self.angle));
        for r in &self.rows {
            match r {
                Some((a, b)) => eat(1 + (u64::from(*a) << 16) + (u64::from(*b) << 32)),
                None => eat(0),
            }
        }
        h
    }

    /// Indices `row · cols + col` of the open beamlets.
    pub fn open_cells(&self, cols: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().enumerate().flat_map(move |(i, r)| {
            let (a, b) = r.map_or((1, 0), |(a, b)| (a as usize, b as usize));
            (a..=b).map(move |j| i * cols + j)
        })
    }

    /// Leaf positions `(left, right)` per row on the 1-based column axis;
    /// the open columns are those strictly between them.
    pub fn leaf_pairs(&self, model: LeafModel) -> Vec<(usize, usize)> {
        let closed = match model {
            LeafModel::Interior => (1, 2),
            LeafModel::Full => (0, 1),
        };
        self.rows
            .iter()
            .map(|r| r.map_or(closed, |(a, b)| (a as usize, b as usize + 2)))
            .collect()
    }
}

/// Left-to-right sum of a row's open scores; zero when closed.
pub fn row_sum(row: &[f64], open: RowOpening) -> f64 {
    match open {
        Some((a, b)) => row[a as usize..=b as usize].iter().fold(0.0, |s, v| s + v),
        None => 0.0,
    }
}

/// Sum of the open beamlet scores, rows in order, each row left to right.
pub fn shape_score(scores: &[f64], cols: usize, rows: &[RowOpening]) -> f64 {
    rows.iter().enumerate().fold(0.0, |s, (i, r)| {
        s + row_sum(&scores[i * cols..(i + 1) * cols], *r)
    })
}

/// Minimum-sum contiguous run within `range` (closed row if nothing is negative).
pub fn best_row(row: &[f64], range: (usize, usize)) -> (RowOpening, f64) {
    let mut best: (RowOpening, f64) = (None, 0.0);
    let mut cur = 0.0;
    let mut start = range.0;
    for (j, v) in row.iter().enumerate().take(range.1 + 1).skip(range.0) {
        if j == range.0 || cur >= 0.0 {
            cur = *v;
            start = j;
        } else {
            cur += v;
        }
        if cur < best.1 {
            best = (Some((start as u16, j as u16)), cur);
        }
    }
    best
}

/// Best shape for a score grid of `rows × cols` (row-major) and its score.
pub fn best_openings(
    scores: &[f64],
    rows: usize,
    cols: usize,
    model: LeafModel,
) -> (Vec<RowOpening>, f64) {
    let Some(range) = model.open_range(cols) else {
        return (vec![None; rows], 0.0);
    };
    let open: Vec<RowOpening> = (0..rows)
        .map(|i| best_row(&scores[i * cols..(i + 1) * cols], range).0)
        .collect();
    let s = shape_score(scores, cols, &open);
    (open, s)
}

/// Every option of one row with its score, best first (closed row included).
pub fn row_options(row: &[f64], range: Option<(usize, usize)>) -> Vec<(f64, RowOpening)> {
    let mut out = vec![(0.0, None)];
    if let Some((lo, hi)) = range {
        for a in lo..=hi {
            let mut s = 0.0;
            for (b, v) in row.iter().enumerate().take(hi + 1).skip(a) {
                s += v;
                out.push((s, Some((a as u16, b as u16))));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
    out
}

/// All distinct shapes of an angle, the closed shape first.
pub fn all_openings(rows: usize, cols: usize, model: LeafModel) -> Vec<Vec<RowOpening>> {
    let zeros = vec![0.0; cols];
    let mut opts: Vec<RowOpening> = row_options(&zeros, model.open_range(cols))
        .into_iter()
        .map(|o| o.1)
        .collect();
    opts.sort();
    let mut out: Vec<Vec<RowOpening>> = vec![Vec::new()];
    for _ in 0..rows {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(*o);
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(PartialEq)]
struct Node {
    score: f64,
    idx: Vec<usize>,
    pivot: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        self.score
            .total_cmp(&o.score)
            .then_with(|| self.idx.cmp(&o.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shapes of one angle in nondecreasing score order.
///
/// Each row's options are sorted; a combination is reached from exactly one
/// parent by advancing its last non-first row choice, so the heap never holds
/// duplicates.
pub struct ShapeRanking {
    options: Vec<Vec<(f64, RowOpening)>>,
    heap: BinaryHeap<Reverse<Node>>,
}

impl ShapeRanking {
    pub fn new(scores: &[f64], rows: usize, cols: usize, model: LeafModel) -> Self {
        let range = model.open_range(cols);
        let options: Vec<_> = (0..rows)
            .map(|i| row_options(&scores[i * cols..(i + 1) * cols], range))
            .collect();
        let score = options.iter().map(|o| o[0].0).sum();
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Node {
            score,
            idx: vec![0; rows],
            pivot: 0,
        }));
        Self { options, heap }
    }
}

impl Iterator for ShapeRanking {
    type Item = (Vec<RowOpening>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let Reverse(node) = self.heap.pop()?;
        for i in node.pivot..self.options.len() {
            let j = node.idx[i];
            if j + 1 < self.options[i].len() {
                let mut idx = node.idx.clone();
                idx[i] += 1;
                let score = node.score - self.options[i][j].0 + self.options[i][j + 1].0;
                self.heap.push(Reverse(Node {
                    score,
                    idx,
                    pivot: i,
                }));
            }
        }
        let shape = node
            .idx
            .iter()
            .enumerate()
            .map(|(i, j)| self.options[i][*j].1)
            .collect();
        Some((shape, node.score))
    }
}
