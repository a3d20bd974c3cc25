//! Tumor-level detection on tile grids: connected components and matching of
//! detected regions against ground-truth tumors.

use std::collections::VecDeque;

/// Row-major grid of binary tile labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelGrid {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl LabelGrid {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), rows * cols, "grid buffer has wrong length");
        Self { rows, cols, cells }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![false; rows * cols])
    }

    /// Builds a grid from strings of `#` (positive) and `.` (negative).
    pub fn parse(rows: &[&str]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let cells = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), cols, "ragged grid");
                r.chars().map(|c| c == '#')
            })
            .collect();
        Self::new(rows.len(), cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn count_positive(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// Connected set of positive tiles, as flat row-major indices in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub cells: Vec<usize>,
}

impl Region {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Number of tiles shared with `other` (both sorted).
    pub fn overlap(&self, other: &Region) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.cells.len() && j < other.cells.len() {
            match self.cells[i].cmp(&other.cells[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// Components ordered by their first tile in row-major order.
pub fn connected_components(grid: &LabelGrid, connectivity: Connectivity) -> Vec<Region> {
    let (rows, cols) = (grid.rows as isize, grid.cols as isize);
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
    };
    let mut seen = vec![false; grid.cells.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.cells.len() {
        if !grid.cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(k) = queue.pop_front() {
            cells.push(k);
            let (r, c) = ((k / grid.cols) as isize, (k % grid.cols) as isize);
            for &(dr, dc) in offsets {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= rows || nc >= cols {
                    continue;
                }
                let nk = (nr * cols + nc) as usize;
                if grid.cells[nk] && !seen[nk] {
                    seen[nk] = true;
                    queue.push_back(nk);
                }
            }
        }
        cells.sort_unstable();
        regions.push(Region { cells });
    }
    regions
}

/// Ground-truth tumors are the connected components of the truth tile grid.
pub fn truth_tumors(truth: &LabelGrid, connectivity: Connectivity) -> Vec<Region> {
    connected_components(truth, connectivity)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchConfig {
    /// Fraction of a true tumor's tiles one component must cover to detect it.
    pub min_coverage: f64,
    pub connectivity: Connectivity,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            min_coverage: 0.25,
            connectivity: Connectivity::Four,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TumorMatch {
    /// True tumors covered by some component (one component may detect several).
    pub tumor_tp: usize,
    /// Size of the greedy one-to-one matching; never exceeds `min(m, n)`.
    pub matched: usize,
    /// Detected components.
    pub m: usize,
    /// True tumors.
    pub n: usize,
    /// Components overlapping no true tumor.
    pub false_positives: usize,
    /// Some component detects more than one true tumor.
    pub merged: bool,
}

impl TumorMatch {
    pub fn add(&mut self, o: &TumorMatch) {
        self.tumor_tp += o.tumor_tp;
        self.matched += o.matched;
        self.m += o.m;
        self.n += o.n;
        self.false_positives += o.false_positives;
        self.merged |= o.merged;
    }
}

pub fn tumor_match(detected: &[Region], truths: &[Region], config: &MatchConfig) -> TumorMatch {
    // (overlap, component, truth) for pairs meeting the coverage rule
    let mut pairs = Vec::new();
    let mut hits_per_component = vec![0usize; detected.len()];
    let mut truth_detected = vec![false; truths.len()];
    let mut false_positives = 0;
    for (d, region) in detected.iter().enumerate() {
        let mut touches = false;
        for (t, truth) in truths.iter().enumerate() {
            let ov = region.overlap(truth);
            touches |= ov > 0;
            if ov > 0 && ov as f64 >= config.min_coverage * truth.len() as f64 {
                pairs.push((ov, d, t));
                hits_per_component[d] += 1;
                truth_detected[t] = true;
            }
        }
        if !touches {
            false_positives += 1;
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truths.len()];
    let mut matched = 0;
    for (_, d, t) in pairs {
        if !used_d[d] && !used_t[t] {
            used_d[d] = true;
            used_t[t] = true;
            matched += 1;
        }
    }
    TumorMatch {
        tumor_tp: truth_detected.iter().filter(|&&b| b).count(),
        matched,
        m: detected.len(),
        n: truths.len(),
        false_positives,
        merged: hits_per_component.iter().any(|&h| h > 1),
    }
}
