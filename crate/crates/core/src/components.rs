//! Connected-component labeling of binary masks.
//!
//! Classic two-pass labeling: a raster scan assigns provisional labels from
//! already-visited neighbours and records equivalences in a union-find, then
//! roots are renumbered in order of first appearance. Components therefore
//! come out ordered by their first voxel in x-fastest scan order.

use crate::lesion::Lesion;
use crate::volume::{Connectivity, Dims, LabelMask};

/// Per-voxel component labels: 0 for background, `1..=count` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: Dims,
    labels: Vec<u32>,
    count: usize,
}

impl LabelMap {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of components.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Component label at `voxel` (0 for background).
    pub fn label_at(&self, voxel: [usize; 3]) -> u32 {
        self.labels[self.dims.index(voxel[0], voxel[1], voxel[2])]
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        // slot 0 is the background label
        UnionFind { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Labels the foreground of `mask` into maximal connected components.
pub fn label_components(mask: &LabelMask, connectivity: Connectivity) -> LabelMap {
    let dims = mask.dims();
    let [nx, ny, nz] = dims.as_array();
    let data = mask.data();
    // Neighbours visited earlier in raster order.
    let backward: Vec<[isize; 3]> = connectivity
        .offsets()
        .into_iter()
        .filter(|&[di, dj, dk]| dk < 0 || (dk == 0 && (dj < 0 || (dj == 0 && di < 0))))
        .collect();

    let mut labels = vec![0u32; dims.len()];
    let mut uf = UnionFind::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = dims.index(i, j, k);
                if data[idx] == 0 {
                    continue;
                }
                let mut current = 0u32;
                for &[di, dj, dk] in &backward {
                    let (ni, nj, nk) = (i as isize + di, j as isize + dj, k as isize + dk);
                    if ni < 0 || nj < 0 || nk < 0 || ni >= nx as isize || nj >= ny as isize {
                        continue;
                    }
                    let n = labels[dims.index(ni as usize, nj as usize, nk as usize)];
                    if n == 0 {
                        continue;
                    }
                    current = if current == 0 { n } else { uf.union(current, n) };
                }
                labels[idx] = if current == 0 { uf.make() } else { current };
            }
        }
    }

    let mut renumber = vec![0u32; uf.parent.len()];
    let mut count = 0u32;
    for l in labels.iter_mut().filter(|l| **l != 0) {
        let root = uf.find(*l) as usize;
        if renumber[root] == 0 {
            count += 1;
            renumber[root] = count;
        }
        *l = renumber[root];
    }
    LabelMap {
        dims,
        labels,
        count: count as usize,
    }
}

/// Splits a label map into one [`Lesion`] per component, in label order.
pub fn lesions_from_labels(map: &LabelMap, mask: &LabelMask) -> Vec<Lesion> {
    let mut voxels: Vec<Vec<[usize; 3]>> = vec![Vec::new(); map.count];
    for (idx, &l) in map.labels.iter().enumerate() {
        if l != 0 {
            voxels[l as usize - 1].push(map.dims.coords(idx));
        }
    }
    voxels
        .into_iter()
        .map(|v| Lesion::from_scan_ordered(v, mask.spacing()))
        .collect()
}

/// Connected components of `mask` as lesions, ordered by first voxel in scan
/// order. An empty mask yields no lesions.
pub fn connected_components(mask: &LabelMask, connectivity: Connectivity) -> Vec<Lesion> {
    let map = label_components(mask, connectivity);
    lesions_from_labels(&map, mask)
}
