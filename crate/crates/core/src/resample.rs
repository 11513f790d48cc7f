//! Non-parametric sparse resampling: space-to-channel downsampling,
//! channel-to-space upsampling, and child occupancy masks.
//!
//! Children of a parent are enumerated in Morton order, octant = x + 2y + 4z
//! with x, y, z the low bits of the child coordinate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{VoxelCoord, MAX_RESOLUTION};

/// Sparse voxel grid carrying `channels` reals per active voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFeatureGrid {
    resolution: u32,
    channels: usize,
    coords: Vec<VoxelCoord>,
    features: Vec<f64>,
}

impl SparseFeatureGrid {
    /// Builds a grid from unordered entries; coordinates must be unique and in range.
    pub fn new(resolution: u32, channels: usize, mut entries: Vec<(VoxelCoord, Vec<f64>)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        let mut coords = Vec::with_capacity(entries.len());
        let mut features = Vec::with_capacity(entries.len() * channels);
        for (c, f) in entries {
            if f.len() != channels {
                return Err(Error::invalid(format!(
                    "voxel {c:?} has {} channels, expected {channels}",
                    f.len()
                )));
            }
            coords.push(c);
            features.extend(f);
        }
        Self::from_sorted(resolution, channels, coords, features)
    }

    /// Builds a grid from strictly sorted coordinates and a row-major feature matrix.
    pub fn from_sorted(resolution: u32, channels: usize, coords: Vec<VoxelCoord>, features: Vec<f64>) -> Result<Self> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(Error::invalid(format!("resolution {resolution} outside 1..={MAX_RESOLUTION}")));
        }
        if channels == 0 {
            return Err(Error::invalid("feature grids need at least one channel"));
        }
        if features.len() != coords.len() * channels {
            return Err(Error::invalid(format!(
                "{} feature values for {} voxels of {channels} channels",
                features.len(),
                coords.len()
            )));
        }
        if let Some(c) = coords.iter().find(|c| !c.in_grid(resolution)) {
            return Err(Error::invalid(format!("voxel {c:?} outside a {resolution}^3 grid")));
        }
        if let Some(w) = coords.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "coordinates not strictly increasing at {:?}, {:?}",
                w[0], w[1]
            )));
        }
        Ok(SparseFeatureGrid {
            resolution,
            channels,
            coords,
            features,
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[VoxelCoord] {
        &self.coords
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature(&self, idx: usize) -> &[f64] {
        &self.features[idx * self.channels..(idx + 1) * self.channels]
    }

    pub fn get(&self, c: &VoxelCoord) -> Option<&[f64]> {
        self.coords.binary_search(c).ok().map(|i| self.feature(i))
    }
}

/// Occupancy of a parent's eight children, bit `x + 2y + 4z`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ChildMask(pub u8);

impl ChildMask {
    pub const FULL: ChildMask = ChildMask(0xff);

    pub fn contains(self, octant: usize) -> bool {
        self.0 >> octant & 1 == 1
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }
}

pub fn octant_of(c: &VoxelCoord) -> usize {
    (c.i() & 1 | (c.j() & 1) << 1 | (c.k() & 1) << 2) as usize
}

pub fn parent_of(c: &VoxelCoord) -> VoxelCoord {
    VoxelCoord(c.0.map(|x| x >> 1))
}

pub fn child_of(parent: &VoxelCoord, octant: usize) -> VoxelCoord {
    let o = octant as u32;
    VoxelCoord::new(
        parent.i() * 2 + (o & 1),
        parent.j() * 2 + (o >> 1 & 1),
        parent.k() * 2 + (o >> 2 & 1),
    )
}

fn check_even(resolution: u32) -> Result<()> {
    if resolution % 2 != 0 {
        return Err(Error::invalid(format!("resolution {resolution} is not even")));
    }
    Ok(())
}

/// (parent, octant, child index) triples ordered by parent then octant.
fn by_parent(coords: &[VoxelCoord]) -> Vec<(VoxelCoord, usize, usize)> {
    let mut v: Vec<_> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| (parent_of(c), octant_of(c), i))
        .collect();
    v.sort_unstable();
    v
}

/// Child masks of every parent with at least one active child, sorted by parent.
pub fn occupancy_masks(coords: &[VoxelCoord], resolution: u32) -> Result<Vec<(VoxelCoord, ChildMask)>> {
    check_even(resolution)?;
    let mut out: Vec<(VoxelCoord, ChildMask)> = Vec::new();
    for (p, o, _) in by_parent(coords) {
        match out.last_mut() {
            Some((q, m)) if *q == p => m.0 |= 1 << o,
            _ => out.push((p, ChildMask(1 << o))),
        }
    }
    Ok(out)
}

/// Halves the resolution. Each parent stacks its children's features child-major
/// (missing children are zeros) into 8·C values and averages `8·C / c_out`
/// contiguous values per output channel.
pub fn space_to_channel_down(grid: &SparseFeatureGrid, c_out: usize) -> Result<SparseFeatureGrid> {
    check_even(grid.resolution)?;
    let c = grid.channels;
    if c_out == 0 || (8 * c) % c_out != 0 {
        return Err(Error::invalid(format!(
            "output width {c_out} does not divide 8 x {c} stacked channels"
        )));
    }
    let group = 8 * c / c_out;
    let order = by_parent(&grid.coords);
    let mut starts = Vec::new();
    for (i, e) in order.iter().enumerate() {
        if i == 0 || order[i - 1].0 != e.0 {
            starts.push(i);
        }
    }
    starts.push(order.len());
    let rows: Vec<(VoxelCoord, Vec<f64>)> = starts
        .par_windows(2)
        .map(|w| {
            let mut stacked = vec![0.0; 8 * c];
            for &(_, o, i) in &order[w[0]..w[1]] {
                stacked[o * c..(o + 1) * c].copy_from_slice(grid.feature(i));
            }
            let out = stacked
                .chunks_exact(group)
                .map(|g| g.iter().sum::<f64>() / group as f64)
                .collect();
            (order[w[0]].0, out)
        })
        .collect();
    let (coords, feats): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    SparseFeatureGrid::from_sorted(grid.resolution / 2, c_out, coords, feats.concat())
}

/// Doubles the resolution. A parent's C' channels split into 8 contiguous blocks of
/// C'/8, one per octant; each value of a block is repeated `c_out / (C'/8)` times in
/// place. Only children whose bit is set in their parent's mask are emitted; with
/// `masks = None` every child is.
pub fn channel_to_space_up(
    grid: &SparseFeatureGrid,
    masks: Option<&[(VoxelCoord, ChildMask)]>,
    c_out: usize,
) -> Result<SparseFeatureGrid> {
    let c = grid.channels;
    if c % 8 != 0 {
        return Err(Error::invalid(format!("input width {c} is not a multiple of 8")));
    }
    let block = c / 8;
    if c_out == 0 || c_out % block != 0 {
        return Err(Error::invalid(format!(
            "output width {c_out} is not a multiple of the block width {block}"
        )));
    }
    let fine = grid.resolution as u64 * 2;
    if fine > MAX_RESOLUTION as u64 {
        return Err(Error::invalid(format!("upsampled resolution {fine} exceeds {MAX_RESOLUTION}")));
    }
    if let Some(m) = masks {
        if let Some(w) = m.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid(format!("mask parents not strictly sorted at {:?}", w[1].0)));
        }
    }
    let rep = c_out / block;
    let rows: Vec<Vec<(VoxelCoord, Vec<f64>)>> = grid
        .coords
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mask = match masks {
                None => ChildMask::FULL,
                Some(m) => m
                    .binary_search_by_key(p, |e| e.0)
                    .map_or(ChildMask(0), |k| m[k].1),
            };
            let f = grid.feature(i);
            (0..8)
                .filter(|&o| mask.contains(o))
                .map(|o| {
                    let out = f[o * block..(o + 1) * block]
                        .iter()
                        .flat_map(|&v| std::iter::repeat_n(v, rep))
                        .collect();
                    (child_of(p, o), out)
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<_> = rows.into_iter().flatten().collect();
    rows.par_sort_unstable_by_key(|r| r.0);
    let (coords, feats): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    SparseFeatureGrid::from_sorted(fine as u32, c_out, coords, feats.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::downsample_coords;
    use proptest::prelude::*;

    fn full_block(parent: VoxelCoord, value: &[f64]) -> Vec<(VoxelCoord, Vec<f64>)> {
        (0..8).map(|o| (child_of(&parent, o), value.to_vec())).collect()
    }

    #[test]
    fn down_examples() {
        let g = SparseFeatureGrid::new(4, 2, full_block(VoxelCoord::new(1, 0, 1), &[1.0, 3.0])).unwrap();
        let d = space_to_channel_down(&g, 4).unwrap();
        assert_eq!(d.resolution(), 2);
        assert_eq!(d.coords(), &[VoxelCoord::new(1, 0, 1)]);
        assert_eq!(d.feature(0), &[2.0, 2.0, 2.0, 2.0]);

        let g = SparseFeatureGrid::new(4, 1, full_block(VoxelCoord::new(0, 0, 0), &[0.7])).unwrap();
        assert_eq!(space_to_channel_down(&g, 2).unwrap().feature(0), &[0.7, 0.7]);

        let g = SparseFeatureGrid::new(4, 1, vec![(VoxelCoord::new(3, 2, 3), vec![4.0])]).unwrap();
        let d = space_to_channel_down(&g, 1).unwrap();
        assert_eq!(d.coords(), &[VoxelCoord::new(1, 1, 1)]);
        assert_eq!(d.feature(0), &[0.5]);

        assert!(space_to_channel_down(&g, 3).is_err());
        let odd = SparseFeatureGrid::new(3, 1, vec![]).unwrap();
        assert!(space_to_channel_down(&odd, 1).is_err());
    }

    #[test]
    fn up_examples() {
        let p = VoxelCoord::new(0, 1, 0);
        let g = SparseFeatureGrid::new(2, 16, vec![(p, vec![1.0; 16])]).unwrap();
        let u = channel_to_space_up(&g, None, 8).unwrap();
        assert_eq!(u.len(), 8);
        assert!(u.features().iter().all(|&v| v == 1.0));
        assert_eq!(u.channels(), 8);

        let masks = [(p, ChildMask(0b1000_0001))];
        let u = channel_to_space_up(&g, Some(&masks), 8).unwrap();
        assert_eq!(u.coords(), &[child_of(&p, 0), child_of(&p, 7)]);
        assert_eq!(u.coords(), &[VoxelCoord::new(0, 2, 0), VoxelCoord::new(1, 3, 1)]);

        let vals: Vec<f64> = (0..8).map(|v| v as f64 + 1.0).collect();
        let g = SparseFeatureGrid::new(2, 8, vec![(p, vals)]).unwrap();
        let u = channel_to_space_up(&g, None, 4).unwrap();
        for o in 0..8 {
            assert_eq!(u.get(&child_of(&p, o)).unwrap(), &[o as f64 + 1.0; 4]);
        }
        // Two-channel blocks repeat each value in place.
        let vals: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let g = SparseFeatureGrid::new(2, 16, vec![(p, vals)]).unwrap();
        let u = channel_to_space_up(&g, None, 4).unwrap();
        assert_eq!(u.get(&child_of(&p, 3)).unwrap(), &[6.0, 6.0, 7.0, 7.0]);

        assert!(channel_to_space_up(&g, None, 3).is_err());
        let bad = SparseFeatureGrid::new(2, 6, vec![]).unwrap();
        assert!(channel_to_space_up(&bad, None, 6).is_err());
    }

    #[test]
    fn mask_examples() {
        let m = occupancy_masks(&[VoxelCoord::new(0, 0, 0)], 4).unwrap();
        assert_eq!(m, vec![(VoxelCoord::new(0, 0, 0), ChildMask(1))]);
        let kids: Vec<_> = (0..8).map(|o| child_of(&VoxelCoord::new(1, 1, 1), o)).collect();
        assert_eq!(occupancy_masks(&kids, 4).unwrap(), vec![(VoxelCoord::new(1, 1, 1), ChildMask::FULL)]);
    }

    fn arb_grid(res: u32, channels: usize) -> impl Strategy<Value = SparseFeatureGrid> {
        proptest::collection::btree_map(
            (0..res, 0..res, 0..res),
            proptest::collection::vec(-10.0f64..10.0, channels),
            0..120,
        )
        .prop_map(move |m| {
            let entries = m.into_iter().map(|((i, j, k), f)| (VoxelCoord::new(i, j, k), f)).collect();
            SparseFeatureGrid::new(res, channels, entries).unwrap()
        })
    }

    fn combine(a: &SparseFeatureGrid, b: &SparseFeatureGrid, x: f64, y: f64) -> SparseFeatureGrid {
        // Same support required; features combined pointwise.
        let f = a.features().iter().zip(b.features()).map(|(p, q)| x * p + y * q).collect();
        SparseFeatureGrid::from_sorted(a.resolution(), a.channels(), a.coords().to_vec(), f).unwrap()
    }

    proptest! {
        #[test]
        fn down_structure_matches_pooling(g in arb_grid(8, 2)) {
            let d = space_to_channel_down(&g, 4).unwrap();
            prop_assert_eq!(d.coords().to_vec(), downsample_coords(g.coords(), 8, 2).unwrap());
        }

        #[test]
        fn masks_match_membership(g in arb_grid(8, 1)) {
            let masks = occupancy_masks(g.coords(), 8).unwrap();
            for (p, m) in &masks {
                for o in 0..8 {
                    prop_assert_eq!(m.contains(o), g.get(&child_of(p, o)).is_some());
                }
            }
            let up = channel_to_space_up(
                &SparseFeatureGrid::from_sorted(4, 8, masks.iter().map(|m| m.0).collect(), vec![1.0; masks.len() * 8]).unwrap(),
                Some(&masks),
                1,
            ).unwrap();
            prop_assert_eq!(up.coords(), g.coords());
        }

        #[test]
        fn operators_are_linear(g in arb_grid(8, 2), x in -3.0f64..3.0, y in -3.0f64..3.0, seed in any::<u64>()) {
            let h = {
                let mut s = seed;
                let f = g.features().iter().map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (s >> 11) as f64 / (1u64 << 53) as f64
                }).collect();
                SparseFeatureGrid::from_sorted(8, 2, g.coords().to_vec(), f).unwrap()
            };
            let lhs = space_to_channel_down(&combine(&g, &h, x, y), 8).unwrap();
            let rhs = combine(&space_to_channel_down(&g, 8).unwrap(), &space_to_channel_down(&h, 8).unwrap(), x, y);
            for (a, b) in lhs.features().iter().zip(rhs.features()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
            let d = space_to_channel_down(&g, 16).unwrap();
            let e = space_to_channel_down(&h, 16).unwrap();
            let lhs = channel_to_space_up(&combine(&d, &e, x, y), None, 4).unwrap();
            let rhs = combine(&channel_to_space_up(&d, None, 4).unwrap(), &channel_to_space_up(&e, None, 4).unwrap(), x, y);
            for (a, b) in lhs.features().iter().zip(rhs.features()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn constant_round_trip(parents in proptest::collection::btree_set((0u32..4, 0u32..4, 0u32..4), 1..20), v in -5.0f64..5.0, c in 1usize..=8) {
            let entries = parents
                .iter()
                .flat_map(|&(i, j, k)| full_block(VoxelCoord::new(i, j, k), &vec![v; c]))
                .collect();
            let g = SparseFeatureGrid::new(8, c, entries).unwrap();
            let masks = occupancy_masks(g.coords(), 8).unwrap();
            let down = space_to_channel_down(&g, 2 * c).unwrap();
            let up = channel_to_space_up(&down, Some(&masks), c);
            // The up operator needs a width divisible by 8, so 2C round-trips only for C = 4, 8.
            if (2 * c) % 8 == 0 {
                prop_assert_eq!(up.unwrap(), g);
            } else {
                prop_assert!(up.is_err());
            }
        }
    }

    #[test]
    fn constant_round_trip_with_eight_fold_width() {
        let entries = [VoxelCoord::new(0, 0, 0), VoxelCoord::new(1, 2, 3)]
            .iter()
            .flat_map(|p| full_block(*p, &[0.25, 0.25]))
            .collect();
        let g = SparseFeatureGrid::new(8, 2, entries).unwrap();
        let masks = occupancy_masks(g.coords(), 8).unwrap();
        for c_mid in [16, 8, 4, 2] {
            let down = space_to_channel_down(&g, c_mid).unwrap();
            if c_mid % 8 == 0 {
                assert_eq!(channel_to_space_up(&down, Some(&masks), 2).unwrap(), g);
            }
        }
    }
}
