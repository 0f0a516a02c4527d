//! Dense RGBA voxel volume, its box-filtered mip chain and quadrilinear
//! level-of-detail sampling.
//!
//! Texel coordinates are continuous and expressed in level-0 voxel units:
//! `(0,0,0)` is the `min` corner of the bounds and `(N,N,N)` the `max`
//! corner. Voxel `(i,j,k)` of level `l` is centered at `(i + 0.5) * 2^l`.

use std::io::{self, Read, Write};

use glam::{DVec3, DVec4};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Bounds;

pub type Rgba = [f32; 4];

/// Grid resolutions accepted by render jobs.
pub const ALLOWED_RESOLUTIONS: [usize; 5] = [16, 32, 64, 128, 256];

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("grid resolution {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("level {level} out of range (pyramid has {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("malformed grid dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    resolution: usize,
    bounds: Bounds,
    data: Vec<Rgba>,
}

impl VoxelGrid {
    /// Any power of two is accepted here; render jobs restrict to
    /// [`ALLOWED_RESOLUTIONS`].
    pub fn new(resolution: usize, bounds: Bounds) -> Result<Self, VolumeError> {
        if !resolution.is_power_of_two() {
            return Err(VolumeError::NotPowerOfTwo(resolution));
        }
        Ok(Self {
            resolution,
            bounds,
            data: vec![[0.0; 4]; resolution.pow(3)],
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn scene_size(&self) -> f64 {
        self.bounds.size()
    }

    pub fn voxel_size(&self) -> f64 {
        self.bounds.size() / self.resolution as f64
    }

    pub fn data(&self) -> &[Rgba] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Rgba] {
        &mut self.data
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> Rgba {
        self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: Rgba) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    pub fn clear(&mut self) {
        self.data.fill([0.0; 4]);
    }

    pub fn world_to_texel(&self, p: DVec3) -> DVec3 {
        (p - self.bounds.min()) / self.scene_size() * self.resolution as f64
    }

    pub fn texel_to_world(&self, t: DVec3) -> DVec3 {
        self.bounds.min() + t / self.resolution as f64 * self.scene_size()
    }

    /// Voxel containing a continuous texel coordinate. Points on the max face
    /// belong to the last voxel; points further out than `slack` texels are
    /// rejected.
    pub fn voxel_of_texel(&self, t: DVec3, slack: f64) -> Option<[usize; 3]> {
        let n = self.resolution as f64;
        let mut out = [0usize; 3];
        for (o, v) in out.iter_mut().zip(t.to_array()) {
            if !(v >= -slack && v <= n + slack) {
                return None;
            }
            *o = (v.floor().max(0.0) as usize).min(self.resolution - 1);
        }
        Some(out)
    }

    pub fn dump<W: Write>(&self, mut sink: W) -> io::Result<()> {
        writeln!(sink, "VXG1 {}", self.resolution)?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for v in &self.data {
            for c in v {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        sink.write_all(&buf)
    }

    /// Reads a `VXG1` dump. The format carries no extent, so `bounds` is supplied.
    pub fn load<R: Read>(mut source: R, bounds: Bounds) -> Result<Self, VolumeError> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        let nl = bytes
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| VolumeError::Format("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| VolumeError::Format("header is not UTF-8".into()))?;
        let n: usize = header
            .strip_prefix("VXG1 ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| VolumeError::Format(format!("bad header '{header}'")))?;
        let mut grid = Self::new(n, bounds)?;
        let body = &bytes[nl + 1..];
        if body.len() != n.pow(3) * 16 {
            return Err(VolumeError::Format(format!(
                "expected {} payload bytes, found {}",
                n.pow(3) * 16,
                body.len()
            )));
        }
        for (v, chunk) in grid.data.iter_mut().zip(body.chunks_exact(16)) {
            for (c, b) in v.iter_mut().zip(chunk.chunks_exact(4)) {
                *c = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            }
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipLevel {
    resolution: usize,
    data: Vec<Rgba>,
}

impl MipLevel {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn data(&self) -> &[Rgba] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> Rgba {
        self.data[x + self.resolution * (y + self.resolution * z)]
    }

    /// Border texels outside the level read as transparent black.
    #[inline]
    fn fetch(&self, x: i64, y: i64, z: i64) -> DVec4 {
        let n = self.resolution as i64;
        if x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n {
            return DVec4::ZERO;
        }
        let v = self.data[(x + n * (y + n * z)) as usize];
        DVec4::new(v[0] as f64, v[1] as f64, v[2] as f64, v[3] as f64)
    }

    /// Trilinear lookup; `t` in this level's own texel units.
    fn trilinear(&self, t: DVec3) -> DVec4 {
        let u = t - DVec3::splat(0.5);
        let base = u.floor();
        let f = u - base;
        let (x0, y0, z0) = (base.x as i64, base.y as i64, base.z as i64);
        let mut acc = DVec4::ZERO;
        for dz in 0..2 {
            let wz = if dz == 0 { 1.0 - f.z } else { f.z };
            if wz == 0.0 {
                continue;
            }
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - f.y } else { f.y };
                if wy == 0.0 {
                    continue;
                }
                for dx in 0..2 {
                    let wx = if dx == 0 { 1.0 - f.x } else { f.x };
                    if wx == 0.0 {
                        continue;
                    }
                    acc += self.fetch(x0 + dx, y0 + dy, z0 + dz) * (wx * wy * wz);
                }
            }
        }
        acc
    }
}

/// Box-filtered level chain from `N^3` down to `1^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct MipPyramid {
    bounds: Bounds,
    levels: Vec<MipLevel>,
}

pub fn build_mipmaps(grid: &VoxelGrid) -> MipPyramid {
    let mut levels = vec![MipLevel {
        resolution: grid.resolution,
        data: grid.data.clone(),
    }];
    while levels.last().unwrap().resolution > 1 {
        let child = levels.last().unwrap();
        let n = child.resolution / 2;
        let mut data = vec![[0.0f32; 4]; n * n * n];
        data.par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(z, slice)| {
                for y in 0..n {
                    for x in 0..n {
                        let mut sum = [0.0f64; 4];
                        for (dx, dy, dz) in (0..8).map(|i| (i & 1, (i >> 1) & 1, i >> 2)) {
                            let v = child.get(2 * x + dx, 2 * y + dy, 2 * z + dz);
                            for c in 0..4 {
                                sum[c] += v[c] as f64;
                            }
                        }
                        slice[x + n * y] = sum.map(|s| (s / 8.0) as f32);
                    }
                }
            });
        levels.push(MipLevel {
            resolution: n,
            data,
        });
    }
    MipPyramid {
        bounds: grid.bounds,
        levels,
    }
}

impl MipPyramid {
    pub fn levels(&self) -> &[MipLevel] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> Result<&MipLevel, VolumeError> {
        self.levels.get(l).ok_or(VolumeError::LevelOutOfRange {
            level: l,
            levels: self.levels.len(),
        })
    }

    pub fn resolution(&self) -> usize {
        self.levels[0].resolution
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn max_lod(&self) -> f64 {
        (self.levels.len() - 1) as f64
    }

    pub fn voxel_size(&self) -> f64 {
        self.bounds.size() / self.resolution() as f64
    }

    pub fn world_to_texel(&self, p: DVec3) -> DVec3 {
        (p - self.bounds.min()) / self.bounds.size() * self.resolution() as f64
    }

    /// Quadrilinear sample: trilinear inside the two levels bracketing `lod`,
    /// blended by its fractional part. `lod` is clamped to `[0, max_lod]`.
    pub fn sample_lod(&self, texel: DVec3, lod: f64) -> DVec4 {
        let lod = if lod.is_nan() {
            0.0
        } else {
            lod.clamp(0.0, self.max_lod())
        };
        let lo = lod.floor() as usize;
        let frac = lod - lo as f64;
        let a = self.sample_level(texel, lo);
        if frac == 0.0 {
            return a;
        }
        let b = self.sample_level(texel, lo + 1);
        a + (b - a) * frac
    }

    pub fn sample_world(&self, p: DVec3, lod: f64) -> DVec4 {
        self.sample_lod(self.world_to_texel(p), lod)
    }

    fn sample_level(&self, texel: DVec3, level: usize) -> DVec4 {
        let scale = 1.0 / (1u64 << level) as f64;
        self.levels[level].trilinear(texel * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelCube {
    pub center: DVec3,
    pub size: f64,
    pub rgba: Rgba,
}

/// One cube per voxel with non-zero alpha at level `lod`.
pub fn export_visualization(
    pyramid: &MipPyramid,
    lod: usize,
) -> Result<Vec<VoxelCube>, VolumeError> {
    let level = pyramid.level(lod)?;
    let n = level.resolution;
    let size = pyramid.bounds.size() / n as f64;
    let min = pyramid.bounds.min();
    let mut out = Vec::new();
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let rgba = level.get(x, y, z);
                if rgba[3] > 0.0 {
                    let center = min + (DVec3::new(x as f64, y as f64, z as f64) + 0.5) * size;
                    out.push(VoxelCube { center, size, rgba });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_bounds() -> Bounds {
        Bounds::new(DVec3::ZERO, 1.0).unwrap()
    }

    fn random_grid(n: usize, seed: u64) -> VoxelGrid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut g = VoxelGrid::new(n, unit_bounds()).unwrap();
        for v in g.data_mut() {
            *v = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        }
        g
    }

    #[test]
    fn clear_zeroes_and_is_idempotent() {
        let mut g = random_grid(4, 1);
        g.clear();
        let once = g.clone();
        g.clear();
        assert_eq!(g, once);
        assert!(g.data().iter().all(|v| *v == [0.0; 4]));
        let p = build_mipmaps(&g);
        assert_eq!(p.sample_lod(DVec3::new(1.3, 2.2, 0.4), 0.0), DVec4::ZERO);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(
            VoxelGrid::new(12, unit_bounds()),
            Err(VolumeError::NotPowerOfTwo(12))
        ));
    }

    #[test]
    fn uniform_grid_stays_uniform() {
        let mut g = VoxelGrid::new(16, unit_bounds()).unwrap();
        g.data_mut().fill([1.0, 0.0, 0.0, 1.0]);
        let p = build_mipmaps(&g);
        assert_eq!(p.levels().len(), 5);
        for l in p.levels() {
            assert!(l.data().iter().all(|v| *v == [1.0, 0.0, 0.0, 1.0]));
        }
    }

    #[test]
    fn half_filled_two_cube_averages() {
        let mut g = VoxelGrid::new(2, unit_bounds()).unwrap();
        for (i, v) in g.data_mut().iter_mut().enumerate() {
            if i % 2 == 0 {
                *v = [1.0; 4];
            }
        }
        let p = build_mipmaps(&g);
        assert_eq!(p.levels()[1].get(0, 0, 0), [0.5; 4]);
    }

    #[test]
    fn top_level_is_global_mean() {
        let g = random_grid(8, 2);
        let p = build_mipmaps(&g);
        let mut mean = [0.0f64; 4];
        for v in g.data() {
            for c in 0..4 {
                mean[c] += v[c] as f64 / 512.0;
            }
        }
        let top = p.levels()[3].get(0, 0, 0);
        for c in 0..4 {
            assert!((top[c] as f64 - mean[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn world_to_texel_examples() {
        let g = VoxelGrid::new(32, Bounds::new(DVec3::new(1.0, 2.0, 3.0), 4.0).unwrap()).unwrap();
        let b = *g.bounds();
        assert!(g.world_to_texel(b.min()).length() < 1e-12);
        assert!((g.world_to_texel(b.center) - DVec3::splat(16.0)).length() < 1e-12);
        assert!((g.world_to_texel(b.max()) - DVec3::splat(32.0)).length() < 1e-12);
    }

    #[test]
    fn exact_voxel_center_returns_stored_value() {
        let g = random_grid(8, 3);
        let p = build_mipmaps(&g);
        let v = p.sample_lod(DVec3::new(3.5, 1.5, 6.5), 0.0);
        let want = g.get(3, 1, 6);
        for c in 0..4 {
            assert_eq!(v[c], want[c] as f64);
        }
    }

    #[test]
    fn half_lod_blends_levels() {
        let g = random_grid(8, 4);
        let p = build_mipmaps(&g);
        let t = DVec3::new(2.7, 4.1, 5.3);
        let (a, b) = (p.sample_lod(t, 0.0), p.sample_lod(t, 1.0));
        assert!((p.sample_lod(t, 0.5) - (a + b) * 0.5).abs().max_element() < 1e-12);
    }

    #[test]
    fn lod_is_clamped() {
        let g = random_grid(8, 5);
        let p = build_mipmaps(&g);
        let t = DVec3::splat(4.0);
        assert_eq!(p.sample_lod(t, -3.0), p.sample_lod(t, 0.0));
        assert_eq!(p.sample_lod(t, 99.0), p.sample_lod(t, 3.0));
    }

    #[test]
    fn integer_lod_at_level_centers_reproduces_storage() {
        let g = random_grid(16, 6);
        let p = build_mipmaps(&g);
        for l in 0..p.levels().len() {
            let n = 16 >> l;
            let s = (1 << l) as f64;
            for (x, y, z) in [(0, 0, 0), (n - 1, n / 2, 0), (n / 3, n - 1, n - 1)] {
                let t = (DVec3::new(x as f64, y as f64, z as f64) + 0.5) * s;
                let got = p.sample_lod(t, l as f64);
                let want = p.levels()[l].get(x, y, z);
                for c in 0..4 {
                    assert_eq!(got[c], want[c] as f64);
                }
            }
        }
    }

    #[test]
    fn export_lists_solid_voxels() {
        let mut g = VoxelGrid::new(16, unit_bounds()).unwrap();
        assert!(export_visualization(&build_mipmaps(&g), 0)
            .unwrap()
            .is_empty());
        g.set(3, 4, 5, [0.2, 0.4, 0.6, 1.0]);
        let p = build_mipmaps(&g);
        let cubes = export_visualization(&p, 0).unwrap();
        assert_eq!(cubes.len(), 1);
        let e = 2.0 / 16.0;
        assert!(
            (cubes[0].center - (DVec3::splat(-1.0) + DVec3::new(3.5, 4.5, 5.5) * e)).length()
                < 1e-12
        );
        assert_eq!(cubes[0].size, e);
        assert_eq!(export_visualization(&p, 2).unwrap()[0].size, 4.0 * e);
        assert!(export_visualization(&p, 5).is_err());
        let mut rnd = random_grid(8, 7);
        rnd.data_mut()[5][3] = 0.0;
        let solid = rnd.data().iter().filter(|v| v[3] > 0.0).count();
        assert_eq!(
            export_visualization(&build_mipmaps(&rnd), 0).unwrap().len(),
            solid
        );
    }

    #[test]
    fn dump_round_trip_and_header() {
        let g = random_grid(4, 8);
        let mut bytes = Vec::new();
        g.dump(&mut bytes).unwrap();
        assert!(bytes.starts_with(b"VXG1 4\n"));
        assert_eq!(bytes.len(), 7 + 64 * 16);
        // x-fastest: the second record is voxel (1,0,0)
        assert_eq!(&bytes[7 + 16..7 + 20], &g.get(1, 0, 0)[0].to_le_bytes());
        let back = VoxelGrid::load(bytes.as_slice(), unit_bounds()).unwrap();
        assert_eq!(back, g);
        assert!(VoxelGrid::load(&b"VXG1 4\n\0\0"[..], unit_bounds()).is_err());
    }

    #[test]
    fn voxel_of_texel_clamps_max_face() {
        let g = VoxelGrid::new(16, unit_bounds()).unwrap();
        assert_eq!(g.voxel_of_texel(DVec3::splat(16.0), 1e-6), Some([15; 3]));
        assert_eq!(
            g.voxel_of_texel(DVec3::new(-1e-9, 0.0, 3.2), 1e-6),
            Some([0, 0, 3])
        );
        assert_eq!(g.voxel_of_texel(DVec3::new(-0.5, 0.0, 0.0), 1e-6), None);
    }

    proptest! {
        #[test]
        fn pyramid_conserves_mean(seed in 0u64..1000) {
            let g = random_grid(16, seed);
            let p = build_mipmaps(&g);
            let mean = |d: &[Rgba], c: usize| d.iter().map(|v| v[c] as f64).sum::<f64>() / d.len() as f64;
            for l in p.levels() {
                for c in 0..4 {
                    prop_assert!((mean(l.data(), c) - mean(g.data(), c)).abs() < 1e-5);
                }
            }
        }

        #[test]
        fn sampling_is_continuous(
            t in prop::array::uniform3(-1.0f64..17.0),
            d in prop::array::uniform3(-1.0f64..1.0),
            lod in 0.0f64..4.0,
        ) {
            let g = random_grid(16, 99);
            let p = build_mipmaps(&g);
            let t = DVec3::from(t);
            let delta = DVec3::from(d).normalize_or_zero() * 1e-4;
            let diff = (p.sample_lod(t, lod) - p.sample_lod(t + delta, lod)).abs().max_element();
            prop_assert!(diff < 1e-2);
        }
    }
}
