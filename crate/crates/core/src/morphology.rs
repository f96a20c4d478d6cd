//! Windowed extrema over cubic windows and the contour operator.
//!
//! A window of radius `d` around voxel `v` covers `v ± d` along every axis,
//! clipped to the volume. Clipping is equivalent to padding with `-inf` for
//! the maximum and `+inf` for the minimum.
//!
//! Two implementations are provided. The naive one scans every window. The
//! separable one runs a 1D sliding extremum along x, then y, then z. Wide
//! windows use a monotonic queue, costing O(N) regardless of `d`; windows of
//! radius up to 2 are scanned directly, which is faster at that size. Selection never does arithmetic, so both
//! return bit-identical values, and both break ties on the first occurrence in
//! ascending `(z, y, x)` order, so the arg-extremum indices agree as well.

use crate::{grid, par};
use crate::volume::{ScalarVolume, VolumeGeometry};

/// Half-width of a cubic window; the kernel extent per axis is `2d + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct WindowRadius(pub usize);

impl WindowRadius {
    pub fn new(d: usize) -> Self {
        Self(d)
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn extent(self) -> usize {
        2 * self.0 + 1
    }
}

impl From<usize> for WindowRadius {
    fn from(d: usize) -> Self {
        Self(d)
    }
}

/// Element type the kernels accept.
pub trait Sample: Copy + PartialOrd + Send + Sync {}
impl Sample for f32 {}
impl Sample for f64 {}

/// Selection rule: `better(a, b)` is true when `a` strictly beats `b`.
pub trait Extremum: Send + Sync {
    fn better<T: PartialOrd>(a: T, b: T) -> bool;
}

pub struct Max;
pub struct Min;

impl Extremum for Max {
    #[inline]
    fn better<T: PartialOrd>(a: T, b: T) -> bool {
        a > b
    }
}

impl Extremum for Min {
    #[inline]
    fn better<T: PartialOrd>(a: T, b: T) -> bool {
        a < b
    }
}

/// Flat voxel indices sharing a volume's geometry (e.g. arg-extremum maps).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVolume {
    geometry: VolumeGeometry,
    data: Vec<usize>,
}

impl IndexVolume {
    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }

    pub fn into_data(self) -> Vec<usize> {
        self.data
    }
}

trait Item: Copy + Send + Sync {
    type V: Sample;
    fn value(&self) -> Self::V;
}

#[derive(Clone, Copy)]
struct Plain<T>(T);

#[derive(Clone, Copy)]
struct Tagged<T> {
    value: T,
    index: usize,
}

impl<T: Sample> Item for Plain<T> {
    type V = T;
    #[inline]
    fn value(&self) -> T {
        self.0
    }
}

impl<T: Sample> Item for Tagged<T> {
    type V = T;
    #[inline]
    fn value(&self) -> T {
        self.value
    }
}

/// Monotonic index queue backed by a flat buffer; each index enters once per
/// line, so the buffer never wraps.
struct LineQueue {
    buf: Vec<usize>,
    head: usize,
}

impl LineQueue {
    fn new() -> Self {
        Self { buf: Vec::new(), head: 0 }
    }
}

/// 1D sliding extremum with clipped windows. Equal values never evict an
/// earlier entry, so the queue front is the first occurrence of the extremum.
fn slide_line<I: Item, E: Extremum>(line: &[I], d: usize, out: &mut [I], queue: &mut LineQueue) {
    let n = line.len();
    queue.buf.clear();
    queue.head = 0;
    let mut next = 0;
    for i in 0..n {
        let hi = (i + d).min(n - 1);
        while next <= hi {
            let v = line[next].value();
            while queue.buf.len() > queue.head && E::better(v, line[queue.buf[queue.buf.len() - 1]].value()) {
                queue.buf.pop();
            }
            queue.buf.push(next);
            next += 1;
        }
        let lo = i.saturating_sub(d);
        while queue.buf[queue.head] < lo {
            queue.head += 1;
        }
        out[i] = line[queue.buf[queue.head]];
    }
}

/// Direct scan of each clipped window; cheaper than the queue for short windows.
fn scan_line<I: Item, E: Extremum>(line: &[I], d: usize, out: &mut [I]) {
    let n = line.len();
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(d);
        let hi = (i + d + 1).min(n);
        let mut best = line[lo];
        for item in &line[lo + 1..hi] {
            if E::better(item.value(), best.value()) {
                best = *item;
            }
        }
        *o = best;
    }
}

/// Window radius up to which lines are scanned directly.
const SCAN_MAX_RADIUS: usize = 2;

/// Direct scan along y (`axis == 1`) or z (`axis == 2`), one contiguous x-row
/// at a time: each output row starts as the first row of its window and takes
/// any later row's element that is strictly better.
fn scan_rows<I: Item, E: Extremum>(src: &[I], dims: [usize; 3], axis: usize, d: usize) -> Vec<I> {
    let [nx, ny, _] = dims;
    let stride = if axis == 1 { nx } else { nx * ny };
    let extent = dims[axis];
    let mut dst = src.to_vec();
    par::for_each_chunk_mut(&mut dst, nx * ny, |z, plane| {
        for (y, out) in plane.chunks_mut(nx).enumerate() {
            let start = nx * (y + ny * z);
            let at = if axis == 1 { y } else { z };
            let lo = at.saturating_sub(d);
            let hi = (at + d + 1).min(extent);
            let row = |k: usize| {
                let s = start - at * stride + k * stride;
                &src[s..s + nx]
            };
            out.copy_from_slice(row(lo));
            for k in lo + 1..hi {
                for (o, item) in out.iter_mut().zip(row(k)) {
                    if E::better(item.value(), o.value()) {
                        *o = *item;
                    }
                }
            }
        }
    });
    dst
}

fn separable<I: Item, E: Extremum>(items: Vec<I>, dims: [usize; 3], d: usize) -> Vec<I> {
    if d == 0 {
        return items;
    }
    if d <= SCAN_MAX_RADIUS {
        let along_x = grid::map_lines(&items, dims, 0, |line, out| scan_line::<I, E>(line, d, out));
        let along_y = scan_rows::<I, E>(&along_x, dims, 1, d);
        return scan_rows::<I, E>(&along_y, dims, 2, d);
    }
    (0..3).fold(items, |field, axis| {
        grid::map_lines(&field, dims, axis, |line, out| {
            slide_line::<I, E>(line, d, out, &mut LineQueue::new());
        })
    })
}

/// Separable sliding extremum of a flat x-fastest field.
pub fn sliding_extremum<T: Sample, E: Extremum>(data: &[T], dims: [usize; 3], d: WindowRadius) -> Vec<T> {
    assert_eq!(data.len(), dims.iter().product::<usize>());
    let items = data.iter().map(|&v| Plain(v)).collect();
    separable::<Plain<T>, E>(items, dims, d.get())
        .into_iter()
        .map(|p| p.0)
        .collect()
}

/// Separable arg-extremum: flat index of the selected voxel of every window.
pub fn sliding_arg_extremum<T: Sample, E: Extremum>(
    data: &[T],
    dims: [usize; 3],
    d: WindowRadius,
) -> Vec<usize> {
    assert_eq!(data.len(), dims.iter().product::<usize>());
    let items = data
        .iter()
        .enumerate()
        .map(|(index, &value)| Tagged { value, index })
        .collect();
    separable::<Tagged<T>, E>(items, dims, d.get())
        .into_iter()
        .map(|t| t.index)
        .collect()
}

/// Brute-force arg-extremum; scans each window in ascending `(z, y, x)` order.
pub fn naive_arg_extremum<T: Sample, E: Extremum>(data: &[T], dims: [usize; 3], d: WindowRadius) -> Vec<usize> {
    let [nx, ny, nz] = dims;
    assert_eq!(data.len(), nx * ny * nz);
    let d = d.get();
    let span = |c: usize, n: usize| c.saturating_sub(d)..(c + d + 1).min(n);
    par::map_indices(data.len(), |v| {
        let (x, y, z) = (v % nx, (v / nx) % ny, v / (nx * ny));
        let mut best = usize::MAX;
        for zz in span(z, nz) {
            for yy in span(y, ny) {
                for xx in span(x, nx) {
                    let i = xx + nx * (yy + ny * zz);
                    if best == usize::MAX || E::better(data[i], data[best]) {
                        best = i;
                    }
                }
            }
        }
        best
    })
}

fn gather(vol: &ScalarVolume, indices: &[usize]) -> ScalarVolume {
    let data = indices.iter().map(|&i| vol.data()[i]).collect();
    ScalarVolume::from_parts_unchecked(*vol.geometry(), data)
}

/// Max pooling with kernel `2d+1`, stride 1, by exhaustive window scan.
pub fn maxpool_naive(vol: &ScalarVolume, d: WindowRadius) -> ScalarVolume {
    gather(vol, &naive_arg_extremum::<f32, Max>(vol.data(), vol.dims(), d))
}

pub fn minpool_naive(vol: &ScalarVolume, d: WindowRadius) -> ScalarVolume {
    gather(vol, &naive_arg_extremum::<f32, Min>(vol.data(), vol.dims(), d))
}

/// Max pooling with kernel `2d+1`, stride 1, via three 1D passes.
pub fn maxpool_separable(vol: &ScalarVolume, d: WindowRadius) -> ScalarVolume {
    let data = sliding_extremum::<f32, Max>(vol.data(), vol.dims(), d);
    ScalarVolume::from_parts_unchecked(*vol.geometry(), data)
}

pub fn minpool_separable(vol: &ScalarVolume, d: WindowRadius) -> ScalarVolume {
    let data = sliding_extremum::<f32, Min>(vol.data(), vol.dims(), d);
    ScalarVolume::from_parts_unchecked(*vol.geometry(), data)
}

/// Max pooling plus the flat index of each window's maximum (first occurrence
/// in `(z, y, x)` order on ties).
pub fn maxpool_argmax(vol: &ScalarVolume, d: WindowRadius) -> (ScalarVolume, IndexVolume) {
    let indices = sliding_arg_extremum::<f32, Max>(vol.data(), vol.dims(), d);
    let pooled = gather(vol, &indices);
    (
        pooled,
        IndexVolume {
            geometry: *vol.geometry(),
            data: indices,
        },
    )
}

pub fn minpool_argmin(vol: &ScalarVolume, d: WindowRadius) -> (ScalarVolume, IndexVolume) {
    let indices = sliding_arg_extremum::<f32, Min>(vol.data(), vol.dims(), d);
    let pooled = gather(vol, &indices);
    (
        pooled,
        IndexVolume {
            geometry: *vol.geometry(),
            data: indices,
        },
    )
}

/// Largest variation inside each window: `max_W(p) - min_W(p)`, which is
/// `M_d(p) + M_d(-p)` written with a min-pool.
pub fn contour(p: &ScalarVolume, d: WindowRadius) -> ScalarVolume {
    let hi = sliding_extremum::<f32, Max>(p.data(), p.dims(), d);
    let lo = sliding_extremum::<f32, Min>(p.data(), p.dims(), d);
    let data = hi.iter().zip(&lo).map(|(a, b)| a - b).collect();
    ScalarVolume::from_parts_unchecked(*p.geometry(), data)
}

/// Contour map of a flat f64 field.
pub fn contour_f64(p: &[f64], dims: [usize; 3], d: WindowRadius) -> Vec<f64> {
    let hi = sliding_extremum::<f64, Max>(p, dims, d);
    let lo = sliding_extremum::<f64, Min>(p, dims, d);
    hi.iter().zip(&lo).map(|(a, b)| a - b).collect()
}
