//! Line-wise passes over x-fastest 3D grids.

use crate::par;

/// Applies `f(input_line, output_line)` to every line along `axis` and
/// returns the assembled output. Lines along x are contiguous; y lines are
/// gathered per z-plane; z lines are handled by swapping the y and z axes
/// around a y pass.
pub(crate) fn map_lines<T, F>(src: &[T], dims: [usize; 3], axis: usize, f: F) -> Vec<T>
where
    T: Copy + Send + Sync,
    F: Fn(&[T], &mut [T]) + Sync + Send,
{
    let [nx, ny, nz] = dims;
    debug_assert_eq!(src.len(), nx * ny * nz);
    match axis {
        0 => {
            let plane = nx * ny;
            let mut dst = src.to_vec();
            par::for_each_chunk_mut(&mut dst, plane, |z, out| {
                let base = &src[z * plane..(z + 1) * plane];
                for (line, row) in base.chunks(nx).zip(out.chunks_mut(nx)) {
                    f(line, row);
                }
            });
            dst
        }
        1 => {
            let plane = nx * ny;
            let mut dst = src.to_vec();
            par::for_each_chunk_mut(&mut dst, plane, |z, out| {
                let base = &src[z * plane..(z + 1) * plane];
                let mut column = Vec::with_capacity(ny);
                let mut result = vec![base[0]; ny];
                for x in 0..nx {
                    column.clear();
                    column.extend((0..ny).map(|y| base[x + nx * y]));
                    f(&column, &mut result);
                    for (y, item) in result.iter().enumerate() {
                        out[x + nx * y] = *item;
                    }
                }
            });
            dst
        }
        2 => {
            let swapped = swap_yz(src, dims);
            let done = map_lines(&swapped, [nx, nz, ny], 1, f);
            swap_yz(&done, [nx, nz, ny])
        }
        _ => panic!("axis {axis} out of range"),
    }
}

/// Reorders `(x, y, z)` storage into `(x, z, y)` storage.
fn swap_yz<T: Copy + Send + Sync>(src: &[T], dims: [usize; 3]) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let mut dst = src.to_vec();
    // output plane y holds rows (x, z) for z in 0..nz
    par::for_each_chunk_mut(&mut dst, nx * nz, |y, out| {
        for (z, row) in out.chunks_mut(nx).enumerate() {
            let start = nx * (y + ny * z);
            row.copy_from_slice(&src[start..start + nx]);
        }
    });
    dst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_visit_the_right_voxels() {
        let dims = [3, 4, 5];
        let src: Vec<usize> = (0..60).collect();
        for axis in 0..3 {
            let stride = [1, 3, 12][axis];
            // each output becomes the first index of its line
            let out = map_lines(&src, dims, axis, |line, out| {
                for (i, v) in line.iter().enumerate() {
                    assert_eq!(*v, line[0] + i * stride);
                }
                out.fill(line[0]);
            });
            for (i, &first) in out.iter().enumerate() {
                let [x, y, z] = [i % 3, (i / 3) % 4, i / 12];
                let coord = [x, y, z];
                assert_eq!(first, i - coord[axis] * stride);
            }
        }
    }
}
