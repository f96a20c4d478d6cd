use super::{check_labels, LogitField, LossConfig, ProbField, CR_DELTA};
use crate::error::Result;
use crate::morphology::{sliding_arg_extremum, Max, Min};
use crate::par;
use crate::volume::LabelVolume;

/// Max-shifted softmax over classes at every voxel.
pub fn softmax(logits: &LogitField) -> ProbField {
    softmax_with_lse(logits).0
}

/// Softmax plus the per-voxel log-sum-exp of the logits.
pub(crate) fn softmax_with_lse(logits: &LogitField) -> (ProbField, Vec<f64>) {
    let n = logits.num_voxels();
    let c_count = logits.num_classes();
    let z = logits.data();
    let mut shift = z[..n].to_vec();
    for c in 1..c_count {
        for (m, &zc) in shift.iter_mut().zip(logits.class(c)) {
            *m = m.max(zc);
        }
    }
    let mut data = vec![0.0; z.len()];
    for c in 0..c_count {
        let zc = logits.class(c);
        par::for_each_chunk_mut(&mut data[c * n..(c + 1) * n], par::REDUCE_CHUNK, |k, out| {
            let base = k * par::REDUCE_CHUNK;
            for (j, e) in out.iter_mut().enumerate() {
                *e = (zc[base + j] - shift[base + j]).exp();
            }
        });
    }
    let mut norm = data[..n].to_vec();
    for c in 1..c_count {
        for (s, &e) in norm.iter_mut().zip(&data[c * n..(c + 1) * n]) {
            *s += e;
        }
    }
    for c in 0..c_count {
        for (e, &s) in data[c * n..(c + 1) * n].iter_mut().zip(&norm) {
            *e /= s;
        }
    }
    let lse = shift.iter().zip(&norm).map(|(&m, &s)| m + s.ln()).collect();
    (ProbField::from_parts_unchecked(*logits.geometry(), c_count, data), lse)
}

/// Pulls a probability-space gradient back through the softmax Jacobian:
/// `dz_c = p_c * (dp_c - sum_k p_k dp_k)`.
pub fn softmax_backward(p: &ProbField, grad_p: &[f64]) -> Vec<f64> {
    let n = p.num_voxels();
    let c_count = p.num_classes();
    let probs = p.data();
    assert_eq!(grad_p.len(), probs.len());
    let dot: Vec<f64> = par::map_indices(n, |v| {
        (0..c_count).map(|c| probs[c * n + v] * grad_p[c * n + v]).sum()
    });
    let mut out = vec![0.0; probs.len()];
    par::update_indexed(&mut out, |i, g| *g = probs[i] * (grad_p[i] - dot[i % n]));
    out
}

/// Per-class Dice gradient constants: `dL/dp_c` is `on` where the label is
/// `c` and `off` elsewhere. Index 0 (background) is unused.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct DiceSlope {
    pub on: f64,
    pub off: f64,
}

pub(crate) fn dice_parts(p: &ProbField, y: &LabelVolume, cfg: &LossConfig) -> (f64, Vec<DiceSlope>) {
    let n = p.num_voxels();
    let c_count = p.num_classes();
    let labels = y.data();
    let eps = cfg.dice_eps;
    let weight = 1.0 / (c_count - 1) as f64;
    let mut slopes = vec![DiceSlope::default(); c_count];
    let mut score_sum = 0.0;
    for (c, slope) in slopes.iter_mut().enumerate().skip(1) {
        let pc = p.class(c);
        let [intersection, p_sum, y_sum] = par::chunked_sums(n, |v| {
            let hit = labels[v] as usize == c;
            [if hit { pc[v] } else { 0.0 }, pc[v], if hit { 1.0 } else { 0.0 }]
        });
        let num = 2.0 * intersection + eps;
        let den = p_sum + y_sum + eps;
        score_sum += num / den;
        let den2 = den * den;
        *slope = DiceSlope {
            on: -weight * (2.0 * den - num) / den2,
            off: weight * num / den2,
        };
    }
    (1.0 - weight * score_sum, slopes)
}

/// Soft Dice over foreground classes `1..C`, averaged:
/// `1 - mean_c (2 I_c + eps) / (P_c + Y_c + eps)` with `I_c = sum p*y`,
/// `P_c = sum p`, `Y_c = sum y`. Returns the loss and `dL/dp`.
pub fn dice_loss(p: &ProbField, y: &LabelVolume, cfg: &LossConfig) -> Result<(f64, Vec<f64>)> {
    check_labels(p.geometry(), p.num_classes(), y)?;
    let n = p.num_voxels();
    let labels = y.data();
    let (loss, slopes) = dice_parts(p, y, cfg);
    let mut grad = vec![0.0; p.data().len()];
    for (c, s) in slopes.iter().enumerate().skip(1) {
        for (g, &l) in grad[c * n..(c + 1) * n].iter_mut().zip(labels) {
            *g = if l as usize == c { s.on } else { s.off };
        }
    }
    Ok((loss, grad))
}

/// Mean voxelwise cross-entropy of the softmax, via log-sum-exp. Returns the
/// loss and `dL/dz = (softmax - onehot) / N`.
pub fn cross_entropy_loss(logits: &LogitField, y: &LabelVolume) -> Result<(f64, Vec<f64>)> {
    check_labels(logits.geometry(), logits.num_classes(), y)?;
    let (p, lse) = softmax_with_lse(logits);
    let n = logits.num_voxels();
    let labels = y.data();
    let inv_n = 1.0 / n as f64;
    let mut grad = p.data().to_vec();
    for (v, &l) in labels.iter().enumerate() {
        grad[l as usize * n + v] -= 1.0;
    }
    grad.iter_mut().for_each(|g| *g *= inv_n);
    Ok((cross_entropy_value(logits, &lse, y), grad))
}

pub(crate) fn cross_entropy_value(logits: &LogitField, lse: &[f64], y: &LabelVolume) -> f64 {
    let n = logits.num_voxels();
    let z = logits.data();
    let labels = y.data();
    par::chunked_sum(n, |v| lse[v] - z[labels[v] as usize * n + v]) / n as f64
}

/// Flat indices of the maximum and minimum of `p[cr_class]` in every window.
pub fn cr_window_selection(p: &ProbField, cfg: &LossConfig) -> (Vec<usize>, Vec<usize>) {
    let pt = p.class(cfg.cr_class);
    let dims = p.geometry().dims();
    (
        sliding_arg_extremum::<f64, Max>(pt, dims, cfg.radius()),
        sliding_arg_extremum::<f64, Min>(pt, dims, cfg.radius()),
    )
}

/// CR value and its gradient restricted to the `cr_class` channel.
pub(crate) fn cr_parts(p: &ProbField, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let n = p.num_voxels();
    let pt = p.class(cfg.cr_class);
    let (arg_hi, arg_lo) = cr_window_selection(p, cfg);
    let contour: Vec<f64> = arg_hi.iter().zip(&arg_lo).map(|(&h, &l)| pt[h] - pt[l]).collect();
    let norm = par::chunked_sum(n, |v| contour[v] * contour[v]).sqrt();
    let scale = 1.0 / norm.max(CR_DELTA);
    let mut gt = vec![0.0; n];
    for v in 0..n {
        let w = contour[v] * scale;
        gt[arg_hi[v]] += w;
        gt[arg_lo[v]] -= w;
    }
    (norm, gt)
}

/// Contour regularization `||max_W(p_t) - min_W(p_t)||_2` over all voxels.
///
/// The gradient sends `+g_v / L` to each window's argmax voxel and `-g_v / L`
/// to its argmin voxel (`L` floored at [`CR_DELTA`]); classes other than
/// `cr_class` get zero.
pub fn cr_loss(p: &ProbField, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let n = p.num_voxels();
    let (norm, gt) = cr_parts(p, cfg);
    let mut grad = vec![0.0; p.data().len()];
    grad[cfg.cr_class * n..(cfg.cr_class + 1) * n].copy_from_slice(&gt);
    (norm, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VolumeGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(dims: [usize; 3]) -> VolumeGeometry {
        VolumeGeometry::isotropic(dims).unwrap()
    }

    fn random_logits(dims: [usize; 3], c: usize, seed: u64) -> LogitField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = geom(dims);
        LogitField::new(g, c, (0..g.len() * c).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
    }

    fn random_labels(dims: [usize; 3], c: u8, seed: u64) -> LabelVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = geom(dims);
        LabelVolume::new(g, c, (0..g.len()).map(|_| rng.random_range(0..c)).collect()).unwrap()
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let z = LogitField::zeros(geom([3, 3, 3]), 5).unwrap();
        assert!(softmax(&z).data().iter().all(|&p| p == 0.2));
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let g = geom([1, 1, 1]);
        let p = softmax(&LogitField::new(g, 2, vec![1000.0, 0.0]).unwrap());
        assert_eq!(p.data(), &[1.0, 0.0]);
        let p = softmax(&LogitField::new(g, 2, vec![-1000.0, 1000.0]).unwrap());
        assert_eq!(p.data(), &[0.0, 1.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = random_logits([4, 5, 6], 5, 1);
        let p = softmax(&z);
        let n = p.num_voxels();
        for v in 0..n {
            let s: f64 = (0..5).map(|c| p.data()[c * n + v]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dice_of_exact_one_hot_is_near_zero() {
        let y = random_labels([5, 5, 5], 3, 2);
        let p = ProbField::one_hot(&y, 3).unwrap();
        let cfg = LossConfig { num_classes: 3, ..LossConfig::default() };
        let (loss, _) = dice_loss(&p, &y, &cfg).unwrap();
        assert!(loss.abs() <= 1e-4, "{loss}");
    }

    #[test]
    fn dice_uniform_half_closed_form() {
        // C = 2, p = 0.5 everywhere, k foreground voxels out of N.
        let g = geom([4, 4, 2]);
        let n = g.len();
        let k = 5;
        let labels = (0..n).map(|v| u8::from(v < k)).collect();
        let y = LabelVolume::new(g, 2, labels).unwrap();
        let p = ProbField::new(g, 2, vec![0.5; 2 * n]).unwrap();
        let cfg = LossConfig { num_classes: 2, cr_class: 1, ..LossConfig::default() };
        let (loss, _) = dice_loss(&p, &y, &cfg).unwrap();
        let eps = cfg.dice_eps;
        let expected = 1.0 - (2.0 * 0.5 * k as f64 + eps) / (0.5 * n as f64 + k as f64 + eps);
        assert!((loss - expected).abs() <= 1e-15 * expected.abs().max(1.0));
    }

    #[test]
    fn cross_entropy_of_zero_logits_is_ln_c() {
        let y = random_labels([3, 4, 5], 5, 3);
        let z = LogitField::zeros(*y.geometry(), 5).unwrap();
        let (loss, _) = cross_entropy_loss(&z, &y).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cross_entropy_vanishes_on_confident_truth() {
        let y = random_labels([3, 3, 3], 4, 4);
        let z = LogitField::from_labels(&y, 4, 50.0).unwrap();
        let (loss, grad) = cross_entropy_loss(&z, &y).unwrap();
        assert!(loss < 1e-20);
        assert!(grad.iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn geometry_mismatch_is_an_error() {
        let y = random_labels([3, 3, 3], 3, 1);
        let z = random_logits([3, 3, 4], 3, 1);
        assert!(cross_entropy_loss(&z, &y).is_err());
        let cfg = LossConfig { num_classes: 3, ..LossConfig::default() };
        assert!(dice_loss(&softmax(&z), &y, &cfg).is_err());
    }

    #[test]
    fn cr_of_constant_field_is_zero_with_zero_gradient() {
        let z = LogitField::zeros(geom([4, 4, 4]), 5).unwrap();
        let (loss, grad) = cr_loss(&softmax(&z), &LossConfig::default());
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn cr_gradient_touches_only_cr_class_and_sums_to_zero() {
        let z = random_logits([6, 5, 4], 3, 5);
        let cfg = LossConfig { num_classes: 3, cr_class: 1, ..LossConfig::default() };
        let p = softmax(&z);
        let (_, grad) = cr_loss(&p, &cfg);
        let n = p.num_voxels();
        assert!(grad[..n].iter().chain(&grad[2 * n..]).all(|&g| g == 0.0));
        let mass: f64 = grad[n..2 * n].iter().sum();
        assert!(mass.abs() < 1e-12, "{mass}");
    }
}
