use std::sync::OnceLock;

use crate::error::{Error, Result};

const LANES: usize = 16;

/// Portable body shared by every kernel. Inputs are stored as `f32`; each
/// difference is taken in `f64`, which is exact for finite `f32` operands of
/// similar magnitude, and accumulated in `f64` across independent lanes.
#[inline(always)]
fn squared_l2_body(p: &[f32], q: &[f32]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let pc = p.chunks_exact(LANES);
    let qc = q.chunks_exact(LANES);
    let (pr, qr) = (pc.remainder(), qc.remainder());
    for (a, b) in pc.zip(qc) {
        for j in 0..LANES {
            let d = a[j] as f64 - b[j] as f64;
            acc[j] += d * d;
        }
    }
    for (j, (a, b)) in pr.iter().zip(qr).enumerate() {
        let d = *a as f64 - *b as f64;
        acc[j] += d * d;
    }
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for j in 0..width {
            acc[j] += acc[j + width];
        }
    }
    acc[0]
}

fn squared_l2_portable(p: &[f32], q: &[f32]) -> f64 {
    squared_l2_body(p, q)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn squared_l2_avx2(p: &[f32], q: &[f32]) -> f64 {
    squared_l2_body(p, q)
}

type Kernel = fn(&[f32], &[f32]) -> f64;

fn select_kernel() -> Kernel {
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were just detected.
            return |p, q| unsafe { squared_l2_avx2(p, q) };
        }
    }
    squared_l2_portable
}

/// Squared Euclidean distance. Every kernel variant performs the same
/// operations in the same order, so results are bitwise identical whichever
/// one the CPU supports.
#[inline]
pub fn squared_l2(p: &[f32], q: &[f32]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    static KERNEL: OnceLock<Kernel> = OnceLock::new();
    (KERNEL.get_or_init(select_kernel))(p, q)
}

/// Euclidean (L2) distance `sqrt(sum((p_i - q_i)^2))`.
pub fn euclidean(p: &[f32], q: &[f32]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok(squared_l2(p, q).sqrt())
}
