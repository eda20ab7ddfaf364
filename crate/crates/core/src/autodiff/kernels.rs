//! Raw numeric kernels behind the graph operations. Everything here works on
//! flat slices with explicit extents; shape checking happens in the graph.

/// `c = alpha * a * b + beta * c` for row/column-strided `f32` matrices.
///
/// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`; each operand is described
/// by its row stride and column stride in elements.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f32,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len(), "gemm: a too short");
        assert!(last(k, n, rsb, csb) < b.len(), "gemm: b too short");
    }
    assert!(last(m, n, rsc, csc) < c.len(), "gemm: c too short");
    // SAFETY: the asserts above bound every strided access inside the slices,
    // and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Geometry of a 2-D convolution over one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn new(c: usize, h: usize, w: usize, kh: usize, kw: usize, stride: usize, pad: usize) -> Option<Self> {
        if stride == 0 || h + 2 * pad < kh || w + 2 * pad < kw {
            return None;
        }
        Some(Self {
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            ho: (h + 2 * pad - kh) / stride + 1,
            wo: (w + 2 * pad - kw) / stride + 1,
        })
    }

    pub fn col_rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    pub fn col_cols(&self) -> usize {
        self.ho * self.wo
    }
}

/// Unfold one `C x H x W` sample into a `(C*kh*kw) x (Ho*Wo)` matrix.
pub fn im2col(x: &[f32], g: &ConvGeom, col: &mut [f32]) {
    let hw = g.col_cols();
    for ci in 0..g.c {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst = &mut col[row * hw..(row + 1) * hw];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let out = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    if g.stride == 1 {
                        // Contiguous run with zero borders.
                        let (lo, hi, start) = valid_run(g.wo, g.w, kj, g.pad);
                        out[..lo].fill(0.0);
                        out[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                        out[hi..].fill(0.0);
                    } else {
                        for (ox, o) in out.iter_mut().enumerate() {
                            let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                            *o = if ix >= 0 && ix < g.w as isize {
                                src[ix as usize]
                            } else {
                                0.0
                            };
                        }
                    }
                }
            }
        }
    }
}

/// For a stride-1 kernel column `kj`, the output columns `lo..hi` whose input
/// column `ox + kj - pad` lies inside `0..w`, plus the input column of `lo`.
fn valid_run(wo: usize, w: usize, kj: usize, pad: usize) -> (usize, usize, usize) {
    let lo = pad.saturating_sub(kj).min(wo);
    let hi = (w + pad).saturating_sub(kj).min(wo);
    if hi <= lo {
        return (lo, lo, 0);
    }
    (lo, hi, lo + kj - pad)
}

/// Adjoint of [`im2col`]: scatter-add a column matrix back onto a sample.
pub fn col2im_add(col: &[f32], g: &ConvGeom, x: &mut [f32]) {
    let hw = g.col_cols();
    for ci in 0..g.c {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &col[row * hw..(row + 1) * hw];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let row_src = &src[oy * g.wo..(oy + 1) * g.wo];
                    if g.stride == 1 {
                        let (lo, hi, start) = valid_run(g.wo, g.w, kj, g.pad);
                        for (d, v) in dst[start..start + hi - lo].iter_mut().zip(&row_src[lo..hi]) {
                            *d += v;
                        }
                        continue;
                    }
                    for (ox, v) in row_src.iter().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Batched convolution forward. Returns the output and, when `keep_cols`,
/// the per-sample im2col buffers for the backward pass.
pub fn conv2d_forward(
    x: &[f32],
    n: usize,
    g: &ConvGeom,
    w: &[f32],
    o: usize,
    b: Option<&[f32]>,
    keep_cols: bool,
) -> (Vec<f32>, Vec<f32>) {
    let rows = g.col_rows();
    let hw = g.col_cols();
    let in_len = g.c * g.h * g.w;
    let mut y = vec![0.0f32; n * o * hw];
    let mut cols = if keep_cols {
        vec![0.0f32; n * rows * hw]
    } else {
        Vec::new()
    };
    let mut scratch = if keep_cols { Vec::new() } else { vec![0.0f32; rows * hw] };
    for s in 0..n {
        let col: &mut [f32] = if keep_cols {
            &mut cols[s * rows * hw..(s + 1) * rows * hw]
        } else {
            &mut scratch
        };
        im2col(&x[s * in_len..(s + 1) * in_len], g, col);
        let ys = &mut y[s * o * hw..(s + 1) * o * hw];
        if let Some(b) = b {
            for (oc, chunk) in ys.chunks_exact_mut(hw).enumerate() {
                chunk.fill(b[oc]);
            }
        }
        gemm(o, rows, hw, 1.0, w, (rows, 1), col, (hw, 1), 1.0, ys, (hw, 1));
    }
    (y, cols)
}

/// Batched convolution backward. Accumulates into `dw`, `db` and `dx` when
/// they are given.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    dy: &[f32],
    n: usize,
    g: &ConvGeom,
    w: &[f32],
    o: usize,
    cols: &[f32],
    mut dw: Option<&mut [f32]>,
    mut db: Option<&mut [f32]>,
    mut dx: Option<&mut [f32]>,
) {
    let rows = g.col_rows();
    let hw = g.col_cols();
    let in_len = g.c * g.h * g.w;
    let mut dcol = if dx.is_some() {
        vec![0.0f32; rows * hw]
    } else {
        Vec::new()
    };
    for s in 0..n {
        let dys = &dy[s * o * hw..(s + 1) * o * hw];
        if let Some(dw) = dw.as_deref_mut() {
            let col = &cols[s * rows * hw..(s + 1) * rows * hw];
            gemm(o, hw, rows, 1.0, dys, (hw, 1), col, (1, hw), 1.0, dw, (rows, 1));
        }
        if let Some(db) = db.as_deref_mut() {
            for (oc, chunk) in dys.chunks_exact(hw).enumerate() {
                db[oc] += chunk.iter().sum::<f32>();
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            gemm(rows, o, hw, 1.0, w, (1, rows), dys, (hw, 1), 0.0, &mut dcol, (hw, 1));
            col2im_add(&dcol, g, &mut dx[s * in_len..(s + 1) * in_len]);
        }
    }
}

/// 2x2 max pooling with stride 2 over `planes` planes of `h x w`.
/// Returns the pooled values and the flat input index of each winner.
pub fn maxpool2x2_forward(x: &[f32], planes: usize, h: usize, w: usize) -> (Vec<f32>, Vec<u32>) {
    let (ho, wo) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(planes * ho * wo);
    let mut idx = Vec::with_capacity(planes * ho * wo);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let i0 = base + 2 * oy * w + 2 * ox;
                // Ties resolve to the first candidate in row-major order.
                let mut best = i0;
                for cand in [i0 + 1, i0 + w, i0 + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                y.push(x[best]);
                idx.push(best as u32);
            }
        }
    }
    (y, idx)
}

/// Nearest-neighbor 2x upsampling over `planes` planes of `h x w`.
pub fn upsample2x_forward(x: &[f32], planes: usize, h: usize, w: usize) -> Vec<f32> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut y = vec![0.0f32; planes * h2 * w2];
    for p in 0..planes {
        for r in 0..h2 {
            for c in 0..w2 {
                y[p * h2 * w2 + r * w2 + c] = x[p * h * w + (r / 2) * w + c / 2];
            }
        }
    }
    y
}

pub fn upsample2x_backward(dy: &[f32], planes: usize, h: usize, w: usize, dx: &mut [f32]) {
    let (h2, w2) = (2 * h, 2 * w);
    for p in 0..planes {
        for r in 0..h2 {
            for c in 0..w2 {
                dx[p * h * w + (r / 2) * w + c / 2] += dy[p * h2 * w2 + r * w2 + c];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_small() {
        // [1 2; 3 4] * [5; 6] = [17; 39]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0];
        let mut c = [0.0; 2];
        gemm(2, 2, 1, 1.0, &a, (2, 1), &b, (1, 1), 0.0, &mut c, (1, 1));
        assert_eq!(c, [17.0, 39.0]);
        // Transposed view of a: [1 3; 2 4] * [5; 6] = [23; 34]
        gemm(2, 2, 1, 1.0, &a, (1, 2), &b, (1, 1), 0.0, &mut c, (1, 1));
        assert_eq!(c, [23.0, 34.0]);
    }

    fn naive_im2col(x: &[f32], g: &ConvGeom) -> Vec<f32> {
        let mut col = vec![0.0; g.col_rows() * g.col_cols()];
        for ci in 0..g.c {
            for ki in 0..g.kh {
                for kj in 0..g.kw {
                    let row = (ci * g.kh + ki) * g.kw + kj;
                    for oy in 0..g.ho {
                        for ox in 0..g.wo {
                            let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                            let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                            if iy >= 0 && iy < g.h as isize && ix >= 0 && ix < g.w as isize {
                                col[row * g.col_cols() + oy * g.wo + ox] =
                                    x[(ci * g.h + iy as usize) * g.w + ix as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    const GEOMS: [(usize, usize, usize, usize, usize, usize, usize); 5] = [
        (2, 5, 4, 3, 3, 2, 1),
        (2, 5, 4, 3, 3, 1, 1),
        (3, 6, 7, 5, 5, 1, 2),
        (1, 2, 2, 1, 1, 1, 3),
        (1, 3, 2, 3, 3, 1, 4),
    ];

    #[test]
    fn im2col_matches_direct_indexing() {
        for (c, h, w, kh, kw, s, p) in GEOMS {
            let g = ConvGeom::new(c, h, w, kh, kw, s, p).unwrap();
            let x: Vec<f32> = (0..c * h * w).map(|i| i as f32 + 1.0).collect();
            let mut col = vec![f32::NAN; g.col_rows() * g.col_cols()];
            im2col(&x, &g, &mut col);
            assert_eq!(col, naive_im2col(&x, &g), "{g:?}");
        }
    }

    #[test]
    fn im2col_col2im_adjoint() {
        // <im2col(x), c> == <x, col2im(c)> for arbitrary x, c.
        for (c, h, w, kh, kw, s, p) in GEOMS {
            let g = ConvGeom::new(c, h, w, kh, kw, s, p).unwrap();
            let x: Vec<f32> = (0..c * h * w).map(|i| (i as f32 * 0.37).sin()).collect();
            let cm: Vec<f32> = (0..g.col_rows() * g.col_cols())
                .map(|i| (i as f32 * 0.11).cos())
                .collect();
            let mut col = vec![0.0; cm.len()];
            im2col(&x, &g, &mut col);
            let lhs: f64 = col.iter().zip(&cm).map(|(a, b)| (*a as f64) * (*b as f64)).sum();
            let mut back = vec![0.0; x.len()];
            col2im_add(&cm, &g, &mut back);
            let rhs: f64 = x.iter().zip(&back).map(|(a, b)| (*a as f64) * (*b as f64)).sum();
            assert!((lhs - rhs).abs() < 1e-4, "{g:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn pool_picks_max() {
        let x = [1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0];
        let (y, idx) = maxpool2x2_forward(&x, 1, 2, 4);
        assert_eq!(y, vec![5.0, 7.0]);
        assert_eq!(idx, vec![1, 7]);
    }
}
