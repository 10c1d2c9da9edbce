//! im2col convolution with circular padding along width and zero padding
//! along height.

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvShape {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    k: usize,
    stride: usize,
    ho: usize,
    wo: usize,
}

impl ConvShape {
    pub(crate) fn new(x: &[usize], w: &[usize], stride: usize) -> Self {
        let (h, wd) = (x[2], x[3]);
        Self {
            n: x[0],
            c: x[1],
            h,
            w: wd,
            o: w[0],
            k: w[2],
            stride,
            ho: (h - 1) / stride + 1,
            wo: (wd - 1) / stride + 1,
        }
    }

    pub(crate) fn output_shape(&self) -> Vec<usize> {
        vec![self.n, self.o, self.ho, self.wo]
    }

    fn patch(&self) -> usize {
        self.c * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }
}

/// Unfolds one `C×H×W` sample into a `(C·k·k) × (Ho·Wo)` matrix.
fn im2col<T: Scalar>(x: &[T], s: &ConvShape, cols: &mut [T]) {
    let pad = (s.k / 2) as isize;
    let np = s.positions();
    for ci in 0..s.c {
        let plane = &x[ci * s.h * s.w..(ci + 1) * s.h * s.w];
        for ky in 0..s.k {
            for kx in 0..s.k {
                let row = (ci * s.k + ky) * s.k + kx;
                let dst = &mut cols[row * np..(row + 1) * np];
                for oy in 0..s.ho {
                    let iy = (oy * s.stride + ky) as isize - pad;
                    let line = &mut dst[oy * s.wo..(oy + 1) * s.wo];
                    if iy < 0 || iy >= s.h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * s.w..(iy as usize + 1) * s.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = ((ox * s.stride + kx) as isize - pad).rem_euclid(s.w as isize);
                        *v = src[ix as usize];
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back onto one sample.
fn col2im<T: Scalar>(cols: &[T], s: &ConvShape, dx: &mut [T]) {
    let pad = (s.k / 2) as isize;
    let np = s.positions();
    for ci in 0..s.c {
        let plane = &mut dx[ci * s.h * s.w..(ci + 1) * s.h * s.w];
        for ky in 0..s.k {
            for kx in 0..s.k {
                let row = (ci * s.k + ky) * s.k + kx;
                let src = &cols[row * np..(row + 1) * np];
                for oy in 0..s.ho {
                    let iy = (oy * s.stride + ky) as isize - pad;
                    if iy < 0 || iy >= s.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * s.w..(iy as usize + 1) * s.w];
                    for ox in 0..s.wo {
                        let ix = ((ox * s.stride + kx) as isize - pad).rem_euclid(s.w as isize);
                        dst[ix as usize] += src[oy * s.wo + ox];
                    }
                }
            }
        }
    }
}

pub(crate) fn forward<T: Scalar>(x: &[T], w: &[T], b: &[T], s: &ConvShape) -> Vec<T> {
    let (np, patch) = (s.positions(), s.patch());
    let mut out = vec![T::zero(); s.n * s.o * np];
    let mut cols = vec![T::zero(); patch * np];
    for n in 0..s.n {
        im2col(
            &x[n * s.c * s.h * s.w..(n + 1) * s.c * s.h * s.w],
            s,
            &mut cols,
        );
        let y = &mut out[n * s.o * np..(n + 1) * s.o * np];
        for (o, row) in y.chunks_exact_mut(np).enumerate() {
            row.iter_mut().for_each(|v| *v = b[o]);
        }
        T::gemm(s.o, patch, np, w, false, &cols, false, T::one(), y);
    }
    out
}

pub(crate) struct ConvGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Option<Vec<T>>,
    pub db: Vec<T>,
}

pub(crate) fn backward<T: Scalar>(
    x: &[T],
    w: &[T],
    dy: &[T],
    s: &ConvShape,
    want_dx: bool,
    want_dw: bool,
) -> ConvGrads<T> {
    let (np, patch) = (s.positions(), s.patch());
    let sample = s.c * s.h * s.w;
    let mut dx = want_dx.then(|| vec![T::zero(); s.n * sample]);
    let mut dw = want_dw.then(|| vec![T::zero(); s.o * patch]);
    let mut db = vec![T::zero(); s.o];
    let mut cols = vec![T::zero(); patch * np];
    for n in 0..s.n {
        let g = &dy[n * s.o * np..(n + 1) * s.o * np];
        for (o, row) in g.chunks_exact(np).enumerate() {
            db[o] += row.iter().copied().sum::<T>();
        }
        if let Some(dw) = dw.as_mut() {
            im2col(&x[n * sample..(n + 1) * sample], s, &mut cols);
            T::gemm(s.o, np, patch, g, false, &cols, true, T::one(), dw);
        }
        if let Some(dx) = dx.as_mut() {
            T::gemm(patch, s.o, np, w, true, g, false, T::zero(), &mut cols);
            col2im(&cols, s, &mut dx[n * sample..(n + 1) * sample]);
        }
    }
    ConvGrads { dx, dw, db }
}
