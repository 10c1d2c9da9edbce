use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::Float;

/// Element type of a [`Graph`](super::Graph).
///
/// Training runs in `f32`; gradient checks instantiate the same code at `f64`
/// so finite differences are not swamped by rounding.
pub trait Scalar:
    Float + Default + Debug + Sum + AddAssign + MulAssign + Send + Sync + 'static
{
    /// `c = a·b + beta·c` for row-major `c` of shape `m×n`.
    ///
    /// `a` is `m×k` row-major, or `k×m` when `a_t`; `b` is `k×n`, or `n×k`
    /// when `b_t`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_t: bool,
        b: &[Self],
        b_t: bool,
        beta: Self,
        c: &mut [Self],
    );

    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite cast")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("finite cast")
    }
}

fn strides(rows: usize, cols: usize, transposed: bool) -> (isize, isize) {
    // Element (i, j) of the logical rows×cols operand.
    if transposed {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_t: bool,
                b: &[Self],
                b_t: bool,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(
                    a.len() >= m * k && b.len() >= k * n && c.len() >= m * n,
                    "gemm operand too short"
                );
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = strides(m, k, a_t);
                let (rsb, csb) = strides(k, n, b_t);
                // SAFETY: lengths are checked above and every stride pair
                // addresses elements inside the corresponding slice.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);
