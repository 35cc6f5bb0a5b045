use super::Real;

/// Negative slope used by every leaky rectifier in the toolkit.
pub const LEAKY_SLOPE: f64 = 0.2;

pub fn leaky_relu_inplace<R: Real>(xs: &mut [R]) {
    let slope = R::lit(LEAKY_SLOPE);
    for x in xs {
        if *x < R::zero() {
            *x *= slope;
        }
    }
}

/// Backward through a leaky rectifier given its *output* (which has the same
/// sign as its input). Scales `grad` in place.
pub fn leaky_relu_backward<R: Real>(output: &[R], grad: &mut [R]) {
    let slope = R::lit(LEAKY_SLOPE);
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= R::zero() {
            *g *= slope;
        }
    }
}
