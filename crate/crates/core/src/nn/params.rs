use super::{Conv2d, Real};

/// Named parameter tensors of a model, visited in a fixed order.
///
/// The visit order defines the layout used by the optimizer, checkpoints and
/// gradient checks, so implementations must never reorder it.
pub trait Parameters<R: Real> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[R]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [R]));

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, p| n += p.len());
        n
    }

    fn flatten(&self) -> Vec<R> {
        let mut out = Vec::new();
        self.visit(&mut |_, _, p| out.extend_from_slice(p));
        out
    }

    fn fill_zero(&mut self) {
        self.visit_mut(&mut |_, p| p.fill(R::zero()));
    }

    /// `self += other`, element-wise over identically shaped models.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut offset = 0;
        self.visit_mut(&mut |_, p| {
            let n = p.len();
            for (a, &b) in p.iter_mut().zip(&flat[offset..offset + n]) {
                *a += b;
            }
            offset += n;
        });
    }

    fn scale(&mut self, s: R) {
        self.visit_mut(&mut |_, p| p.iter_mut().for_each(|v| *v *= s));
    }
}

pub(crate) fn visit_conv<R: Real>(
    prefix: &str,
    conv: &Conv2d<R>,
    f: &mut dyn FnMut(&str, &[usize], &[R]),
) {
    let shape = [conv.out_channels, conv.in_channels, conv.kernel, conv.kernel];
    f(&format!("{prefix}.weight"), &shape, &conv.weight);
    f(&format!("{prefix}.bias"), &[conv.out_channels], &conv.bias);
}

pub(crate) fn visit_conv_mut<R: Real>(
    prefix: &str,
    conv: &mut Conv2d<R>,
    f: &mut dyn FnMut(&str, &mut [R]),
) {
    f(&format!("{prefix}.weight"), &mut conv.weight);
    f(&format!("{prefix}.bias"), &mut conv.bias);
}
