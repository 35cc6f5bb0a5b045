use super::Real;

/// Planar channel-major feature map (`C × H × W`), single sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<R> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![R::zero(); channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<R>) -> Self {
        assert_eq!(data.len(), channels * height * width, "tensor shape/data mismatch");
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, c: usize) -> &[R] {
        let p = self.plane_len();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [R] {
        let p = self.plane_len();
        &mut self.data[c * p..(c + 1) * p]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    /// Channel concatenation `[self; other]`.
    pub fn concat(&self, other: &Self) -> Self {
        assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor::from_vec(self.channels + other.channels, self.height, self.width, data)
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Tensor::from_vec(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert!(self.same_shape(other));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn cast<S: Real>(&self) -> Tensor<S> {
        Tensor::from_vec(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|v| S::lit(v.to_f64_lossy())).collect(),
        )
    }
}
