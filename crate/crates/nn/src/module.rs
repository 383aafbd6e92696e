use crate::{Float, Tensor};

/// A named parameter or persistent buffer with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub shape: Vec<usize>,
    pub value: Vec<F>,
    pub grad: Vec<F>,
    /// Frozen parameters receive no gradient.
    pub frozen: bool,
    /// Buffers (running statistics) are persisted but never optimized.
    pub buffer: bool,
}

impl<F: Float> Param<F> {
    pub fn new(shape: Vec<usize>, value: Vec<F>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), value.len(), "param shape");
        let grad = vec![F::zero(); value.len()];
        Self {
            shape,
            value,
            grad,
            frozen: false,
            buffer: false,
        }
    }

    pub fn filled(shape: Vec<usize>, v: F) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![v; n])
    }

    pub fn buffer(shape: Vec<usize>, value: Vec<F>) -> Self {
        let mut p = Self::new(shape, value);
        p.grad = Vec::new();
        p.buffer = true;
        p.frozen = true;
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = F::zero());
    }

    pub fn trains(&self) -> bool {
        !self.frozen && !self.buffer
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// A differentiable block. `forward` records what `backward` needs;
/// `infer` is the cache-free evaluation-mode path.
pub trait Module<F: Float> {
    fn forward(&mut self, x: Tensor<F>, train: bool) -> Tensor<F>;

    fn infer(&self, x: Tensor<F>) -> Tensor<F>;

    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F>;

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>));

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>));

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, p| p.zero_grad());
    }

    fn freeze(&mut self) {
        self.visit_mut("", &mut |_, p| {
            p.frozen = true;
            p.grad = Vec::new();
        });
    }

    /// Number of trainable scalars (buffers excluded).
    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| {
            if !p.buffer {
                n += p.len()
            }
        });
        n
    }
}
