use crate::layers::{GlobalAvgPool, LeakyRelu, Linear, MaxPool2, PixelShuffle};
use crate::module::{join, Module, Param};
use crate::{BatchNorm2d, Conv2d, Float, Tensor};

#[derive(Debug, Clone)]
pub enum Layer<F> {
    Conv(Conv2d<F>),
    Norm(BatchNorm2d<F>),
    Act(LeakyRelu),
    Linear(Linear<F>),
    Gap(GlobalAvgPool),
    MaxPool(MaxPool2),
    Shuffle(PixelShuffle),
}

impl<F: Float> Layer<F> {
    fn module(&self) -> &dyn Module<F> {
        match self {
            Layer::Conv(m) => m,
            Layer::Norm(m) => m,
            Layer::Act(m) => m,
            Layer::Linear(m) => m,
            Layer::Gap(m) => m,
            Layer::MaxPool(m) => m,
            Layer::Shuffle(m) => m,
        }
    }

    fn module_mut(&mut self) -> &mut dyn Module<F> {
        match self {
            Layer::Conv(m) => m,
            Layer::Norm(m) => m,
            Layer::Act(m) => m,
            Layer::Linear(m) => m,
            Layer::Gap(m) => m,
            Layer::MaxPool(m) => m,
            Layer::Shuffle(m) => m,
        }
    }
}

/// Layers applied in order; parameters are named `<index>.<field>`.
#[derive(Debug, Clone, Default)]
pub struct Sequential<F> {
    pub layers: Vec<Layer<F>>,
}

impl<F: Float> Sequential<F> {
    pub fn new() -> Self {
        Self { layers: Vec::new() }
    }

    pub fn push(&mut self, layer: Layer<F>) -> &mut Self {
        self.layers.push(layer);
        self
    }

    pub fn conv(
        &mut self,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> &mut Self {
        self.push(Layer::Conv(Conv2d::new(in_c, out_c, k, stride, pad, true)))
    }

    pub fn norm(&mut self, c: usize) -> &mut Self {
        self.push(Layer::Norm(BatchNorm2d::new(c)))
    }

    pub fn lrelu(&mut self, slope: f64) -> &mut Self {
        self.push(Layer::Act(LeakyRelu::new(slope)))
    }

    pub fn linear(&mut self, in_f: usize, out_f: usize) -> &mut Self {
        self.push(Layer::Linear(Linear::new(in_f, out_f)))
    }

    pub fn gap(&mut self) -> &mut Self {
        self.push(Layer::Gap(GlobalAvgPool::default()))
    }

    pub fn maxpool(&mut self) -> &mut Self {
        self.push(Layer::MaxPool(MaxPool2::default()))
    }

    pub fn shuffle(&mut self, r: usize) -> &mut Self {
        self.push(Layer::Shuffle(PixelShuffle { r }))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Runs layers `[0, end)` in inference mode.
    pub fn infer_prefix(&self, x: Tensor<F>, end: usize) -> Tensor<F> {
        self.layers[..end]
            .iter()
            .fold(x, |t, l| l.module().infer(t))
    }

    /// Runs layers `[0, end)` recording for a later [`Sequential::backward_prefix`].
    pub fn forward_prefix(&mut self, x: Tensor<F>, end: usize, train: bool) -> Tensor<F> {
        self.layers[..end]
            .iter_mut()
            .fold(x, |t, l| l.module_mut().forward(t, train))
    }

    pub fn backward_prefix(&mut self, dy: Tensor<F>, end: usize) -> Tensor<F> {
        self.layers[..end]
            .iter_mut()
            .rev()
            .fold(dy, |d, l| l.module_mut().backward(d))
    }
}

impl<F: Float> Module<F> for Sequential<F> {
    fn forward(&mut self, x: Tensor<F>, train: bool) -> Tensor<F> {
        let n = self.layers.len();
        self.forward_prefix(x, n, train)
    }

    fn infer(&self, x: Tensor<F>) -> Tensor<F> {
        self.infer_prefix(x, self.layers.len())
    }

    fn backward(&mut self, dy: Tensor<F>) -> Tensor<F> {
        let n = self.layers.len();
        self.backward_prefix(dy, n)
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.module_mut().visit_mut(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.module().visit(&join(prefix, &i.to_string()), f);
        }
    }
}
