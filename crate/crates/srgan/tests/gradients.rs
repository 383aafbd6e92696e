use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ranksr_nn::check::{central_difference, relative_error, spread};
use ranksr_nn::{he_init, Module, Sequential, Tensor};
use ranksr_ranker::{Arch, RankerConfig};
use ranksr_srgan::losses::{adversarial_g_grad, mse_loss, perceptual_loss_grad, rank_content_grad};
use ranksr_srgan::{
    Discriminator, DiscriminatorConfig, ExtractorConfig, FeatureExtractor, Generator,
    GeneratorConfig, Monotone, Tap,
};

const TOL: f64 = 1e-4;

fn random(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor<f64> {
    Tensor::from_vec(
        n,
        c,
        h,
        w,
        (0..n * c * h * w)
            .map(|_| rng.random_range(0.05..0.95))
            .collect(),
    )
}

fn tiny_generator() -> Generator<f64> {
    let mut g = Generator::new(GeneratorConfig::new(1, 4), 11);
    // larger weights so every path carries signal
    he_init(&mut g, 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(5));
    g
}

fn params(g: &Generator<f64>) -> Vec<f64> {
    let mut v = Vec::new();
    g.visit("", &mut |_, p| v.extend(&p.value));
    v
}

fn set_params(g: &mut Generator<f64>, v: &[f64]) {
    let mut at = 0;
    g.visit_mut("", &mut |_, p| {
        let len = p.len();
        p.value.copy_from_slice(&v[at..at + len]);
        at += len;
    });
}

fn grads(g: &Generator<f64>) -> Vec<f64> {
    let mut v = Vec::new();
    g.visit("", &mut |_, p| v.extend(&p.grad));
    v
}

/// Analytic vs central-difference gradients of `loss(G(x))` with respect to
/// sampled generator parameters and input pixels.
fn check(mut loss: impl FnMut(&Tensor<f64>) -> (f64, Tensor<f64>)) -> (f64, f64) {
    let mut g = tiny_generator();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&mut rng, 2, 3, 8, 8);

    let sr = g.forward(x.clone(), true);
    let (_, dsr) = loss(&sr);
    g.zero_grad();
    let dx = g.backward(dsr);
    let analytic = grads(&g);

    let mut theta = params(&g);
    let idx = spread(theta.len(), 60);
    let mut g2 = g.clone();
    let fd = central_difference(&mut theta, &idx, 1e-6, |v| {
        set_params(&mut g2, v);
        loss(&g2.infer(x.clone())).0
    });
    let a: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
    let param_err = relative_error(&a, &fd);

    let mut xs = x.data.clone();
    let xi = spread(xs.len(), 40);
    let fdx = central_difference(&mut xs, &xi, 1e-6, |v| {
        loss(&g.infer(Tensor::from_vec(2, 3, 8, 8, v.to_vec()))).0
    });
    let ax: Vec<f64> = xi.iter().map(|&i| dx.data[i]).collect();
    (param_err, relative_error(&ax, &fdx))
}

#[test]
fn mse_gradient() {
    let hr = random(&mut ChaCha8Rng::seed_from_u64(9), 2, 3, 32, 32);
    let (p, x) = check(|sr| mse_loss(sr, &hr));
    assert!(p < TOL && x < TOL, "param {p:e} input {x:e}");
}

#[test]
fn perceptual_gradient_both_taps() {
    let hr = random(&mut ChaCha8Rng::seed_from_u64(9), 2, 3, 32, 32);
    for tap in [Tap::Low, Tap::High] {
        for pre_activation in [false, true] {
            let cfg = ExtractorConfig {
                tap,
                pre_activation,
                width_divisor: 16,
                seed: 4,
                weights: None,
            };
            let mut ex = FeatureExtractor::<f64>::new(cfg).unwrap();
            let (p, x) = check(|sr| perceptual_loss_grad(&mut ex, sr, &hr));
            assert!(
                p < TOL && x < TOL,
                "{tap:?} pre {pre_activation}: param {p:e} input {x:e}"
            );
        }
    }
}

#[test]
fn adversarial_generator_gradient() {
    let mut d = Discriminator::<f64>::new(DiscriminatorConfig::new(2), 6);
    let (p, x) = check(|sr| adversarial_g_grad(&mut d, sr, false));
    assert!(p < TOL && x < TOL, "param {p:e} input {x:e}");
}

fn toy_ranker(seed: u64) -> Sequential<f64> {
    let mut net = RankerConfig::new(Arch::Vgg8, 2).build::<f64>();
    he_init(&mut net, 0.2, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    net.freeze();
    net
}

#[test]
fn rank_content_gradient() {
    let (mut r1, mut r2) = (toy_ranker(1), toy_ranker(2));
    for f in [Monotone::Sigmoid, Monotone::Exp, Monotone::Identity] {
        let (p, x) = check(|sr| rank_content_grad(&mut [(&mut r1, 0.7), (&mut r2, 0.3)], sr, f));
        assert!(p < TOL && x < TOL, "{f}: param {p:e} input {x:e}");
    }
}
